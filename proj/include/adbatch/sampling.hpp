#pragma once

#include <numeric>
#include <vector>

#include "adbatch/linalg.hpp"
#include "adbatch/rng.hpp"

namespace adbatch {

struct Box {
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }
  double volume() const { return (hi - lo).prod(); }
  bool contains(const Vec& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
  Vec clamp(Vec x) const {
    return x.cwiseMax(lo).cwiseMin(hi);
  }
  static Box unit(int d) {
    return Box{Vec::Zero(d), Vec::Ones(d)};
  }
};

// Scrambled Latin hypercube: one point per stratum in every coordinate.
inline Mat latin_hypercube(RngStream& rng, int n, const Box& box) {
  const int d = box.dim();
  Mat pts(n, d);
  std::vector<int> perm(n);
  for (int j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      const int k = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
      std::swap(perm[i], perm[k]);
    }
    for (int i = 0; i < n; ++i) {
      const double u = (perm[i] + rng.uniform()) / n;
      pts(i, j) = box.lo[j] + (box.hi[j] - box.lo[j]) * u;
    }
  }
  return pts;
}

// Halton sequence with a Cranley-Patterson rotation drawn from the stream,
// used for acquisition candidate screens.
inline Mat halton_candidates(RngStream& rng, int n, const Box& box, int skip = 20) {
  static constexpr int primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                   31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
  const int d = box.dim();
  Vec shift(d);
  for (int j = 0; j < d; ++j) shift[j] = rng.uniform();
  Mat pts(n, d);
  for (int j = 0; j < d; ++j) {
    const int base = primes[j % 20];
    for (int i = 0; i < n; ++i) {
      double f = 1.0, u = 0.0;
      int idx = i + skip + 1;
      while (idx > 0) {
        f /= base;
        u += f * (idx % base);
        idx /= base;
      }
      u += shift[j];
      u -= std::floor(u);
      pts(i, j) = box.lo[j] + (box.hi[j] - box.lo[j]) * u;
    }
  }
  return pts;
}

}  // namespace adbatch
