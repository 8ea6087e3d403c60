#pragma once

#include <stdexcept>
#include <vector>

#include "adbatch/linalg.hpp"

namespace adbatch {

// Inputs closer than this (Euclidean, normalized coordinates) are treated as
// the same design site; guards the kernel matrix against near-duplicates.
inline constexpr double kMergeTolerance = 1e-9;

// "Unique-n" training set: k distinct inputs with replicate counts and
// batch-mean outputs.
struct ReplicatedDesign {
  Mat inputs;                // k x d
  std::vector<long> counts;  // r_i >= 1
  Vec means;                 // ybar_i

  long k() const { return inputs.rows(); }
  int dim() const { return static_cast<int>(inputs.cols()); }

  long total_budget() const {
    long n = 0;
    for (long r : counts) n += r;
    return n;
  }

  // Index of an existing input within tol of x, or -1.
  long find(const Vec& x, double tol = kMergeTolerance) const {
    for (long i = 0; i < k(); ++i) {
      if ((inputs.row(i).transpose() - x).norm() < tol) return i;
    }
    return -1;
  }

  void validate() const {
    if (inputs.rows() != static_cast<long>(counts.size()) ||
        inputs.rows() != means.size()) {
      throw std::invalid_argument("design: inconsistent row counts");
    }
    for (long r : counts) {
      if (r < 1) throw std::invalid_argument("design: replicate count < 1");
    }
    for (long i = 0; i < k(); ++i) {
      for (long j = i + 1; j < k(); ++j) {
        if ((inputs.row(i) - inputs.row(j)).norm() < kMergeTolerance) {
          throw std::invalid_argument("design: duplicate inputs within merge tolerance");
        }
      }
    }
  }

  static ReplicatedDesign empty(int d) {
    return ReplicatedDesign{Mat(0, d), {}, Vec(0)};
  }
};

}  // namespace adbatch
