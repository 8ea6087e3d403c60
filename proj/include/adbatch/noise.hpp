#pragma once

#include <functional>
#include <stdexcept>
#include <variant>

#include "adbatch/design.hpp"
#include "adbatch/linalg.hpp"

namespace adbatch {

struct Homoskedastic {
  double tau2;
};

// Known input-dependent noise variance tau(x)^2.
struct HeteroskedasticKnown {
  std::function<double(const Vec&)> tau2_at;
};

using NoiseModel = std::variant<Homoskedastic, HeteroskedasticKnown>;

inline double noise_var_at(const NoiseModel& nm, const Vec& x) {
  if (const auto* h = std::get_if<Homoskedastic>(&nm)) {
    return h->tau2;
  }
  const double v = std::get<HeteroskedasticKnown>(nm).tau2_at(x);
  if (!(v > 0.0)) throw std::invalid_argument("noise: tau(x)^2 must be positive");
  return v;
}

inline void validate_noise(const NoiseModel& nm) {
  if (const auto* h = std::get_if<Homoskedastic>(&nm)) {
    if (!(h->tau2 > 0.0)) throw std::invalid_argument("noise: tau^2 must be positive");
  }
}

// Diagonal of the batched-noise matrix: tau(x_i)^2 / r_i.
inline Vec noise_diag(const NoiseModel& nm, const ReplicatedDesign& design) {
  Vec d(design.k());
  for (long i = 0; i < design.k(); ++i) {
    d[i] = noise_var_at(nm, design.inputs.row(i).transpose()) /
           static_cast<double>(design.counts[i]);
  }
  return d;
}

}  // namespace adbatch
