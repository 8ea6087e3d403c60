#pragma once

#include <cmath>
#include <variant>

#include "adbatch/sampling.hpp"

namespace adbatch {

// Lebesgue measure restricted to a box (density 1).
struct UniformOnBox {
  Box box;
};

// Product of independent log-normal marginals; the weighting used for the
// optimal-stopping problems where inputs are asset prices.
struct LogNormalDensity {
  Vec mu_log;  // mean of log x_i
  Vec sd_log;  // sd of log x_i
};

using Measure = std::variant<UniformOnBox, LogNormalDensity>;

inline double measure_density(const Measure& m, const Vec& x) {
  if (std::holds_alternative<UniformOnBox>(m)) return 1.0;
  const auto& ln = std::get<LogNormalDensity>(m);
  double dens = 1.0;
  for (long i = 0; i < x.size(); ++i) {
    if (x[i] <= 0.0) return 0.0;
    const double z = (std::log(x[i]) - ln.mu_log[i]) / ln.sd_log[i];
    dens *= std::exp(-0.5 * z * z) / (x[i] * ln.sd_log[i] * std::sqrt(2.0 * M_PI));
  }
  return dens;
}

}  // namespace adbatch
