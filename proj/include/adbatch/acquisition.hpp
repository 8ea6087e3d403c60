#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <utility>

#include "adbatch/linalg.hpp"
#include "adbatch/rng.hpp"
#include "adbatch/sampling.hpp"
#include "adbatch/stats.hpp"

namespace adbatch {

// Simulation cost plus quadratic metamodel overhead, in seconds.
struct CostModel {
  double t_sim = 0.01;
  std::array<double, 3> theta = {0.137, 8.15e-4, 1.99e-6};

  double overhead(long n) const {
    const double x = static_cast<double>(n);
    return theta[0] + theta[1] * x + theta[2] * x * x;
  }

  void validate(long n_max) const {
    if (!(t_sim > 0.0)) throw std::invalid_argument("cost: T_sim must be positive");
    for (long n = 0; n <= n_max; n += std::max<long>(1, n_max / 64)) {
      if (!(overhead(n) > 0.0)) {
        throw std::invalid_argument("cost: overhead must stay positive on the operating range");
      }
    }
  }
};

// UCB weight keeping both cUCB terms on a comparable scale.
inline double rho_weight(const Vec& fhat, const Vec& s) {
  const double ms = mean_of(s);
  if (ms <= 0.0) return 1.0;
  return interquartile_range(fhat) / (3.0 * ms);
}

inline double cucb(double fhat, double s, double rho, double mu) {
  return (-std::abs(fhat) + rho * s) * mu;
}

// Local probability of misclassifying the sign of f at x.
inline double local_error(double fhat, double s) {
  if (s <= 0.0) return fhat == 0.0 ? 0.5 : 0.0;
  return norm_cdf(-std::abs(fhat) / s);
}

// Expected drop in local misclassification from a batch with look-ahead sd
// s_next at x.
inline double gsur(double fhat, double s, double s_next, double mu) {
  const double before = local_error(fhat, s);
  const double after = s_next <= 0.0 ? (fhat == 0.0 ? 0.5 : 0.0)
                                     : norm_cdf(-std::abs(fhat) / s_next);
  return (before - after) * mu;
}

// The same quantity in closed form for Gaussian noise with variance tau2.
inline double gsur_numerator_algebraic(double fhat, double s, double tau2, double r) {
  if (s <= 0.0) return 0.0;
  const double z = std::abs(fhat) / s;
  return norm_cdf(-z) - norm_cdf(-z * std::sqrt(r * s * s + tau2) / std::sqrt(tau2));
}

// Information gain per unit cost.
inline double absur_value(double fhat, double s, double s_next, double mu, double r,
                          const CostModel& cost, long n) {
  const double denom = r * cost.t_sim + cost.overhead(n);
  return gsur(fhat, s, s_next, mu) / denom;
}

// Optimization domain: a box plus an optional feasibility mask.
struct Domain {
  Box box;
  std::function<bool(const Vec&)> feasible;  // null: whole box

  bool ok(const Vec& x) const {
    return box.contains(x) && (!feasible || feasible(x));
  }
};

struct AcqOptions {
  int n_candidates = 512;
  int polish_evals = 120;
};

// Quasi-random candidate screen followed by a local polish.  The returned
// value is never below the best screened candidate.
std::pair<Vec, double> optimize_acquisition(const std::function<double(const Vec&)>& crit,
                                            const Domain& dom, const AcqOptions& opt,
                                            RngStream& rng);

// Joint (x, r) optimization for criteria that are cheap in r once the
// posterior at x is known.  r is searched continuously within [r_lo, r_hi]
// and rounded to the nearest integer in range.
struct XrStats {
  double fhat = 0.0;
  double s = 0.0;
  double mu = 1.0;
  double aux = 0.0;  // per-replicate noise variance at x
};

struct XrCriterion {
  // Expensive per-x statistics (posterior evaluation).
  std::function<XrStats(const Vec&)> stats;
  // Criterion value from those statistics; cheap in r.
  std::function<double(const XrStats&, double r)> value;
};

struct XrResult {
  Vec x;
  long r = 0;
  double value = 0.0;
};

XrResult optimize_acquisition_xr(const XrCriterion& crit, const Domain& dom, long r_lo,
                                 long r_hi, const AcqOptions& opt, RngStream& rng);

// Least-squares fit of the quadratic overhead coefficients from measured
// (design size, seconds) samples; optionally reports R^2.
std::array<double, 3> fit_overhead_quadratic(
    const std::vector<std::pair<long, double>>& samples, double* r_squared = nullptr);

}  // namespace adbatch
