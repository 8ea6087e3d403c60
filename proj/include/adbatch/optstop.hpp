#pragma once

#include <memory>
#include <vector>

#include "adbatch/schemes.hpp"

namespace adbatch {

// Multi-asset geometric Brownian motion on a fixed exercise grid.
struct GBMParams {
  int dim = 0;
  double rate = 0.0;    // per year
  Mat cov;              // d x d, SPD (or zero in degenerate test mode)
  double dt = 0.0;      // years between exercise dates
  double horizon = 0.0; // maturity in years
  Vec z0;

  int n_dates() const { return static_cast<int>(std::llround(horizon / dt)); }
  void validate() const;
  Mat chol() const;  // lower factor of cov
};

struct Payoff {
  enum class Kind { BasketPut, MaxCall };
  Kind kind = Kind::BasketPut;
  double strike = 0.0;
  double rate = 0.0;  // discounting rate

  // Undiscounted exercise value.
  double intrinsic(const Vec& z) const;
  // Discounted payoff e^{-rt} intrinsic(z).
  double operator()(double t, const Vec& z) const {
    return std::exp(-rate * t) * intrinsic(z);
  }
};

// One step of the exact log-normal scheme; w holds d standard normals.
Vec gbm_step(const Vec& z, const GBMParams& params, const Mat& chol_cov, const Vec& w);

// Per-date exercise rule: stop when the fitted timing function is positive,
// the payoff is in the money, and the state lies in the fitted domain.
struct StoppingPolicy {
  struct DateRule {
    std::unique_ptr<Surrogate> surrogate;  // null: never exercise at this date
    Box box;
    long terminal_k = 0;
    double fit_seconds = 0.0;
  };
  GBMParams params;
  Payoff payoff;
  std::vector<DateRule> rules;  // index j-1 for date j*dt, j = 1..n_dates-1

  bool exercise(int date_index, const Vec& z) const;
};

// One noisy draw of the timing function h(t, z) - pathwise continuation,
// following the already-fitted policy at later dates.  Both terms are
// discounted to time zero.
double timing_draw(const StoppingPolicy& policy, int date_index, const Vec& z,
                   const GBMParams& params, const Mat& chol_cov, const Payoff& payoff,
                   RngStream& rng);

// Backward induction over exercise dates; each date's level set is fitted by
// run_scheme on the timing simulator with log-normal weights.
StoppingPolicy fit_policy(const GBMParams& params, const Payoff& payoff,
                          const SchemeConfig& scheme, const MetamodelConfig& metamodel,
                          std::uint64_t seed);

// Out-of-sample policy value over a fresh path database: estimate and
// standard error.
std::pair<double, double> policy_value(const StoppingPolicy& policy, long n_paths,
                                       std::uint64_t seed);

// Plain Monte Carlo of the stop-at-maturity (European) value, for checks.
std::pair<double, double> european_value(const GBMParams& params, const Payoff& payoff,
                                         long n_paths, std::uint64_t seed);

// Benchmark option setups: "amput2d" (2-D basket put) and "maxcall3d".
struct OptstopSetup {
  GBMParams gbm;
  Payoff payoff;
  SchemeConfig scheme;
  MetamodelConfig metamodel;
  long n_paths = 100000;
};
OptstopSetup optstop_preset(const std::string& option_name);

}  // namespace adbatch
