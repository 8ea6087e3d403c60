#pragma once

#include <functional>
#include <optional>

#include "adbatch/gp.hpp"
#include "adbatch/rng.hpp"

namespace adbatch {

// Box bounds for MLE over normalized inputs.
struct FitBounds {
  double ell_lo = 1e-2, ell_hi = 10.0;
  double sv_lo = 1e-4, sv_hi = 1e2;
  double tau2_lo = 1e-6, tau2_hi = 1e2;
};

enum class NoiseFitMode { FixedTau2, FitConstantTau2 };

struct FitResult {
  KernelParams kernel;
  NoiseModel noise;
  double loglik = 0.0;
  bool ok = false;  // false: every start failed; caller keeps previous values
};

// Multi-start derivative-based MLE of the squared-exponential hyperparameters
// (and tau^2 when requested) on log-parameters.  A warm start, when provided,
// is always among the candidates, so the returned likelihood never falls
// below the likelihood at the warm start.
FitResult fit_hyperparameters(const ReplicatedDesign& design, NoiseFitMode mode,
                              double tau2, const FitBounds& bounds, int n_starts,
                              RngStream& rng,
                              const std::optional<KernelParams>& warm = std::nullopt);

// Generic box-constrained maximizers used by the fitters.
using GradFn = std::function<double(const Vec&, Vec&)>;  // returns f, fills grad
Vec lbfgs_box_maximize(const GradFn& fg, Vec x0, const Vec& lo, const Vec& hi,
                       int max_iter = 120, double* best_val = nullptr);

using PlainFn = std::function<double(const Vec&)>;
Vec nelder_mead_maximize(const PlainFn& f, Vec x0, const Vec& lo, const Vec& hi,
                         int max_evals = 400, double* best_val = nullptr);

// Marginal likelihood at log-parameters theta = (log l_1..d, log sv
// [, log tau2]); fills the analytic gradient when requested.
double lml_at_log_params(const ReplicatedDesign& design, NoiseFitMode mode,
                         double tau2, const Vec& theta, Vec* grad = nullptr);

}  // namespace adbatch
