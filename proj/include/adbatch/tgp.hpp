#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "adbatch/design.hpp"
#include "adbatch/fit.hpp"
#include "adbatch/kernel.hpp"
#include "adbatch/rng.hpp"

namespace adbatch {

struct TGPParams {
  double nu;    // degrees of freedom, > 2
  double tau2;  // noise variance
  KernelParams kernel;

  // Variance inflation (nu+1)/(nu-1) shared by the look-ahead formulas.
  double inflation() const { return (nu + 1.0) / (nu - 1.0); }
};

struct LaplaceState {
  Vec mode;       // f-tilde at the design sites
  Vec w;          // diagonal curvature, possibly negative
  bool converged = false;
  int iterations = 0;
};

LaplaceState laplace_mode(const ReplicatedDesign& design, const TGPParams& params);

// Student-t observation-noise GP via Laplace approximation.
class TGPModel {
 public:
  TGPModel(ReplicatedDesign design, TGPParams params);

  const ReplicatedDesign& design() const { return design_; }
  const TGPParams& params() const { return params_; }
  const LaplaceState& laplace() const { return laplace_; }
  long k() const { return design_.k(); }

  std::pair<double, double> posterior(const Vec& x) const;
  void posterior_batch(const Mat& Xstar, Vec& mean, Vec& sd) const;
  double posterior_cov(const Vec& a, const Vec& b) const;

  double lookahead_sd_new(const Vec& x, long r) const;
  double lookahead_var_at_test_new(const Vec& x_new, long dr, const Vec& x_star) const;

  // Batch-allocation look-ahead with frozen residuals and updated counts.
  Vec lookahead_var_realloc(const std::vector<long>& dr, const Mat& Xstar) const;

  // (K + ((nu+1)/(nu-1)) tau^2 R)^{-1} Kstar^T omega.
  Vec alloc_vector(const Mat& Kstar, const Vec& omega) const;

  TGPModel append_batch(const Vec& x, long r, double ybar, bool* merged = nullptr) const;
  TGPModel add_replicates(long i, long dr, double sum_y) const;

  // Laplace-approximate log marginal likelihood.
  double log_marginal() const;

 private:
  ReplicatedDesign design_;
  TGPParams params_;
  LaplaceState laplace_;
  Mat kmat_;                 // jittered prior covariance at the design
  Eigen::LLT<Mat> llt_k_;    // chol of kmat_
  Eigen::LLT<Mat> llt_kw_;   // chol of kmat_ + diag(1/max(w, floor))
  Vec kinv_mode_;            // K^{-1} f-tilde
};

struct TgpFitResult {
  TGPParams params;
  double loglik = 0.0;
  bool ok = false;
};

// MLE over (lengthscales, signal variance, tau^2, nu).  The nu search scans
// the integer grid 3..30 and then refines continuously in (2, 100].
TgpFitResult fit_tgp(const ReplicatedDesign& design, const FitBounds& bounds,
                     RngStream& rng, const std::optional<TGPParams>& warm = std::nullopt,
                     bool scan_nu_grid = true);

}  // namespace adbatch
