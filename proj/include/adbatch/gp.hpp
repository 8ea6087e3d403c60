#pragma once

#include <utility>
#include <vector>

#include "adbatch/design.hpp"
#include "adbatch/kernel.hpp"
#include "adbatch/noise.hpp"

namespace adbatch {

// Gaussian-process regression over a replicated design with cached Cholesky
// factorization of Sigma = K + diag(tau(x_i)^2 / r_i).
//
// Immutable after construction; append/add return new models.
class GPModel {
 public:
  GPModel(ReplicatedDesign design, KernelParams kernel, NoiseModel noise);

  const ReplicatedDesign& design() const { return design_; }
  const KernelParams& kernel() const { return kernel_; }
  const NoiseModel& noise() const { return noise_; }
  long k() const { return design_.k(); }

  // Posterior mean and standard deviation at x.
  std::pair<double, double> posterior(const Vec& x) const;
  void posterior_batch(const Mat& Xstar, Vec& mean, Vec& sd) const;

  // Posterior covariance v(a, b).
  double posterior_cov(const Vec& a, const Vec& b) const;

  // Exact one-step-ahead sd at x after an r-replicate batch at x.
  double lookahead_sd_new(const Vec& x, long r) const;

  // Exact look-ahead variance at x_star after a dr-replicate batch at x_new.
  double lookahead_var_at_test_new(const Vec& x_new, long dr, const Vec& x_star) const;

  // Approximate look-ahead variances at the rows of Xstar after adding
  // dr[i] replicates to design site i (Woodbury with the middle term
  // dropped; upper bound on the exact recompute).
  Vec lookahead_var_realloc(const std::vector<long>& dr, const Mat& Xstar) const;

  // New model with a batch appended.  An input within merge tolerance of an
  // existing site is folded into that site instead; *merged reports it.
  GPModel append_batch(const Vec& x, long r, double ybar, bool* merged = nullptr) const;

  // New model with dr extra replicates at site i whose outputs sum to sum_y.
  GPModel add_replicates(long i, long dr, double sum_y) const;

  double log_marginal() const;

  // tau(x)^2 plus the per-observation jitter actually factored in; the
  // look-ahead formulas use this so they match full recomputation exactly.
  double effective_noise_var(const Vec& x) const;

  // Sigma^{-1} rhs via the cached factorization.
  Vec solve_sigma(const Vec& rhs) const;
  Mat solve_sigma(const Mat& rhs) const;

  const Vec& alpha() const { return alpha_; }
  double jitter_used() const { return jitter_; }

 private:
  void factorize();

  ReplicatedDesign design_;
  KernelParams kernel_;
  NoiseModel noise_;
  Eigen::LLT<Mat> llt_;
  Vec alpha_;
  double jitter_ = 0.0;
};

double log_marginal_likelihood(const ReplicatedDesign& design,
                               const KernelParams& kernel,
                               const NoiseModel& noise);

}  // namespace adbatch
