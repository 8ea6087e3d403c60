#pragma once

#include <memory>
#include <string>

#include "adbatch/fit.hpp"
#include "adbatch/gp.hpp"
#include "adbatch/tgp.hpp"

namespace adbatch {

struct MetamodelConfig {
  enum class Kind { Gp, Tgp };
  Kind kind = Kind::Gp;
  bool fit_noise = false;  // fit tau^2 as an unknown constant (always on for t-GP)
  double tau2 = 1.0;       // known value, or the initial value when fitted
  int fit_starts = 5;      // multistart count for the initial fit
  int refit_starts = 2;    // starts on refits (warm start included)
  FitBounds bounds;
};

// Driver-facing metamodel surface shared by the Gaussian and Student-t GPs.
class Surrogate {
 public:
  virtual ~Surrogate() = default;

  virtual long k() const = 0;
  virtual const ReplicatedDesign& design() const = 0;
  virtual const KernelParams& kernel_params() const = 0;

  virtual std::pair<double, double> posterior(const Vec& x) const = 0;
  virtual void posterior_batch(const Mat& Xstar, Vec& mean, Vec& sd) const = 0;
  virtual double posterior_cov(const Vec& a, const Vec& b) const = 0;
  // Covariances v(x, xstar_j) for all rows of Xstar.
  virtual Vec posterior_cov_batch(const Mat& Xstar, const Vec& x) const = 0;

  // Per-replicate noise variance entering the look-ahead ratio at x: the
  // one-step-ahead variance after an r-batch is s^2 c/r / (c/r + s^2).
  virtual double noise_c(const Vec& x) const = 0;

  virtual double lookahead_sd_new(const Vec& x, long r) const = 0;
  virtual double lookahead_var_at_test_new(const Vec& x_new, long dr,
                                           const Vec& x_star) const = 0;
  virtual Vec lookahead_var_realloc(const std::vector<long>& dr, const Mat& Xstar) const = 0;

  // Allocation direction (Sigma^{-1} Kstar' omega, or its t-GP analogue).
  virtual Vec alloc_vector(const Mat& Kstar, const Vec& omega) const = 0;
  // Per-site multipliers for the heteroskedastic allocation target.
  virtual Vec alloc_site_scale() const = 0;

  virtual void append_batch(const Vec& x, long r, double ybar) = 0;
  virtual void add_replicates(long i, long dr, double sum_y) = 0;

  virtual void refit(RngStream& rng, bool initial) = 0;
  virtual std::string describe() const = 0;
};

std::unique_ptr<Surrogate> make_surrogate(ReplicatedDesign design,
                                          const MetamodelConfig& config);

}  // namespace adbatch
