#include "adbatch/tgp.hpp"

#include <cmath>
#include <stdexcept>

namespace adbatch {

namespace {

constexpr double kWFloor = 1e-10;

void validate_params(const TGPParams& p) {
  if (!(p.nu > 2.0)) throw std::invalid_argument("tgp: nu must exceed 2");
  if (!(p.tau2 > 0.0)) throw std::invalid_argument("tgp: tau^2 must be positive");
  p.kernel.validate();
}

// Per-observation t log-likelihood pieces for the batch mean ybar_i, which
// carries scale tau^2 / r_i.
struct TLik {
  double nu;
  Vec a;  // nu * tau^2 / r_i

  TLik(const ReplicatedDesign& d, const TGPParams& p) : nu(p.nu), a(d.k()) {
    for (long i = 0; i < d.k(); ++i) {
      a[i] = p.nu * p.tau2 / static_cast<double>(d.counts[i]);
    }
  }

  double logp(const Vec& resid) const {
    double acc = 0.0;
    for (long i = 0; i < resid.size(); ++i) {
      acc += -0.5 * (nu + 1.0) * std::log1p(resid[i] * resid[i] / a[i]);
    }
    return acc;
  }

  Vec grad(const Vec& resid) const {
    Vec g(resid.size());
    for (long i = 0; i < resid.size(); ++i) {
      g[i] = (nu + 1.0) * resid[i] / (a[i] + resid[i] * resid[i]);
    }
    return g;
  }

  Vec curvature(const Vec& resid) const {
    Vec w(resid.size());
    for (long i = 0; i < resid.size(); ++i) {
      const double r2 = resid[i] * resid[i];
      const double den = a[i] + r2;
      w[i] = (nu + 1.0) * (a[i] - r2) / (den * den);
    }
    return w;
  }
};

Mat jittered_kernel(const ReplicatedDesign& d, const KernelParams& kp) {
  Mat K = kernel_matrix(d.inputs, kp);
  K.diagonal().array() += 1e-8 * kp.signal_var;
  return K;
}

}  // namespace

LaplaceState laplace_mode(const ReplicatedDesign& design, const TGPParams& params) {
  validate_params(params);
  const long k = design.k();
  LaplaceState state;
  if (k == 0) {
    state.converged = true;
    return state;
  }
  const Mat K = jittered_kernel(design, params.kernel);
  Eigen::LLT<Mat> lltK(K);
  if (lltK.info() != Eigen::Success) {
    throw std::runtime_error("tgp: prior covariance not SPD");
  }
  const TLik lik(design, params);

  Vec f = Vec::Zero(k);
  auto objective = [&](const Vec& fv) {
    const Vec kinv_f = lltK.solve(fv);
    return lik.logp(design.means - fv) - 0.5 * fv.dot(kinv_f);
  };

  double psi = objective(f);
  int iter = 0;
  bool converged = false;
  for (; iter < 100; ++iter) {
    const Vec resid = design.means - f;
    const Vec g = lik.grad(resid);
    const Vec kinv_f = lltK.solve(f);
    const Vec grad_psi = g - kinv_f;
    if (grad_psi.lpNorm<Eigen::Infinity>() < 1e-9) {
      converged = true;
      break;
    }
    // Newton target (K^{-1} + W)^{-1} (W f + g) with floored curvature,
    // computed through B = I + W^{1/2} K W^{1/2}.
    Vec w = lik.curvature(resid).cwiseMax(kWFloor);
    const Vec sw = w.cwiseSqrt();
    Mat B = Mat::Identity(k, k) + sw.asDiagonal() * K * sw.asDiagonal();
    Eigen::LLT<Mat> lltB(B);
    const Vec b = w.cwiseProduct(f) + g;
    const Vec target = K * (b - sw.cwiseProduct(lltB.solve(sw.cwiseProduct(K * b))));

    // Step halving, up to 20 times.
    double step = 1.0;
    bool improved = false;
    for (int h = 0; h < 20; ++h) {
      const Vec trial = f + step * (target - f);
      const double val = objective(trial);
      if (std::isfinite(val) && val >= psi - 1e-14) {
        f = trial;
        psi = val;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  state.mode = f;
  state.w = lik.curvature(design.means - f);
  state.converged = converged;
  state.iterations = iter;
  return state;
}

TGPModel::TGPModel(ReplicatedDesign design, TGPParams params)
    : design_(std::move(design)), params_(std::move(params)) {
  validate_params(params_);
  design_.validate();
  laplace_ = laplace_mode(design_, params_);
  const long k = design_.k();
  if (k == 0) return;
  kmat_ = jittered_kernel(design_, params_.kernel);
  llt_k_.compute(kmat_);
  if (llt_k_.info() != Eigen::Success) {
    throw std::runtime_error("tgp: prior covariance not SPD");
  }
  Mat kw = kmat_;
  kw.diagonal() += laplace_.w.cwiseMax(kWFloor).cwiseInverse();
  llt_kw_.compute(kw);
  if (llt_kw_.info() != Eigen::Success) {
    throw std::runtime_error("tgp: K + W^{-1} not SPD");
  }
  kinv_mode_ = llt_k_.solve(laplace_.mode);
}

std::pair<double, double> TGPModel::posterior(const Vec& x) const {
  if (design_.k() == 0) {
    return {0.0, std::sqrt(params_.kernel.signal_var)};
  }
  const Vec kx = kernel_cross(design_.inputs, x, params_.kernel);
  const double mean = kx.dot(kinv_mode_);
  const Vec wv = llt_kw_.matrixL().solve(kx);
  const double var = std::max(params_.kernel.signal_var - wv.squaredNorm(), 0.0);
  return {mean, std::sqrt(var)};
}

void TGPModel::posterior_batch(const Mat& Xstar, Vec& mean, Vec& sd) const {
  const long m = Xstar.rows();
  mean.resize(m);
  sd.resize(m);
  if (design_.k() == 0) {
    mean.setZero();
    sd.setConstant(std::sqrt(params_.kernel.signal_var));
    return;
  }
  const Mat ks = kernel_cross_matrix(Xstar, design_.inputs, params_.kernel);
  mean = ks * kinv_mode_;
  Mat wv = llt_kw_.matrixL().solve(ks.transpose());
  for (long j = 0; j < m; ++j) {
    sd[j] = std::sqrt(std::max(params_.kernel.signal_var - wv.col(j).squaredNorm(), 0.0));
  }
}

double TGPModel::posterior_cov(const Vec& a, const Vec& b) const {
  const double prior = kernel_eval(a, b, params_.kernel);
  if (design_.k() == 0) return prior;
  const Vec ka = kernel_cross(design_.inputs, a, params_.kernel);
  const Vec kb = kernel_cross(design_.inputs, b, params_.kernel);
  const Vec wa = llt_kw_.matrixL().solve(ka);
  const Vec wb = llt_kw_.matrixL().solve(kb);
  return prior - wa.dot(wb);
}

double TGPModel::lookahead_sd_new(const Vec& x, long r) const {
  if (r < 1) throw std::invalid_argument("tgp lookahead: r must be >= 1");
  const auto [mean, sd] = posterior(x);
  (void)mean;
  const double s2 = sd * sd;
  const double c = params_.inflation() * params_.tau2 / static_cast<double>(r);
  return std::sqrt(std::max(s2 * c / (c + s2), 0.0));
}

double TGPModel::lookahead_var_at_test_new(const Vec& x_new, long dr,
                                           const Vec& x_star) const {
  if (dr < 1) throw std::invalid_argument("tgp lookahead: dr must be >= 1");
  const auto [ms, ss] = posterior(x_star);
  (void)ms;
  const auto [mn, sn] = posterior(x_new);
  (void)mn;
  const double v = posterior_cov(x_star, x_new);
  const double c = params_.inflation() * params_.tau2 / static_cast<double>(dr);
  return std::max(ss * ss - v * v / (c + sn * sn), 0.0);
}

Vec TGPModel::lookahead_var_realloc(const std::vector<long>& dr, const Mat& Xstar) const {
  const long k = design_.k();
  if (static_cast<long>(dr.size()) != k) {
    throw std::invalid_argument("tgp lookahead_var_realloc: dr size mismatch");
  }
  // W-hat with frozen residuals and counts r_i + dr_i.
  Vec what(k);
  for (long i = 0; i < k; ++i) {
    if (dr[i] < 0) throw std::invalid_argument("tgp lookahead_var_realloc: negative dr");
    const double resid = design_.means[i] - laplace_.mode[i];
    const double r2 = resid * resid;
    const double a = params_.nu * params_.tau2 /
                     static_cast<double>(design_.counts[i] + dr[i]);
    what[i] = (params_.nu + 1.0) * (a - r2) / ((a + r2) * (a + r2));
  }
  Mat kw = kmat_;
  kw.diagonal() += what.cwiseMax(kWFloor).cwiseInverse();
  Eigen::LLT<Mat> llt(kw);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("tgp: look-ahead K + W^{-1} not SPD");
  }
  const Mat ks = kernel_cross_matrix(Xstar, design_.inputs, params_.kernel);
  const Mat wv = llt.matrixL().solve(ks.transpose());
  Vec out(Xstar.rows());
  for (long j = 0; j < Xstar.rows(); ++j) {
    out[j] = std::max(params_.kernel.signal_var - wv.col(j).squaredNorm(), 0.0);
  }
  return out;
}

Vec TGPModel::alloc_vector(const Mat& Kstar, const Vec& omega) const {
  const long k = design_.k();
  Mat sigma = kmat_;
  for (long i = 0; i < k; ++i) {
    sigma(i, i) += params_.inflation() * params_.tau2 / static_cast<double>(design_.counts[i]);
  }
  Eigen::LLT<Mat> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("tgp: allocation covariance not SPD");
  }
  return llt.solve(Kstar.transpose() * omega);
}

TGPModel TGPModel::append_batch(const Vec& x, long r, double ybar, bool* merged) const {
  const long idx = design_.find(x);
  if (idx >= 0) {
    if (merged) *merged = true;
    return add_replicates(idx, r, ybar * static_cast<double>(r));
  }
  if (merged) *merged = false;
  if (r < 1) throw std::invalid_argument("tgp append_batch: r must be >= 1");
  ReplicatedDesign d = design_;
  d.inputs.conservativeResize(d.k() + 1, Eigen::NoChange);
  d.inputs.row(d.inputs.rows() - 1) = x.transpose();
  d.counts.push_back(r);
  d.means.conservativeResize(d.means.size() + 1);
  d.means[d.means.size() - 1] = ybar;
  return TGPModel(std::move(d), params_);
}

TGPModel TGPModel::add_replicates(long i, long dr, double sum_y) const {
  if (i < 0 || i >= design_.k()) throw std::invalid_argument("tgp add_replicates: bad index");
  if (dr < 0) throw std::invalid_argument("tgp add_replicates: negative increment");
  if (dr == 0) return *this;
  ReplicatedDesign d = design_;
  const double r_old = static_cast<double>(d.counts[i]);
  d.means[i] = (d.means[i] * r_old + sum_y) / (r_old + static_cast<double>(dr));
  d.counts[i] += dr;
  return TGPModel(std::move(d), params_);
}

double TGPModel::log_marginal() const {
  const long k = design_.k();
  if (k == 0) return 0.0;
  const TLik lik(design_, params_);
  const Vec resid = design_.means - laplace_.mode;
  double logp = lik.logp(resid);
  // Student-t normalizing constants (they matter for nu and tau2 fitting).
  for (long i = 0; i < k; ++i) {
    const double scale2 = params_.tau2 / static_cast<double>(design_.counts[i]);
    logp += std::lgamma(0.5 * (params_.nu + 1.0)) - std::lgamma(0.5 * params_.nu) -
            0.5 * std::log(params_.nu * M_PI * scale2);
  }
  const Vec w = laplace_.w.cwiseMax(kWFloor);
  const Vec sw = w.cwiseSqrt();
  Mat B = Mat::Identity(k, k) + sw.asDiagonal() * kmat_ * sw.asDiagonal();
  Eigen::LLT<Mat> lltB(B);
  double logdet_b = 0.0;
  for (long i = 0; i < k; ++i) logdet_b += 2.0 * std::log(lltB.matrixLLT()(i, i));
  return logp - 0.5 * laplace_.mode.dot(kinv_mode_) - 0.5 * logdet_b;
}

TgpFitResult fit_tgp(const ReplicatedDesign& design, const FitBounds& bounds,
                     RngStream& rng, const std::optional<TGPParams>& warm,
                     bool scan_nu_grid) {
  if (design.k() < 2) throw std::invalid_argument("fit_tgp: need at least two design sites");
  const int d = design.dim();

  // theta = (log ell_1..d, log sv, log tau2, log(nu - 2))
  Vec lo(d + 3), hi(d + 3);
  for (int j = 0; j < d; ++j) {
    lo[j] = std::log(bounds.ell_lo);
    hi[j] = std::log(bounds.ell_hi);
  }
  lo[d] = std::log(bounds.sv_lo);
  hi[d] = std::log(bounds.sv_hi);
  lo[d + 1] = std::log(bounds.tau2_lo);
  hi[d + 1] = std::log(bounds.tau2_hi);
  lo[d + 2] = std::log(0.1);   // nu in (2.1, 100]
  hi[d + 2] = std::log(98.0);

  auto unpack = [&](const Vec& t) {
    TGPParams p{2.0 + std::exp(t[d + 2]), std::exp(t[d + 1]), KernelParams{Vec(d), std::exp(t[d])}};
    for (int j = 0; j < d; ++j) p.kernel.lengthscales[j] = std::exp(t[j]);
    return p;
  };
  auto eval = [&](const Vec& t) { return TGPModel(design, unpack(t)).log_marginal(); };

  Vec t0(d + 3);
  if (warm) {
    for (int j = 0; j < d; ++j) t0[j] = std::log(warm->kernel.lengthscales[j]);
    t0[d] = std::log(warm->kernel.signal_var);
    t0[d + 1] = std::log(warm->tau2);
    t0[d + 2] = std::log(std::max(warm->nu - 2.0, 0.11));
  } else {
    for (int j = 0; j < d; ++j) t0[j] = std::log(0.5);
    t0[d] = 0.0;
    t0[d + 1] = std::log(0.5);
    t0[d + 2] = std::log(8.0);  // nu = 10
  }
  t0 = t0.cwiseMax(lo).cwiseMin(hi);

  TgpFitResult out;
  out.loglik = -std::numeric_limits<double>::infinity();

  Vec best_t = t0;
  if (scan_nu_grid) {
    // Profile over the integer nu grid with the remaining parameters
    // re-optimized from the previous grid point.
    Vec cur = t0;
    for (int nu = 3; nu <= 30; ++nu) {
      Vec t = cur;
      t[d + 2] = std::log(static_cast<double>(nu) - 2.0);
      Vec sub_lo = lo, sub_hi = hi;
      sub_lo[d + 2] = sub_hi[d + 2] = t[d + 2];  // pin nu on the grid pass
      double val = 0.0;
      Vec opt;
      try {
        opt = nelder_mead_maximize([&](const Vec& x) { return eval(x); }, t, sub_lo, sub_hi,
                                   120, &val);
      } catch (const std::exception&) {
        continue;
      }
      if (std::isfinite(val) && val > out.loglik) {
        out.loglik = val;
        best_t = opt;
        out.ok = true;
      }
      cur = opt;
    }
  }

  // Continuous refinement over all parameters including nu.
  double val = 0.0;
  try {
    const Vec opt = nelder_mead_maximize([&](const Vec& x) { return eval(x); }, best_t, lo,
                                         hi, 250, &val);
    if (std::isfinite(val) && val >= out.loglik) {
      out.loglik = val;
      best_t = opt;
      out.ok = true;
    }
  } catch (const std::exception&) {
  }
  if (!out.ok) {
    // Random restarts as a fallback.
    for (int s = 0; s < 3 && !out.ok; ++s) {
      Vec t(d + 3);
      for (int j = 0; j < d + 3; ++j) t[j] = rng.uniform(lo[j], hi[j]);
      try {
        const Vec opt =
            nelder_mead_maximize([&](const Vec& x) { return eval(x); }, t, lo, hi, 200, &val);
        out.loglik = val;
        best_t = opt;
        out.ok = true;
      } catch (const std::exception&) {
      }
    }
  }
  out.params = unpack(best_t);
  return out;
}

}  // namespace adbatch
