#include "adbatch/gp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace adbatch {

namespace {

double clamp_variance(double v, double scale) {
  const double tol = -1e-10 * std::max(1.0, scale);
  if (v >= 0.0) return v;
  if (v > tol) return 0.0;
  throw std::runtime_error("gp: posterior variance below negative tolerance");
}

}  // namespace

GPModel::GPModel(ReplicatedDesign design, KernelParams kernel, NoiseModel noise)
    : design_(std::move(design)), kernel_(std::move(kernel)), noise_(std::move(noise)) {
  design_.validate();
  kernel_.validate();
  validate_noise(noise_);
  factorize();
}

void GPModel::factorize() {
  const long k = design_.k();
  if (k == 0) return;
  const Mat kmat = kernel_matrix(design_.inputs, kernel_);
  const Vec nd = noise_diag(noise_, design_);

  // SPD safeguard: 1e-8 * sigma_se^2 per observation (so it commutes with
  // replication), escalating x10 up to 1e-4 * sigma_se^2.
  double jitter = 1e-8 * kernel_.signal_var;
  const double jitter_max = 1e-4 * kernel_.signal_var;
  for (;;) {
    Mat trial = kmat;
    for (long i = 0; i < k; ++i) {
      trial(i, i) += nd[i] + jitter / static_cast<double>(design_.counts[i]);
    }
    llt_.compute(trial);
    if (llt_.info() == Eigen::Success) break;
    jitter *= 10.0;
    if (jitter > jitter_max * 1.0000001) {
      throw std::runtime_error("gp: covariance factorization failed after jitter escalation");
    }
  }
  jitter_ = jitter;
  alpha_ = llt_.solve(design_.means);
}

std::pair<double, double> GPModel::posterior(const Vec& x) const {
  if (design_.k() == 0) {
    return {0.0, std::sqrt(kernel_.signal_var)};
  }
  const Vec kx = kernel_cross(design_.inputs, x, kernel_);
  const double mean = kx.dot(alpha_);
  const Vec w = llt_.matrixL().solve(kx);
  const double var = clamp_variance(kernel_.signal_var - w.squaredNorm(), kernel_.signal_var);
  return {mean, std::sqrt(var)};
}

void GPModel::posterior_batch(const Mat& Xstar, Vec& mean, Vec& sd) const {
  const long m = Xstar.rows();
  mean.resize(m);
  sd.resize(m);
  if (design_.k() == 0) {
    mean.setZero();
    sd.setConstant(std::sqrt(kernel_.signal_var));
    return;
  }
  const Mat ks = kernel_cross_matrix(Xstar, design_.inputs, kernel_);  // m x k
  mean = ks * alpha_;
  Mat w = llt_.matrixL().solve(ks.transpose());  // k x m
  for (long j = 0; j < m; ++j) {
    const double var =
        clamp_variance(kernel_.signal_var - w.col(j).squaredNorm(), kernel_.signal_var);
    sd[j] = std::sqrt(var);
  }
}

double GPModel::posterior_cov(const Vec& a, const Vec& b) const {
  const double prior = kernel_eval(a, b, kernel_);
  if (design_.k() == 0) return prior;
  const Vec ka = kernel_cross(design_.inputs, a, kernel_);
  const Vec kb = kernel_cross(design_.inputs, b, kernel_);
  const Vec wa = llt_.matrixL().solve(ka);
  const Vec wb = llt_.matrixL().solve(kb);
  return prior - wa.dot(wb);
}

double GPModel::effective_noise_var(const Vec& x) const {
  const double jit = design_.k() == 0 ? 1e-8 * kernel_.signal_var : jitter_;
  return noise_var_at(noise_, x) + jit;
}

double GPModel::lookahead_sd_new(const Vec& x, long r) const {
  if (r < 1) throw std::invalid_argument("lookahead_sd_new: r must be >= 1");
  const auto [mean, sd] = posterior(x);
  (void)mean;
  const double s2 = sd * sd;
  const double tau2r = effective_noise_var(x) / static_cast<double>(r);
  const double v = s2 * tau2r / (tau2r + s2);
  return std::sqrt(std::max(v, 0.0));
}

double GPModel::lookahead_var_at_test_new(const Vec& x_new, long dr, const Vec& x_star) const {
  if (dr < 1) throw std::invalid_argument("lookahead_var_at_test_new: dr must be >= 1");
  const auto [mean_star, sd_star] = posterior(x_star);
  (void)mean_star;
  const auto [mean_new, sd_new] = posterior(x_new);
  (void)mean_new;
  const double v = posterior_cov(x_star, x_new);
  const double tau2dr = effective_noise_var(x_new) / static_cast<double>(dr);
  const double out = sd_star * sd_star - v * v / (tau2dr + sd_new * sd_new);
  return std::max(out, 0.0);
}

Vec GPModel::lookahead_var_realloc(const std::vector<long>& dr, const Mat& Xstar) const {
  const long k = design_.k();
  if (static_cast<long>(dr.size()) != k) {
    throw std::invalid_argument("lookahead_var_realloc: dr size mismatch");
  }
  Vec delta(k);
  for (long i = 0; i < k; ++i) {
    if (dr[i] < 0 || dr[i] > std::numeric_limits<long>::max() - design_.counts[i]) {
      throw std::invalid_argument("lookahead_var_realloc: invalid replicate increment");
    }
    const double r = static_cast<double>(design_.counts[i]);
    const double rn = static_cast<double>(design_.counts[i] + dr[i]);
    const double tau2 = effective_noise_var(design_.inputs.row(i).transpose());
    delta[i] = tau2 * (1.0 / r - 1.0 / rn);
  }
  Vec mean, sd;
  posterior_batch(Xstar, mean, sd);
  const Mat ks = kernel_cross_matrix(Xstar, design_.inputs, kernel_);
  const Mat w = solve_sigma(Mat(ks.transpose()));  // k x m, Sigma^{-1} K_*^T
  Vec out(Xstar.rows());
  for (long j = 0; j < Xstar.rows(); ++j) {
    const double drop = w.col(j).cwiseAbs2().dot(delta);
    out[j] = std::max(sd[j] * sd[j] - drop, 0.0);
  }
  return out;
}

GPModel GPModel::append_batch(const Vec& x, long r, double ybar, bool* merged) const {
  const long idx = design_.find(x);
  if (idx >= 0) {
    if (merged) *merged = true;
    return add_replicates(idx, r, ybar * static_cast<double>(r));
  }
  if (merged) *merged = false;
  if (r < 1) throw std::invalid_argument("append_batch: r must be >= 1");
  ReplicatedDesign d = design_;
  d.inputs.conservativeResize(d.k() + 1, Eigen::NoChange);
  d.inputs.row(d.inputs.rows() - 1) = x.transpose();
  d.counts.push_back(r);
  d.means.conservativeResize(d.means.size() + 1);
  d.means[d.means.size() - 1] = ybar;
  return GPModel(std::move(d), kernel_, noise_);
}

GPModel GPModel::add_replicates(long i, long dr, double sum_y) const {
  if (i < 0 || i >= design_.k()) throw std::invalid_argument("add_replicates: bad index");
  if (dr < 0) throw std::invalid_argument("add_replicates: negative increment");
  if (dr == 0) return *this;
  ReplicatedDesign d = design_;
  const double r_old = static_cast<double>(d.counts[i]);
  d.means[i] = (d.means[i] * r_old + sum_y) / (r_old + static_cast<double>(dr));
  d.counts[i] += dr;
  return GPModel(std::move(d), kernel_, noise_);
}

double GPModel::log_marginal() const {
  const long k = design_.k();
  if (k == 0) return 0.0;
  double logdet = 0.0;
  const auto& L = llt_.matrixLLT();
  for (long i = 0; i < k; ++i) logdet += 2.0 * std::log(L(i, i));
  return -0.5 * design_.means.dot(alpha_) - 0.5 * logdet -
         0.5 * static_cast<double>(k) * std::log(2.0 * M_PI);
}

Vec GPModel::solve_sigma(const Vec& rhs) const { return llt_.solve(rhs); }
Mat GPModel::solve_sigma(const Mat& rhs) const { return llt_.solve(rhs); }

double log_marginal_likelihood(const ReplicatedDesign& design,
                               const KernelParams& kernel,
                               const NoiseModel& noise) {
  return GPModel(design, kernel, noise).log_marginal();
}

}  // namespace adbatch
