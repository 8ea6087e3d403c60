#include "adbatch/optstop.hpp"

#include <cmath>
#include <stdexcept>

namespace adbatch {

void GBMParams::validate() const {
  if (dim < 1 || cov.rows() != dim || cov.cols() != dim) {
    throw std::invalid_argument("gbm: bad covariance shape");
  }
  if (!(dt > 0.0) || !(horizon > 0.0)) throw std::invalid_argument("gbm: bad time grid");
  const double steps = horizon / dt;
  if (std::abs(steps - std::llround(steps)) > 1e-9) {
    throw std::invalid_argument("gbm: horizon must be an integer number of steps");
  }
  if ((z0.array() <= 0.0).any()) throw std::invalid_argument("gbm: z0 must be positive");
}

Mat GBMParams::chol() const {
  if (cov.isZero(0.0)) return Mat::Zero(dim, dim);  // degenerate test mode
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("gbm: covariance not SPD");
  return llt.matrixL();
}

double Payoff::intrinsic(const Vec& z) const {
  if (kind == Kind::BasketPut) {
    return std::max(strike - z.mean(), 0.0);
  }
  return std::max(z.maxCoeff() - strike, 0.0);
}

Vec gbm_step(const Vec& z, const GBMParams& params, const Mat& chol_cov, const Vec& w) {
  const Vec drift =
      (params.rate - 0.5 * params.cov.diagonal().array()).matrix() * params.dt;
  const Vec shock = std::sqrt(params.dt) * (chol_cov * w);
  return z.array() * (drift + shock).array().exp();
}

bool StoppingPolicy::exercise(int date_index, const Vec& z) const {
  if (date_index < 1 || date_index > static_cast<int>(rules.size())) return false;
  const DateRule& rule = rules[static_cast<std::size_t>(date_index - 1)];
  if (!rule.surrogate) return false;
  if (payoff.intrinsic(z) <= 0.0) return false;
  if (!rule.box.contains(z)) return false;  // out-of-domain: continue
  const auto [fhat, sd] = rule.surrogate->posterior(z);
  (void)sd;
  return fhat > 0.0;
}

double timing_draw(const StoppingPolicy& policy, int date_index, const Vec& z,
                   const GBMParams& params, const Mat& chol_cov, const Payoff& payoff,
                   RngStream& rng) {
  const int n_dates = params.n_dates();
  if (date_index < 1 || date_index >= n_dates) {
    throw std::invalid_argument("timing_draw: date index out of range");
  }
  Vec state = z;
  double continuation = 0.0;
  for (int j = date_index + 1; j <= n_dates; ++j) {
    Vec w(params.dim);
    for (int t = 0; t < params.dim; ++t) w[t] = rng.normal();
    state = gbm_step(state, params, chol_cov, w);
    if (j == n_dates || policy.exercise(j, state)) {
      continuation = payoff(static_cast<double>(j) * params.dt, state);
      break;
    }
  }
  return payoff(static_cast<double>(date_index) * params.dt, z) - continuation;
}

namespace {

// Box of +-4 log-sd around the mode of Z_t given z0.
Box date_box(const GBMParams& params, double t) {
  Vec lo(params.dim), hi(params.dim);
  for (int i = 0; i < params.dim; ++i) {
    const double m = std::log(params.z0[i]) +
                     (params.rate - 0.5 * params.cov(i, i)) * t;
    const double sd = std::sqrt(params.cov(i, i) * t);
    lo[i] = std::exp(m - 4.0 * sd);
    hi[i] = std::exp(m + 4.0 * sd);
  }
  return Box{lo, hi};
}

}  // namespace

StoppingPolicy fit_policy(const GBMParams& params, const Payoff& payoff,
                          const SchemeConfig& scheme, const MetamodelConfig& metamodel,
                          std::uint64_t seed) {
  params.validate();
  const Mat chol_cov = params.chol();
  const int n_dates = params.n_dates();
  if (n_dates < 2) throw std::invalid_argument("fit_policy: need at least two dates");

  StoppingPolicy policy;
  policy.params = params;
  policy.payoff = payoff;
  policy.rules.resize(static_cast<std::size_t>(n_dates - 1));

  for (int j = n_dates - 1; j >= 1; --j) {
    const double t = static_cast<double>(j) * params.dt;
    const Box box = date_box(params, t);

    Problem problem;
    problem.name = "timing-date-" + std::to_string(j);
    problem.dim = params.dim;
    problem.domain = box;
    problem.feasible = [payoff](const Vec& z) { return payoff.intrinsic(z) > 0.0; };
    problem.simulate = [&policy, j, &params, &chol_cov, payoff](const Vec& z, RngStream& rng) {
      return timing_draw(policy, j, z, params, chol_cov, payoff, rng);
    };
    Vec mu_log(params.dim), sd_log(params.dim);
    for (int i = 0; i < params.dim; ++i) {
      mu_log[i] = std::log(params.z0[i]) + (params.rate - 0.5 * params.cov(i, i)) * t;
      sd_log[i] = std::sqrt(params.cov(i, i) * t);
    }
    problem.measure = LogNormalDensity{mu_log, sd_log};
    problem.known_tau2 = metamodel.tau2;

    const std::uint64_t date_seed = split_mix64(seed + 0x9e3779b97f4a7c15ULL *
                                                           static_cast<std::uint64_t>(j));
    RunOutcome outcome = run_scheme(problem, scheme, metamodel, date_seed, 0);

    StoppingPolicy::DateRule& rule = policy.rules[static_cast<std::size_t>(j - 1)];
    rule.box = box;
    rule.terminal_k = outcome.record.final_row().k;
    rule.fit_seconds = outcome.record.total_seconds;
    rule.surrogate = std::move(outcome.surrogate);
  }
  return policy;
}

std::pair<double, double> policy_value(const StoppingPolicy& policy, long n_paths,
                                       std::uint64_t seed) {
  const GBMParams& params = policy.params;
  params.validate();
  const Mat chol_cov = params.chol();
  const int n_dates = params.n_dates();

  RngStream rng = RngStream::from(seed, {stream::kPaths});
  Mat z(n_paths, params.dim);
  for (long m = 0; m < n_paths; ++m) z.row(m) = params.z0.transpose();
  std::vector<bool> alive(static_cast<std::size_t>(n_paths), true);
  Vec payoffs = Vec::Zero(n_paths);

  for (int j = 1; j <= n_dates; ++j) {
    // Advance every path one step (fixed draw count keeps streams stable).
    for (long m = 0; m < n_paths; ++m) {
      Vec w(params.dim);
      for (int t = 0; t < params.dim; ++t) w[t] = rng.normal();
      if (!alive[static_cast<std::size_t>(m)]) continue;
      z.row(m) = gbm_step(z.row(m).transpose(), params, chol_cov, w).transpose();
    }
    const double t = static_cast<double>(j) * params.dt;
    if (j == n_dates) {
      for (long m = 0; m < n_paths; ++m) {
        if (alive[static_cast<std::size_t>(m)]) {
          payoffs[m] = policy.payoff(t, z.row(m).transpose());
        }
      }
      break;
    }
    const StoppingPolicy::DateRule& rule = policy.rules[static_cast<std::size_t>(j - 1)];
    if (!rule.surrogate) continue;

    // Candidates: alive, in the money, inside the fitted box.
    std::vector<long> idx;
    for (long m = 0; m < n_paths; ++m) {
      if (!alive[static_cast<std::size_t>(m)]) continue;
      const Vec zm = z.row(m).transpose();
      if (policy.payoff.intrinsic(zm) > 0.0 && rule.box.contains(zm)) idx.push_back(m);
    }
    if (idx.empty()) continue;
    Mat pts(static_cast<long>(idx.size()), params.dim);
    for (std::size_t q = 0; q < idx.size(); ++q) pts.row(static_cast<long>(q)) = z.row(idx[q]);
    Vec mean, sd;
    rule.surrogate->posterior_batch(pts, mean, sd);
    for (std::size_t q = 0; q < idx.size(); ++q) {
      if (mean[static_cast<long>(q)] > 0.0) {
        payoffs[idx[q]] = policy.payoff(t, pts.row(static_cast<long>(q)).transpose());
        alive[static_cast<std::size_t>(idx[q])] = false;
      }
    }
  }

  const double mean = payoffs.mean();
  const double var =
      (payoffs.array() - mean).square().sum() / (static_cast<double>(n_paths) - 1.0);
  return {mean, std::sqrt(var / static_cast<double>(n_paths))};
}

std::pair<double, double> european_value(const GBMParams& params, const Payoff& payoff,
                                         long n_paths, std::uint64_t seed) {
  StoppingPolicy policy;
  policy.params = params;
  policy.payoff = payoff;
  policy.rules.resize(static_cast<std::size_t>(params.n_dates() - 1));
  return policy_value(policy, n_paths, seed);
}

OptstopSetup optstop_preset(const std::string& option_name) {
  OptstopSetup s;
  SchemeConfig& sc = s.scheme;
  sc.refit_every = 10;
  sc.cost.t_sim = 0.01;
  sc.cost.theta = {0.137, 8.15e-4, 1.99e-6};
  if (option_name == "amput2d") {
    s.gbm.dim = 2;
    s.gbm.rate = 0.06;
    s.gbm.cov = 0.04 * Mat::Identity(2, 2);  // sigma = 0.2, independent assets
    s.gbm.dt = 0.04;
    s.gbm.horizon = 1.0;
    s.gbm.z0 = Vec::Constant(2, 40.0);
    s.payoff = Payoff{Payoff::Kind::BasketPut, 40.0, 0.06};
    sc.n_total = 2000;
    sc.k0 = 20;
    sc.r0 = 20;
    sc.ladder.levels = {20, 30, 40, 50, 60, 80, 120, 160};
    sc.r_lo = 20;
    sc.r_hi = 160;
    sc.c_bt = 10.0;
    sc.test_set_size = 500;
  } else if (option_name == "maxcall3d") {
    s.gbm.dim = 3;
    s.gbm.rate = 0.05;
    s.gbm.cov = 0.04 * Mat::Identity(3, 3);
    s.gbm.dt = 1.0 / 3.0;
    s.gbm.horizon = 3.0;
    s.gbm.z0 = Vec::Constant(3, 90.0);
    s.payoff = Payoff{Payoff::Kind::MaxCall, 100.0, 0.05};
    sc.n_total = 30000;
    sc.k0 = 300;
    sc.r0 = 30;
    sc.ladder.levels = {20, 30, 40, 50, 80, 160, 240, 320, 480, 640};
    sc.r_lo = 20;
    sc.r_hi = 640;
    sc.c_bt = 20.0 / 3.0;
    sc.test_set_size = 1000;
  } else {
    throw std::invalid_argument("unknown option: " + option_name +
                                " (available: amput2d, maxcall3d)");
  }
  s.metamodel.kind = MetamodelConfig::Kind::Gp;
  s.metamodel.fit_noise = true;  // timing-function noise is unknown
  s.metamodel.tau2 = 1.0;
  s.n_paths = 100000;
  return s;
}

}  // namespace adbatch
