#include "adbatch/fit.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

namespace adbatch {

namespace {

Vec project(const Vec& x, const Vec& lo, const Vec& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

Vec lbfgs_box_maximize(const GradFn& fg, Vec x0, const Vec& lo, const Vec& hi,
                       int max_iter, double* best_val) {
  const int n = static_cast<int>(x0.size());
  const int mem = 8;
  x0 = project(x0, lo, hi);

  Vec x = x0, g(n);
  double f = fg(x, g);
  Vec best_x = x;
  double best_f = f;

  std::deque<Vec> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int iter = 0; iter < max_iter; ++iter) {
    // Projected-gradient stationarity check.
    const Vec pg = (project(x + g, lo, hi) - x);
    if (pg.lpNorm<Eigen::Infinity>() < 1e-7) break;

    // Two-loop recursion on the ascent direction.
    Vec q = g;
    std::vector<double> a(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      a[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= a[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const double gamma =
          s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      q *= gamma;
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double b = rho_hist[i] * y_hist[i].dot(q);
      q += (a[i] - b) * s_hist[i];
    }
    Vec dir = q;
    if (dir.dot(g) <= 0.0) dir = g;  // fall back to steepest ascent

    // Backtracking line search on the projected path.
    double step = 1.0;
    Vec x_new;
    double f_new = f;
    Vec g_new(n);
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      x_new = project(x + step * dir, lo, hi);
      if ((x_new - x).lpNorm<Eigen::Infinity>() < 1e-14) break;
      bool eval_ok = true;
      try {
        f_new = fg(x_new, g_new);
      } catch (const std::exception&) {
        eval_ok = false;
      }
      if (eval_ok && std::isfinite(f_new) &&
          f_new > f + 1e-4 * g.dot(x_new - x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const Vec s = x_new - x;
    const Vec yv = g - g_new;  // gradient of -f increases; curvature pair for ascent
    if (s.dot(yv) > 1e-12) {
      s_hist.push_back(s);
      y_hist.push_back(yv);
      rho_hist.push_back(1.0 / s.dot(yv));
      if (static_cast<int>(s_hist.size()) > mem) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = x_new;
    f = f_new;
    g = g_new;
    if (f > best_f) {
      best_f = f;
      best_x = x;
    }
  }
  if (best_val) *best_val = best_f;
  return best_x;
}

Vec nelder_mead_maximize(const PlainFn& f, Vec x0, const Vec& lo, const Vec& hi,
                         int max_evals, double* best_val) {
  const int n = static_cast<int>(x0.size());
  x0 = project(x0, lo, hi);
  auto eval = [&](const Vec& x) -> double {
    try {
      const double v = f(project(x, lo, hi));
      return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    } catch (const std::exception&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  std::vector<Vec> pts(n + 1, x0);
  std::vector<double> vals(n + 1);
  for (int i = 0; i < n; ++i) {
    pts[i + 1][i] += 0.1 * std::max(1.0, std::abs(x0[i]));
    pts[i + 1] = project(pts[i + 1], lo, hi);
    if ((pts[i + 1] - x0).norm() < 1e-12) pts[i + 1][i] -= 0.2;
  }
  int evals = 0;
  for (int i = 0; i <= n; ++i) {
    vals[i] = eval(pts[i]);
    ++evals;
  }

  auto order = [&]() {
    for (int i = 0; i <= n; ++i) {
      for (int j = i + 1; j <= n; ++j) {
        if (vals[j] > vals[i]) {
          std::swap(vals[i], vals[j]);
          std::swap(pts[i], pts[j]);
        }
      }
    }
  };

  while (evals < max_evals) {
    order();
    Vec centroid = Vec::Zero(n);
    for (int i = 0; i < n; ++i) centroid += pts[i];
    centroid /= n;

    const Vec xr = project(centroid + (centroid - pts[n]), lo, hi);
    const double fr = eval(xr);
    ++evals;
    if (fr > vals[0]) {
      const Vec xe = project(centroid + 2.0 * (centroid - pts[n]), lo, hi);
      const double fe = eval(xe);
      ++evals;
      if (fe > fr) {
        pts[n] = xe;
        vals[n] = fe;
      } else {
        pts[n] = xr;
        vals[n] = fr;
      }
    } else if (fr > vals[n - 1]) {
      pts[n] = xr;
      vals[n] = fr;
    } else {
      const Vec xc = project(centroid + 0.5 * (pts[n] - centroid), lo, hi);
      const double fc = eval(xc);
      ++evals;
      if (fc > vals[n]) {
        pts[n] = xc;
        vals[n] = fc;
      } else {
        for (int i = 1; i <= n; ++i) {
          pts[i] = project(pts[0] + 0.5 * (pts[i] - pts[0]), lo, hi);
          vals[i] = eval(pts[i]);
          ++evals;
        }
      }
    }
    double spread = 0.0;
    for (int i = 1; i <= n; ++i) spread = std::max(spread, (pts[i] - pts[0]).norm());
    if (spread < 1e-9) break;
  }
  order();
  if (best_val) *best_val = vals[0];
  return pts[0];
}

namespace {

// Log marginal likelihood of the batch means and its gradient with respect
// to (log ell_1..d, log sv [, log tau2]).
class LmlObjective {
 public:
  LmlObjective(const ReplicatedDesign& design, NoiseFitMode mode, double fixed_tau2)
      : design_(design), mode_(mode), fixed_tau2_(fixed_tau2) {
    const long k = design.k();
    const int d = design.dim();
    sqdist_.resize(d, Mat::Zero(k, k));
    for (int j = 0; j < d; ++j) {
      for (long a = 0; a < k; ++a) {
        for (long b = a + 1; b < k; ++b) {
          const double dz = design.inputs(a, j) - design.inputs(b, j);
          sqdist_[j](a, b) = sqdist_[j](b, a) = dz * dz;
        }
      }
    }
    rinv_.resize(k);
    for (long i = 0; i < k; ++i) rinv_[i] = 1.0 / static_cast<double>(design.counts[i]);
  }

  int n_params() const {
    return design_.dim() + 1 + (mode_ == NoiseFitMode::FitConstantTau2 ? 1 : 0);
  }

  double operator()(const Vec& theta, Vec& grad) const {
    const long k = design_.k();
    const int d = design_.dim();
    Vec ell(d);
    for (int j = 0; j < d; ++j) ell[j] = std::exp(theta[j]);
    const double sv = std::exp(theta[d]);
    const double tau2 =
        mode_ == NoiseFitMode::FitConstantTau2 ? std::exp(theta[d + 1]) : fixed_tau2_;

    Mat corr = Mat::Zero(k, k);
    for (int j = 0; j < d; ++j) corr += sqdist_[j] / (ell[j] * ell[j]);
    corr = (-0.5 * corr.array()).exp();
    // Matches the model's first-level per-observation jitter.
    for (long i = 0; i < k; ++i) corr(i, i) += 1e-8 * rinv_[i];

    Mat sigma = sv * corr;
    for (long i = 0; i < k; ++i) sigma(i, i) += tau2 * rinv_[i];

    Eigen::LLT<Mat> llt(sigma);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("fit: covariance not SPD");
    }
    const Vec alpha = llt.solve(design_.means);
    double logdet = 0.0;
    for (long i = 0; i < k; ++i) logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
    const double lml = -0.5 * design_.means.dot(alpha) - 0.5 * logdet -
                       0.5 * static_cast<double>(k) * std::log(2.0 * M_PI);

    // dL/dtheta = 0.5 alpha' dSigma alpha - 0.5 tr(Sigma^{-1} dSigma)
    const Mat sigma_inv = llt.solve(Mat::Identity(k, k));
    const Mat outer = alpha * alpha.transpose();
    grad.resize(n_params());
    for (int j = 0; j < d; ++j) {
      const Mat dS = (sv * corr.array() * sqdist_[j].array()).matrix() / (ell[j] * ell[j]);
      grad[j] = 0.5 * ((outer - sigma_inv).cwiseProduct(dS)).sum();
    }
    {
      const Mat dS = sv * corr;
      grad[d] = 0.5 * ((outer - sigma_inv).cwiseProduct(dS)).sum();
    }
    if (mode_ == NoiseFitMode::FitConstantTau2) {
      double acc = 0.0;
      for (long i = 0; i < k; ++i) {
        acc += (outer(i, i) - sigma_inv(i, i)) * tau2 * rinv_[i];
      }
      grad[d + 1] = 0.5 * acc;
    }
    return lml;
  }

 private:
  const ReplicatedDesign& design_;
  NoiseFitMode mode_;
  double fixed_tau2_;
  std::vector<Mat> sqdist_;
  std::vector<double> rinv_;
};

}  // namespace

double lml_at_log_params(const ReplicatedDesign& design, NoiseFitMode mode,
                         double tau2, const Vec& theta, Vec* grad) {
  LmlObjective obj(design, mode, tau2);
  Vec g;
  const double v = obj(theta, g);
  if (grad) *grad = g;
  return v;
}

FitResult fit_hyperparameters(const ReplicatedDesign& design, NoiseFitMode mode,
                              double tau2, const FitBounds& bounds, int n_starts,
                              RngStream& rng, const std::optional<KernelParams>& warm) {
  if (design.k() < 2) throw std::invalid_argument("fit: need at least two design sites");
  const int d = design.dim();
  LmlObjective obj(design, mode, tau2);
  const int np = obj.n_params();

  Vec lo(np), hi(np);
  for (int j = 0; j < d; ++j) {
    lo[j] = std::log(bounds.ell_lo);
    hi[j] = std::log(bounds.ell_hi);
  }
  lo[d] = std::log(bounds.sv_lo);
  hi[d] = std::log(bounds.sv_hi);
  if (mode == NoiseFitMode::FitConstantTau2) {
    lo[d + 1] = std::log(bounds.tau2_lo);
    hi[d + 1] = std::log(bounds.tau2_hi);
  }

  std::vector<Vec> starts;
  if (warm) {
    Vec t(np);
    for (int j = 0; j < d; ++j) t[j] = std::log(warm->lengthscales[j]);
    t[d] = std::log(warm->signal_var);
    if (mode == NoiseFitMode::FitConstantTau2) t[d + 1] = std::log(tau2);
    starts.push_back(t.cwiseMax(lo).cwiseMin(hi));
  }
  while (static_cast<int>(starts.size()) < n_starts) {
    Vec t(np);
    for (int j = 0; j < np; ++j) t[j] = rng.uniform(lo[j], hi[j]);
    starts.push_back(t);
  }

  FitResult out;
  out.loglik = -std::numeric_limits<double>::infinity();
  auto fg = [&](const Vec& x, Vec& g) { return obj(x, g); };
  for (const Vec& s : starts) {
    double val = 0.0;
    Vec x;
    try {
      x = lbfgs_box_maximize(fg, s, lo, hi, 120, &val);
    } catch (const std::exception&) {
      continue;
    }
    if (!std::isfinite(val) || val <= out.loglik) continue;
    KernelParams kp{Vec(d), std::exp(x[d])};
    for (int j = 0; j < d; ++j) kp.lengthscales[j] = std::exp(x[j]);
    out.kernel = kp;
    const double t2 = mode == NoiseFitMode::FitConstantTau2 ? std::exp(x[d + 1]) : tau2;
    out.noise = Homoskedastic{t2};
    out.loglik = val;
    out.ok = true;
  }
  if (!out.ok) {
    out.kernel = warm ? *warm : KernelParams::isotropic(d, 1.0, 1.0);
    out.noise = Homoskedastic{tau2};
  }
  return out;
}

}  // namespace adbatch
