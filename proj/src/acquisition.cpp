#include "adbatch/acquisition.hpp"

#include <cmath>
#include <limits>

#include "adbatch/fit.hpp"

namespace adbatch {

namespace {

// Feasible screen points; keeps drawing batches when a mask rejects most of
// the box, and fails if the domain appears empty.
Mat screen_points(const Domain& dom, int want, RngStream& rng) {
  if (dom.box.dim() == 0 || (dom.box.hi - dom.box.lo).minCoeff() < 0.0) {
    throw std::invalid_argument("acquisition: empty domain");
  }
  Mat out(want, dom.box.dim());
  int have = 0;
  for (int attempt = 0; attempt < 64 && have < want; ++attempt) {
    const Mat cand = halton_candidates(rng, want, dom.box, 20 + attempt * want);
    for (long i = 0; i < cand.rows() && have < want; ++i) {
      const Vec x = cand.row(i).transpose();
      if (dom.ok(x)) out.row(have++) = cand.row(i);
    }
  }
  if (have == 0) throw std::invalid_argument("acquisition: no feasible candidates found");
  return out.topRows(have);
}

}  // namespace

std::pair<Vec, double> optimize_acquisition(const std::function<double(const Vec&)>& crit,
                                            const Domain& dom, const AcqOptions& opt,
                                            RngStream& rng) {
  const Mat cand = screen_points(dom, opt.n_candidates, rng);
  Vec best_x = cand.row(0).transpose();
  double best_v = -std::numeric_limits<double>::infinity();
  for (long i = 0; i < cand.rows(); ++i) {
    const Vec x = cand.row(i).transpose();
    const double v = crit(x);
    if (v > best_v) {
      best_v = v;
      best_x = x;
    }
  }

  auto clamped = [&](const Vec& x) -> double {
    const Vec xc = dom.box.clamp(x);
    if (!dom.ok(xc)) return -std::numeric_limits<double>::infinity();
    return crit(xc);
  };
  double polished_v = best_v;
  const Vec polished = nelder_mead_maximize(clamped, best_x, dom.box.lo, dom.box.hi,
                                            opt.polish_evals, &polished_v);
  if (polished_v > best_v && dom.ok(dom.box.clamp(polished))) {
    return {dom.box.clamp(polished), polished_v};
  }
  return {best_x, best_v};
}

XrResult optimize_acquisition_xr(const XrCriterion& crit, const Domain& dom, long r_lo,
                                 long r_hi, const AcqOptions& opt, RngStream& rng) {
  if (r_lo < 1 || r_hi < r_lo) {
    throw std::invalid_argument("acquisition: bad replication range");
  }
  const Mat cand = screen_points(dom, opt.n_candidates, rng);

  // Log-spaced replication grid for the screen.
  const int n_r = 16;
  std::vector<double> rgrid(n_r);
  for (int j = 0; j < n_r; ++j) {
    const double t = static_cast<double>(j) / (n_r - 1);
    rgrid[j] = std::exp(std::log(static_cast<double>(r_lo)) +
                        t * (std::log(static_cast<double>(r_hi)) -
                             std::log(static_cast<double>(r_lo))));
  }

  Vec best_x = cand.row(0).transpose();
  double best_r = rgrid[0];
  double best_v = -std::numeric_limits<double>::infinity();
  for (long i = 0; i < cand.rows(); ++i) {
    const Vec x = cand.row(i).transpose();
    const XrStats st = crit.stats(x);
    for (double r : rgrid) {
      const double v = crit.value(st, r);
      if (v > best_v) {
        best_v = v;
        best_x = x;
        best_r = r;
      }
    }
  }

  // Joint polish over (x, log r).
  const int d = dom.box.dim();
  Vec z0(d + 1), lo(d + 1), hi(d + 1);
  z0.head(d) = best_x;
  z0[d] = std::log(best_r);
  lo.head(d) = dom.box.lo;
  hi.head(d) = dom.box.hi;
  lo[d] = std::log(static_cast<double>(r_lo));
  hi[d] = std::log(static_cast<double>(r_hi));
  auto joint = [&](const Vec& z) -> double {
    const Vec x = dom.box.clamp(z.head(d));
    if (!dom.ok(x)) return -std::numeric_limits<double>::infinity();
    const XrStats st = crit.stats(x);
    return crit.value(st, std::exp(z[d]));
  };
  double polished_v = best_v;
  const Vec z = nelder_mead_maximize(joint, z0, lo, hi, opt.polish_evals, &polished_v);

  XrResult out;
  if (polished_v > best_v && dom.ok(dom.box.clamp(z.head(d)))) {
    out.x = dom.box.clamp(z.head(d));
    best_r = std::exp(z[d]);
    out.value = polished_v;
  } else {
    out.x = best_x;
    out.value = best_v;
  }
  out.r = std::min(r_hi, std::max(r_lo, static_cast<long>(std::llround(best_r))));
  return out;
}

std::array<double, 3> fit_overhead_quadratic(
    const std::vector<std::pair<long, double>>& samples, double* r_squared) {
  if (samples.size() < 3) {
    throw std::invalid_argument("overhead fit: need at least three samples");
  }
  const long n = static_cast<long>(samples.size());
  Mat a(n, 3);
  Vec y(n);
  for (long i = 0; i < n; ++i) {
    const double x = static_cast<double>(samples[static_cast<std::size_t>(i)].first);
    a(i, 0) = 1.0;
    a(i, 1) = x;
    a(i, 2) = x * x;
    y[i] = samples[static_cast<std::size_t>(i)].second;
  }
  const Vec theta = (a.transpose() * a).ldlt().solve(a.transpose() * y);
  if (r_squared) {
    const double ss_res = (y - a * theta).squaredNorm();
    const double ss_tot = (y.array() - y.mean()).square().sum();
    *r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  }
  return {theta[0], theta[1], theta[2]};
}

}  // namespace adbatch
