#include <doctest.h>

#include <cmath>

#include "adbatch/gp.hpp"
#include "adbatch/tgp.hpp"
#include "test_util.hpp"

using namespace adbatch;
using adbatch::testing::random_design;

namespace {

Vec v1(double a) {
  Vec x(1);
  x << a;
  return x;
}

Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

// Psi(f) = log p_t(ybar | f) - 0.5 f' K^{-1} f, for finite-difference checks.
double laplace_objective(const ReplicatedDesign& d, const TGPParams& p, const Vec& f) {
  Mat K = kernel_matrix(d.inputs, p.kernel);
  K.diagonal().array() += 1e-8 * p.kernel.signal_var;
  double logp = 0.0;
  for (long i = 0; i < d.k(); ++i) {
    const double a = p.nu * p.tau2 / static_cast<double>(d.counts[i]);
    const double resid = d.means[i] - f[i];
    logp += -0.5 * (p.nu + 1.0) * std::log1p(resid * resid / a);
  }
  return logp - 0.5 * f.dot(K.llt().solve(f));
}

}  // namespace

TEST_CASE("laplace mode: symmetric zero data gives zero mode") {
  RngStream rng = RngStream::from(1, {20});
  ReplicatedDesign d = random_design(rng, 6, 2, 5);
  d.means.setZero();
  TGPParams p{4.0, 0.8, KernelParams::isotropic(2, 0.5, 1.0)};
  const LaplaceState st = laplace_mode(d, p);
  CHECK(st.converged);
  CHECK(st.mode.lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("laplace mode: gradient vanishes at the mode") {
  RngStream rng = RngStream::from(2, {21});
  ReplicatedDesign d = random_design(rng, 7, 2, 4);
  TGPParams p{5.0, 0.5, KernelParams::isotropic(2, 0.6, 1.2)};
  const LaplaceState st = laplace_mode(d, p);
  REQUIRE(st.converged);

  // Analytic gradient of Psi at the mode.
  Mat K = kernel_matrix(d.inputs, p.kernel);
  K.diagonal().array() += 1e-8 * p.kernel.signal_var;
  Vec grad(d.k());
  const Vec kinv_f = K.llt().solve(st.mode);
  for (long i = 0; i < d.k(); ++i) {
    const double a = p.nu * p.tau2 / static_cast<double>(d.counts[i]);
    const double resid = d.means[i] - st.mode[i];
    grad[i] = (p.nu + 1.0) * resid / (a + resid * resid) - kinv_f[i];
  }
  CHECK(grad.lpNorm<Eigen::Infinity>() < 1e-8);

  // Finite differences agree with the stationarity claim.
  const double h = 1e-5;
  for (long i = 0; i < d.k(); ++i) {
    Vec fp = st.mode, fm = st.mode;
    fp[i] += h;
    fm[i] -= h;
    const double fd =
        (laplace_objective(d, p, fp) - laplace_objective(d, p, fm)) / (2 * h);
    CHECK(std::abs(fd) < 1e-6);
  }
}

TEST_CASE("laplace mode is a fixed point of one more Newton step") {
  RngStream rng = RngStream::from(3, {22});
  ReplicatedDesign d = random_design(rng, 6, 2, 5);
  TGPParams p{6.0, 0.7, KernelParams::isotropic(2, 0.5, 1.0)};
  const LaplaceState st = laplace_mode(d, p);
  REQUIRE(st.converged);

  Mat K = kernel_matrix(d.inputs, p.kernel);
  K.diagonal().array() += 1e-8 * p.kernel.signal_var;
  const long k = d.k();
  Vec g(k), w(k);
  for (long i = 0; i < k; ++i) {
    const double a = p.nu * p.tau2 / static_cast<double>(d.counts[i]);
    const double resid = d.means[i] - st.mode[i];
    g[i] = (p.nu + 1.0) * resid / (a + resid * resid);
    const double r2 = resid * resid;
    w[i] = std::max((p.nu + 1.0) * (a - r2) / ((a + r2) * (a + r2)), 1e-10);
  }
  const Vec sw = w.cwiseSqrt();
  Mat B = Mat::Identity(k, k) + sw.asDiagonal() * K * sw.asDiagonal();
  const Vec b = w.cwiseProduct(st.mode) + g;
  const Vec target = K * (b - sw.cwiseProduct(B.llt().solve(sw.cwiseProduct(K * b))));
  CHECK((target - st.mode).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("gaussian limit: tgp matches gp-core at nu = 1e6") {
  RngStream rng = RngStream::from(4, {23});
  ReplicatedDesign d = random_design(rng, 8, 2, 5);
  KernelParams kp = KernelParams::isotropic(2, 0.5, 1.1);
  const double tau2 = 0.6;
  TGPModel tgp(d, TGPParams{1e6, tau2, kp});
  GPModel gp(d, kp, Homoskedastic{tau2});

  // Mode tends to the Gaussian posterior mean at the design points.
  Vec gm, gs;
  gp.posterior_batch(d.inputs, gm, gs);
  for (long i = 0; i < d.k(); ++i) {
    CHECK(tgp.laplace().mode[i] == doctest::Approx(gm[i]).epsilon(1e-4));
  }

  for (int t = 0; t < 12; ++t) {
    const Vec x = v2(rng.uniform(), rng.uniform());
    auto [tm, ts] = tgp.posterior(x);
    auto [m, s] = gp.posterior(x);
    CHECK(tm == doctest::Approx(m).epsilon(1e-3));
    CHECK(ts == doctest::Approx(s).epsilon(1e-3));
    CHECK(ts * ts <= kp.signal_var + 1e-12);

    CHECK(tgp.lookahead_sd_new(x, 5) ==
          doctest::Approx(gp.lookahead_sd_new(x, 5)).epsilon(1e-3));
  }

  const Vec xn = v2(0.42, 0.58);
  for (int t = 0; t < 6; ++t) {
    const Vec xs = v2(rng.uniform(), rng.uniform());
    CHECK(tgp.lookahead_var_at_test_new(xn, 7, xs) ==
          doctest::Approx(gp.lookahead_var_at_test_new(xn, 7, xs)).epsilon(1e-3));
  }

  // Allocation vector tends to the Gaussian U of the allocation rule.
  Mat xstar(5, 2);
  for (int i = 0; i < 5; ++i) xstar.row(i) << rng.uniform(), rng.uniform();
  const Mat kstar = kernel_cross_matrix(xstar, d.inputs, kp);
  Vec omega(5);
  for (int i = 0; i < 5; ++i) omega[i] = rng.uniform();
  const Vec u_t = tgp.alloc_vector(kstar, omega);
  const Vec u_g = gp.solve_sigma(Vec(kstar.transpose() * omega));
  for (long i = 0; i < u_t.size(); ++i) {
    CHECK(u_t[i] == doctest::Approx(u_g[i]).epsilon(1e-3));
  }
}

TEST_CASE("tgp posterior: prior case and variance bound") {
  TGPModel prior(ReplicatedDesign::empty(2), TGPParams{5.0, 1.0, KernelParams::isotropic(2, 0.7, 1.9)});
  auto [m, s] = prior.posterior(v2(0.5, 0.5));
  CHECK(m == 0.0);
  CHECK(s * s == doctest::Approx(1.9));
}

TEST_CASE("tgp lookahead sd closed form and monotonicity") {
  TGPModel prior(ReplicatedDesign::empty(1), TGPParams{3.0, 1.0, KernelParams::isotropic(1, 1.0, 1.0)});
  // tau2=1, s=1, r=1, nu=3: factor 2/(2+1), s' = sqrt(2/3).
  CHECK(prior.lookahead_sd_new(v1(0.5), 1) ==
        doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-9));

  RngStream rng = RngStream::from(5, {24});
  TGPModel m(random_design(rng, 6, 1, 4), TGPParams{4.5, 0.8, KernelParams::isotropic(1, 0.4, 1.0)});
  const Vec x = v1(0.37);
  double prev = std::numeric_limits<double>::infinity();
  for (long r : {1L, 2L, 5L, 20L, 100L}) {
    const double s = m.lookahead_sd_new(x, r);
    CHECK(s < prev);
    prev = s;
  }

  // Increasing in the current sd: prior sd (large) vs posterior sd (small).
  auto [pm, ps] = m.posterior(x);
  (void)pm;
  TGPModel wide(ReplicatedDesign::empty(1), m.params());
  CHECK(wide.lookahead_sd_new(x, 3) > m.lookahead_sd_new(x, 3));
  CHECK(ps < 1.0);
}

TEST_CASE("tgp alloc vector: symmetry and dense-solve oracle") {
  // Symmetric two-point design with equal weights: equal entries.
  ReplicatedDesign d{Mat(2, 1), {4, 4}, Vec(2)};
  d.inputs << 0.3, 0.7;
  d.means << 0.2, 0.2;
  TGPParams p{5.0, 0.5, KernelParams::isotropic(1, 0.5, 1.0)};
  TGPModel m(d, p);
  Mat xstar(2, 1);
  xstar << 0.3, 0.7;
  const Mat kstar = kernel_cross_matrix(xstar, d.inputs, p.kernel);
  const Vec u = m.alloc_vector(kstar, Vec::Ones(2));
  CHECK(u[0] == doctest::Approx(u[1]).epsilon(1e-12));

  // Random three-point instance against a dense solve.
  RngStream rng = RngStream::from(6, {25});
  ReplicatedDesign d3 = random_design(rng, 3, 2, 5);
  TGPParams p3{7.0, 0.4, KernelParams::isotropic(2, 0.6, 1.3)};
  TGPModel m3(d3, p3);
  Mat xs(4, 2);
  for (int i = 0; i < 4; ++i) xs.row(i) << rng.uniform(), rng.uniform();
  const Mat ks = kernel_cross_matrix(xs, d3.inputs, p3.kernel);
  Vec omega(4);
  for (int i = 0; i < 4; ++i) omega[i] = rng.uniform();

  Mat sigma = kernel_matrix(d3.inputs, p3.kernel);
  sigma.diagonal().array() += 1e-8 * p3.kernel.signal_var;
  for (long i = 0; i < 3; ++i) {
    sigma(i, i) += p3.inflation() * p3.tau2 / static_cast<double>(d3.counts[i]);
  }
  const Vec expect = sigma.inverse() * (ks.transpose() * omega);
  const Vec got = m3.alloc_vector(ks, omega);
  for (int i = 0; i < 3; ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-10));
}

TEST_CASE("tgp batch-allocation lookahead: identity at zero and logged refit gap") {
  RngStream rng = RngStream::from(7, {26});
  ReplicatedDesign d = random_design(rng, 6, 2, 6);
  TGPParams p{6.0, 0.5, KernelParams::isotropic(2, 0.5, 1.0)};
  TGPModel m(d, p);
  Mat xstar(8, 2);
  for (int i = 0; i < 8; ++i) xstar.row(i) << rng.uniform(), rng.uniform();

  Vec mean, sd;
  m.posterior_batch(xstar, mean, sd);
  const Vec v0 = m.lookahead_var_realloc({0, 0, 0, 0, 0, 0}, xstar);
  for (int i = 0; i < 8; ++i) {
    CHECK(v0[i] == doctest::Approx(sd[i] * sd[i]).epsilon(1e-10));
  }

  // Approximation quality against a full Laplace refit is logged, not asserted.
  const std::vector<long> dr = {3, 0, 5, 2, 0, 4};
  const Vec approx = m.lookahead_var_realloc(dr, xstar);
  TGPModel refit = m;
  for (std::size_t i = 0; i < dr.size(); ++i) {
    if (dr[i] > 0) {
      refit = refit.add_replicates(static_cast<long>(i), dr[i],
                                   refit.design().means[i] * static_cast<double>(dr[i]));
    }
  }
  Vec rm, rs;
  refit.posterior_batch(xstar, rm, rs);
  double max_gap = 0.0;
  for (int i = 0; i < 8; ++i) {
    max_gap = std::max(max_gap, std::abs(approx[i] - rs[i] * rs[i]) /
                                    std::max(rs[i] * rs[i], 1e-12));
  }
  MESSAGE("tgp lemma-3 relative gap vs full refit: ", max_gap);
  CHECK(std::isfinite(max_gap));
}

TEST_CASE("fit_tgp returns parameters inside bounds and improves on warm start") {
  RngStream rng = RngStream::from(8, {27});
  const long k = 20, r = 10;
  ReplicatedDesign d{Mat(k, 1), std::vector<long>(k, r), Vec(k)};
  for (long i = 0; i < k; ++i) {
    d.inputs(i, 0) = (static_cast<double>(i) + 0.5) / k;
    double sum = 0.0;
    for (long j = 0; j < r; ++j) {
      sum += std::sin(6.0 * d.inputs(i, 0)) + 0.5 * rng.student_t(5.0);
    }
    d.means[i] = sum / static_cast<double>(r);
  }
  TGPParams warm{10.0, 0.3, KernelParams::isotropic(1, 0.4, 0.8)};
  const double warm_ll = TGPModel(d, warm).log_marginal();
  const TgpFitResult fit = fit_tgp(d, FitBounds{}, rng, warm, true);
  REQUIRE(fit.ok);
  CHECK(fit.params.nu > 2.0);
  CHECK(fit.params.nu <= 100.0);
  CHECK(fit.params.tau2 > 0.0);
  CHECK(fit.loglik >= warm_ll - 1e-9);
}
