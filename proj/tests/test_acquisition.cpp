#include <doctest.h>

#include <cmath>

#include "adbatch/acquisition.hpp"

using namespace adbatch;

TEST_CASE("rho weight schedule") {
  Vec fhat(4), s(4);
  fhat << -1.0, -1.0, 1.0, 1.0;
  s << 1.0, 1.0, 1.0, 1.0;
  CHECK(rho_weight(fhat, s) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  Vec flat = Vec::Constant(6, 0.37);
  CHECK(rho_weight(flat, s.head(4)) == doctest::Approx(0.0));

  // Joint rescaling leaves rho unchanged.
  const double c = 7.3;
  CHECK(rho_weight(Vec(c * fhat), Vec(c * s)) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  Vec zero_s = Vec::Zero(4);
  CHECK(rho_weight(fhat, zero_s) == doctest::Approx(1.0));
}

TEST_CASE("cucb closed forms") {
  CHECK(cucb(0.2, 0.1, 3.0, 1.0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(cucb(0.0, 0.4, 2.0, 0.7) >= 0.0);
  CHECK(cucb(5.0, 9.0, 1.0, 0.0) == doctest::Approx(0.0));
}

TEST_CASE("local error closed forms") {
  CHECK(local_error(0.0, 1.0) == doctest::Approx(0.5));
  CHECK(local_error(1.96, 1.0) == doctest::Approx(0.0249979).epsilon(1e-4));
  CHECK(local_error(0.5, 1e-12) == doctest::Approx(0.0).epsilon(1e-12));
  // Monotone decreasing in |fhat|/s.
  double prev = 0.5;
  for (double z : {0.1, 0.5, 1.0, 2.0, 4.0}) {
    const double e = local_error(z, 1.0);
    CHECK(e < prev);
    prev = e;
  }
}

TEST_CASE("gsur values and invariants") {
  // fhat on the contour: zero gain regardless of r.
  CHECK(gsur(0.0, 1.0, 0.5, 1.0) == doctest::Approx(0.0));

  // |fhat|=s=tau=mu=1, r=1: s_next^2 = 1/2.
  const double s_next = std::sqrt(0.5);
  CHECK(gsur(1.0, 1.0, s_next, 1.0) ==
        doctest::Approx(0.0800056504063145).epsilon(1e-9));

  // r -> infinity: maximal reduction Phi(-|f|/s) mu.
  CHECK(gsur(1.0, 1.0, 0.0, 0.8) == doctest::Approx(norm_cdf(-1.0) * 0.8).epsilon(1e-12));

  // Strictly positive off the contour.
  const double s2 = 0.49, cr = 1.0 / 3.0;
  CHECK(gsur(0.3, 0.7, std::sqrt(s2 * cr / (cr + s2)), 1.0) > 0.0);
}

TEST_CASE("gsur algebraic form matches the lookahead form") {
  RngStream rng = RngStream::from(5, {40});
  for (int t = 0; t < 200; ++t) {
    const double fhat = rng.uniform(-2.0, 2.0);
    const double s = rng.uniform(0.05, 2.0);
    const double tau2 = rng.uniform(0.05, 4.0);
    const double r = 1 + static_cast<double>(rng.next_u64() % 100);
    const double c = tau2 / r;
    const double s_next = std::sqrt(s * s * c / (c + s * s));
    const double a = gsur(fhat, s, s_next, 1.0);
    const double b = gsur_numerator_algebraic(fhat, s, tau2, r);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("absur: zero on contour, cost shifts the argmax upward") {
  CostModel cost;
  cost.t_sim = 0.01;
  for (double r : {1.0, 10.0, 100.0}) {
    CHECK(absur_value(0.0, 1.0, 0.5, 1.0, r, cost, 10) == doctest::Approx(0.0));
  }

  const double fhat = 0.5, s = 0.5, tau2 = 1.0;
  auto argmax_r = [&](const CostModel& cm, long n) {
    double best_v = -1.0;
    double best_r = 0.0;
    for (long r = 1; r <= 200; ++r) {
      const double c = tau2 / static_cast<double>(r);
      const double s_next = std::sqrt(s * s * c / (c + s * s));
      const double v = absur_value(fhat, s, s_next, 1.0, static_cast<double>(r), cm, n);
      if (v > best_v) {
        best_v = v;
        best_r = static_cast<double>(r);
      }
    }
    return best_r;
  };
  CostModel cheap = cost;
  cheap.theta = {0.01, 0.0, 0.0};
  CostModel pricey = cost;
  pricey.theta = {10.0, 0.0, 0.0};
  CHECK(argmax_r(pricey, 10) >= argmax_r(cheap, 10));
  CHECK(argmax_r(pricey, 10) > argmax_r(cheap, 10) - 0.5);  // strictly larger in practice
}

TEST_CASE("overhead cost closed forms") {
  CostModel cost;
  cost.theta = {0.137, 8.15e-4, 1.99e-6};
  CHECK(cost.overhead(0) == doctest::Approx(0.137).epsilon(1e-12));
  CHECK(cost.overhead(100) == doctest::Approx(0.2384).epsilon(1e-10));
  CostModel constant;
  constant.theta = {0.3, 0.0, 0.0};
  CHECK(constant.overhead(5000) == doctest::Approx(0.3));
  CHECK_THROWS_AS(
      [] {
        CostModel bad;
        bad.t_sim = -1.0;
        bad.validate(100);
      }(),
      std::invalid_argument);
}

TEST_CASE("optimize_acquisition finds a known optimum and beats its screen") {
  RngStream rng = RngStream::from(11, {41});
  Vec c(2);
  c << 0.42, 0.61;
  auto crit = [&](const Vec& x) { return -(x - c).squaredNorm(); };
  Domain dom{Box::unit(2), nullptr};
  const auto [x, v] = optimize_acquisition(crit, dom, AcqOptions{}, rng);
  CHECK((x - c).norm() < 1e-2);

  // Guaranteed screen baseline: never below a fresh 512-point screen.
  RngStream rng2 = RngStream::from(12, {42});
  const Mat screen = halton_candidates(rng2, 512, dom.box);
  double best = -1e300;
  for (long i = 0; i < screen.rows(); ++i) {
    best = std::max(best, crit(screen.row(i).transpose()));
  }
  CHECK(v >= best - 1e-12);

  CHECK_THROWS_AS(
      optimize_acquisition(crit, Domain{Box{Vec::Ones(2), Vec::Zero(2)}, nullptr},
                           AcqOptions{}, rng),
      std::invalid_argument);
}

TEST_CASE("optimize_acquisition respects a feasibility mask") {
  RngStream rng = RngStream::from(13, {43});
  Vec c(2);
  c << 0.1, 0.1;
  auto crit = [&](const Vec& x) { return -(x - c).squaredNorm(); };
  // Feasible region excludes the unconstrained optimum.
  Domain dom{Box::unit(2), [](const Vec& x) { return x[0] + x[1] >= 1.0; }};
  const auto [x, v] = optimize_acquisition(crit, dom, AcqOptions{}, rng);
  (void)v;
  CHECK(x[0] + x[1] >= 1.0 - 1e-9);
}

TEST_CASE("joint (x, r) optimization keeps r in range") {
  RngStream rng = RngStream::from(17, {44});
  XrCriterion crit;
  Vec c(2);
  c << 0.3, 0.8;
  crit.stats = [&](const Vec& x) {
    return XrStats{(x - c).norm(), 1.0, 1.0, 1.0};
  };
  crit.value = [](const XrStats& st, double r) {
    // Peak near r = 40, falling off with distance from c.
    return -st.fhat - 0.001 * std::abs(r - 40.0);
  };
  const XrResult res = optimize_acquisition_xr(crit, Domain{Box::unit(2), nullptr}, 5, 200,
                                               AcqOptions{}, rng);
  CHECK(res.r >= 5);
  CHECK(res.r <= 200);
  CHECK(std::abs(static_cast<double>(res.r) - 40.0) <= 5.0);
  CHECK((res.x - c).norm() < 5e-2);

  CHECK_THROWS_AS(optimize_acquisition_xr(crit, Domain{Box::unit(2), nullptr}, 0, 10,
                                          AcqOptions{}, rng),
                  std::invalid_argument);
}

TEST_CASE("overhead least-squares fit") {
  // Quadratic data is recovered exactly.
  std::vector<std::pair<long, double>> samples;
  for (long k : {10L, 20L, 50L, 100L, 200L}) {
    const double x = static_cast<double>(k);
    samples.push_back({k, 0.2 + 3e-4 * x + 2e-6 * x * x});
  }
  double r2 = 0.0;
  const auto theta = fit_overhead_quadratic(samples, &r2);
  CHECK(theta[0] == doctest::Approx(0.2).epsilon(1e-8));
  CHECK(theta[1] == doctest::Approx(3e-4).epsilon(1e-6));
  CHECK(theta[2] == doctest::Approx(2e-6).epsilon(1e-6));
  CHECK(r2 == doctest::Approx(1.0).epsilon(1e-10));

  // Constant-time stub: the slope and curvature vanish.
  std::vector<std::pair<long, double>> flat;
  for (long k : {10L, 20L, 50L, 100L, 200L}) flat.push_back({k, 0.5});
  const auto theta_flat = fit_overhead_quadratic(flat, &r2);
  CHECK(std::abs(theta_flat[1]) < 1e-12);
  CHECK(std::abs(theta_flat[2]) < 1e-12);
}
