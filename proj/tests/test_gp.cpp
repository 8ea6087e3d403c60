#include <doctest.h>

#include <cmath>

#include "adbatch/fit.hpp"
#include "adbatch/gp.hpp"
#include "test_util.hpp"

using namespace adbatch;
using adbatch::testing::expand_design;
using adbatch::testing::lml_dense_oracle;
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

GPModel one_point_model(double sv, double tau2, long r, double ybar) {
  ReplicatedDesign d{Mat(1, 1), {r}, Vec(1)};
  d.inputs(0, 0) = 0.3;
  d.means[0] = ybar;
  return GPModel(d, KernelParams::isotropic(1, 1.0, sv), Homoskedastic{tau2});
}

}  // namespace

TEST_CASE("kernel_eval closed forms") {
  KernelParams p = KernelParams::isotropic(2, 1.0, 2.0);
  CHECK(kernel_eval(v2(0.4, 0.7), v2(0.4, 0.7), p) == doctest::Approx(2.0));

  KernelParams p1 = KernelParams::isotropic(1, 1.0, 1.0);
  CHECK(kernel_eval(v1(0.0), v1(1.0), p1) ==
        doctest::Approx(0.6065306597126334).epsilon(1e-12));

  KernelParams wide = KernelParams::isotropic(1, 1e9, 3.5);
  CHECK(kernel_eval(v1(-4.0), v1(9.0), wide) == doctest::Approx(3.5).epsilon(1e-12));

  CHECK(kernel_eval(v1(0.1), v1(0.9), p1) == kernel_eval(v1(0.9), v1(0.1), p1));
  CHECK(kernel_eval(v1(0.1), v1(0.9), p1) <= p1.signal_var);

  CHECK_THROWS_AS(kernel_eval(v1(std::nan("")), v1(0.0), p1), std::invalid_argument);
  CHECK_THROWS_AS(kernel_eval(v1(0.0), v1(INFINITY), p1), std::invalid_argument);
}

TEST_CASE("posterior closed forms on one-point designs") {
  {
    GPModel m = one_point_model(1.0, 1.0, 1, 1.0);
    auto [mean, sd] = m.posterior(v1(0.3));
    CHECK(mean == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(sd * sd == doctest::Approx(0.5).epsilon(1e-6));
  }
  {
    GPModel m = one_point_model(1.0, 1.0, 4, 1.0);
    auto [mean, sd] = m.posterior(v1(0.3));
    CHECK(mean == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(sd * sd == doctest::Approx(0.2).epsilon(1e-6));
  }
  {
    GPModel m(ReplicatedDesign::empty(1), KernelParams::isotropic(1, 1.0, 2.5),
              Homoskedastic{1.0});
    auto [mean, sd] = m.posterior(v1(0.8));
    CHECK(mean == 0.0);
    CHECK(sd * sd == doctest::Approx(2.5));
  }
}

TEST_CASE("posterior_cov diagonal, prior and one-point hand formula") {
  RngStream rng = RngStream::from(11, {1});
  GPModel m(random_design(rng, 5, 2, 4), KernelParams::isotropic(2, 0.7, 1.3),
            Homoskedastic{0.4});
  const Vec x = v2(0.21, 0.55);
  auto [mean, sd] = m.posterior(x);
  (void)mean;
  CHECK(m.posterior_cov(x, x) == doctest::Approx(sd * sd).epsilon(1e-10));

  GPModel prior(ReplicatedDesign::empty(2), KernelParams::isotropic(2, 0.7, 1.3),
                Homoskedastic{0.4});
  const Vec y = v2(0.9, 0.1);
  CHECK(prior.posterior_cov(x, y) ==
        doctest::Approx(kernel_eval(x, y, prior.kernel())).epsilon(1e-14));

  // k = 1: v(a,b) = K(a,b) - K(a,xbar) K(xbar,b) / (sv + (tau2+jit)/r)
  GPModel one = one_point_model(1.7, 0.6, 3, 0.2);
  const Vec xb = v1(0.3), a = v1(0.1), b = v1(0.75);
  const auto& kp = one.kernel();
  const double denom = kp.signal_var + (0.6 + one.jitter_used()) / 3.0;
  const double expect =
      kernel_eval(a, b, kp) - kernel_eval(a, xb, kp) * kernel_eval(xb, b, kp) / denom;
  CHECK(one.posterior_cov(a, b) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(one.posterior_cov(a, b) == doctest::Approx(one.posterior_cov(b, a)));
}

TEST_CASE("log marginal likelihood") {
  {
    ReplicatedDesign d{Mat(1, 1), {1}, Vec(1)};
    d.inputs(0, 0) = 0.0;
    d.means[0] = 0.0;
    const double lml =
        log_marginal_likelihood(d, KernelParams::isotropic(1, 1.0, 0.5), Homoskedastic{0.5});
    CHECK(lml == doctest::Approx(-0.9189385332046727).epsilon(1e-7));
  }
  {
    RngStream rng = RngStream::from(7, {2});
    ReplicatedDesign d = random_design(rng, 4, 2, 5);
    KernelParams kp = KernelParams::isotropic(2, 0.5, 1.2);
    const double base = log_marginal_likelihood(d, kp, Homoskedastic{0.3});

    ReplicatedDesign perm{Mat(4, 2), {}, Vec(4)};
    const int order[4] = {2, 0, 3, 1};
    for (int i = 0; i < 4; ++i) {
      perm.inputs.row(i) = d.inputs.row(order[i]);
      perm.counts.push_back(d.counts[order[i]]);
      perm.means[i] = d.means[order[i]];
    }
    CHECK(log_marginal_likelihood(perm, kp, Homoskedastic{0.3}) ==
          doctest::Approx(base).epsilon(1e-10));
  }
  {
    RngStream rng = RngStream::from(19, {3});
    ReplicatedDesign d = random_design(rng, 3, 2, 6);
    KernelParams kp{v2(0.4, 0.9), 1.6};
    const double got = log_marginal_likelihood(d, kp, Homoskedastic{0.25});
    const double want = lml_dense_oracle(d, kp, 0.25);
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("lml gradient matches finite differences") {
  RngStream rng = RngStream::from(23, {4});
  ReplicatedDesign d = random_design(rng, 6, 2, 4);
  Vec theta(4);
  theta << std::log(0.45), std::log(0.8), std::log(1.3), std::log(0.2);
  Vec grad;
  lml_at_log_params(d, NoiseFitMode::FitConstantTau2, std::exp(theta[3]), theta, &grad);
  const double h = 1e-6;
  for (int j = 0; j < 4; ++j) {
    Vec tp = theta, tm = theta;
    tp[j] += h;
    tm[j] -= h;
    const double fp =
        lml_at_log_params(d, NoiseFitMode::FitConstantTau2, std::exp(tp[3]), tp, nullptr);
    const double fm =
        lml_at_log_params(d, NoiseFitMode::FitConstantTau2, std::exp(tm[3]), tm, nullptr);
    CHECK(grad[j] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-5));
  }
}

TEST_CASE("replication equivalence: batched means match raw observations") {
  RngStream rng = RngStream::from(101, {5});
  const long k = 8;
  ReplicatedDesign design{Mat(k, 2), {}, Vec(k)};
  std::vector<std::vector<double>> raw(k);
  for (long i = 0; i < k; ++i) {
    design.inputs(i, 0) = rng.uniform();
    design.inputs(i, 1) = rng.uniform();
    const long r = 1 + static_cast<long>(rng.next_u64() % 5);
    design.counts.push_back(r);
    double sum = 0.0;
    for (long j = 0; j < r; ++j) {
      raw[i].push_back(rng.normal());
      sum += raw[i].back();
    }
    design.means[i] = sum / static_cast<double>(r);
  }
  KernelParams kp = KernelParams::isotropic(2, 0.6, 1.1);
  Homoskedastic noise{0.7};
  GPModel batched(design, kp, noise);
  GPModel full(expand_design(design, raw), kp, noise);
  for (int t = 0; t < 20; ++t) {
    const Vec x = v2(rng.uniform(), rng.uniform());
    auto [m1, s1] = batched.posterior(x);
    auto [m2, s2] = full.posterior(x);
    CHECK(m1 == doctest::Approx(m2).epsilon(1e-8));
    CHECK(s1 == doctest::Approx(s2).epsilon(1e-8));
  }
}

TEST_CASE("lookahead_sd_new closed forms and recompute oracle") {
  {
    GPModel prior(ReplicatedDesign::empty(1), KernelParams::isotropic(1, 1.0, 1.0),
                  Homoskedastic{1.0});
    CHECK(prior.lookahead_sd_new(v1(0.5), 1) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
    CHECK(prior.lookahead_sd_new(v1(0.5), 1000000000000L) < 1e-5);
  }
  {
    RngStream rng = RngStream::from(3, {6});
    GPModel m(random_design(rng, 6, 2, 5), KernelParams::isotropic(2, 0.5, 1.0),
              Homoskedastic{0.8});
    const Vec x = v2(0.33, 0.72);
    for (long r : {1L, 7L, 40L}) {
      const double predicted = m.lookahead_sd_new(x, r);
      GPModel next = m.append_batch(x, r, 0.3);
      auto [mean, sd] = next.posterior(x);
      (void)mean;
      CHECK(predicted == doctest::Approx(sd).epsilon(1e-10));
    }
  }
}

TEST_CASE("lookahead_var_at_test_new consistency and recompute oracle") {
  RngStream rng = RngStream::from(5, {7});
  GPModel m(random_design(rng, 7, 2, 4), KernelParams::isotropic(2, 0.6, 1.4),
            Homoskedastic{0.9});
  const Vec x_new = v2(0.41, 0.52);

  const double self = m.lookahead_var_at_test_new(x_new, 9, x_new);
  const double via_sd = m.lookahead_sd_new(x_new, 9);
  CHECK(self == doctest::Approx(via_sd * via_sd).epsilon(1e-10));

  GPModel next = m.append_batch(x_new, 9, -0.4);
  for (int t = 0; t < 8; ++t) {
    const Vec xs = v2(rng.uniform(), rng.uniform());
    const double predicted = m.lookahead_var_at_test_new(x_new, 9, xs);
    auto [mean, sd] = next.posterior(xs);
    (void)mean;
    CHECK(predicted == doctest::Approx(sd * sd).epsilon(1e-10));
  }

  // Far-away new point: negligible covariance, variance unchanged.
  GPModel tight(random_design(rng, 4, 2, 3), KernelParams::isotropic(2, 0.05, 1.0),
                Homoskedastic{0.5});
  const Vec far_x = v2(0.05, 0.05), probe = v2(0.95, 0.95);
  auto [pm, ps] = tight.posterior(probe);
  (void)pm;
  CHECK(tight.lookahead_var_at_test_new(far_x, 5, probe) ==
        doctest::Approx(ps * ps).epsilon(1e-9));
}

TEST_CASE("lookahead_var_realloc: identity, upper bound, small-step accuracy") {
  RngStream rng = RngStream::from(29, {8});
  GPModel m(random_design(rng, 5, 2, 3), KernelParams::isotropic(2, 0.7, 1.2),
            Homoskedastic{0.6});
  Mat xstar(6, 2);
  for (int i = 0; i < 6; ++i) xstar.row(i) << rng.uniform(), rng.uniform();

  {
    Vec mean, sd;
    m.posterior_batch(xstar, mean, sd);
    const Vec v = m.lookahead_var_realloc({0, 0, 0, 0, 0}, xstar);
    for (int i = 0; i < 6; ++i) CHECK(v[i] == doctest::Approx(sd[i] * sd[i]).epsilon(1e-12));
  }

  auto exact_recompute = [&](const GPModel& model, const std::vector<long>& dr) {
    GPModel next = model;
    for (std::size_t i = 0; i < dr.size(); ++i) {
      if (dr[i] > 0) {
        next = next.add_replicates(static_cast<long>(i), dr[i],
                                   next.design().means[i] * static_cast<double>(dr[i]));
      }
    }
    Vec mean, sd;
    next.posterior_batch(xstar, mean, sd);
    return sd;
  };

  {
    const std::vector<long> dr = {2, 0, 5, 1, 3};
    const Vec approx = m.lookahead_var_realloc(dr, xstar);
    const Vec sd = exact_recompute(m, dr);
    for (int i = 0; i < 6; ++i) {
      CHECK(approx[i] >= sd[i] * sd[i] - 1e-12);
    }
  }

  // Large counts keep max dR_ii small; relative gap must stay below 5%.
  {
    ReplicatedDesign d = random_design(rng, 5, 2, 3);
    for (auto& r : d.counts) r += 120;
    GPModel big(d, KernelParams::isotropic(2, 0.7, 1.2), Homoskedastic{0.6});
    const std::vector<long> dr = {3, 1, 4, 0, 2};
    double max_drii = 0.0;
    for (int i = 0; i < 5; ++i) {
      const double r = static_cast<double>(d.counts[i]);
      max_drii = std::max(max_drii, 1.0 / r - 1.0 / (r + static_cast<double>(dr[i])));
    }
    REQUIRE(max_drii <= 0.01);
    const Vec approx = big.lookahead_var_realloc(dr, xstar);
    const Vec sd = exact_recompute(big, dr);
    for (int i = 0; i < 6; ++i) {
      const double exact = sd[i] * sd[i];
      CHECK(approx[i] >= exact - 1e-12);
      CHECK((approx[i] - exact) / exact < 0.05);
    }
  }

  CHECK_THROWS_AS(m.lookahead_var_realloc({-1, 0, 0, 0, 0}, xstar), std::invalid_argument);
}

TEST_CASE("append and add_replicates bookkeeping") {
  GPModel m = one_point_model(1.0, 1.0, 2, 1.0);

  // r=2, ybar=1, new outputs {3,5}: merged mean (2+8)/4 = 2.5.
  GPModel merged = m.add_replicates(0, 2, 8.0);
  CHECK(merged.design().counts[0] == 4);
  CHECK(merged.design().means[0] == doctest::Approx(2.5));

  GPModel same = m.add_replicates(0, 0, 0.0);
  CHECK(same.design().counts[0] == 2);
  CHECK(same.design().means[0] == doctest::Approx(1.0));

  // Appending at an existing site folds into add_replicates.
  bool was_merged = false;
  GPModel folded = m.append_batch(v1(0.3), 2, 4.0, &was_merged);
  CHECK(was_merged);
  CHECK(folded.k() == 1);
  CHECK(folded.design().counts[0] == 4);
  CHECK(folded.design().means[0] == doctest::Approx(2.5));

  // Two successive appends equal one combined rebuild.
  RngStream rng = RngStream::from(31, {9});
  GPModel base(random_design(rng, 4, 2, 3), KernelParams::isotropic(2, 0.5, 1.0),
               Homoskedastic{0.5});
  const Vec xa = v2(0.15, 0.85), xb = v2(0.77, 0.2);
  GPModel seq = base.append_batch(xa, 3, 0.7).append_batch(xb, 5, -0.2);

  ReplicatedDesign d = base.design();
  d.inputs.conservativeResize(6, Eigen::NoChange);
  d.inputs.row(4) = xa.transpose();
  d.inputs.row(5) = xb.transpose();
  d.counts.push_back(3);
  d.counts.push_back(5);
  d.means.conservativeResize(6);
  d.means[4] = 0.7;
  d.means[5] = -0.2;
  GPModel rebuilt(d, base.kernel(), base.noise());
  for (int t = 0; t < 10; ++t) {
    const Vec x = v2(rng.uniform(), rng.uniform());
    auto [m1, s1] = seq.posterior(x);
    auto [m2, s2] = rebuilt.posterior(x);
    CHECK(m1 == doctest::Approx(m2).epsilon(1e-12));
    CHECK(s1 == doctest::Approx(s2).epsilon(1e-12));
  }
}

TEST_CASE("posterior variance is monotone under information") {
  RngStream rng = RngStream::from(37, {10});
  GPModel m(random_design(rng, 6, 2, 4), KernelParams::isotropic(2, 0.6, 1.0),
            Homoskedastic{0.8});
  GPModel more_reps = m.add_replicates(2, 4, 0.0);
  GPModel more_inputs = m.append_batch(v2(0.5, 0.5), 3, 0.1);
  for (int t = 0; t < 15; ++t) {
    const Vec x = v2(rng.uniform(), rng.uniform());
    auto [m0, s0] = m.posterior(x);
    (void)m0;
    auto [m1, s1] = more_reps.posterior(x);
    (void)m1;
    auto [m2, s2] = more_inputs.posterior(x);
    (void)m2;
    CHECK(s1 <= s0 + 1e-10);
    CHECK(s2 <= s0 + 1e-10);
  }
}

TEST_CASE("posterior invariant under permutation of design rows") {
  RngStream rng = RngStream::from(41, {11});
  ReplicatedDesign d = random_design(rng, 5, 2, 4);
  KernelParams kp = KernelParams::isotropic(2, 0.55, 0.9);
  GPModel m(d, kp, Homoskedastic{0.4});

  ReplicatedDesign perm{Mat(5, 2), {}, Vec(5)};
  const int order[5] = {4, 2, 0, 1, 3};
  for (int i = 0; i < 5; ++i) {
    perm.inputs.row(i) = d.inputs.row(order[i]);
    perm.counts.push_back(d.counts[order[i]]);
    perm.means[i] = d.means[order[i]];
  }
  GPModel mp(perm, kp, Homoskedastic{0.4});
  for (int t = 0; t < 10; ++t) {
    const Vec x = v2(rng.uniform(), rng.uniform());
    auto [m1, s1] = m.posterior(x);
    auto [m2, s2] = mp.posterior(x);
    CHECK(m1 == doctest::Approx(m2).epsilon(1e-11));
    CHECK(s1 == doctest::Approx(s2).epsilon(1e-11));
  }
}

TEST_CASE("constant heteroskedastic map reduces to homoskedastic exactly") {
  RngStream rng = RngStream::from(43, {12});
  ReplicatedDesign d = random_design(rng, 6, 2, 5);
  KernelParams kp = KernelParams::isotropic(2, 0.5, 1.0);
  GPModel homo(d, kp, Homoskedastic{0.37});
  GPModel het(d, kp, HeteroskedasticKnown{[](const Vec&) { return 0.37; }});
  for (int t = 0; t < 10; ++t) {
    const Vec x = v2(rng.uniform(), rng.uniform());
    auto [m1, s1] = homo.posterior(x);
    auto [m2, s2] = het.posterior(x);
    CHECK(m1 == m2);
    CHECK(s1 == s2);
  }
}

TEST_CASE("fit_hyperparameters recovers generating lengthscale") {
  RngStream rng = RngStream::from(2024, {13});
  const long k = 50;
  const double ell_true = 0.2, sv_true = 1.0, tau2 = 0.1;
  const long r = 10;

  Mat X(k, 1);
  for (long i = 0; i < k; ++i) X(i, 0) = (static_cast<double>(i) + rng.uniform()) / k;
  KernelParams kp_true = KernelParams::isotropic(1, ell_true, sv_true);
  Mat K = kernel_matrix(X, kp_true);
  K.diagonal().array() += 1e-10;
  Eigen::LLT<Mat> llt(K);
  Vec z(k);
  for (long i = 0; i < k; ++i) z[i] = rng.normal();
  Vec f = llt.matrixL() * z;

  ReplicatedDesign d{X, std::vector<long>(k, r), Vec(k)};
  for (long i = 0; i < k; ++i) {
    double sum = 0.0;
    for (long j = 0; j < r; ++j) sum += f[i] + std::sqrt(tau2) * rng.normal();
    d.means[i] = sum / static_cast<double>(r);
  }

  FitResult fit = fit_hyperparameters(d, NoiseFitMode::FixedTau2, tau2, FitBounds{}, 5, rng);
  REQUIRE(fit.ok);
  CHECK(fit.kernel.lengthscales[0] > 0.5 * ell_true);
  CHECK(fit.kernel.lengthscales[0] < 1.5 * ell_true);
}

TEST_CASE("fit_hyperparameters optimizer contract") {
  RngStream rng = RngStream::from(77, {14});
  ReplicatedDesign d = random_design(rng, 12, 2, 6);
  KernelParams warm = KernelParams::isotropic(2, 0.3, 0.8);
  const double warm_lml = log_marginal_likelihood(d, warm, Homoskedastic{0.5});

  FitResult fit =
      fit_hyperparameters(d, NoiseFitMode::FixedTau2, 0.5, FitBounds{}, 3, rng, warm);
  REQUIRE(fit.ok);
  CHECK(fit.loglik >= warm_lml - 1e-9);

  FitBounds b;
  for (long j = 0; j < 2; ++j) {
    CHECK(fit.kernel.lengthscales[j] >= b.ell_lo * (1 - 1e-12));
    CHECK(fit.kernel.lengthscales[j] <= b.ell_hi * (1 + 1e-12));
  }
  CHECK(fit.kernel.signal_var >= b.sv_lo * (1 - 1e-12));
  CHECK(fit.kernel.signal_var <= b.sv_hi * (1 + 1e-12));

  FitResult fit2 =
      fit_hyperparameters(d, NoiseFitMode::FitConstantTau2, 0.5, FitBounds{}, 3, rng, warm);
  REQUIRE(fit2.ok);
  const double t2 = std::get<Homoskedastic>(fit2.noise).tau2;
  CHECK(t2 >= b.tau2_lo * (1 - 1e-12));
  CHECK(t2 <= b.tau2_hi * (1 + 1e-12));
}

TEST_CASE("design validation errors") {
  ReplicatedDesign bad{Mat(2, 1), {1, 0}, Vec(2)};
  bad.inputs << 0.1, 0.9;
  bad.means << 0.0, 0.0;
  CHECK_THROWS_AS(
      GPModel(bad, KernelParams::isotropic(1, 1.0, 1.0), Homoskedastic{1.0}),
      std::invalid_argument);

  ReplicatedDesign dup{Mat(2, 1), {1, 1}, Vec(2)};
  dup.inputs << 0.5, 0.5 + 1e-12;
  dup.means << 0.0, 0.0;
  CHECK_THROWS_AS(
      GPModel(dup, KernelParams::isotropic(1, 1.0, 1.0), Homoskedastic{1.0}),
      std::invalid_argument);

  GPModel ok = one_point_model(1.0, 1.0, 1, 0.0);
  CHECK_THROWS_AS(ok.lookahead_sd_new(v1(0.2), 0), std::invalid_argument);
  CHECK_THROWS_AS(ok.add_replicates(3, 1, 0.0), std::invalid_argument);
}
