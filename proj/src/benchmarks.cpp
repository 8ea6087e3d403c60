#include "adbatch/benchmarks.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

namespace adbatch {

namespace {

// Affine output fixtures, frozen from a 1000x1000 grid over the unit square
// (Branin) and the known Hartman range.
constexpr double kBraninCenter = 111.880352009;
constexpr double kBraninScale = 100.954942236;
constexpr double kHartmanCenter = -1.661184005;
constexpr double kHartmanScale = 1.661184005;

void check_unit_box(const Vec& x, int d) {
  if (x.size() != d) throw std::invalid_argument("benchmark: wrong input dimension");
  for (int j = 0; j < d; ++j) {
    if (!(x[j] >= -1e-9 && x[j] <= 1.0 + 1e-9)) {
      throw std::invalid_argument("benchmark: input outside the unit box");
    }
  }
}

}  // namespace

double branin_mod(const Vec& x) {
  check_unit_box(x, 2);
  // Window of the classic Branin surface above the parabolic valley,
  // oriented so the monotone coordinate is x1: u in [0, 10], v in [6, 15].
  const double u = 10.0 * x[1];
  const double v = 6.0 + 9.0 * x[0];
  const double b = 5.1 / (4.0 * M_PI * M_PI);
  const double c = 5.0 / M_PI;
  const double t = 1.0 / (8.0 * M_PI);
  const double inner = v - b * u * u + c * u - 6.0;
  const double g = inner * inner + 10.0 * (1.0 - t) * std::cos(u) + 10.0;
  return (g - kBraninCenter) / kBraninScale;
}

double hartman6_raw(const Vec& x) {
  check_unit_box(x, 6);
  static const double alpha[4] = {1.0, 1.2, 3.0, 3.2};
  static const double A[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                 {0.05, 10, 17, 0.1, 8, 14},
                                 {3, 3.5, 1.7, 10, 17, 8},
                                 {17, 8, 0.05, 10, 0.1, 14}};
  static const double P[4][6] = {{0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
                                 {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
                                 {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
                                 {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381}};
  double out = 0.0;
  for (int i = 0; i < 4; ++i) {
    double q = 0.0;
    for (int j = 0; j < 6; ++j) {
      const double dz = x[j] - P[i][j];
      q += A[i][j] * dz * dz;
    }
    out -= alpha[i] * std::exp(-q);
  }
  return out;
}

double hartman6_mod(const Vec& x) {
  return (hartman6_raw(x) - kHartmanCenter) / kHartmanScale;
}

double sample_noise(const NoiseSpec& spec, const Vec& x, RngStream& rng) {
  if (spec.kind == NoiseSpec::Kind::Gaussian) {
    return std::sqrt(spec.tau2) * rng.normal();
  }
  const double df = NoiseSpec::het_df(x);
  const double scale = NoiseSpec::het_scale(x);
  return scale * rng.student_t(df);
}

std::vector<double> sample_noise(const NoiseSpec& spec, const Vec& x, long count,
                                 RngStream& rng) {
  std::vector<double> out(static_cast<std::size_t>(count));
  for (auto& v : out) v = sample_noise(spec, x, rng);
  return out;
}

std::vector<std::string> problem_names() {
  return {"branin2d-gauss", "branin2d-hetT", "hartman6"};
}

Problem make_problem(const std::string& name) {
  Problem p;
  p.name = name;
  if (name == "branin2d-gauss" || name == "branin2d-hetT") {
    p.dim = 2;
    p.domain = Box::unit(2);
    p.truth = branin_mod;
    p.measure = UniformOnBox{p.domain};
    const NoiseSpec spec = name == "branin2d-gauss"
                               ? NoiseSpec{NoiseSpec::Kind::Gaussian, 1.0}
                               : NoiseSpec{NoiseSpec::Kind::HetStudentT, 1.0};
    p.simulate = [spec](const Vec& x, RngStream& rng) {
      return branin_mod(x) + sample_noise(spec, x, rng);
    };
    p.known_tau2 = 1.0;
  } else if (name == "hartman6") {
    p.dim = 6;
    p.domain = Box::unit(6);
    p.truth = hartman6_mod;
    p.measure = UniformOnBox{p.domain};
    const NoiseSpec spec{NoiseSpec::Kind::Gaussian, 1.0};
    p.simulate = [spec](const Vec& x, RngStream& rng) {
      return hartman6_mod(x) + sample_noise(spec, x, rng);
    };
    p.known_tau2 = 1.0;
  } else {
    throw std::invalid_argument("unknown problem: " + name +
                                " (available: branin2d-gauss, branin2d-hetT, hartman6)");
  }
  return p;
}

ProblemDefaults default_config(const std::string& problem_name) {
  ProblemDefaults d;
  SchemeConfig& s = d.scheme;
  s.ladder.levels = {5, 10, 15, 20, 30, 40, 50, 60, 80, 100, 140, 180, 240, 300};
  s.cost.theta = {0.137, 8.15e-4, 1.99e-6};
  s.refit_every = 5;
  if (problem_name == "branin2d-gauss" || problem_name == "branin2d-hetT") {
    s.n_total = 2000;
    s.k0 = 20;
    s.r0 = 10;
    s.test_set_size = 500;
    s.test_mode = TestSetMode::UniformLhs;
    s.r_lo = 5;
    s.r_hi = 200;
    s.cost.t_sim = 0.01;
    s.c_bt = 20.0 / 2.0;
  } else if (problem_name == "hartman6") {
    s.n_total = 6000;
    s.k0 = 60;
    s.r0 = 10;
    s.test_set_size = 1000;
    s.test_mode = TestSetMode::Focused8020;
    s.r_lo = 5;
    s.r_hi = 300;
    s.cost.t_sim = 0.05;
    s.c_bt = 20.0 / 6.0;
  } else {
    throw std::invalid_argument("no defaults for problem: " + problem_name);
  }
  d.metamodel.kind = MetamodelConfig::Kind::Gp;
  d.metamodel.tau2 = 1.0;
  d.metamodel.fit_noise = problem_name == "branin2d-hetT";
  return d;
}

SchemeConfig configure_scheme(const ProblemDefaults& defaults, SchemeKind kind) {
  SchemeConfig s = defaults.scheme;
  s.kind = kind;
  s.eta = kind == SchemeKind::RB ? 0.8 : 0.5;
  return s;
}

ExperimentSummary run_experiment(const Problem& problem,
                                 const std::vector<SchemeConfig>& schemes,
                                 const std::vector<MetamodelConfig>& metamodels,
                                 int macro_reps, std::uint64_t seed, int threads) {
  if (macro_reps < 1) throw std::invalid_argument("run_experiment: macro_reps must be >= 1");
  ExperimentSummary summary;
  summary.problem = problem.name;

  struct Task {
    std::size_t cell;
    int rep;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < schemes.size() * metamodels.size(); ++c) {
    for (int r = 0; r < macro_reps; ++r) tasks.push_back({c, r});
  }
  summary.cells.resize(schemes.size() * metamodels.size());
  std::vector<std::vector<RunRecord>> results(summary.cells.size(),
                                              std::vector<RunRecord>(macro_reps));

  const int n_threads = threads > 0
                            ? threads
                            : std::max(1u, std::thread::hardware_concurrency());
  auto worker = [&](int w) {
    for (std::size_t t = static_cast<std::size_t>(w); t < tasks.size(); t += n_threads) {
      const Task& task = tasks[t];
      const std::size_t si = task.cell / metamodels.size();
      const std::size_t mi = task.cell % metamodels.size();
      RunOutcome outcome = run_scheme(problem, schemes[si], metamodels[mi], seed,
                                      static_cast<std::uint64_t>(task.rep));
      results[task.cell][task.rep] = std::move(outcome.record);
    }
  };
  if (n_threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }

  for (std::size_t c = 0; c < summary.cells.size(); ++c) {
    const std::size_t si = c / metamodels.size();
    ExperimentCell& cell = summary.cells[c];
    cell.scheme = scheme_name(schemes[si].kind);
    cell.metamodel = results[c][0].metamodel;
    double er_sum = 0.0, er_sq = 0.0, time_sum = 0.0, kt_sum = 0.0;
    for (const RunRecord& run : results[c]) {
      const double er = run.final_row().error_rate;
      er_sum += er;
      er_sq += er * er;
      time_sum += run.total_seconds;
      kt_sum += static_cast<double>(run.final_row().k);
    }
    const double n = static_cast<double>(macro_reps);
    cell.er_mean = er_sum / n;
    cell.er_sd = macro_reps > 1
                     ? std::sqrt(std::max(0.0, (er_sq - er_sum * er_sum / n) / (n - 1.0)))
                     : 0.0;
    cell.time_mean = time_sum / n;
    cell.kt_mean = kt_sum / n;
    cell.runs = std::move(results[c]);
  }
  return summary;
}

}  // namespace adbatch
