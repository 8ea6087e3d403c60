#include "adbatch/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "adbatch/benchmarks.hpp"
#include "adbatch/io.hpp"
#include "adbatch/optstop.hpp"

namespace adbatch::cli {

namespace fs = std::filesystem;
using nlohmann::json;

const std::map<std::string, std::vector<std::string>>& config_schema() {
  static const std::map<std::string, std::vector<std::string>> schema = {
      {"problem", {"name"}},
      {"scheme",
       {"scheme", "eta", "ladder", "r_lo", "r_hi", "t_sim", "theta", "c_bt",
        "refit_every", "candidates", "polish", "absur_use_mu", "rho_adaptive",
        "rho_value"}},
      {"metamodel", {"kind", "fit_noise", "tau2"}},
      {"budget", {"n_total", "k0", "r0"}},
      {"run", {"macro_reps", "seed", "threads", "test_size"}},
      {"output", {"dir"}},
      {"optstop",
       {"option", "strike", "rate", "sigma", "dt", "horizon", "z0", "n_paths"}},
  };
  return schema;
}

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

void apply_scheme_overrides(SchemeConfig& s, const Config& cfg) {
  s.eta = cfg.get_double("scheme", "eta", s.eta);
  const auto ladder = cfg.get_list("scheme", "ladder");
  if (!ladder.empty()) {
    s.ladder.levels.clear();
    for (double v : ladder) s.ladder.levels.push_back(static_cast<long>(v));
  }
  s.r_lo = cfg.get_long("scheme", "r_lo", s.r_lo);
  s.r_hi = cfg.get_long("scheme", "r_hi", s.r_hi);
  s.cost.t_sim = cfg.get_double("scheme", "t_sim", s.cost.t_sim);
  const auto theta = cfg.get_list("scheme", "theta");
  if (theta.size() == 3) s.cost.theta = {theta[0], theta[1], theta[2]};
  s.c_bt = cfg.get_double("scheme", "c_bt", s.c_bt);
  s.refit_every = static_cast<int>(cfg.get_long("scheme", "refit_every", s.refit_every));
  s.acq.n_candidates = static_cast<int>(cfg.get_long("scheme", "candidates", s.acq.n_candidates));
  s.acq.polish_evals = static_cast<int>(cfg.get_long("scheme", "polish", s.acq.polish_evals));
  s.absur_use_mu = cfg.get_bool("scheme", "absur_use_mu", s.absur_use_mu);
  s.rho_adaptive = cfg.get_bool("scheme", "rho_adaptive", s.rho_adaptive);
  s.rho_value = cfg.get_double("scheme", "rho_value", s.rho_value);
  s.n_total = cfg.get_long("budget", "n_total", s.n_total);
  s.k0 = static_cast<int>(cfg.get_long("budget", "k0", s.k0));
  s.r0 = cfg.get_long("budget", "r0", s.r0);
  s.test_set_size = static_cast<int>(cfg.get_long("run", "test_size", s.test_set_size));
}

MetamodelConfig metamodel_from_config(const Config& cfg, MetamodelConfig base,
                                      const std::string& kind) {
  if (kind == "gp") {
    base.kind = MetamodelConfig::Kind::Gp;
  } else if (kind == "tgp") {
    base.kind = MetamodelConfig::Kind::Tgp;
  } else {
    throw std::invalid_argument("unknown metamodel kind: " + kind + " (use gp or tgp)");
  }
  base.fit_noise = cfg.get_bool("metamodel", "fit_noise", base.fit_noise);
  base.tau2 = cfg.get_double("metamodel", "tau2", base.tau2);
  return base;
}

std::vector<SchemeKind> scheme_list(const Config& cfg) {
  const std::string spec = cfg.get_or("scheme", "scheme", "fb");
  std::vector<SchemeKind> kinds;
  for (const std::string& name : split_csv(spec)) {
    const auto kind = parse_scheme(name);
    if (!kind) {
      throw std::invalid_argument(
          "unknown scheme: " + name + " (valid: fb, mlb, rb, absur, adsa, ddsa, fdsa)");
    }
    kinds.push_back(*kind);
  }
  if (kinds.empty()) throw std::invalid_argument("scheme list is empty");
  return kinds;
}

fs::path resolve_out_dir(const RunArgs& args, const Config& cfg) {
  std::string dir;
  if (args.out_dir) {
    dir = *args.out_dir;
  } else if (const auto v = cfg.get("output", "dir")) {
    dir = *v;
  } else {
    throw std::invalid_argument(
        "missing required key output.dir (defaults: every other key is optional; "
        "problem.name selects Table-style defaults for budget, ladder, cost and test set)");
  }
  fs::path p(dir);
  if (p.is_relative()) {
    if (const char* root = std::getenv("ADBATCH_OUT_ROOT")) p = fs::path(root) / p;
  }
  return p;
}

int run_synthetic(const RunArgs& args, Config& cfg, const fs::path& out_dir,
                  std::uint64_t seed, int macro_reps, int threads) {
  const auto name = cfg.get("problem", "name");
  if (!name) {
    throw std::invalid_argument(
        "missing required key problem.name (available: branin2d-gauss, branin2d-hetT, "
        "hartman6); all other keys default per problem");
  }
  const Problem problem = make_problem(*name);
  const ProblemDefaults defaults = default_config(*name);

  std::vector<SchemeConfig> schemes;
  for (SchemeKind kind : scheme_list(cfg)) {
    SchemeConfig s = configure_scheme(defaults, kind);
    apply_scheme_overrides(s, cfg);
    schemes.push_back(s);
  }
  std::vector<MetamodelConfig> metamodels;
  for (const std::string& kind : split_csv(cfg.get_or("metamodel", "kind", "gp"))) {
    metamodels.push_back(metamodel_from_config(cfg, defaults.metamodel, kind));
  }

  const ExperimentSummary summary =
      run_experiment(problem, schemes, metamodels, macro_reps, seed, threads);

  json j;
  j["schema_version"] = 1;
  j["mode"] = "synthetic";
  j["problem"] = summary.problem;
  j["seed"] = seed;
  j["macro_reps"] = macro_reps;
  j["cells"] = json::array();

  std::ostringstream table;
  table << "scheme,metamodel,er_mean,er_sd,time_mean_s,kt_mean\n";
  for (const ExperimentCell& cell : summary.cells) {
    table << cell.scheme << "," << cell.metamodel << "," << format_double(cell.er_mean)
          << "," << format_double(cell.er_sd) << "," << format_double(cell.time_mean)
          << "," << format_double(cell.kt_mean) << "\n";
    json jc;
    jc["scheme"] = cell.scheme;
    jc["metamodel"] = cell.metamodel;
    jc["er_mean"] = cell.er_mean;
    jc["er_sd"] = cell.er_sd;
    jc["time_mean_s"] = cell.time_mean;
    jc["kt_mean"] = cell.kt_mean;
    jc["runs"] = json::array();
    for (std::size_t r = 0; r < cell.runs.size(); ++r) {
      const RunRecord& run = cell.runs[r];
      const std::string tag = cell.scheme + "_" + std::to_string(r);
      const std::string run_rel = "runs/" + tag + ".csv";
      const std::string design_rel = "design/" + tag + ".csv";
      write_text_file((out_dir / run_rel).string(), run_record_csv(run));
      write_text_file((out_dir / design_rel).string(), design_csv(run.final_design));
      json jr;
      jr["error_rate"] = run.final_row().error_rate;
      jr["k_t"] = run.final_row().k;
      jr["n_t"] = run.final_row().budget;
      jr["seconds_wall"] = run.total_seconds;
      jr["csv"] = run_rel;
      jr["design_csv"] = design_rel;
      jc["runs"].push_back(jr);
    }
    j["cells"].push_back(jc);
  }
  write_text_file((out_dir / "summary.json").string(), j.dump(2) + "\n");
  write_text_file((out_dir / "table.csv").string(), table.str());
  std::cout << table.str();
  std::cout << "wrote " << (out_dir / "summary.json").string() << "\n";
  return 0;
}

int run_optstop(const RunArgs& args, Config& cfg, const fs::path& out_dir,
                std::uint64_t seed, int macro_reps, int threads) {
  (void)args;
  const std::string option = cfg.get_or("optstop", "option", "amput2d");
  OptstopSetup setup = optstop_preset(option);
  setup.gbm.rate = cfg.get_double("optstop", "rate", setup.gbm.rate);
  setup.payoff.rate = setup.gbm.rate;
  setup.payoff.strike = cfg.get_double("optstop", "strike", setup.payoff.strike);
  const double sigma = cfg.get_double("optstop", "sigma", std::sqrt(setup.gbm.cov(0, 0)));
  setup.gbm.cov = sigma * sigma * Mat::Identity(setup.gbm.dim, setup.gbm.dim);
  setup.gbm.dt = cfg.get_double("optstop", "dt", setup.gbm.dt);
  setup.gbm.horizon = cfg.get_double("optstop", "horizon", setup.gbm.horizon);
  const auto z0 = cfg.get_list("optstop", "z0");
  if (!z0.empty()) {
    if (static_cast<int>(z0.size()) != setup.gbm.dim) {
      throw std::invalid_argument("optstop.z0 has wrong dimension");
    }
    for (int i = 0; i < setup.gbm.dim; ++i) setup.gbm.z0[i] = z0[static_cast<std::size_t>(i)];
  }
  setup.n_paths = cfg.get_long("optstop", "n_paths", setup.n_paths);

  std::vector<MetamodelConfig> metamodels;
  for (const std::string& kind : split_csv(cfg.get_or("metamodel", "kind", "gp"))) {
    metamodels.push_back(metamodel_from_config(cfg, setup.metamodel, kind));
  }
  std::vector<SchemeConfig> schemes;
  for (SchemeKind kind : scheme_list(cfg)) {
    SchemeConfig s = setup.scheme;
    s.kind = kind;
    s.eta = kind == SchemeKind::RB ? 0.8 : 0.5;
    apply_scheme_overrides(s, cfg);
    schemes.push_back(s);
  }

  struct Task {
    std::size_t scheme;
    std::size_t model;
    int rep;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < schemes.size(); ++s) {
    for (std::size_t m = 0; m < metamodels.size(); ++m) {
      for (int rep = 0; rep < macro_reps; ++rep) tasks.push_back({s, m, rep});
    }
  }
  struct Result {
    double value = 0.0, se = 0.0, seconds = 0.0;
    std::vector<long> k_per_date;
    std::vector<double> fit_seconds;
  };
  std::vector<Result> results(tasks.size());
  const int n_threads =
      threads > 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
  auto worker = [&](int w) {
    for (std::size_t t = static_cast<std::size_t>(w); t < tasks.size(); t += n_threads) {
      const Task& task = tasks[t];
      const auto t0 = std::chrono::steady_clock::now();
      const std::uint64_t rep_seed =
          split_mix64(seed + 0x100001b3ULL * static_cast<std::uint64_t>(task.rep + 1));
      const StoppingPolicy policy = fit_policy(setup.gbm, setup.payoff, schemes[task.scheme],
                                               metamodels[task.model], rep_seed);
      const auto [value, se] = policy_value(policy, setup.n_paths, rep_seed);
      Result& res = results[t];
      res.value = value;
      res.se = se;
      res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      for (const auto& rule : policy.rules) {
        res.k_per_date.push_back(rule.terminal_k);
        res.fit_seconds.push_back(rule.fit_seconds);
      }
    }
  };
  if (n_threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }

  json j;
  j["schema_version"] = 1;
  j["mode"] = "optstop";
  j["option"] = option;
  j["seed"] = seed;
  j["n_paths"] = setup.n_paths;
  j["cells"] = json::array();
  std::ostringstream table;
  table << "scheme,metamodel,value_mean,value_sd,se_mean,time_mean_s,kt_date_mean\n";
  for (std::size_t s = 0; s < schemes.size(); ++s) {
    for (std::size_t m = 0; m < metamodels.size(); ++m) {
      json jc;
      jc["scheme"] = scheme_name(schemes[s].kind);
      jc["metamodel"] = metamodels[m].kind == MetamodelConfig::Kind::Gp ? "gp" : "tgp";
      jc["reps"] = json::array();
      double v_sum = 0.0, v_sq = 0.0, se_sum = 0.0, t_sum = 0.0, k_sum = 0.0;
      int count = 0;
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (tasks[t].scheme != s || tasks[t].model != m) continue;
        const Result& res = results[t];
        json jr;
        jr["value"] = res.value;
        jr["se"] = res.se;
        jr["seconds_wall"] = res.seconds;
        jr["k_per_date"] = res.k_per_date;
        jr["fit_seconds_per_date"] = res.fit_seconds;
        jc["reps"].push_back(jr);
        v_sum += res.value;
        v_sq += res.value * res.value;
        se_sum += res.se;
        t_sum += res.seconds;
        double ks = 0.0;
        for (long k : res.k_per_date) ks += static_cast<double>(k);
        k_sum += res.k_per_date.empty() ? 0.0 : ks / static_cast<double>(res.k_per_date.size());
        ++count;
      }
      const double n = std::max(1, count);
      jc["value_mean"] = v_sum / n;
      jc["value_sd"] =
          count > 1 ? std::sqrt(std::max(0.0, (v_sq - v_sum * v_sum / n) / (n - 1.0))) : 0.0;
      jc["se_mean"] = se_sum / n;
      jc["time_mean_s"] = t_sum / n;
      jc["kt_date_mean"] = k_sum / n;
      table << jc["scheme"].get<std::string>() << "," << jc["metamodel"].get<std::string>()
            << "," << format_double(jc["value_mean"].get<double>()) << ","
            << format_double(jc["value_sd"].get<double>()) << ","
            << format_double(jc["se_mean"].get<double>()) << ","
            << format_double(jc["time_mean_s"].get<double>()) << ","
            << format_double(jc["kt_date_mean"].get<double>()) << "\n";
      j["cells"].push_back(jc);
    }
  }
  write_text_file((out_dir / "summary.json").string(), j.dump(2) + "\n");
  write_text_file((out_dir / "table.csv").string(), table.str());
  std::cout << table.str();
  std::cout << "wrote " << (out_dir / "summary.json").string() << "\n";
  return 0;
}

}  // namespace

int cmd_run(const RunArgs& args) {
  Config cfg = Config::parse_file(args.config_path);
  for (const std::string& ov : args.overrides) cfg.apply_override(ov, config_schema());
  cfg.validate_keys(config_schema());

  const std::uint64_t seed =
      args.seed ? *args.seed
                : static_cast<std::uint64_t>(cfg.get_long("run", "seed", 1));
  cfg.set("run", "seed", std::to_string(seed));
  const int macro_reps = static_cast<int>(cfg.get_long("run", "macro_reps", 1));
  const int threads = args.threads > 0
                          ? args.threads
                          : static_cast<int>(cfg.get_long("run", "threads", 0));

  const fs::path out_dir = resolve_out_dir(args, cfg);
  if (fs::exists(out_dir) && !args.force) {
    std::cerr << "output directory exists: " << out_dir
              << " (pass --force to overwrite)\n";
    return 2;
  }
  fs::create_directories(out_dir);
  write_text_file((out_dir / "config.cfg").string(), cfg.serialize());

  if (cfg.has_section("optstop")) {
    return run_optstop(args, cfg, out_dir, seed, macro_reps, threads);
  }
  return run_synthetic(args, cfg, out_dir, seed, macro_reps, threads);
}

int cmd_report(const std::string& run_dir) {
  const fs::path dir(run_dir);
  std::ifstream in(dir / "summary.json");
  if (!in) {
    std::cerr << "no summary.json under " << run_dir << "\n";
    return 2;
  }
  json j;
  in >> j;
  if (j.value("mode", "") == "optstop") {
    std::ostringstream k_csv;
    k_csv << "scheme,metamodel,rep,date_index,k_t\n";
    for (const auto& cell : j["cells"]) {
      int rep = 0;
      for (const auto& run : cell["reps"]) {
        const auto& ks = run["k_per_date"];
        for (std::size_t d = 0; d < ks.size(); ++d) {
          k_csv << cell["scheme"].get<std::string>() << ","
                << cell["metamodel"].get<std::string>() << "," << rep << "," << (d + 1)
                << "," << ks[d].get<long>() << "\n";
        }
        ++rep;
      }
    }
    write_text_file((dir / "k_per_date.csv").string(), k_csv.str());
    std::cout << "wrote " << (dir / "k_per_date.csv").string() << "\n";
    return 0;
  }

  std::ostringstream er_n, er_t, k_n, dump;
  er_n << "scheme,metamodel,rep,N,error_rate\n";
  er_t << "scheme,metamodel,rep,seconds_wall,error_rate\n";
  k_n << "scheme,metamodel,rep,N,k\n";
  bool dump_header = false;
  for (const auto& cell : j["cells"]) {
    const std::string scheme = cell["scheme"].get<std::string>();
    const std::string model = cell["metamodel"].get<std::string>();
    int rep = 0;
    for (const auto& run : cell["runs"]) {
      std::ifstream rcsv(dir / run["csv"].get<std::string>());
      if (!rcsv) {
        std::cerr << "missing run csv " << run["csv"] << "\n";
        return 2;
      }
      std::ostringstream buf;
      buf << rcsv.rdbuf();
      const std::vector<RoundRow> rows = parse_run_csv(buf.str());
      double cum_t = 0.0;
      for (const RoundRow& row : rows) {
        cum_t += row.seconds;
        er_n << scheme << "," << model << "," << rep << "," << row.budget << ","
             << format_double(row.error_rate) << "\n";
        er_t << scheme << "," << model << "," << rep << "," << format_double(cum_t) << ","
             << format_double(row.error_rate) << "\n";
        k_n << scheme << "," << model << "," << rep << "," << row.budget << "," << row.k
            << "\n";
      }
      std::ifstream dcsv(dir / run["design_csv"].get<std::string>());
      if (dcsv) {
        std::string line;
        bool first = true;
        while (std::getline(dcsv, line)) {
          if (line.empty()) continue;
          if (first) {
            if (!dump_header) {
              dump << "scheme,metamodel,rep," << line << "\n";
              dump_header = true;
            }
            first = false;
            continue;
          }
          dump << scheme << "," << model << "," << rep << "," << line << "\n";
        }
      }
      ++rep;
    }
  }
  write_text_file((dir / "er_vs_N.csv").string(), er_n.str());
  write_text_file((dir / "er_vs_time.csv").string(), er_t.str());
  write_text_file((dir / "k_vs_N.csv").string(), k_n.str());
  write_text_file((dir / "design_dump.csv").string(), dump.str());
  std::cout << "wrote er_vs_N.csv, er_vs_time.csv, k_vs_N.csv, design_dump.csv under "
            << run_dir << "\n";
  return 0;
}

int cmd_calibrate_overhead(const std::string& problem_name, int threads) {
  (void)threads;
  const Problem problem = make_problem(problem_name);
  const ProblemDefaults defaults = default_config(problem_name);
  RngStream rng = RngStream::from(7, {stream::kMisc});

  std::vector<std::pair<long, double>> samples;
  for (long k : {25L, 50L, 100L, 200L, 400L}) {
    // Random replicated design of size k.
    ReplicatedDesign d{latin_hypercube(rng, static_cast<int>(k), problem.domain),
                       std::vector<long>(static_cast<std::size_t>(k), 2), Vec(k)};
    for (long i = 0; i < k; ++i) {
      d.means[i] = problem.simulate(d.inputs.row(i).transpose(), rng);
    }
    auto model = make_surrogate(d, defaults.metamodel);
    const auto t0 = std::chrono::steady_clock::now();
    model->refit(rng, /*initial=*/false);
    Vec tm, tsd;
    const Mat probe = latin_hypercube(rng, 128, problem.domain);
    model->posterior_batch(probe, tm, tsd);
    const double rho = rho_weight(tm, tsd);
    Domain dom{problem.domain, problem.feasible};
    optimize_acquisition(
        [&](const Vec& x) {
          const auto [fhat, s] = model->posterior(x);
          return cucb(fhat, s, rho, measure_density(problem.measure, x));
        },
        dom, AcqOptions{}, rng);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    samples.push_back({k, secs});
    std::cout << "k=" << k << " refit+acquisition seconds=" << format_double(secs) << "\n";
  }
  double r2 = 0.0;
  const auto theta = fit_overhead_quadratic(samples, &r2);

  const auto t0 = std::chrono::steady_clock::now();
  const int n_draws = 2000;
  Vec mid = 0.5 * (problem.domain.lo + problem.domain.hi);
  double acc = 0.0;
  for (int i = 0; i < n_draws; ++i) acc += problem.simulate(mid, rng);
  (void)acc;
  const double t_sim =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / n_draws;

  json j;
  j["theta"] = {theta[0], theta[1], theta[2]};
  j["r_squared"] = r2;
  j["t_sim_seconds"] = t_sim;
  j["units"] = "seconds";
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace adbatch::cli
