#include "adbatch/schemes.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace adbatch {

const char* scheme_name(SchemeKind k) {
  switch (k) {
    case SchemeKind::FB: return "fb";
    case SchemeKind::MLB: return "mlb";
    case SchemeKind::RB: return "rb";
    case SchemeKind::ABSUR: return "absur";
    case SchemeKind::ADSA: return "adsa";
    case SchemeKind::DDSA: return "ddsa";
    case SchemeKind::FDSA: return "fdsa";
  }
  return "?";
}

std::optional<SchemeKind> parse_scheme(const std::string& name) {
  for (SchemeKind k : {SchemeKind::FB, SchemeKind::MLB, SchemeKind::RB, SchemeKind::ABSUR,
                       SchemeKind::ADSA, SchemeKind::DDSA, SchemeKind::FDSA}) {
    if (name == scheme_name(k)) return k;
  }
  return std::nullopt;
}

void FidelityLadder::validate() const {
  if (levels.empty()) throw std::invalid_argument("ladder: empty");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 1) throw std::invalid_argument("ladder: levels must be >= 1");
    if (i > 0 && levels[i] <= levels[i - 1]) {
      throw std::invalid_argument("ladder: levels must be strictly increasing");
    }
  }
}

std::optional<long> FidelityLadder::next_above(long r) const {
  for (long level : levels) {
    if (level > r) return level;
  }
  return std::nullopt;
}

long mlb_pick_fidelity(double s, double c, double& gamma, double eta,
                       const FidelityLadder& ladder) {
  if (s <= 0.0) return ladder.lowest();
  // Lower the threshold while even the lowest fidelity undershoots it.
  int guard = 0;
  while (lookahead_sd(s, c, static_cast<double>(ladder.lowest())) < gamma && guard++ < 4096) {
    gamma *= eta;
  }
  // Highest fidelity whose look-ahead sd still clears the threshold.
  for (auto it = ladder.levels.rbegin(); it != ladder.levels.rend(); ++it) {
    if (lookahead_sd(s, c, static_cast<double>(*it)) >= gamma) return *it;
  }
  return ladder.highest();
}

long rb_pick_fidelity(double s, double c, double& gamma, double eta,
                      const FidelityLadder& ladder, long r_current) {
  if (s <= 0.0) return r_current;
  int guard = 0;
  while (lookahead_sd(s, c, static_cast<double>(r_current)) < gamma && guard++ < 4096) {
    gamma *= eta;
  }
  const auto up = ladder.next_above(r_current);
  if (!up) return r_current;  // already at the top level
  return lookahead_sd(s, c, static_cast<double>(*up)) >= gamma ? *up : r_current;
}

namespace {

// Largest-remainder style fixup so the increments sum to exactly dr_total.
void distribute_proportionally(const std::vector<long>& counts, long dr_total,
                               std::vector<long>& dr) {
  const std::size_t k = counts.size();
  double total = 0.0;
  for (long r : counts) total += static_cast<double>(r);
  long assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    dr[i] = std::llround(static_cast<double>(dr_total) * static_cast<double>(counts[i]) / total);
    assigned += dr[i];
  }
  while (assigned > dr_total) {
    auto it = std::max_element(dr.begin(), dr.end());
    if (*it == 0) break;
    --(*it);
    --assigned;
  }
  while (assigned < dr_total) {
    auto it = std::max_element(counts.begin(), counts.end());
    dr[static_cast<std::size_t>(it - counts.begin())] += dr_total - assigned;
    assigned = dr_total;
  }
}

}  // namespace

AllocationResult peg_allocation(const Vec& weights, const std::vector<long>& counts,
                                long dr_total) {
  const std::size_t k = counts.size();
  if (static_cast<std::size_t>(weights.size()) != k) {
    throw std::invalid_argument("peg_allocation: size mismatch");
  }
  if (dr_total < 1) throw std::invalid_argument("peg_allocation: dr_total must be >= 1");

  AllocationResult out;
  out.dr.assign(k, 0);
  out.proportional = weights;

  std::vector<bool> active(k);
  bool any_active = false;
  for (std::size_t i = 0; i < k; ++i) {
    active[i] = weights[i] > 0.0;
    any_active = any_active || active[i];
  }
  if (!any_active) {
    // No positive direction: spread proportionally to current counts.
    distribute_proportionally(counts, dr_total, out.dr);
    out.fallback = true;
    out.total = dr_total;
    return out;
  }

  std::vector<double> delta(k, 0.0);
  for (std::size_t pass = 0; pass <= k; ++pass) {
    double active_r = 0.0, active_w = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (active[i]) {
        active_r += static_cast<double>(counts[i]);
        active_w += weights[i];
      }
    }
    const double target_total = active_r + static_cast<double>(dr_total);
    bool all_nonneg = true;
    for (std::size_t i = 0; i < k; ++i) {
      if (!active[i]) {
        delta[i] = 0.0;
        continue;
      }
      delta[i] = weights[i] / active_w * target_total - static_cast<double>(counts[i]);
      all_nonneg = all_nonneg && delta[i] >= 0.0;
    }
    if (all_nonneg) break;
    for (std::size_t i = 0; i < k; ++i) {
      if (active[i] && delta[i] <= 0.0) active[i] = false;
    }
  }

  long assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    out.dr[i] = active[i] ? std::max<long>(0, std::llround(delta[i])) : 0;
    assigned += out.dr[i];
  }
  if (assigned == 0) {
    // Round the largest fractional increment up to one.
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (active[i] && delta[i] > best) {
        best = delta[i];
        arg = i;
      }
    }
    out.dr[arg] = static_cast<long>(std::ceil(std::max(best, 1e-12)));
    if (out.dr[arg] < 1) out.dr[arg] = 1;
    assigned = out.dr[arg];
  }
  out.total = assigned;
  return out;
}

long RunRecord::k_at_budget(double fraction) const {
  const double target = fraction * static_cast<double>(rows.back().budget);
  for (const RoundRow& row : rows) {
    if (static_cast<double>(row.budget) >= target) return row.k;
  }
  return rows.back().k;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Mat initial_inputs(const Problem& problem, int k0, RngStream& rng) {
  if (!problem.feasible) return latin_hypercube(rng, k0, problem.domain);
  Mat out(k0, problem.dim);
  int have = 0;
  for (int attempt = 0; attempt < 256 && have < k0; ++attempt) {
    const Mat cand = latin_hypercube(rng, k0, problem.domain);
    for (long i = 0; i < cand.rows() && have < k0; ++i) {
      const Vec x = cand.row(i).transpose();
      if (problem.feasible(x)) out.row(have++) = cand.row(i);
    }
  }
  if (have < k0) throw std::runtime_error("initial design: feasible region too small");
  return out;
}

struct TestPosterior {
  Vec mean;
  Vec sd;
};

}  // namespace

RunOutcome run_scheme(const Problem& problem, const SchemeConfig& scheme,
                      const MetamodelConfig& metamodel, std::uint64_t seed,
                      std::uint64_t run_index) {
  if (scheme.n_total <= static_cast<long>(scheme.k0) * scheme.r0) {
    throw std::invalid_argument("run_scheme: budget must exceed the initial design");
  }
  const SchemeKind kind = scheme.kind;
  if (kind == SchemeKind::MLB || kind == SchemeKind::RB) scheme.ladder.validate();
  if (kind == SchemeKind::ABSUR) scheme.cost.validate(scheme.n_total);

  const int d = problem.dim;
  const Domain domain{problem.domain, problem.feasible};

  RunOutcome out;
  out.record.problem = problem.name;
  out.record.scheme = scheme_name(kind);
  out.record.seed = seed;
  out.record.run_index = run_index;

  // Test set shared by metrics, the rho schedule and the allocation weights.
  {
    RngStream ts_rng = RngStream::from(seed, {stream::kTestSet});
    out.test_set = build_test_set(problem, scheme.test_set_size, scheme.test_mode, ts_rng);
  }
  const TestSet& ts = out.test_set;

  const auto t_start = Clock::now();

  // Initial space-filling design with r0 replicates per site.
  ReplicatedDesign design;
  {
    RngStream init_rng = RngStream::from(seed, {run_index, 0, stream::kInitDesign});
    RngStream sim_rng = RngStream::from(seed, {run_index, 0, stream::kSimulate});
    const Mat x0 = initial_inputs(problem, scheme.k0, init_rng);
    design = ReplicatedDesign{x0, std::vector<long>(scheme.k0, scheme.r0), Vec(scheme.k0)};
    for (int i = 0; i < scheme.k0; ++i) {
      double sum = 0.0;
      for (long j = 0; j < scheme.r0; ++j) {
        sum += problem.simulate(x0.row(i).transpose(), sim_rng);
      }
      design.means[i] = sum / static_cast<double>(scheme.r0);
    }
  }

  std::unique_ptr<Surrogate> model = make_surrogate(std::move(design), metamodel);
  {
    RngStream fit_rng = RngStream::from(seed, {run_index, 0, stream::kFitStarts});
    model->refit(fit_rng, /*initial=*/true);
  }
  out.record.metamodel = model->describe();

  long n_budget = static_cast<long>(scheme.k0) * scheme.r0;
  long round = scheme.k0;
  long r_current = scheme.r0;  // RB ratchet state
  double gamma = 0.0;
  if (kind == SchemeKind::MLB || kind == SchemeKind::RB) {
    Vec m0, s0;
    model->posterior_batch(model->design().inputs, m0, s0);
    gamma = mean_of(s0);
  }

  auto eval_test = [&]() {
    TestPosterior tp;
    model->posterior_batch(ts.points, tp.mean, tp.sd);
    return tp;
  };

  auto fill_metrics = [&](RoundRow& row, const TestPosterior& tp) {
    row.error_rate = ts.truth_signs.empty() ? -1.0 : error_rate(tp.mean, ts);
    row.band_volume = credible_band_volume(tp.mean, tp.sd, ts);
    row.contour_uncertainty = weighted_contour_uncertainty(tp.mean, tp.sd, ts);
  };

  // rows[0]: the initial state.  Metrics of later rows are filled from the
  // next round's posterior evaluation (same model state, computed once).
  {
    RoundRow row;
    row.round = round;
    row.k = model->k();
    row.budget = n_budget;
    row.seconds = seconds_since(t_start);
    out.record.rows.push_back(row);
  }
  bool pending_metrics = true;

  const double c_bt = scheme.batch_factor(d);
  const long absur_rhi = scheme.absur_r_hi();

  while (n_budget < scheme.n_total) {
    const auto t_round = Clock::now();
    ++round;

    // Hyperparameter refit on the configured cadence.
    const bool refit_due = (round - scheme.k0) % scheme.refit_every == 0;
    if (refit_due && pending_metrics) {
      fill_metrics(out.record.rows.back(), eval_test());
      pending_metrics = false;
    }
    if (refit_due) {
      RngStream fit_rng =
          RngStream::from(seed, {run_index, static_cast<std::uint64_t>(round), stream::kFitStarts});
      model->refit(fit_rng, /*initial=*/false);
    }

    const TestPosterior tp = eval_test();
    if (pending_metrics) {
      fill_metrics(out.record.rows.back(), tp);
      pending_metrics = false;
    }

    const double rho = scheme.rho_adaptive ? rho_weight(tp.mean, tp.sd) : scheme.rho_value;
    RngStream cand_rng =
        RngStream::from(seed, {run_index, static_cast<std::uint64_t>(round), stream::kCandidates});
    RngStream sim_rng =
        RngStream::from(seed, {run_index, static_cast<std::uint64_t>(round), stream::kSimulate});
    const long remaining = scheme.n_total - n_budget;

    auto cucb_criterion = [&](const Vec& x) {
      const auto [fhat, s] = model->posterior(x);
      return cucb(fhat, s, rho, measure_density(problem.measure, x));
    };
    auto simulate_batch = [&](const Vec& x, long r) {
      double sum = 0.0;
      for (long j = 0; j < r; ++j) sum += problem.simulate(x, sim_rng);
      return sum / static_cast<double>(r);
    };

    RoundRow row;
    row.round = round;

    if (kind == SchemeKind::FB || kind == SchemeKind::MLB || kind == SchemeKind::RB) {
      const auto [x, crit] = optimize_acquisition(cucb_criterion, domain, scheme.acq, cand_rng);
      long r = scheme.r0;
      if (kind != SchemeKind::FB) {
        const auto [fhat, s] = model->posterior(x);
        (void)fhat;
        const double c = model->noise_c(x);
        r = kind == SchemeKind::MLB
                ? mlb_pick_fidelity(s, c, gamma, scheme.eta, scheme.ladder)
                : rb_pick_fidelity(s, c, gamma, scheme.eta, scheme.ladder, r_current);
        if (kind == SchemeKind::RB) r_current = r;
      }
      r = std::min(r, remaining);
      const double ybar = simulate_batch(x, r);
      model->append_batch(x, r, ybar);
      n_budget += r;
      row.x = x;
      row.r = r;
      row.criterion = crit;
    } else if (kind == SchemeKind::ABSUR) {
      XrCriterion crit;
      crit.stats = [&](const Vec& x) {
        const auto [fhat, s] = model->posterior(x);
        const double mu = scheme.absur_use_mu ? measure_density(problem.measure, x) : 1.0;
        return XrStats{fhat, s, mu, model->noise_c(x)};
      };
      const long k_now = model->k();
      crit.value = [&, k_now](const XrStats& st, double r) {
        const double s_next = lookahead_sd(st.s, st.aux, r);
        return gsur(st.fhat, st.s, s_next, st.mu) / (r * scheme.cost.t_sim + scheme.cost.overhead(k_now));
      };
      XrResult res = optimize_acquisition_xr(crit, domain, scheme.r_lo, absur_rhi,
                                             scheme.acq, cand_rng);
      const long r = std::min(res.r, remaining);
      const double ybar = simulate_batch(res.x, r);
      model->append_batch(res.x, r, ybar);
      n_budget += r;
      row.x = res.x;
      row.r = r;
      row.criterion = res.value;
    } else {
      // ADSA / DDSA / FDSA: allocate over existing sites or add a new input.
      long dr_total = std::max<long>(1, std::llround(c_bt * std::sqrt(static_cast<double>(round))));
      dr_total = std::min(dr_total, remaining);

      bool add_new = false;
      Vec x_new;
      double crit_new = 0.0;
      AllocationResult alloc;

      const bool need_alloc = kind != SchemeKind::DDSA || round % 2 == 0;
      const bool need_new = kind == SchemeKind::ADSA || (kind == SchemeKind::DDSA && round % 2 == 1);

      if (need_alloc) {
        const Vec omega = adsa_weights(tp.mean, tp.sd, ts);
        const Mat kstar =
            kernel_cross_matrix(ts.points, model->design().inputs, model->kernel_params());
        const Vec u = model->alloc_vector(kstar, omega);
        const Vec scale = model->alloc_site_scale();
        alloc = peg_allocation(u.cwiseProduct(scale), model->design().counts, dr_total);
      }
      if (need_new) {
        const auto [x, crit] = optimize_acquisition(cucb_criterion, domain, scheme.acq, cand_rng);
        x_new = x;
        crit_new = crit;
      }

      if (kind == SchemeKind::ADSA) {
        const Vec omega = adsa_weights(tp.mean, tp.sd, ts);
        const Vec var_all = model->lookahead_var_realloc(alloc.dr, ts.points);
        const double i_all = var_all.dot(omega);
        const auto [fn, sn] = model->posterior(x_new);
        (void)fn;
        const Vec cov = model->posterior_cov_batch(ts.points, x_new);
        const double c_new = model->noise_c(x_new) / static_cast<double>(dr_total);
        double i_new = 0.0;
        for (long j = 0; j < ts.size(); ++j) {
          const double v2 = cov[j] * cov[j];
          i_new += omega[j] * std::max(tp.sd[j] * tp.sd[j] - v2 / (c_new + sn * sn), 0.0);
        }
        add_new = i_all >= i_new;  // ties favor exploration
        row.criterion = crit_new;
      } else if (kind == SchemeKind::DDSA) {
        add_new = round % 2 == 1;
        row.criterion = add_new ? crit_new : 0.0;
      } else {
        add_new = false;
      }

      if (add_new) {
        const double ybar = simulate_batch(x_new, dr_total);
        model->append_batch(x_new, dr_total, ybar);
        n_budget += dr_total;
        row.x = x_new;
        row.r = dr_total;
      } else {
        // Clip the pegged increments into the remaining budget.
        long total = 0;
        for (long inc : alloc.dr) total += inc;
        while (total > remaining) {
          auto it = std::max_element(alloc.dr.begin(), alloc.dr.end());
          --(*it);
          --total;
        }
        if (total == 0) {
          // Budget tail: put the last simulations on the strongest site.
          std::size_t arg = 0;
          double best = -std::numeric_limits<double>::infinity();
          for (long i = 0; i < alloc.proportional.size(); ++i) {
            if (alloc.proportional[i] > best) {
              best = alloc.proportional[i];
              arg = static_cast<std::size_t>(i);
            }
          }
          alloc.dr[arg] = remaining < 1 ? 1 : std::min<long>(remaining, 1);
          total = alloc.dr[arg];
        }
        for (std::size_t i = 0; i < alloc.dr.size(); ++i) {
          if (alloc.dr[i] <= 0) continue;
          const Vec xi = model->design().inputs.row(static_cast<long>(i)).transpose();
          double sum = 0.0;
          for (long j = 0; j < alloc.dr[i]; ++j) sum += problem.simulate(xi, sim_rng);
          model->add_replicates(static_cast<long>(i), alloc.dr[i], sum);
        }
        n_budget += total;
        row.realloc = true;
      }
    }

    row.k = model->k();
    row.budget = n_budget;
    row.seconds = seconds_since(t_round);
    out.record.rows.push_back(row);
    pending_metrics = true;
  }

  if (pending_metrics) {
    fill_metrics(out.record.rows.back(), eval_test());
  }
  out.record.final_design = model->design();
  out.record.total_seconds = seconds_since(t_start);
  out.surrogate = std::move(model);
  return out;
}

}  // namespace adbatch
