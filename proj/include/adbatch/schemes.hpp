#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adbatch/acquisition.hpp"
#include "adbatch/metrics.hpp"
#include "adbatch/problem.hpp"
#include "adbatch/surrogate.hpp"

namespace adbatch {

enum class SchemeKind { FB, MLB, RB, ABSUR, ADSA, DDSA, FDSA };

const char* scheme_name(SchemeKind k);
std::optional<SchemeKind> parse_scheme(const std::string& name);

struct FidelityLadder {
  std::vector<long> levels;  // strictly increasing, >= 1

  void validate() const;
  long lowest() const { return levels.front(); }
  long highest() const { return levels.back(); }
  // Smallest level strictly above r, if any.
  std::optional<long> next_above(long r) const;
};

struct SchemeConfig {
  SchemeKind kind = SchemeKind::FB;
  long n_total = 2000;
  int k0 = 20;
  long r0 = 10;
  FidelityLadder ladder;
  double eta = 0.5;            // threshold reduction factor (MLB 0.5, RB 0.8)
  long r_lo = 5;               // ABSUR replication range
  long r_hi = 0;               // 0: default 0.05 * n_total
  CostModel cost;
  double c_bt = 0.0;           // 0: default 20 / d
  int refit_every = 5;
  int test_set_size = 500;
  TestSetMode test_mode = TestSetMode::UniformLhs;
  AcqOptions acq;
  bool absur_use_mu = true;
  bool rho_adaptive = true;
  double rho_value = 1.0;

  long absur_r_hi() const {
    return r_hi > 0 ? r_hi : std::max<long>(r_lo, static_cast<long>(0.05 * n_total));
  }
  double batch_factor(int dim) const {
    return c_bt > 0.0 ? c_bt : 20.0 / static_cast<double>(dim);
  }
};

// MLB fidelity choice at a candidate with posterior sd s and per-replicate
// noise c; lowers gamma in place while even the lowest fidelity is below it.
long mlb_pick_fidelity(double s, double c, double& gamma, double eta,
                       const FidelityLadder& ladder);

// RB choice: keep the current level or ratchet to the next one.
long rb_pick_fidelity(double s, double c, double& gamma, double eta,
                      const FidelityLadder& ladder, long r_current);

// One-step-ahead sd after an r-batch, from current sd and per-replicate c.
inline double lookahead_sd(double s, double c, double r) {
  const double cr = c / r;
  const double v = s * s * cr / (cr + s * s);
  return std::sqrt(std::max(v, 0.0));
}

struct AllocationResult {
  std::vector<long> dr;  // nonnegative increments per site
  Vec proportional;      // the pre-rounding targets' direction
  long total = 0;
  bool fallback = false;  // proportional-to-r fallback when no positive weight
};

// Pegging: convert the proportional targets (r_i + dr_i proportional to
// weights) into nonnegative integer increments summing to about dr_total.
AllocationResult peg_allocation(const Vec& weights, const std::vector<long>& counts,
                                long dr_total);

struct RoundRow {
  long round = 0;      // n
  long k = 0;          // unique inputs
  long budget = 0;     // N_n
  Vec x;               // chosen input (empty on reallocation rounds)
  long r = 0;          // replicates added at x (0 on reallocation rounds)
  bool realloc = false;
  double criterion = 0.0;
  double error_rate = -1.0;  // -1 when truth unknown
  double band_volume = 0.0;
  double contour_uncertainty = 0.0;
  double seconds = 0.0;  // wall time of this round (non-deterministic)
};

struct RunRecord {
  std::string problem;
  std::string scheme;
  std::string metamodel;
  std::uint64_t seed = 0;
  std::uint64_t run_index = 0;
  std::vector<RoundRow> rows;  // rows[0] is the initial design state
  ReplicatedDesign final_design;
  double total_seconds = 0.0;

  const RoundRow& final_row() const { return rows.back(); }
  long k_at_budget(double fraction) const;
};

struct RunOutcome {
  RunRecord record;
  std::unique_ptr<Surrogate> surrogate;
  TestSet test_set;
};

RunOutcome run_scheme(const Problem& problem, const SchemeConfig& scheme,
                      const MetamodelConfig& metamodel, std::uint64_t seed,
                      std::uint64_t run_index = 0);

}  // namespace adbatch
