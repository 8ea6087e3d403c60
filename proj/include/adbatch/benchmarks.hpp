#pragma once

#include <string>
#include <vector>

#include "adbatch/schemes.hpp"

namespace adbatch {

// Rescaled restricted Branin-Hoo on the unit square: single zero-contour
// curve, output within [-1, 1], monotone increasing in x1.
double branin_mod(const Vec& x);

// Standard 6-D Hartman (textbook constants).
double hartman6_raw(const Vec& x);

// Affinely rescaled Hartman on the unit cube, output within [-1, 1] with the
// zero level set between the basins and the plateau.
double hartman6_mod(const Vec& x);

struct NoiseSpec {
  enum class Kind { Gaussian, HetStudentT };
  Kind kind = Kind::Gaussian;
  double tau2 = 1.0;  // Gaussian variance

  // HetStudentT: t_{6-4x1}(0, (0.4(4x1+1))^2), second parameter = squared scale.
  static double het_df(const Vec& x) { return 6.0 - 4.0 * x[0]; }
  static double het_scale(const Vec& x) { return 0.4 * (4.0 * x[0] + 1.0); }
};

double sample_noise(const NoiseSpec& spec, const Vec& x, RngStream& rng);
std::vector<double> sample_noise(const NoiseSpec& spec, const Vec& x, long count,
                                 RngStream& rng);

// Registry: "branin2d-gauss", "branin2d-hetT", "hartman6".
Problem make_problem(const std::string& name);
std::vector<std::string> problem_names();

// Benchmark defaults for a problem (budget, ladder, cost model, test set).
struct ProblemDefaults {
  SchemeConfig scheme;
  MetamodelConfig metamodel;
};
ProblemDefaults default_config(const std::string& problem_name);

// Scheme-specific tweaks on top of the problem defaults (eta per scheme).
SchemeConfig configure_scheme(const ProblemDefaults& defaults, SchemeKind kind);

struct ExperimentCell {
  std::string scheme;
  std::string metamodel;
  double er_mean = 0.0;
  double er_sd = 0.0;
  double time_mean = 0.0;
  double kt_mean = 0.0;
  std::vector<RunRecord> runs;
};

struct ExperimentSummary {
  std::string problem;
  std::vector<ExperimentCell> cells;
};

// macro_reps independent runs of every (scheme, metamodel) pair; run r uses
// run_index r so all runs share the seed-keyed test set.
ExperimentSummary run_experiment(const Problem& problem,
                                 const std::vector<SchemeConfig>& schemes,
                                 const std::vector<MetamodelConfig>& metamodels,
                                 int macro_reps, std::uint64_t seed, int threads = 0);

}  // namespace adbatch
