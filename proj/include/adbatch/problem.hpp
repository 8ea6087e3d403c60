#pragma once

#include <functional>
#include <string>

#include "adbatch/measure.hpp"
#include "adbatch/rng.hpp"
#include "adbatch/sampling.hpp"

namespace adbatch {

// A simulator with its input domain, weighting measure and (for synthetic
// cases) a truth oracle.
struct Problem {
  std::string name;
  int dim = 0;
  Box domain;
  std::function<bool(const Vec&)> feasible;             // null: whole box
  std::function<double(const Vec&)> truth;              // mean response; null when unknown
  std::function<double(const Vec&, RngStream&)> simulate;  // one noisy draw
  Measure measure = UniformOnBox{};
  double known_tau2 = 1.0;  // noise variance used when the metamodel keeps it fixed

  bool has_truth() const { return static_cast<bool>(truth); }
  bool in_domain(const Vec& x) const {
    return domain.contains(x) && (!feasible || feasible(x));
  }
};

}  // namespace adbatch
