#pragma once

#include <vector>

#include "adbatch/problem.hpp"
#include "adbatch/stats.hpp"

namespace adbatch {

// Fixed evaluation grid with quadrature weights summing to mu(D).
struct TestSet {
  Mat points;                    // M x d
  Vec weights;                   // w_j >= 0
  std::vector<int> truth_signs;  // +-1 per point; empty when truth unknown

  long size() const { return points.rows(); }
};

enum class TestSetMode {
  UniformLhs,    // LHS over the domain, mu-weighted
  Focused8020,   // 80% from the band {|f| < 0.7}, 20% from the rest
};

TestSet build_test_set(const Problem& problem, int m, TestSetMode mode, RngStream& rng);

// Classification convention: f > 0 is inside the level set, f = 0 outside.
inline int sign_class(double v) { return v > 0.0 ? 1 : -1; }

// mu-weighted measure of the sign mismatch between prediction and truth.
double error_rate(const Vec& fhat, const TestSet& ts);

// mu-weighted measure of {x : |fhat| < 1.96 s} (ambiguous classification).
double credible_band_volume(const Vec& fhat, const Vec& sd, const TestSet& ts);

// Contour-band weights Phi(-|fhat_j| / s_j) * w_j: the local probability of
// misclassifying the sign at each test point, times its quadrature weight.
Vec adsa_weights(const Vec& fhat, const Vec& sd, const TestSet& ts);

// Sum of adsa_weights * fhat, a per-round diagnostic of contour uncertainty.
double weighted_contour_uncertainty(const Vec& fhat, const Vec& sd, const TestSet& ts);

}  // namespace adbatch
