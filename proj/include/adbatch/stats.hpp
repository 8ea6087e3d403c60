#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "adbatch/linalg.hpp"

namespace adbatch {

// Standard normal CDF via erfc; absolute error well under 1e-12.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

// Linear-interpolation quantile (R type 7) of an unsorted sample.
inline double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double interquartile_range(const Vec& v) {
  std::vector<double> s(v.data(), v.data() + v.size());
  return quantile(s, 0.75) - quantile(s, 0.25);
}

inline double mean_of(const Vec& v) { return v.size() ? v.mean() : 0.0; }

}  // namespace adbatch
