#include "adbatch/metrics.hpp"

#include <stdexcept>

namespace adbatch {

namespace {

// Uniform draw in the box, respecting the feasibility mask.
Vec feasible_draw(const Problem& p, RngStream& rng, long max_tries = 1000000) {
  for (long t = 0; t < max_tries; ++t) {
    Vec x(p.dim);
    for (int j = 0; j < p.dim; ++j) x[j] = rng.uniform(p.domain.lo[j], p.domain.hi[j]);
    if (!p.feasible || p.feasible(x)) return x;
  }
  throw std::runtime_error("test set: feasible region not found by rejection sampling");
}

}  // namespace

TestSet build_test_set(const Problem& problem, int m, TestSetMode mode, RngStream& rng) {
  if (m <= 0) throw std::invalid_argument("test set: size must be positive");
  TestSet ts;
  ts.points.resize(m, problem.dim);
  ts.weights.resize(m);

  if (mode == TestSetMode::UniformLhs && !problem.feasible) {
    ts.points = latin_hypercube(rng, m, problem.domain);
    const double vol = problem.domain.volume();
    for (int j = 0; j < m; ++j) {
      ts.weights[j] = measure_density(problem.measure, ts.points.row(j).transpose()) * vol /
                      static_cast<double>(m);
    }
  } else if (mode == TestSetMode::UniformLhs) {
    // Masked domain: rejection sampling with a volume correction.
    long drawn = 0, kept = 0;
    for (int j = 0; j < m; ++j) {
      for (;;) {
        ++drawn;
        Vec x(problem.dim);
        for (int t = 0; t < problem.dim; ++t) {
          x[t] = rng.uniform(problem.domain.lo[t], problem.domain.hi[t]);
        }
        if (problem.feasible(x)) {
          ts.points.row(j) = x.transpose();
          ++kept;
          break;
        }
        if (drawn > 1000000 && kept == 0) {
          throw std::runtime_error("test set: feasible region not found");
        }
      }
    }
    const double vol_feasible =
        problem.domain.volume() * static_cast<double>(kept) / static_cast<double>(drawn);
    for (int j = 0; j < m; ++j) {
      ts.weights[j] = measure_density(problem.measure, ts.points.row(j).transpose()) *
                      vol_feasible / static_cast<double>(m);
    }
  } else {
    if (!problem.has_truth()) {
      throw std::invalid_argument("test set: focused mode needs a truth oracle");
    }
    const int m_band = static_cast<int>(0.8 * m);
    const int m_rest = m - m_band;
    long band_draws = 0, band_hits = 0;
    for (int j = 0; j < m_band; ++j) {
      for (;;) {
        ++band_draws;
        if (band_draws > 1000000 && band_hits == 0) {
          throw std::runtime_error("test set: band {|f|<0.7} appears empty");
        }
        const Vec x = feasible_draw(problem, rng);
        if (std::abs(problem.truth(x)) < 0.7) {
          ts.points.row(j) = x.transpose();
          ++band_hits;
          break;
        }
      }
    }
    long rest_draws = 0, rest_hits = 0;
    for (int j = 0; j < m_rest; ++j) {
      for (;;) {
        ++rest_draws;
        if (rest_draws > 1000000 && rest_hits == 0) {
          throw std::runtime_error("test set: complement of the band appears empty");
        }
        const Vec x = feasible_draw(problem, rng);
        if (std::abs(problem.truth(x)) >= 0.7) {
          ts.points.row(m_band + j) = x.transpose();
          ++rest_hits;
          break;
        }
      }
    }
    // Region volumes estimated from the rejection rates.
    const double vol = problem.domain.volume();
    const double frac_band = static_cast<double>(band_hits) / static_cast<double>(band_draws);
    const double vol_band = vol * frac_band;
    const double vol_rest = vol - vol_band;
    for (int j = 0; j < m_band; ++j) {
      ts.weights[j] = measure_density(problem.measure, ts.points.row(j).transpose()) *
                      vol_band / static_cast<double>(m_band);
    }
    for (int j = 0; j < m_rest; ++j) {
      ts.weights[m_band + j] =
          measure_density(problem.measure, ts.points.row(m_band + j).transpose()) * vol_rest /
          static_cast<double>(m_rest);
    }
  }

  if (problem.has_truth()) {
    ts.truth_signs.resize(m);
    for (int j = 0; j < m; ++j) {
      ts.truth_signs[j] = sign_class(problem.truth(ts.points.row(j).transpose()));
    }
  }
  return ts;
}

double error_rate(const Vec& fhat, const TestSet& ts) {
  if (ts.truth_signs.empty()) {
    throw std::invalid_argument("error_rate: truth signs unavailable");
  }
  double er = 0.0;
  for (long j = 0; j < ts.size(); ++j) {
    if (sign_class(fhat[j]) != ts.truth_signs[static_cast<std::size_t>(j)]) {
      er += ts.weights[j];
    }
  }
  return er;
}

double credible_band_volume(const Vec& fhat, const Vec& sd, const TestSet& ts) {
  double vol = 0.0;
  for (long j = 0; j < ts.size(); ++j) {
    if (std::abs(fhat[j]) < 1.96 * sd[j]) vol += ts.weights[j];
  }
  return vol;
}

Vec adsa_weights(const Vec& fhat, const Vec& sd, const TestSet& ts) {
  Vec w(ts.size());
  for (long j = 0; j < ts.size(); ++j) {
    double phi;
    if (sd[j] > 0.0) {
      phi = norm_cdf(-std::abs(fhat[j]) / sd[j]);
    } else {
      phi = fhat[j] == 0.0 ? 0.5 : 0.0;
    }
    w[j] = phi * ts.weights[j];
  }
  return w;
}

double weighted_contour_uncertainty(const Vec& fhat, const Vec& sd, const TestSet& ts) {
  return adsa_weights(fhat, sd, ts).dot(fhat);
}

}  // namespace adbatch
