#pragma once

#include <cmath>
#include <stdexcept>

#include "adbatch/linalg.hpp"

namespace adbatch {

// Squared-exponential kernel with per-dimension lengthscales.
struct KernelParams {
  Vec lengthscales;   // l_1..l_d, input units
  double signal_var;  // sigma_se^2, output units^2

  void validate() const {
    if (!(signal_var > 0.0) || !std::isfinite(signal_var)) {
      throw std::invalid_argument("kernel: signal variance must be positive and finite");
    }
    for (long i = 0; i < lengthscales.size(); ++i) {
      if (!(lengthscales[i] > 0.0) || !std::isfinite(lengthscales[i])) {
        throw std::invalid_argument("kernel: lengthscales must be positive and finite");
      }
    }
  }

  static KernelParams isotropic(int d, double ell, double sv) {
    return KernelParams{Vec::Constant(d, ell), sv};
  }
};

inline double kernel_eval(const Vec& a, const Vec& b, const KernelParams& p) {
  if (!a.allFinite() || !b.allFinite()) {
    throw std::invalid_argument("kernel_eval: non-finite input");
  }
  double q = 0.0;
  for (long i = 0; i < a.size(); ++i) {
    const double z = (a[i] - b[i]) / p.lengthscales[i];
    q += z * z;
  }
  return p.signal_var * std::exp(-0.5 * q);
}

// K over the rows of X (symmetric k x k).
inline Mat kernel_matrix(const Mat& X, const KernelParams& p) {
  const long k = X.rows();
  Mat K(k, k);
  for (long i = 0; i < k; ++i) {
    K(i, i) = p.signal_var;
    for (long j = i + 1; j < k; ++j) {
      K(i, j) = kernel_eval(X.row(i).transpose(), X.row(j).transpose(), p);
      K(j, i) = K(i, j);
    }
  }
  return K;
}

// k(x) against the rows of X.
inline Vec kernel_cross(const Mat& X, const Vec& x, const KernelParams& p) {
  Vec out(X.rows());
  for (long i = 0; i < X.rows(); ++i) {
    out[i] = kernel_eval(X.row(i).transpose(), x, p);
  }
  return out;
}

// K(Xstar, X): one row per test point.
inline Mat kernel_cross_matrix(const Mat& Xstar, const Mat& X, const KernelParams& p) {
  Mat out(Xstar.rows(), X.rows());
  for (long m = 0; m < Xstar.rows(); ++m) {
    for (long i = 0; i < X.rows(); ++i) {
      out(m, i) = kernel_eval(Xstar.row(m).transpose(), X.row(i).transpose(), p);
    }
  }
  return out;
}

}  // namespace adbatch
