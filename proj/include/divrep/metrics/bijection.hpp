#pragma once

#include <array>

#include "divrep/math.hpp"
#include "divrep/tensor.hpp"

namespace divrep::metrics {

// Marginal-preserving entangling bijection on [0,1]^2 built from a
// Householder reflection: f(u) = cdf(A * probit(u)) with A = I - 2 v v^T,
// v = (sqrt(alpha), sqrt(1 - alpha)). Each output coordinate stays uniform
// while depending on both inputs.
struct BijectionResult {
  std::array<std::array<double, 2>, 2> A;
  Tensord outputs;  // [N, 2]
};

inline std::array<std::array<double, 2>, 2> householder_matrix(double alpha) {
  DIVREP_CHECK(alpha > 0.0 && alpha < 0.5, "alpha must lie in (0, 0.5)");
  double v1 = std::sqrt(alpha), v2 = std::sqrt(1.0 - alpha);
  return {{{1.0 - 2.0 * v1 * v1, -2.0 * v1 * v2}, {-2.0 * v1 * v2, 1.0 - 2.0 * v2 * v2}}};
}

inline BijectionResult entangling_bijection(double alpha, const Tensord& samples) {
  DIVREP_CHECK(samples.rank() == 2 && samples.dim(1) == 2, "samples must be [N, 2]");
  BijectionResult res;
  res.A = householder_matrix(alpha);
  const double eps = 1e-9;
  const int64_t n = samples.dim(0);
  res.outputs = Tensord({n, 2});
  for (int64_t i = 0; i < n; ++i) {
    double u1 = std::clamp(samples.at2(i, 0), eps, 1.0 - eps);
    double u2 = std::clamp(samples.at2(i, 1), eps, 1.0 - eps);
    double n1 = probit(u1), n2 = probit(u2);
    double m1 = res.A[0][0] * n1 + res.A[0][1] * n2;
    double m2 = res.A[1][0] * n1 + res.A[1][1] * n2;
    res.outputs.at2(i, 0) = std_normal_cdf(m1);
    res.outputs.at2(i, 1) = std_normal_cdf(m2);
  }
  return res;
}

}  // namespace divrep::metrics
