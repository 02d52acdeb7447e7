#pragma once

#include <Eigen/Dense>

#include "divrep/rng.hpp"

namespace divrep::viz {

struct EmbedOptions {
  double perplexity = 30.0;
  int iterations = 500;
  double learning_rate = 100.0;
  bool pca_fallback = false;  // skip the t-SNE iterations, PCA projection only
  uint64_t seed = 0;
};

// top-2 principal components, used for init and as the fallback projection
inline Tensord pca_2d(const Tensord& x) {
  const int64_t n = x.dim(0), d = x.dim(1);
  Eigen::MatrixXd X(n, d);
  for (int64_t r = 0; r < n; ++r)
    for (int64_t c = 0; c < d; ++c) X(r, c) = x.at2(r, c);
  Eigen::RowVectorXd mean = X.colwise().mean();
  X.rowwise() -= mean;
  Eigen::MatrixXd cov = X.transpose() * X / std::max<double>(1.0, static_cast<double>(n - 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::MatrixXd top = es.eigenvectors().rightCols(2);
  Eigen::MatrixXd Y = X * top;
  Tensord out({n, 2});
  for (int64_t r = 0; r < n; ++r) {
    out.at2(r, 0) = Y(r, 0);
    out.at2(r, 1) = Y(r, 1);
  }
  return out;
}

// Exact (O(N^2)) t-SNE, sized for a few thousand points.
inline Tensord tsne_2d(const Tensord& x, EmbedOptions opt = {}) {
  const int64_t n = x.dim(0), d = x.dim(1);
  DIVREP_CHECK(n >= 4, "tsne needs at least 4 points");
  if (opt.pca_fallback) return pca_2d(x);

  // squared distances
  std::vector<double> d2(static_cast<size_t>(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (int64_t c = 0; c < d; ++c) {
        double diff = x.at2(i, c) - x.at2(j, c);
        s += diff * diff;
      }
      d2[static_cast<size_t>(i * n + j)] = s;
      d2[static_cast<size_t>(j * n + i)] = s;
    }

  // per-point precision by binary search on perplexity
  double target = std::log(std::min(opt.perplexity, static_cast<double>(n - 1)));
  std::vector<double> P(static_cast<size_t>(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    double beta = 1.0, lo = 0.0, hi = 1e300;
    for (int it = 0; it < 50; ++it) {
      double sum = 0.0, sum_dp = 0.0;
      for (int64_t j = 0; j < n; ++j) {
        if (j == i) continue;
        double p = std::exp(-d2[static_cast<size_t>(i * n + j)] * beta);
        sum += p;
        sum_dp += p * d2[static_cast<size_t>(i * n + j)];
      }
      if (sum <= 0) {
        beta /= 2;
        continue;
      }
      double entropy = std::log(sum) + beta * sum_dp / sum;
      if (std::abs(entropy - target) < 1e-5) break;
      if (entropy > target) {
        lo = beta;
        beta = hi > 1e299 ? beta * 2 : (beta + hi) / 2;
      } else {
        hi = beta;
        beta = (beta + lo) / 2;
      }
    }
    double sum = 0.0;
    for (int64_t j = 0; j < n; ++j)
      if (j != i) sum += std::exp(-d2[static_cast<size_t>(i * n + j)] * beta);
    for (int64_t j = 0; j < n; ++j)
      if (j != i) P[static_cast<size_t>(i * n + j)] =
          std::exp(-d2[static_cast<size_t>(i * n + j)] * beta) / std::max(sum, 1e-300);
  }
  // symmetrize
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = i + 1; j < n; ++j) {
      double p = (P[static_cast<size_t>(i * n + j)] + P[static_cast<size_t>(j * n + i)]) /
                 (2.0 * static_cast<double>(n));
      p = std::max(p, 1e-12);
      P[static_cast<size_t>(i * n + j)] = p;
      P[static_cast<size_t>(j * n + i)] = p;
    }

  Tensord y = pca_2d(x);
  {  // scale the init down and jitter to break ties
    double scale = 0.0;
    for (double v : y.data) scale = std::max(scale, std::abs(v));
    Rng rng(derive_seed(opt.seed, "tsne-init"));
    for (auto& v : y.data) v = 1e-2 * v / std::max(scale, 1e-12) + 1e-4 * rng.normal();
  }
  Tensord vel({n, 2}, 0.0), grad({n, 2}, 0.0);
  std::vector<double> Q(static_cast<size_t>(n * n), 0.0);

  for (int it = 0; it < opt.iterations; ++it) {
    double exaggeration = it < 100 ? 4.0 : 1.0;
    double qsum = 0.0;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = i + 1; j < n; ++j) {
        double dy0 = y.at2(i, 0) - y.at2(j, 0), dy1 = y.at2(i, 1) - y.at2(j, 1);
        double q = 1.0 / (1.0 + dy0 * dy0 + dy1 * dy1);
        Q[static_cast<size_t>(i * n + j)] = q;
        qsum += 2.0 * q;
      }
    grad.fill(0.0);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = i + 1; j < n; ++j) {
        double q = Q[static_cast<size_t>(i * n + j)];
        double coeff =
            4.0 * (exaggeration * P[static_cast<size_t>(i * n + j)] - q / qsum) * q;
        double dy0 = y.at2(i, 0) - y.at2(j, 0), dy1 = y.at2(i, 1) - y.at2(j, 1);
        grad.at2(i, 0) += coeff * dy0;
        grad.at2(i, 1) += coeff * dy1;
        grad.at2(j, 0) -= coeff * dy0;
        grad.at2(j, 1) -= coeff * dy1;
      }
    double momentum = it < 250 ? 0.5 : 0.8;
    for (int64_t i = 0; i < 2 * n; ++i) {
      vel[i] = momentum * vel[i] - opt.learning_rate * grad[i];
      y[i] += vel[i];
    }
  }
  return y;
}

}  // namespace divrep::viz
