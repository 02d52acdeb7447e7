#pragma once

#include <map>
#include <set>

#include "divrep/rng.hpp"
#include "divrep/tensor.hpp"

namespace divrep::metrics {

// Evaluation input shared by all scores: posterior means against
// ground-truth generative factor values.
struct CodeFactorTable {
  Tensord codes;             // [N, d_z]
  std::vector<int> factors;  // [N * F], row-major
  int num_factors = 0;

  int64_t rows() const { return codes.numel() ? codes.dim(0) : 0; }
  int64_t dims() const { return codes.numel() ? codes.dim(1) : 0; }
  int factor(int64_t row, int f) const {
    return factors[static_cast<size_t>(row * num_factors + f)];
  }

  int cardinality(int f) const {
    int hi = 0;
    for (int64_t r = 0; r < rows(); ++r) hi = std::max(hi, factor(r, f) + 1);
    return hi;
  }

  void validate() const {
    DIVREP_CHECK(codes.rank() == 2 && rows() >= 1, "table needs at least one row");
    DIVREP_CHECK(static_cast<int64_t>(factors.size()) == rows() * num_factors,
                 "factor table size mismatch");
    DIVREP_CHECK(num_factors >= 1, "table needs at least one factor");
    DIVREP_CHECK(codes.all_finite(), "non-finite codes");
  }
};

// Quantile edges for approximately equal-occupancy bins. Tied values always
// share a bin, so constant columns collapse to a single bin.
inline std::vector<double> quantile_edges(std::vector<double> values, int bins) {
  DIVREP_CHECK(bins >= 2, "need at least two bins");
  std::sort(values.begin(), values.end());
  std::vector<double> edges;
  int64_t n = static_cast<int64_t>(values.size());
  for (int b = 1; b < bins; ++b) {
    int64_t idx = b * n / bins;
    edges.push_back(values[static_cast<size_t>(std::min(idx, n - 1))]);
  }
  return edges;
}

inline int digitize(double x, const std::vector<double>& edges) {
  int bin = 0;
  for (double e : edges)
    if (x >= e) ++bin;
  return bin;
}

inline std::vector<int> discretize_column(const Tensord& codes, int64_t dim, int bins) {
  std::vector<double> col(static_cast<size_t>(codes.dim(0)));
  for (int64_t r = 0; r < codes.dim(0); ++r) col[static_cast<size_t>(r)] = codes.at2(r, dim);
  auto edges = quantile_edges(col, bins);
  std::vector<int> out(col.size());
  for (size_t i = 0; i < col.size(); ++i) out[i] = digitize(col[i], edges);
  return out;
}

// Discrete mutual information (nats) from a joint histogram.
inline double mutual_information(const std::vector<int>& a, const std::vector<int>& b) {
  DIVREP_CHECK(a.size() == b.size() && !a.empty(), "mi input size");
  std::map<std::pair<int, int>, int64_t> joint;
  std::map<int, int64_t> ma, mb;
  for (size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}]++;
    ma[a[i]]++;
    mb[b[i]]++;
  }
  double n = static_cast<double>(a.size()), mi = 0.0;
  for (auto& [key, cnt] : joint) {
    double pxy = static_cast<double>(cnt) / n;
    double px = static_cast<double>(ma[key.first]) / n;
    double py = static_cast<double>(mb[key.second]) / n;
    mi += pxy * std::log(pxy / (px * py));
  }
  return std::max(mi, 0.0);
}

inline double entropy_of(const std::vector<int>& a) {
  std::map<int, int64_t> counts;
  for (int v : a) counts[v]++;
  double n = static_cast<double>(a.size()), h = 0.0;
  for (auto& [v, cnt] : counts) {
    double p = static_cast<double>(cnt) / n;
    h -= p * std::log(p);
  }
  return h;
}

struct MetricSettings {
  int mig_bins = 20;
  int sap_bins = 20;
  int fvae_votes = 800;
  int fvae_probe = 64;
  int dci_trees = 10;
  int dci_depth = 8;
  uint64_t seed = 0;
};

}  // namespace divrep::metrics
