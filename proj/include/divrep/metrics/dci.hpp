#pragma once

#include "divrep/metrics/common.hpp"

namespace divrep::metrics {

// Depth-limited CART classifier with gini split importances; bagged into a
// small forest per factor for the DCI importance matrix.
namespace cart {

struct Node {
  int feature = -1;
  double threshold = 0.0;
  int left = -1, right = -1;
  int prediction = 0;
};

struct Tree {
  std::vector<Node> nodes;
  std::vector<double> importance;  // per feature, gini decrease * node weight
};

inline double gini(const std::vector<int64_t>& counts, int64_t total) {
  if (total == 0) return 0.0;
  double g = 1.0;
  for (int64_t c : counts) {
    double p = static_cast<double>(c) / static_cast<double>(total);
    g -= p * p;
  }
  return g;
}

inline int majority(const std::vector<int64_t>& counts) {
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

struct Builder {
  const Tensord& x;
  const std::vector<int>& y;
  int num_classes;
  int max_depth;
  int64_t n_total;
  Tree tree;

  int build(std::vector<int64_t>& rows, int depth) {
    std::vector<int64_t> counts(static_cast<size_t>(num_classes), 0);
    for (int64_t r : rows) counts[static_cast<size_t>(y[static_cast<size_t>(r)])]++;
    double g_parent = gini(counts, static_cast<int64_t>(rows.size()));
    Node node;
    node.prediction = majority(counts);
    int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);
    if (depth >= max_depth || rows.size() < 2 || g_parent == 0.0) return id;

    int best_f = -1;
    double best_gain = 1e-12, best_thr = 0.0;
    const int64_t d = x.dim(1);
    std::vector<std::pair<double, int>> vals(rows.size());
    for (int64_t f = 0; f < d; ++f) {
      for (size_t i = 0; i < rows.size(); ++i)
        vals[i] = {x.at2(rows[i], f), y[static_cast<size_t>(rows[i])]};
      std::sort(vals.begin(), vals.end());
      std::vector<int64_t> left(static_cast<size_t>(num_classes), 0);
      std::vector<int64_t> right = counts;
      for (size_t i = 0; i + 1 < vals.size(); ++i) {
        left[static_cast<size_t>(vals[i].second)]++;
        right[static_cast<size_t>(vals[i].second)]--;
        if (vals[i].first == vals[i + 1].first) continue;
        int64_t nl = static_cast<int64_t>(i + 1), nr = static_cast<int64_t>(rows.size()) - nl;
        double gain = g_parent - (static_cast<double>(nl) * gini(left, nl) +
                                  static_cast<double>(nr) * gini(right, nr)) /
                                     static_cast<double>(rows.size());
        if (gain > best_gain) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_thr = 0.5 * (vals[i].first + vals[i + 1].first);
        }
      }
    }
    if (best_f < 0) return id;

    std::vector<int64_t> lrows, rrows;
    for (int64_t r : rows) {
      if (x.at2(r, best_f) <= best_thr)
        lrows.push_back(r);
      else
        rrows.push_back(r);
    }
    if (lrows.empty() || rrows.empty()) return id;
    tree.importance[static_cast<size_t>(best_f)] +=
        best_gain * static_cast<double>(rows.size()) / static_cast<double>(n_total);
    int left_id = build(lrows, depth + 1);
    int right_id = build(rrows, depth + 1);
    tree.nodes[static_cast<size_t>(id)].feature = best_f;
    tree.nodes[static_cast<size_t>(id)].threshold = best_thr;
    tree.nodes[static_cast<size_t>(id)].left = left_id;
    tree.nodes[static_cast<size_t>(id)].right = right_id;
    return id;
  }
};

inline Tree fit(const Tensord& x, const std::vector<int>& y, int num_classes, int max_depth,
                Rng& rng, bool bootstrap = true) {
  Builder b{x, y, num_classes, max_depth, x.dim(0), {}};
  b.tree.importance.assign(static_cast<size_t>(x.dim(1)), 0.0);
  std::vector<int64_t> rows;
  rows.reserve(static_cast<size_t>(x.dim(0)));
  if (bootstrap) {
    for (int64_t i = 0; i < x.dim(0); ++i) rows.push_back(rng.below(x.dim(0)));
  } else {
    for (int64_t i = 0; i < x.dim(0); ++i) rows.push_back(i);
  }
  b.build(rows, 0);
  return b.tree;
}

}  // namespace cart

struct DciResult {
  double score = 0.0;
  std::vector<std::vector<double>> importance;  // [d_z][F], column-normalized
  std::vector<double> per_dim;
};

// Disentanglement from an importance matrix: per-dim entropy of the
// normalized factor profile, weighted by relative dim importance.
inline DciResult dci_from_importance(const std::vector<std::vector<double>>& R) {
  DIVREP_CHECK(!R.empty() && !R[0].empty(), "empty importance matrix");
  const size_t dz = R.size(), F = R[0].size();
  DciResult res;
  res.importance = R;
  double total = 0.0;
  std::vector<double> row_sum(dz, 0.0);
  for (size_t d = 0; d < dz; ++d)
    for (size_t f = 0; f < F; ++f) {
      DIVREP_CHECK(R[d][f] >= 0.0, "importance must be nonnegative");
      row_sum[d] += R[d][f];
      total += R[d][f];
    }
  double logF = std::log(static_cast<double>(F));
  for (size_t d = 0; d < dz; ++d) {
    if (row_sum[d] <= 0.0) {
      res.per_dim.push_back(0.0);  // weight 0 below
      continue;
    }
    double h = 0.0;
    for (size_t f = 0; f < F; ++f) {
      double p = R[d][f] / row_sum[d];
      if (p > 0.0) h -= p * std::log(p);
    }
    res.per_dim.push_back(F > 1 ? std::clamp(1.0 - h / logF, 0.0, 1.0) : 1.0);
  }
  if (total <= 0.0) return res;  // score 0: nothing informative
  for (size_t d = 0; d < dz; ++d)
    res.score += (row_sum[d] / total) * res.per_dim[d];
  res.score = std::clamp(res.score, 0.0, 1.0);
  return res;
}

inline DciResult dci_disentanglement(const CodeFactorTable& table, int trees = 10, int depth = 8,
                                     uint64_t seed = 0) {
  table.validate();
  const int64_t dz = table.dims();
  const int F = table.num_factors;
  std::vector<std::vector<double>> R(static_cast<size_t>(dz),
                                     std::vector<double>(static_cast<size_t>(F), 0.0));
  for (int f = 0; f < F; ++f) {
    std::vector<int> y(static_cast<size_t>(table.rows()));
    for (int64_t r = 0; r < table.rows(); ++r) y[static_cast<size_t>(r)] = table.factor(r, f);
    int card = table.cardinality(f);
    std::vector<double> acc(static_cast<size_t>(dz), 0.0);
    Rng rng(derive_seed(seed, "dci-factor-" + std::to_string(f)));
    for (int t = 0; t < trees; ++t) {
      auto tree = cart::fit(table.codes, y, card, depth, rng, trees > 1);
      for (int64_t d = 0; d < dz; ++d) acc[static_cast<size_t>(d)] += tree.importance[static_cast<size_t>(d)];
    }
    double col = 0.0;
    for (double v : acc) col += v;
    for (int64_t d = 0; d < dz; ++d)
      R[static_cast<size_t>(d)][static_cast<size_t>(f)] =
          col > 0.0 ? acc[static_cast<size_t>(d)] / col : 0.0;
  }
  return dci_from_importance(R);
}

}  // namespace divrep::metrics
