#pragma once

#include <iostream>
#include <unordered_map>

#include "divrep/metrics/common.hpp"

namespace divrep::metrics {

// ---------------------------------------------------------------------------
// MIG: normalized gap of the top two latent-factor mutual informations
// ---------------------------------------------------------------------------

struct MigResult {
  double score = 0.0;
  std::vector<double> per_factor;
  std::vector<std::vector<double>> mi;  // [d_z][F], nats
};

inline MigResult mig(const CodeFactorTable& table, int bins = 20) {
  table.validate();
  const int64_t dz = table.dims();
  const int F = table.num_factors;
  std::vector<std::vector<int>> dim_bins;
  for (int64_t d = 0; d < dz; ++d) dim_bins.push_back(discretize_column(table.codes, d, bins));
  std::vector<std::vector<int>> factor_cols(static_cast<size_t>(F));
  for (int f = 0; f < F; ++f) {
    factor_cols[static_cast<size_t>(f)].resize(static_cast<size_t>(table.rows()));
    for (int64_t r = 0; r < table.rows(); ++r)
      factor_cols[static_cast<size_t>(f)][static_cast<size_t>(r)] = table.factor(r, f);
  }

  MigResult res;
  res.mi.assign(static_cast<size_t>(dz), std::vector<double>(static_cast<size_t>(F), 0.0));
  for (int64_t d = 0; d < dz; ++d)
    for (int f = 0; f < F; ++f)
      res.mi[static_cast<size_t>(d)][static_cast<size_t>(f)] =
          mutual_information(dim_bins[static_cast<size_t>(d)], factor_cols[static_cast<size_t>(f)]);

  for (int f = 0; f < F; ++f) {
    double h = entropy_of(factor_cols[static_cast<size_t>(f)]);
    if (h <= 0.0) {
      res.per_factor.push_back(0.0);
      continue;
    }
    double top1 = 0.0, top2 = 0.0;
    for (int64_t d = 0; d < dz; ++d) {
      double v = res.mi[static_cast<size_t>(d)][static_cast<size_t>(f)];
      if (v > top1) {
        top2 = top1;
        top1 = v;
      } else if (v > top2) {
        top2 = v;
      }
    }
    res.per_factor.push_back(std::clamp((top1 - top2) / h, 0.0, 1.0));
  }
  res.score = mean_of(res.per_factor);
  return res;
}

// ---------------------------------------------------------------------------
// SAP: gap between the two most predictive single dimensions per factor
// ---------------------------------------------------------------------------

struct SapResult {
  double score = 0.0;
  std::vector<double> per_factor;
};

// Single-dimension quantile-bin majority classifier, fit on one half and
// scored on the other.
inline double single_dim_accuracy(const CodeFactorTable& table, int64_t dim, int f,
                                  const std::vector<int64_t>& train_rows,
                                  const std::vector<int64_t>& test_rows, int bins) {
  std::vector<double> train_vals;
  train_vals.reserve(train_rows.size());
  for (int64_t r : train_rows) train_vals.push_back(table.codes.at2(r, dim));
  auto edges = quantile_edges(train_vals, bins);

  int card = table.cardinality(f);
  std::vector<std::vector<int64_t>> bin_class(static_cast<size_t>(bins),
                                              std::vector<int64_t>(static_cast<size_t>(card), 0));
  std::vector<int64_t> overall(static_cast<size_t>(card), 0);
  for (int64_t r : train_rows) {
    int b = digitize(table.codes.at2(r, dim), edges);
    bin_class[static_cast<size_t>(b)][static_cast<size_t>(table.factor(r, f))]++;
    overall[static_cast<size_t>(table.factor(r, f))]++;
  }
  auto argmax = [](const std::vector<int64_t>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
  };
  int global_major = argmax(overall);
  std::vector<int> predict(static_cast<size_t>(bins), global_major);
  for (int b = 0; b < bins; ++b) {
    int64_t total = 0;
    for (int64_t c : bin_class[static_cast<size_t>(b)]) total += c;
    if (total > 0) predict[static_cast<size_t>(b)] = argmax(bin_class[static_cast<size_t>(b)]);
  }
  int64_t correct = 0;
  for (int64_t r : test_rows) {
    int b = digitize(table.codes.at2(r, dim), edges);
    if (predict[static_cast<size_t>(b)] == table.factor(r, f)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test_rows.size());
}

inline SapResult sap(const CodeFactorTable& table, int bins = 20, uint64_t seed = 0) {
  table.validate();
  const int64_t dz = table.dims();
  std::vector<int64_t> order(static_cast<size_t>(table.rows()));
  for (int64_t r = 0; r < table.rows(); ++r) order[static_cast<size_t>(r)] = r;
  Rng rng(derive_seed(seed, "sap-split"));
  rng.shuffle(order);
  int64_t half = table.rows() / 2;
  DIVREP_CHECK(half >= 1, "sap needs at least two rows");
  std::vector<int64_t> train(order.begin(), order.begin() + half);
  std::vector<int64_t> test(order.begin() + half, order.end());

  SapResult res;
  for (int f = 0; f < table.num_factors; ++f) {
    bool degenerate = true;
    int first = table.factor(train[0], f);
    for (int64_t r : train)
      if (table.factor(r, f) != first) degenerate = false;
    if (degenerate) {
      std::cerr << "sap: factor " << f << " is degenerate on the train half, skipped\n";
      continue;
    }
    double best = 0.0, second = 0.0;
    for (int64_t d = 0; d < dz; ++d) {
      double acc = single_dim_accuracy(table, d, f, train, test, bins);
      if (acc > best) {
        second = best;
        best = acc;
      } else if (acc > second) {
        second = acc;
      }
    }
    res.per_factor.push_back(std::clamp(best - second, 0.0, 1.0));
  }
  DIVREP_CHECK(!res.per_factor.empty(), "sap: every factor degenerate");
  res.score = mean_of(res.per_factor);
  return res;
}

// ---------------------------------------------------------------------------
// IRS: interventional robustness of each dimension
// ---------------------------------------------------------------------------

struct IrsResult {
  double score = 0.0;
  std::vector<double> per_dim;
  std::vector<std::vector<double>> deviation;  // [d_z][F], normalized
};

inline IrsResult irs(const CodeFactorTable& table) {
  table.validate();
  const int64_t dz = table.dims();
  const int F = table.num_factors;
  const int64_t N = table.rows();

  // global max absolute deviation per dim
  std::vector<double> global_dev(static_cast<size_t>(dz), 0.0), mean(static_cast<size_t>(dz), 0.0);
  for (int64_t r = 0; r < N; ++r)
    for (int64_t d = 0; d < dz; ++d) mean[static_cast<size_t>(d)] += table.codes.at2(r, d);
  for (auto& m : mean) m /= static_cast<double>(N);
  for (int64_t r = 0; r < N; ++r)
    for (int64_t d = 0; d < dz; ++d)
      global_dev[static_cast<size_t>(d)] = std::max(
          global_dev[static_cast<size_t>(d)],
          std::abs(table.codes.at2(r, d) - mean[static_cast<size_t>(d)]));

  IrsResult res;
  res.deviation.assign(static_cast<size_t>(dz), std::vector<double>(static_cast<size_t>(F), 0.0));

  for (int f = 0; f < F; ++f) {
    // group rows by the realization of all other factors
    std::unordered_map<uint64_t, std::vector<int64_t>> groups;
    for (int64_t r = 0; r < N; ++r) {
      uint64_t key = 0xcbf29ce484222325ULL;
      for (int g = 0; g < F; ++g) {
        if (g == f) continue;
        key = (key ^ static_cast<uint64_t>(table.factor(r, g) + 1)) * 0x100000001b3ULL;
      }
      groups[key].push_back(r);
    }
    std::vector<double> acc(static_cast<size_t>(dz), 0.0);
    int64_t used = 0;
    for (auto& [key, rows] : groups) {
      std::set<int> fvals;
      for (int64_t r : rows) fvals.insert(table.factor(r, f));
      if (fvals.size() < 2) continue;  // no intervention on f observable here
      ++used;
      for (int64_t d = 0; d < dz; ++d) {
        double gm = 0.0;
        for (int64_t r : rows) gm += table.codes.at2(r, d);
        gm /= static_cast<double>(rows.size());
        double dev = 0.0;
        for (int64_t r : rows) dev = std::max(dev, std::abs(table.codes.at2(r, d) - gm));
        acc[static_cast<size_t>(d)] += dev;
      }
    }
    for (int64_t d = 0; d < dz; ++d) {
      double norm = global_dev[static_cast<size_t>(d)];
      double v = used > 0 ? acc[static_cast<size_t>(d)] / static_cast<double>(used) : 0.0;
      res.deviation[static_cast<size_t>(d)][static_cast<size_t>(f)] =
          norm > 0.0 ? std::clamp(v / norm, 0.0, 1.0) : 0.0;
    }
  }

  // robustness of dim d: 1 - worst normalized deviation under interventions
  // on factors other than its primary factor. Constant dims score 1.
  for (int64_t d = 0; d < dz; ++d) {
    if (global_dev[static_cast<size_t>(d)] <= 0.0) {
      res.per_dim.push_back(1.0);  // zero-deviation convention
      continue;
    }
    int primary = 0;
    for (int f = 1; f < F; ++f)
      if (res.deviation[static_cast<size_t>(d)][static_cast<size_t>(f)] >
          res.deviation[static_cast<size_t>(d)][static_cast<size_t>(primary)])
        primary = f;
    double worst = 0.0;
    for (int f = 0; f < F; ++f) {
      if (f == primary) continue;
      worst = std::max(worst, res.deviation[static_cast<size_t>(d)][static_cast<size_t>(f)]);
    }
    res.per_dim.push_back(std::clamp(1.0 - worst, 0.0, 1.0));
  }
  res.score = mean_of(res.per_dim);
  return res;
}

// ---------------------------------------------------------------------------
// FactorVAE score: majority-vote classifier on the least-varying dimension
// ---------------------------------------------------------------------------

struct FvaeResult {
  double score = 0.0;
  std::vector<std::vector<int64_t>> votes;  // [d_z][F] training votes
};

inline FvaeResult fvae_score(const CodeFactorTable& table, int votes = 800, int probe = 64,
                             uint64_t seed = 0) {
  table.validate();
  DIVREP_CHECK(votes >= 4 && probe >= 2, "fvae needs votes >= 4 and probe >= 2");
  const int64_t dz = table.dims();
  const int F = table.num_factors;
  const int64_t N = table.rows();

  std::vector<double> stdev(static_cast<size_t>(dz), 0.0);
  {
    std::vector<double> mean(static_cast<size_t>(dz), 0.0);
    for (int64_t r = 0; r < N; ++r)
      for (int64_t d = 0; d < dz; ++d) mean[static_cast<size_t>(d)] += table.codes.at2(r, d);
    for (auto& m : mean) m /= static_cast<double>(N);
    for (int64_t r = 0; r < N; ++r)
      for (int64_t d = 0; d < dz; ++d) {
        double x = table.codes.at2(r, d) - mean[static_cast<size_t>(d)];
        stdev[static_cast<size_t>(d)] += x * x;
      }
    for (auto& s : stdev) s = std::sqrt(s / static_cast<double>(N));
  }
  std::vector<int64_t> active;
  for (int64_t d = 0; d < dz; ++d) {
    if (stdev[static_cast<size_t>(d)] > 0.0)
      active.push_back(d);
    else
      std::cerr << "fvae: dim " << d << " has zero variance, excluded from the argmin\n";
  }
  DIVREP_CHECK(!active.empty(), "fvae: all dims constant");

  // rows grouped by (factor, value)
  std::vector<std::vector<std::vector<int64_t>>> by_value(static_cast<size_t>(F));
  for (int f = 0; f < F; ++f) by_value[static_cast<size_t>(f)].resize(
      static_cast<size_t>(table.cardinality(f)));
  for (int64_t r = 0; r < N; ++r)
    for (int f = 0; f < F; ++f)
      by_value[static_cast<size_t>(f)][static_cast<size_t>(table.factor(r, f))].push_back(r);

  Rng rng(derive_seed(seed, "fvae-votes"));
  std::vector<std::pair<int64_t, int>> all_votes;  // (dim, factor)
  for (int i = 0; i < votes; ++i) {
    int f = static_cast<int>(rng.below(F));
    const auto& values = by_value[static_cast<size_t>(f)];
    int v = static_cast<int>(rng.below(static_cast<int64_t>(values.size())));
    while (values[static_cast<size_t>(v)].empty())
      v = static_cast<int>(rng.below(static_cast<int64_t>(values.size())));
    const auto& pool = values[static_cast<size_t>(v)];
    // variance of each normalized dim across the probe subset
    std::vector<double> s1(static_cast<size_t>(dz), 0.0), s2(static_cast<size_t>(dz), 0.0);
    for (int p = 0; p < probe; ++p) {
      int64_t r = pool[static_cast<size_t>(rng.below(static_cast<int64_t>(pool.size())))];
      for (int64_t d = 0; d < dz; ++d) {
        double x = table.codes.at2(r, d) / (stdev[static_cast<size_t>(d)] > 0.0
                                                ? stdev[static_cast<size_t>(d)]
                                                : 1.0);
        s1[static_cast<size_t>(d)] += x;
        s2[static_cast<size_t>(d)] += x * x;
      }
    }
    int64_t best = active[0];
    double best_var = 1e300;
    for (int64_t d : active) {
      double m = s1[static_cast<size_t>(d)] / probe;
      double var = s2[static_cast<size_t>(d)] / probe - m * m;
      if (var < best_var) {
        best_var = var;
        best = d;
      }
    }
    all_votes.emplace_back(best, f);
  }

  FvaeResult res;
  res.votes.assign(static_cast<size_t>(dz), std::vector<int64_t>(static_cast<size_t>(F), 0));
  size_t half = all_votes.size() / 2;
  for (size_t i = 0; i < half; ++i)
    res.votes[static_cast<size_t>(all_votes[i].first)][static_cast<size_t>(all_votes[i].second)]++;
  std::vector<int> predict(static_cast<size_t>(dz), 0);
  for (int64_t d = 0; d < dz; ++d) {
    int best_f = 0;
    for (int f = 1; f < F; ++f)
      if (res.votes[static_cast<size_t>(d)][static_cast<size_t>(f)] >
          res.votes[static_cast<size_t>(d)][static_cast<size_t>(best_f)])
        best_f = f;
    predict[static_cast<size_t>(d)] = best_f;
  }
  int64_t correct = 0;
  for (size_t i = half; i < all_votes.size(); ++i)
    if (predict[static_cast<size_t>(all_votes[i].first)] == all_votes[i].second) ++correct;
  res.score = static_cast<double>(correct) / static_cast<double>(all_votes.size() - half);
  return res;
}

}  // namespace divrep::metrics
