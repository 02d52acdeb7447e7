#pragma once

#include <functional>
#include <memory>
#include <set>

#include "divrep/rng.hpp"
#include "divrep/tensor.hpp"

namespace divrep::data {

struct FactorSpec {
  struct Factor {
    std::string name;
    int cardinality = 0;
  };
  std::vector<Factor> factors;
  int predictive_index = 0;
  std::vector<int> known_nuisance_indices;

  int num_factors() const { return static_cast<int>(factors.size()); }
  int64_t total_combinations() const {
    int64_t n = 1;
    for (auto& f : factors) n *= f.cardinality;
    return n;
  }
  int num_classes() const { return factors[static_cast<size_t>(predictive_index)].cardinality; }

  void validate() const {
    DIVREP_CHECK_CFG(!factors.empty(), "factor spec needs at least one factor");
    for (auto& f : factors)
      DIVREP_CHECK_CFG(f.cardinality >= 2, "factor '" + f.name + "' needs cardinality >= 2");
    DIVREP_CHECK_CFG(predictive_index >= 0 && predictive_index < num_factors(),
                     "predictive_index out of range");
    for (int i : known_nuisance_indices) {
      DIVREP_CHECK_CFG(i >= 0 && i < num_factors(), "known nuisance index out of range");
      DIVREP_CHECK_CFG(i != predictive_index, "predictive factor cannot be a known nuisance");
    }
  }

  int find(const std::string& name) const {
    for (int i = 0; i < num_factors(); ++i)
      if (factors[static_cast<size_t>(i)].name == name) return i;
    throw ConfigError("unknown factor name: " + name);
  }
};

// Deterministic factor-tuple -> image renderer over a full factor product.
struct FactorGrid {
  FactorSpec spec;
  std::vector<int64_t> image_shape;  // [C, H, W]
  std::function<Tensorf(const std::vector<int>&)> render;

  int64_t size() const { return spec.total_combinations(); }

  std::vector<int> tuple_of(int64_t index) const {
    DIVREP_CHECK(index >= 0 && index < size(), "grid index out of range");
    std::vector<int> tuple(static_cast<size_t>(spec.num_factors()));
    for (int f = spec.num_factors() - 1; f >= 0; --f) {
      int card = spec.factors[static_cast<size_t>(f)].cardinality;
      tuple[static_cast<size_t>(f)] = static_cast<int>(index % card);
      index /= card;
    }
    return tuple;
  }

  int64_t index_of(const std::vector<int>& tuple) const {
    DIVREP_CHECK(static_cast<int>(tuple.size()) == spec.num_factors(), "tuple length");
    int64_t idx = 0;
    for (int f = 0; f < spec.num_factors(); ++f) {
      int card = spec.factors[static_cast<size_t>(f)].cardinality;
      int v = tuple[static_cast<size_t>(f)];
      DIVREP_CHECK(v >= 0 && v < card, "tuple value out of range");
      idx = idx * card + v;
    }
    return idx;
  }

  Tensorf image(int64_t index) const { return render(tuple_of(index)); }
  int label_of(const std::vector<int>& tuple) const {
    return tuple[static_cast<size_t>(spec.predictive_index)];
  }
};

// ---------------------------------------------------------------------------
// weakly supervised pairs
// ---------------------------------------------------------------------------

struct PairSample {
  Tensorf x_l, x_m;
  int k = 0;            // exposed to the model
  std::vector<int> df;  // hidden from model-facing batches; retained for tests
  int y_l = 0, y_m = 0;
  std::vector<int> tuple_l, tuple_m;  // test-facing
};

struct PairOptions {
  // Factors eligible for a change; factors outside this set are shared
  // within the pair so tuples agree exactly outside df. Empty = all factors.
  std::vector<int> eligible;
  // Per-factor allowed values (training split); empty = full cardinality.
  std::vector<std::vector<int>> allowed;
};

inline std::vector<std::vector<int>> full_allowed(const FactorSpec& spec) {
  std::vector<std::vector<int>> allowed;
  for (auto& f : spec.factors) {
    std::vector<int> vals(static_cast<size_t>(f.cardinality));
    for (int v = 0; v < f.cardinality; ++v) vals[static_cast<size_t>(v)] = v;
    allowed.push_back(std::move(vals));
  }
  return allowed;
}

inline PairSample sample_pair(const FactorGrid& grid, int k, Rng& rng, PairOptions opt = {}) {
  const auto& spec = grid.spec;
  spec.validate();
  if (opt.eligible.empty())
    for (int f = 0; f < spec.num_factors(); ++f) opt.eligible.push_back(f);
  if (opt.allowed.empty()) opt.allowed = full_allowed(spec);
  DIVREP_CHECK(static_cast<int>(opt.allowed.size()) == spec.num_factors(),
               "allowed values list must cover all factors");
  for (int f : opt.eligible) {
    DIVREP_CHECK(f >= 0 && f < spec.num_factors(), "eligible factor out of range");
    DIVREP_CHECK(opt.allowed[static_cast<size_t>(f)].size() >= 2,
                 "eligible factor needs at least two allowed values");
  }
  DIVREP_CHECK(k >= 1 && k <= static_cast<int>(opt.eligible.size()),
               "k out of range for the eligible factor set");

  PairSample pair;
  pair.k = k;
  pair.tuple_l.resize(static_cast<size_t>(spec.num_factors()));
  for (int f = 0; f < spec.num_factors(); ++f) {
    const auto& vals = opt.allowed[static_cast<size_t>(f)];
    DIVREP_CHECK(!vals.empty(), "factor with no allowed values");
    pair.tuple_l[static_cast<size_t>(f)] =
        vals[static_cast<size_t>(rng.below(static_cast<int64_t>(vals.size())))];
  }
  pair.tuple_m = pair.tuple_l;

  auto picks = rng.choose_k(static_cast<int>(opt.eligible.size()), k);
  for (int p : picks) pair.df.push_back(opt.eligible[static_cast<size_t>(p)]);
  std::sort(pair.df.begin(), pair.df.end());
  for (int f : pair.df) {
    const auto& vals = opt.allowed[static_cast<size_t>(f)];
    int old = pair.tuple_l[static_cast<size_t>(f)];
    int nv = old;
    while (nv == old)
      nv = vals[static_cast<size_t>(rng.below(static_cast<int64_t>(vals.size())))];
    pair.tuple_m[static_cast<size_t>(f)] = nv;
  }
  pair.y_l = grid.label_of(pair.tuple_l);
  pair.y_m = grid.label_of(pair.tuple_m);
  pair.x_l = grid.render(pair.tuple_l);
  pair.x_m = grid.render(pair.tuple_m);
  return pair;
}

// ---------------------------------------------------------------------------
// splits
// ---------------------------------------------------------------------------

struct SplitPolicy {
  // (factor index, values held out for test); held-out factors expose only
  // the complement during training.
  std::vector<std::pair<int, std::vector<int>>> held_out;
  double test_fraction = 0.2;  // sample partition when nothing is held out
  uint64_t seed = 0;

  void validate(const FactorSpec& spec) const {
    std::set<int> seen;
    for (auto& [f, vals] : held_out) {
      DIVREP_CHECK_CFG(f >= 0 && f < spec.num_factors(), "held-out factor out of range");
      DIVREP_CHECK_CFG(f != spec.predictive_index, "cannot hold out the predictive factor");
      DIVREP_CHECK_CFG(seen.insert(f).second, "factor held out twice");
      DIVREP_CHECK_CFG(!vals.empty(), "empty held-out value list");
      int card = spec.factors[static_cast<size_t>(f)].cardinality;
      std::set<int> uniq(vals.begin(), vals.end());
      DIVREP_CHECK_CFG(uniq.size() == vals.size(), "duplicate held-out value");
      for (int v : vals) DIVREP_CHECK_CFG(v >= 0 && v < card, "held-out value out of range");
      DIVREP_CHECK_CFG(static_cast<int>(vals.size()) < card,
                       "held-out values must leave at least one training value");
    }
    DIVREP_CHECK_CFG(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction in (0,1)");
  }
};

struct Split {
  std::vector<std::vector<int>> allowed_values;  // per factor
  std::vector<int64_t> members;                  // global grid tuple indices
};

struct SplitPair {
  Split train, test;
};

inline SplitPair make_splits(const FactorGrid& grid, const SplitPolicy& policy) {
  const auto& spec = grid.spec;
  spec.validate();
  policy.validate(spec);

  SplitPair out;
  auto all = full_allowed(spec);
  out.train.allowed_values = all;
  out.test.allowed_values = all;

  if (policy.held_out.empty()) {
    std::vector<int64_t> idx(static_cast<size_t>(grid.size()));
    for (int64_t i = 0; i < grid.size(); ++i) idx[static_cast<size_t>(i)] = i;
    Rng rng(derive_seed(policy.seed, "split-partition"));
    rng.shuffle(idx);
    auto n_test = static_cast<size_t>(std::llround(policy.test_fraction *
                                                   static_cast<double>(grid.size())));
    DIVREP_CHECK_CFG(n_test > 0 && n_test < idx.size(), "empty split");
    out.test.members.assign(idx.begin(), idx.begin() + static_cast<int64_t>(n_test));
    out.train.members.assign(idx.begin() + static_cast<int64_t>(n_test), idx.end());
    std::sort(out.test.members.begin(), out.test.members.end());
    std::sort(out.train.members.begin(), out.train.members.end());
    return out;
  }

  for (auto& [f, test_vals] : policy.held_out) {
    std::set<int> heldset(test_vals.begin(), test_vals.end());
    std::vector<int> train_vals, tv(test_vals);
    for (int v = 0; v < spec.factors[static_cast<size_t>(f)].cardinality; ++v)
      if (!heldset.count(v)) train_vals.push_back(v);
    std::sort(tv.begin(), tv.end());
    out.train.allowed_values[static_cast<size_t>(f)] = std::move(train_vals);
    out.test.allowed_values[static_cast<size_t>(f)] = std::move(tv);
  }

  // test tuples take held-out values on every designated factor
  for (int64_t i = 0; i < grid.size(); ++i) {
    auto tuple = grid.tuple_of(i);
    bool all_held = true, any_held = false;
    for (auto& [f, test_vals] : policy.held_out) {
      bool held = std::find(test_vals.begin(), test_vals.end(),
                            tuple[static_cast<size_t>(f)]) != test_vals.end();
      all_held = all_held && held;
      any_held = any_held || held;
    }
    if (all_held)
      out.test.members.push_back(i);
    else if (!any_held)
      out.train.members.push_back(i);
    // mixed tuples belong to neither split
  }
  DIVREP_CHECK_CFG(!out.train.members.empty() && !out.test.members.empty(), "empty split");
  return out;
}

// A grid plus its split policy and the training metadata tied to it.
struct DatasetBundle {
  std::string name;
  FactorGrid grid;
  SplitPolicy policy;
  int group_factor = -1;           // worst-group axis over held-out values
  std::vector<int> pair_eligible;  // factors a pair may change
};

}  // namespace divrep::data
