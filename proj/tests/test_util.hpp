#pragma once

#include <functional>

#include "divrep/autodiff.hpp"
#include "divrep/rng.hpp"

namespace divrep::testutil {

// Central-difference gradient check for a scalar graph rebuilt by `build`
// from the given leaves. Checks up to `max_entries` entries per leaf.
inline double grad_check(const std::function<ag::Var<double>()>& build,
                         const std::vector<ag::Var<double>>& leaves, double h = 1e-5,
                         int max_entries = 200, uint64_t seed = 7) {
  auto root = build();
  ag::backward(root);
  std::vector<Tensor<double>> analytic;
  for (auto& l : leaves) {
    analytic.push_back(l->grad_ready ? l->grad : Tensor<double>(l->value.shape, 0.0));
  }
  Rng rng(seed);
  double worst = 0.0;
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& leaf = leaves[li];
    int64_t n = leaf->value.numel();
    std::vector<int64_t> picks;
    if (n <= max_entries) {
      for (int64_t i = 0; i < n; ++i) picks.push_back(i);
    } else {
      for (int i = 0; i < max_entries; ++i) picks.push_back(rng.below(n));
    }
    for (int64_t i : picks) {
      double orig = leaf->value[i];
      leaf->value[i] = orig + h;
      double fp = build()->value[0];
      leaf->value[i] = orig - h;
      double fm = build()->value[0];
      leaf->value[i] = orig;
      double num = (fp - fm) / (2.0 * h);
      double ana = analytic[li][i];
      double rel = std::abs(ana - num) / std::max({1.0, std::abs(ana), std::abs(num)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace divrep::testutil
