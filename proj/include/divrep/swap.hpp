#pragma once

#include <algorithm>

#include "divrep/vae.hpp"

namespace divrep {

enum class DivergenceForm {
  standard,  // closed-form KL(N_l || N_m); zero iff identical
  printed    // sigma_l^2 denominator variant, kept for comparison runs
};

struct DivergenceOptions {
  DivergenceForm form = DivergenceForm::standard;
  bool symmetric = false;  // 0.5*(KL(l||m) + KL(m||l))
};

// Per-dimension divergence between two diagonal-Gaussian codes of one sample.
template <class T>
std::vector<double> pairwise_divergence(const GaussianCode<T>& code_l,
                                        const GaussianCode<T>& code_m, int64_t row_l,
                                        int64_t row_m, DivergenceOptions opt = {}) {
  DIVREP_CHECK(code_l.partition == code_m.partition, "codes must share a partition");
  code_l.validate();
  code_m.validate();
  const int64_t dz = code_l.dims();
  auto one_direction = [&](int64_t rl, const GaussianCode<T>& a, int64_t rm,
                           const GaussianCode<T>& b, int64_t d) {
    double mu_l = a.mu.at2(rl, d), mu_m = b.mu.at2(rm, d);
    double vl = std::exp(static_cast<double>(a.log_var.at2(rl, d)));
    double vm = std::exp(static_cast<double>(b.log_var.at2(rm, d)));
    double dmu = mu_l - mu_m;
    if (opt.form == DivergenceForm::standard)
      return 0.5 * std::log(vm / vl) + (vl + dmu * dmu) / (2.0 * vm) - 0.5;
    return (vl + dmu * dmu) / (2.0 * vl) + 0.5 * std::log(vl / vm) - 0.5;
  };
  std::vector<double> out(static_cast<size_t>(dz));
  for (int64_t d = 0; d < dz; ++d) {
    double v = one_direction(row_l, code_l, row_m, code_m, d);
    if (opt.symmetric) v = 0.5 * (v + one_direction(row_m, code_m, row_l, code_l, d));
    out[static_cast<size_t>(d)] = v;
  }
  return out;
}

template <class T>
std::vector<double> pairwise_divergence(const GaussianCode<T>& code_l,
                                        const GaussianCode<T>& code_m,
                                        DivergenceOptions opt = {}) {
  DIVREP_CHECK(code_l.batch() == 1 && code_m.batch() == 1,
               "single-sample overload expects batch 1");
  return pairwise_divergence(code_l, code_m, 0, 0, opt);
}

// Estimated differing set (keep_set) plus the dims to exchange.
struct SwapPlan {
  std::vector<int> keep_set;     // z_n dims kept (estimated df_z), ascending
  std::vector<int> swap_set;     // complement within z_n, ascending
  std::vector<int> active_swap;  // swapped this step (amount curriculum), ascending
  int num_swapped = 0;
};

// keep_set = indices of the k largest divergences within z_n (ties -> lowest
// index). num_swap < 0 swaps the whole complement; otherwise only the
// num_swap lowest-divergence members of swap_set are exchanged.
inline SwapPlan select_keep_set(const std::vector<double>& divergence, int k,
                                const LatentPartition& partition, int num_swap = -1) {
  const int n0 = partition.n_begin(), n1 = partition.n_end();
  DIVREP_CHECK(static_cast<int>(divergence.size()) == partition.total(),
               "divergence length must equal d_z");
  DIVREP_CHECK(k >= 1 && k <= partition.dim_n(), "k out of range for z_n");
  for (int d = n0; d < n1; ++d)
    if (!std::isfinite(divergence[static_cast<size_t>(d)]))
      throw NumericError("non-finite divergence entry");

  std::vector<int> order;
  for (int d = n0; d < n1; ++d) order.push_back(d);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    double da = divergence[static_cast<size_t>(a)], db = divergence[static_cast<size_t>(b)];
    if (da != db) return da > db;
    return a < b;
  });

  SwapPlan plan;
  plan.keep_set.assign(order.begin(), order.begin() + k);
  plan.swap_set.assign(order.begin() + k, order.end());
  std::sort(plan.keep_set.begin(), plan.keep_set.end());

  // lowest divergence first for the amount curriculum
  std::vector<int> by_div(plan.swap_set);
  std::stable_sort(by_div.begin(), by_div.end(), [&](int a, int b) {
    double da = divergence[static_cast<size_t>(a)], db = divergence[static_cast<size_t>(b)];
    if (da != db) return da < db;
    return a < b;
  });
  int take = num_swap < 0 ? static_cast<int>(by_div.size())
                          : std::min<int>(num_swap, static_cast<int>(by_div.size()));
  plan.active_swap.assign(by_div.begin(), by_div.begin() + take);
  std::sort(plan.active_swap.begin(), plan.active_swap.end());
  std::sort(plan.swap_set.begin(), plan.swap_set.end());
  plan.num_swapped = take;
  return plan;
}

// 0/1 exchange mask over d_z: z_p dims always exchange (the concatenation
// with the partner's z_p), active swap dims exchange, keep dims stay.
template <class T>
Tensor<T> swap_mask(const SwapPlan& plan, const LatentPartition& partition) {
  Tensor<T> mask({static_cast<int64_t>(partition.total())}, T(0));
  for (int d = 0; d < partition.dim_p; ++d) mask[d] = T(1);
  for (int d : plan.active_swap) {
    DIVREP_CHECK(d >= partition.n_begin() && d < partition.n_end(), "plan/partition mismatch");
    mask[d] = T(1);
  }
  for (int d : plan.keep_set)
    DIVREP_CHECK(d >= partition.n_begin() && d < partition.n_end(), "plan/partition mismatch");
  return mask;
}

// Value-level swap of (mu, log_var) between two single-sample codes.
template <class T>
std::pair<GaussianCode<T>, GaussianCode<T>> swap_latents(const GaussianCode<T>& code_l,
                                                         const GaussianCode<T>& code_m,
                                                         const SwapPlan& plan) {
  DIVREP_CHECK(code_l.partition == code_m.partition, "codes must share a partition");
  DIVREP_CHECK(code_l.batch() == code_m.batch(), "batch mismatch");
  auto mask = swap_mask<T>(plan, code_l.partition);
  GaussianCode<T> out_l = code_l, out_m = code_m;
  for (int64_t b = 0; b < code_l.batch(); ++b) {
    for (int64_t d = 0; d < code_l.dims(); ++d) {
      if (mask[d] > T(0.5)) {
        std::swap(out_l.mu.at2(b, d), out_m.mu.at2(b, d));
        std::swap(out_l.log_var.at2(b, d), out_m.log_var.at2(b, d));
      }
    }
  }
  return {out_l, out_m};
}

// D(x_hat_rec, x_rec) summed over the pair; targets are constants.
template <class T>
double disentangle_loss(const Tensor<T>& x_rec_l, const Tensor<T>& x_rec_m,
                        const Tensor<T>& x_hat_rec_l, const Tensor<T>& x_hat_rec_m,
                        ReconDistance distance = ReconDistance::bce) {
  DIVREP_CHECK(x_rec_l.same_shape(x_hat_rec_l) && x_rec_m.same_shape(x_hat_rec_m),
               "disentangle_loss shape mismatch");
  auto dist = [&](const Tensor<T>& pred, const Tensor<T>& target) {
    auto v = ag::constant(pred);
    auto loss = distance == ReconDistance::bce
                    ? ag::binary_kl_sum_mean(v, target)
                    : ag::mse_sum_mean(v, target);
    return static_cast<double>(loss->value[0]);
  };
  return dist(x_hat_rec_l, x_rec_l) + dist(x_hat_rec_m, x_rec_m);
}

// Linear warmups: swapped-amount 1 -> amount_end, pair difficulty 1 -> k_max.
struct CurriculumState {
  int64_t step = 0;
  bool amount_on = true;
  bool difficulty_on = true;
  int amount_start = 1;
  int amount_end = 1;  // typically |d_z| - k
  int64_t amount_ramp_steps = 1000;
  int k_start = 1;
  int k_max = 1;
  int64_t difficulty_ramp_steps = 1000;

  void validate() const {
    DIVREP_CHECK_CFG(amount_start >= 1 && amount_end >= amount_start, "amount schedule direction");
    DIVREP_CHECK_CFG(k_start >= 1 && k_max >= k_start, "difficulty schedule direction");
    DIVREP_CHECK_CFG(amount_ramp_steps >= 1 && difficulty_ramp_steps >= 1, "ramp steps >= 1");
  }
};

struct CurriculumValues {
  int num_swap = 0;
  int k_effective = 0;
};

inline int ramp_value(int start, int end, int64_t step, int64_t ramp_steps) {
  if (step >= ramp_steps) return end;
  double frac = static_cast<double>(step) / static_cast<double>(ramp_steps);
  return start + static_cast<int>(std::llround(frac * (end - start)));
}

inline CurriculumValues curriculum_step(const CurriculumState& state) {
  state.validate();
  DIVREP_CHECK(state.step >= 0, "curriculum step must be >= 0");
  CurriculumValues v;
  v.num_swap = state.amount_on
                   ? ramp_value(state.amount_start, state.amount_end, state.step,
                                state.amount_ramp_steps)
                   : state.amount_end;
  v.k_effective = state.difficulty_on
                      ? ramp_value(state.k_start, state.k_max, state.step,
                                   state.difficulty_ramp_steps)
                      : state.k_max;
  return v;
}

}  // namespace divrep
