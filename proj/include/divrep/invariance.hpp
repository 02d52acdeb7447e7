#pragma once

#include "divrep/swap.hpp"

namespace divrep {

struct LossWeights {
  double alpha = 1.0;  // disentangle weight
  double beta = 1.0;   // contrastive weight
  double gamma = 1.0;  // z_p regularizer weight
  double tau = 0.1;    // contrastive temperature

  void validate() const {
    DIVREP_CHECK_CFG(std::isfinite(alpha) && alpha >= 0, "alpha must be finite and >= 0");
    DIVREP_CHECK_CFG(std::isfinite(beta) && beta >= 0, "beta must be finite and >= 0");
    DIVREP_CHECK_CFG(std::isfinite(gamma) && gamma >= 0, "gamma must be finite and >= 0");
    DIVREP_CHECK_CFG(std::isfinite(tau) && tau > 0, "tau must be finite and > 0");
  }
};

struct ClassGroup {
  int class_id = 0;
  std::vector<int> members;
};

inline std::vector<ClassGroup> build_class_groups(const std::vector<int>& labels,
                                                  int num_classes) {
  std::vector<ClassGroup> groups;
  for (int c = 0; c < num_classes; ++c) groups.push_back({c, {}});
  for (size_t i = 0; i < labels.size(); ++i) {
    DIVREP_CHECK(labels[i] >= 0 && labels[i] < num_classes, "label out of range");
    groups[static_cast<size_t>(labels[i])].members.push_back(static_cast<int>(i));
  }
  std::erase_if(groups, [](const ClassGroup& g) { return g.members.empty(); });
  return groups;
}

template <class T>
struct ClassAverage {
  Tensor<T> mu_bar;   // [num_classes, dim_p]; zero rows for absent classes
  Tensor<T> var_bar;  // [num_classes, dim_p]
  std::vector<int> counts;
};

// Eq-style per-class average of (mu_p, V_p) on the z_p slice; V = exp(log_var).
template <class T>
ClassAverage<T> class_average_code(const GaussianCode<T>& code, const std::vector<int>& labels,
                                   int num_classes) {
  code.validate();
  DIVREP_CHECK(static_cast<int64_t>(labels.size()) == code.batch(), "labels/batch mismatch");
  const int dp = code.partition.dim_p;
  ClassAverage<T> avg;
  avg.mu_bar = Tensor<T>({num_classes, dp}, T(0));
  avg.var_bar = Tensor<T>({num_classes, dp}, T(0));
  avg.counts.assign(static_cast<size_t>(num_classes), 0);
  for (int64_t b = 0; b < code.batch(); ++b) {
    int c = labels[static_cast<size_t>(b)];
    DIVREP_CHECK(c >= 0 && c < num_classes, "label out of range");
    ++avg.counts[static_cast<size_t>(c)];
    for (int d = 0; d < dp; ++d) {
      avg.mu_bar.at2(c, d) += code.mu.at2(b, d);
      avg.var_bar.at2(c, d) += std::exp(code.log_var.at2(b, d));
    }
  }
  for (int c = 0; c < num_classes; ++c) {
    int n = avg.counts[static_cast<size_t>(c)];
    if (n == 0) continue;
    for (int d = 0; d < dp; ++d) {
      avg.mu_bar.at2(c, d) /= static_cast<T>(n);
      avg.var_bar.at2(c, d) /= static_cast<T>(n);
    }
  }
  return avg;
}

// D(x_bar_rec_p, x_rec) with the configured distance; target is constant.
template <class T>
double zp_invariance_loss(const Tensor<T>& x_rec, const Tensor<T>& x_bar_rec_p,
                          ReconDistance distance = ReconDistance::bce) {
  DIVREP_CHECK(x_rec.same_shape(x_bar_rec_p), "zp_invariance_loss shape mismatch");
  auto pred = ag::constant(x_bar_rec_p);
  auto loss = distance == ReconDistance::bce ? ag::binary_kl_sum_mean(pred, x_rec)
                                             : ag::mse_sum_mean(pred, x_rec);
  return static_cast<double>(loss->value[0]);
}

// Value-level Eq. 7; features are L2-normalized before dot products.
template <class T>
double supervised_contrastive_loss(const Tensor<T>& features, const std::vector<int>& labels,
                                   double tau) {
  auto f = ag::l2norm_rows(ag::constant(features));
  return static_cast<double>(ag::supcon_loss(f, labels, static_cast<T>(tau))->value[0]);
}

// ---------------------------------------------------------------------------
// training step
// ---------------------------------------------------------------------------

enum class TrainScheme { alternating, joint, ce_only };

inline const char* scheme_name(TrainScheme s) {
  switch (s) {
    case TrainScheme::alternating: return "alternating";
    case TrainScheme::joint: return "joint";
    case TrainScheme::ce_only: return "ce_only";
  }
  return "?";
}

inline TrainScheme parse_scheme(const std::string& s) {
  if (s == "alternating") return TrainScheme::alternating;
  if (s == "joint") return TrainScheme::joint;
  if (s == "ce_only" || s == "ce") return TrainScheme::ce_only;
  throw ConfigError("unknown training scheme: " + s);
}

// Model-facing batch. Pairs are interleaved rows (l0, m0, l1, m1, ...); the
// hidden differing-factor sets are deliberately not part of this type.
template <class T>
struct TrainBatch {
  Tensor<T> x;              // [B, C, H, W]
  std::vector<int> labels;  // [B]
  std::vector<int> pair_k;  // [B/2] when the batch is paired, else empty

  int64_t size() const { return x.numel() ? x.dim(0) : 0; }
  bool paired() const { return !pair_k.empty(); }
  static std::vector<std::string> field_names() { return {"x", "labels", "pair_k"}; }
};

struct LossBreakdown {
  double ce = 0, vae_recon = 0, vae_kl = 0, disentangle = 0, contrastive = 0, zp = 0;
  double total = 0;

  double weighted_sum(const LossWeights& w) const {
    return ce + vae_recon + vae_kl + w.alpha * disentangle + w.beta * contrastive + w.gamma * zp;
  }
  void check_finite() const {
    auto chk = [](double v, const char* name) {
      if (!std::isfinite(v)) throw NumericError(std::string("non-finite loss term: ") + name);
    };
    chk(ce, "L_CE");
    chk(vae_recon, "L_VAE.recon");
    chk(vae_kl, "L_VAE.kl");
    chk(disentangle, "L_disentangle");
    chk(contrastive, "L_Sup");
    chk(zp, "L_Zp");
  }
};

struct StepOptions {
  TrainScheme scheme = TrainScheme::alternating;
  DivergenceOptions divergence;
  int num_swap = -1;  // amount-curriculum value; -1 = swap the full complement
  bool detach_ce_input = true;
};

template <class T>
struct StepGraph {
  ag::Var<T> ce, vae_recon, vae_kl, dis, sup, zp;
  ag::Var<T> total_generative;  // recon + kl + a*dis + b*sup + g*zp
  ag::Var<T> total;             // + ce
  EncodedBatch<T> enc;
  LossBreakdown terms;
};

// Builds the full per-step loss graph. Pair detection runs on code values
// (selection is discrete); gradients flow through the exchanged samples.
template <class T>
StepGraph<T> build_step_graph(VaeModel<T>& model, const TrainBatch<T>& batch,
                              const LossWeights& weights, const StepOptions& opt, Rng& rng) {
  weights.validate();
  DIVREP_CHECK(batch.size() >= 1, "empty batch");
  DIVREP_CHECK(static_cast<int64_t>(batch.labels.size()) == batch.size(), "labels size");
  const auto& part = model.partition();
  const bool gen = opt.scheme != TrainScheme::ce_only;
  const int64_t B = batch.size();

  StepGraph<T> g;
  auto x = ag::constant(batch.x);
  g.enc = model.encode_graph(x);
  auto mu_p = model.slice_p(g.enc.mu);

  // cross-entropy on mu_p (detached under the alternating scheme)
  auto cls_in = opt.detach_ce_input ? ag::detach(mu_p) : mu_p;
  auto term_value = [](const ag::Var<T>& v, const char* name) {
    double x = static_cast<double>(v->value[0]);
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite loss term: ") + name);
    return x;
  };

  g.ce = ag::softmax_ce_mean(model.classify_graph(cls_in), batch.labels);
  g.terms.ce = term_value(g.ce, "L_CE");

  if (gen) {
    Tensor<T> eps(g.enc.mu->value.shape);
    rng.fill_normal(eps);
    auto z = reparameterize_graph(g.enc.mu, g.enc.log_var, std::move(eps));
    auto dec_logits = model.decode_logits_graph(z);
    g.vae_recon = ag::sigmoid_bce_sum_mean(dec_logits, batch.x);
    g.vae_kl = ag::gauss_kl_prior_mean(g.enc.mu, g.enc.log_var);
    g.terms.vae_recon = term_value(g.vae_recon, "L_VAE.recon");
    g.terms.vae_kl = term_value(g.vae_kl, "L_VAE.kl");
    auto x_rec = ag::sigmoid(dec_logits);
    const auto dist = model.config().distance;
    auto dist_to_const = [&](const ag::Var<T>& pred, const Tensor<T>& target) {
      return dist == ReconDistance::bce ? ag::binary_kl_sum_mean(pred, target)
                                        : ag::mse_sum_mean(pred, target);
    };

    auto total = ag::add(g.vae_recon, g.vae_kl);

    if (weights.alpha > 0 && batch.paired()) {
      DIVREP_CHECK(B % 2 == 0 && static_cast<int64_t>(batch.pair_k.size()) == B / 2,
                   "paired batch layout");
      GaussianCode<T> codes{g.enc.mu->value, g.enc.log_var->value, part};
      Tensor<T> mask({B, static_cast<int64_t>(part.total())}, T(0));
      std::vector<int> partner(static_cast<size_t>(B));
      for (int64_t p = 0; p < B / 2; ++p) {
        auto div = pairwise_divergence(codes, codes, 2 * p, 2 * p + 1, opt.divergence);
        auto plan = select_keep_set(div, batch.pair_k[static_cast<size_t>(p)], part, opt.num_swap);
        auto m = swap_mask<T>(plan, part);
        for (int64_t d = 0; d < m.numel(); ++d) {
          mask.at2(2 * p, d) = m[d];
          mask.at2(2 * p + 1, d) = m[d];
        }
        partner[static_cast<size_t>(2 * p)] = static_cast<int>(2 * p + 1);
        partner[static_cast<size_t>(2 * p + 1)] = static_cast<int>(2 * p);
      }
      auto z_hat = ag::mix(z, ag::gather_rows(z, partner), std::move(mask));
      auto hat_rec = ag::sigmoid(model.decode_logits_graph(z_hat));
      // mean over 2P rows, doubled: the per-pair sum of both members' D terms
      g.dis = ag::scale(dist_to_const(hat_rec, x_rec->value), T(2));
      total = ag::add(total, ag::scale(g.dis, static_cast<T>(weights.alpha)));
    }

    if (weights.beta > 0 && B >= 2) {
      auto feats = model.project_graph(mu_p);
      g.sup = ag::supcon_loss(feats, batch.labels, static_cast<T>(weights.tau));
      total = ag::add(total, ag::scale(g.sup, static_cast<T>(weights.beta)));
    }

    if (weights.gamma > 0) {
      auto var_p = ag::vexp(model.slice_p(g.enc.log_var));
      int nc = model.config().num_classes;
      auto mu_bar = ag::group_mean(mu_p, batch.labels, nc);
      auto var_bar = ag::group_mean(var_p, batch.labels, nc);
      Tensor<T> eps_c({static_cast<int64_t>(nc), static_cast<int64_t>(part.dim_p)});
      rng.fill_normal(eps_c);
      auto z_bar_class = ag::add(mu_bar, ag::mul(ag::vsqrt(var_bar), ag::constant(std::move(eps_c))));
      auto z_bar = ag::gather_rows(z_bar_class, batch.labels);
      auto z_n = model.slice_n(z);
      auto bar_rec = ag::sigmoid(model.decode_logits_graph(ag::concat_cols(z_bar, z_n)));
      g.zp = dist_to_const(bar_rec, x_rec->value);
      total = ag::add(total, ag::scale(g.zp, static_cast<T>(weights.gamma)));
    }

    g.total_generative = total;
    if (g.dis) g.terms.disentangle = term_value(g.dis, "L_disentangle");
    if (g.sup) g.terms.contrastive = term_value(g.sup, "L_Sup");
    if (g.zp) g.terms.zp = term_value(g.zp, "L_Zp");
    g.total = ag::add(g.ce, g.total_generative);
  } else {
    g.total = g.ce;
  }
  g.terms.total = g.terms.weighted_sum(weights);
  g.terms.check_finite();
  return g;
}

// Eq. 8 evaluated with per-term values for logging; no parameter update.
template <class T>
LossBreakdown total_loss(VaeModel<T>& model, const TrainBatch<T>& batch,
                         const LossWeights& weights, Rng& rng, StepOptions opt = {}) {
  opt.scheme = TrainScheme::joint;
  opt.detach_ce_input = false;
  return build_step_graph(model, batch, weights, opt, rng).terms;
}

// Two-sub-step scheme: A updates the classifier on CE with gradients stopped
// at z_p; B updates everything else on the generative objective.
template <class T>
LossBreakdown alternate_step(VaeModel<T>& model, const TrainBatch<T>& batch,
                             const LossWeights& weights, const StepOptions& opt,
                             nn::Adam<T>& classifier_opt, nn::Adam<T>& generative_opt, Rng& rng) {
  DIVREP_CHECK_CFG(opt.scheme == TrainScheme::alternating && opt.detach_ce_input,
                   "alternate_step requires the alternating scheme with a detached classifier input");
  auto same_params = [](const std::vector<ag::Var<T>>& a, const std::vector<ag::Var<T>>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
      if (a[i].get() != b[i].get()) return false;
    return true;
  };
  DIVREP_CHECK_CFG(same_params(classifier_opt.params(), model.classifier_params()),
                   "classifier optimizer does not own the classifier parameter group");
  DIVREP_CHECK_CFG(same_params(generative_opt.params(), model.generative_params()),
                   "generative optimizer does not own the encoder/decoder parameter group");
  auto g = build_step_graph(model, batch, weights, opt, rng);
  classifier_opt.zero_grad();
  ag::backward(g.ce);
  classifier_opt.step();
  generative_opt.zero_grad();
  ag::backward(g.total_generative);
  generative_opt.step();
  return g.terms;
}

template <class T>
LossBreakdown joint_step(VaeModel<T>& model, const TrainBatch<T>& batch,
                         const LossWeights& weights, StepOptions opt, nn::Adam<T>& all_opt,
                         Rng& rng) {
  opt.detach_ce_input = false;
  opt.scheme = TrainScheme::joint;
  auto g = build_step_graph(model, batch, weights, opt, rng);
  all_opt.zero_grad();
  ag::backward(g.total);
  all_opt.step();
  return g.terms;
}

template <class T>
LossBreakdown ce_step(VaeModel<T>& model, const TrainBatch<T>& batch, nn::Adam<T>& all_opt,
                      Rng& rng) {
  StepOptions opt;
  opt.scheme = TrainScheme::ce_only;
  opt.detach_ce_input = false;
  LossWeights w;
  auto g = build_step_graph(model, batch, w, opt, rng);
  all_opt.zero_grad();
  ag::backward(g.total);
  all_opt.step();
  return g.terms;
}

}  // namespace divrep
