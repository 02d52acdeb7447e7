#pragma once

#include <optional>

#include "divrep/nn.hpp"

namespace divrep {

// Contiguous latent layout [z_p | z_nk | z_nu].
struct LatentPartition {
  int dim_p = 10;
  int dim_nk = 2;
  int dim_nu = 4;

  int total() const { return dim_p + dim_nk + dim_nu; }
  int dim_n() const { return dim_nk + dim_nu; }
  int p_begin() const { return 0; }
  int p_end() const { return dim_p; }
  int n_begin() const { return dim_p; }
  int n_end() const { return total(); }

  void validate() const {
    DIVREP_CHECK_CFG(dim_p >= 1 && dim_nk >= 1 && dim_nu >= 1,
                     "latent partition dims must all be >= 1");
  }
  bool operator==(const LatentPartition&) const = default;
};

// Per-sample factorized Gaussian posterior over the partitioned latent.
template <class T>
struct GaussianCode {
  Tensor<T> mu;       // [B, d_z]
  Tensor<T> log_var;  // [B, d_z]
  LatentPartition partition;

  int64_t batch() const { return mu.dim(0); }
  int64_t dims() const { return mu.dim(1); }

  void validate() const {
    DIVREP_CHECK(mu.rank() == 2 && mu.same_shape(log_var), "code shape");
    DIVREP_CHECK(mu.dim(1) == partition.total(), "code width != partition total");
    if (!mu.all_finite() || !log_var.all_finite())
      throw NumericError("non-finite Gaussian code");
  }
};

enum class ReconDistance { bce, mse };

struct ModelConfig {
  int image_c = 3, image_h = 28, image_w = 28;
  std::vector<int64_t> enc_channels{32, 64, 128};
  int64_t fc_dim = 256;
  LatentPartition partition;
  std::vector<int64_t> classifier_hidden{64, 64};
  int num_classes = 10;
  std::vector<int64_t> projection_hidden{64};
  int64_t projection_dim = 32;
  ReconDistance distance = ReconDistance::bce;
  float log_var_clamp = 10.0f;

  void validate() const {
    DIVREP_CHECK_CFG(image_c >= 1 && image_h >= 4 && image_w >= 4, "image shape too small");
    DIVREP_CHECK_CFG(!enc_channels.empty(), "encoder needs at least one conv block");
    DIVREP_CHECK_CFG(num_classes >= 2, "need at least two classes");
    partition.validate();
    int64_t s = std::min(image_h, image_w);
    for (size_t i = 0; i < enc_channels.size(); ++i) s = (s - 1) / 2 + 1;
    DIVREP_CHECK_CFG(s >= 2, "too many conv blocks for image size");
  }
};

template <class T>
struct EncodedBatch {
  ag::Var<T> mu;       // [B, d_z]
  ag::Var<T> log_var;  // [B, d_z] clamped
};

// Encoder / decoder / classifier / projection with a partitioned Gaussian
// latent. Parameter names are stable; the checkpoint container keys on them.
template <class T>
class VaeModel {
 public:
  VaeModel(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(derive_seed(seed, "model-init"));
    const int dz = cfg_.partition.total();

    // encoder: stride-2 conv blocks, then two fc layers to 2*d_z
    int64_t c = cfg_.image_c, h = cfg_.image_h, w = cfg_.image_w;
    for (size_t i = 0; i < cfg_.enc_channels.size(); ++i) {
      enc_convs_.emplace_back(params_, "enc.conv" + std::to_string(i), c, cfg_.enc_channels[i], 3,
                              2, 1, rng);
      c = cfg_.enc_channels[i];
      h = (h - 1) / 2 + 1;
      w = (w - 1) / 2 + 1;
      enc_sizes_.push_back({h, w});
    }
    bottom_c_ = c;
    bottom_h_ = h;
    bottom_w_ = w;
    enc_fc1_ = nn::Linear<T>(params_, "enc.fc1", c * h * w, cfg_.fc_dim, rng);
    enc_fc2_ = nn::Linear<T>(params_, "enc.fc2", cfg_.fc_dim, 2 * dz, rng);

    // decoder mirrors the encoder spatial path
    dec_fc1_ = nn::Linear<T>(params_, "dec.fc1", dz, cfg_.fc_dim, rng);
    dec_fc2_ = nn::Linear<T>(params_, "dec.fc2", cfg_.fc_dim, c * h * w, rng);
    for (size_t i = cfg_.enc_channels.size(); i-- > 0;) {
      int64_t cin = cfg_.enc_channels[i];
      int64_t cout = (i == 0) ? cfg_.image_c : cfg_.enc_channels[i - 1];
      dec_convs_.emplace_back(params_, "dec.conv" + std::to_string(i), cin, cout, 3, 1, 1, rng);
    }

    classifier_ = nn::Mlp<T>(params_, "cls.head", cfg_.partition.dim_p, cfg_.classifier_hidden,
                             cfg_.num_classes, rng);
    projection_ = nn::Mlp<T>(params_, "proj.head", cfg_.partition.dim_p, cfg_.projection_hidden,
                             cfg_.projection_dim, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  const LatentPartition& partition() const { return cfg_.partition; }
  nn::ParamSet<T>& params() { return params_; }
  const nn::ParamSet<T>& params() const { return params_; }

  std::vector<ag::Var<T>> classifier_params() const { return filter_params("cls.", true); }
  std::vector<ag::Var<T>> generative_params() const { return filter_params("cls.", false); }

  // x in [0,1], shape [B, C, H, W]
  EncodedBatch<T> encode_graph(const ag::Var<T>& x) const {
    DIVREP_CHECK(x->value.rank() == 4 && x->value.dim(1) == cfg_.image_c &&
                     x->value.dim(2) == cfg_.image_h && x->value.dim(3) == cfg_.image_w,
                 "encode: unexpected input shape " + x->value.shape_str());
    ag::Var<T> h = x;
    for (auto& conv : enc_convs_) h = ag::relu(conv.forward(h));
    int64_t B = x->value.dim(0);
    h = ag::reshape(h, {B, bottom_c_ * bottom_h_ * bottom_w_});
    h = ag::relu(enc_fc1_.forward(h));
    auto both = enc_fc2_.forward(h);
    const int dz = cfg_.partition.total();
    auto mu = ag::slice_cols(both, 0, dz);
    auto lv = ag::clamp(ag::slice_cols(both, dz, 2 * dz), T(-cfg_.log_var_clamp),
                        T(cfg_.log_var_clamp));
    return {mu, lv};
  }

  GaussianCode<T> encode(const Tensor<T>& x) const {
    auto enc = encode_graph(ag::constant(x));
    return GaussianCode<T>{enc.mu->value, enc.log_var->value, cfg_.partition};
  }

  // z [B, d_z] -> logits [B, C, H, W]; image = sigmoid(logits)
  ag::Var<T> decode_logits_graph(const ag::Var<T>& z) const {
    DIVREP_CHECK(z->value.rank() == 2 && z->value.dim(1) == cfg_.partition.total(),
                 "decode: latent width mismatch");
    int64_t B = z->value.dim(0);
    auto h = ag::relu(dec_fc1_.forward(z));
    h = ag::relu(dec_fc2_.forward(h));
    auto t = ag::reshape(h, {B, bottom_c_, bottom_h_, bottom_w_});
    for (size_t k = 0; k < dec_convs_.size(); ++k) {
      size_t level = dec_convs_.size() - 1 - k;  // enc block whose input size we restore
      int64_t th = (level == 0) ? cfg_.image_h : enc_sizes_[level - 1].first;
      int64_t tw = (level == 0) ? cfg_.image_w : enc_sizes_[level - 1].second;
      t = ag::nearest_resize(t, th, tw);
      t = dec_convs_[k].forward(t);
      if (k + 1 < dec_convs_.size()) t = ag::relu(t);
    }
    return t;
  }

  Tensor<T> decode(const Tensor<T>& z) const {
    auto probs = ag::sigmoid(decode_logits_graph(ag::constant(z)));
    return probs->value;
  }

  // logits from the z_p slice only
  ag::Var<T> classify_graph(const ag::Var<T>& z_p) const {
    DIVREP_CHECK(z_p->value.rank() == 2 && z_p->value.dim(1) == cfg_.partition.dim_p,
                 "classify: expected z_p slice");
    return classifier_.forward(z_p);
  }

  Tensor<T> classify(const Tensor<T>& z_p) const {
    return classify_graph(ag::constant(z_p))->value;
  }

  // L2-normalized projection of mu_p for the contrastive term
  ag::Var<T> project_graph(const ag::Var<T>& mu_p) const {
    return ag::l2norm_rows(projection_.forward(mu_p));
  }

  ag::Var<T> slice_p(const ag::Var<T>& code2d) const {
    return ag::slice_cols(code2d, 0, (int64_t)cfg_.partition.dim_p);
  }
  ag::Var<T> slice_n(const ag::Var<T>& code2d) const {
    return ag::slice_cols(code2d, (int64_t)cfg_.partition.n_begin(),
                          (int64_t)cfg_.partition.n_end());
  }

 private:
  std::vector<ag::Var<T>> filter_params(const std::string& prefix, bool keep_matching) const {
    std::vector<ag::Var<T>> out;
    for (auto& [name, v] : params_.items) {
      bool match = name.rfind(prefix, 0) == 0;
      if (match == keep_matching) out.push_back(v);
    }
    return out;
  }

  ModelConfig cfg_;
  nn::ParamSet<T> params_;
  std::vector<nn::Conv2d<T>> enc_convs_;
  std::vector<std::pair<int64_t, int64_t>> enc_sizes_;
  int64_t bottom_c_ = 0, bottom_h_ = 0, bottom_w_ = 0;
  nn::Linear<T> enc_fc1_, enc_fc2_;
  nn::Linear<T> dec_fc1_, dec_fc2_;
  std::vector<nn::Conv2d<T>> dec_convs_;
  nn::Mlp<T> classifier_;
  nn::Mlp<T> projection_;
};

// z = mu + exp(log_var / 2) * eps
template <class T>
ag::Var<T> reparameterize_graph(const ag::Var<T>& mu, const ag::Var<T>& log_var,
                                Tensor<T> eps) {
  DIVREP_CHECK(mu->value.same_shape(eps), "reparameterize eps shape");
  auto sigma = ag::vexp(ag::scale(log_var, T(0.5)));
  return ag::add(mu, ag::mul(sigma, ag::constant(std::move(eps))));
}

template <class T>
Tensor<T> reparameterize(const GaussianCode<T>& code, Rng& rng) {
  code.validate();
  Tensor<T> z = code.mu;
  for (int64_t i = 0; i < z.numel(); ++i)
    z[i] += std::exp(code.log_var[i] * T(0.5)) * static_cast<T>(rng.normal());
  return z;
}

struct ElboTerms {
  double recon = 0.0;
  double kl = 0.0;
  double total() const { return recon + kl; }
};

// Pixelwise BCE summed over pixels + closed-form prior KL, both averaged
// over the batch. Probability inputs; the training path uses the fused
// logits op with identical math.
template <class T>
ElboTerms elbo_loss(const Tensor<T>& x, const Tensor<T>& x_rec, const GaussianCode<T>& code,
                    double eps = 1e-7) {
  DIVREP_CHECK(x.same_shape(x_rec), "elbo_loss shape mismatch");
  if (!x.all_finite() || !x_rec.all_finite())
    throw NumericError("elbo_loss: non-finite reconstruction input");
  code.validate();
  int64_t B = x.dim(0);
  double recon = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) {
    double t = x[i];
    double p = std::min(std::max(static_cast<double>(x_rec[i]), eps), 1.0 - eps);
    if (t > 0.0) recon -= t * std::log(p);
    if (t < 1.0) recon -= (1.0 - t) * std::log(1.0 - p);
  }
  double kl = 0.0;
  for (int64_t i = 0; i < code.mu.numel(); ++i) {
    double m = code.mu[i], lv = code.log_var[i];
    kl += 0.5 * (m * m + std::exp(lv) - 1.0 - lv);
  }
  return {recon / static_cast<double>(B), kl / static_cast<double>(B)};
}

}  // namespace divrep
