#pragma once

#include "divrep/invariance.hpp"

namespace divrep {

struct AttackConfig {
  enum class Kind { fgsm, pgd, cw };
  Kind kind = Kind::fgsm;
  double epsilon = 0.1;  // L_inf budget in pixel units
  int pgd_steps = 40;
  double pgd_step_size = 0.0;  // 0 = epsilon / 10
  bool pgd_random_start = true;
  double cw_c = 0.01;
  int cw_iters = 200;
  double cw_lr = 0.01;
  double cw_kappa = 0.0;

  double step_size() const { return pgd_step_size > 0.0 ? pgd_step_size : epsilon / 10.0; }

  void validate() const {
    DIVREP_CHECK(epsilon >= 0.0, "epsilon must be >= 0");
    DIVREP_CHECK_CFG(epsilon <= 1.0, "epsilon exceeds the pixel range");
    if (kind == Kind::pgd) {
      DIVREP_CHECK_CFG(pgd_steps >= 1, "pgd needs at least one step");
      DIVREP_CHECK_CFG(step_size() <= epsilon || epsilon == 0.0,
                       "pgd step size must not exceed epsilon");
    }
    if (kind == Kind::cw) {
      DIVREP_CHECK_CFG(cw_c > 0.0, "cw c must be positive");
      DIVREP_CHECK_CFG(cw_iters >= 1 && cw_lr > 0.0, "cw optimization settings");
    }
  }

  std::string name() const {
    switch (kind) {
      case Kind::fgsm: return "fgsm";
      case Kind::pgd: return "pgd";
      case Kind::cw: return "cw";
    }
    return "?";
  }
  double strength() const { return kind == Kind::cw ? cw_c : epsilon; }
};

// Attacks differentiate through the deterministic path classify(mu_p(x)).
template <class T>
Tensor<T> classification_input_gradient(const VaeModel<T>& model, const Tensor<T>& x,
                                        const std::vector<int>& labels) {
  auto xv = ag::leaf(x, true);
  auto enc = model.encode_graph(xv);
  auto loss = ag::softmax_ce_mean(model.classify_graph(
                                      ag::slice_cols(enc.mu, 0, (int64_t)model.partition().dim_p)),
                                  labels);
  ag::backward(loss);
  return xv->grad_ready ? xv->grad : Tensor<T>(x.shape, T(0));
}

template <class T>
Tensor<T> model_logits(const VaeModel<T>& model, const Tensor<T>& x) {
  auto enc = model.encode_graph(ag::constant(x));
  return model
      .classify_graph(ag::slice_cols(enc.mu, 0, (int64_t)model.partition().dim_p))
      ->value;
}

inline std::vector<int> argmax_rows(const auto& logits) {
  std::vector<int> out;
  for (int64_t r = 0; r < logits.dim(0); ++r) {
    int best = 0;
    for (int64_t c = 1; c < logits.dim(1); ++c)
      if (logits.at2(r, c) > logits.at2(r, best)) best = static_cast<int>(c);
    out.push_back(best);
  }
  return out;
}

namespace detail {

// One signed-gradient step plus projection; shared by FGSM and PGD so the
// single-step reduction is bit-exact.
template <class T>
Tensor<T> signed_step(const VaeModel<T>& model, const Tensor<T>& x_orig, const Tensor<T>& x_cur,
                      const std::vector<int>& labels, T step, T eps) {
  Tensor<T> g = classification_input_gradient(model, x_cur, labels);
  Tensor<T> out = x_cur;
  for (int64_t i = 0; i < out.numel(); ++i) {
    T s = g[i] > T(0) ? T(1) : (g[i] < T(0) ? T(-1) : T(0));
    T v = x_cur[i] + step * s;
    v = std::min(std::max(v, x_orig[i] - eps), x_orig[i] + eps);
    out[i] = std::min(std::max(v, T(0)), T(1));
  }
  return out;
}

}  // namespace detail

template <class T>
Tensor<T> fgsm(const VaeModel<T>& model, const Tensor<T>& x, const std::vector<int>& labels,
               double eps) {
  DIVREP_CHECK(eps >= 0.0, "epsilon must be >= 0");
  return detail::signed_step(model, x, x, labels, static_cast<T>(eps), static_cast<T>(eps));
}

template <class T>
Tensor<T> pgd(const VaeModel<T>& model, const Tensor<T>& x, const std::vector<int>& labels,
              double eps, int steps, double step_size, bool random_start, uint64_t seed = 0) {
  AttackConfig cfg;
  cfg.kind = AttackConfig::Kind::pgd;
  cfg.epsilon = eps;
  cfg.pgd_steps = steps;
  cfg.pgd_step_size = step_size;
  cfg.validate();
  Tensor<T> cur = x;
  if (random_start && eps > 0.0) {
    Rng rng(derive_seed(seed, "pgd-start"));
    for (int64_t i = 0; i < cur.numel(); ++i) {
      cur[i] = std::min(std::max(cur[i] + static_cast<T>(rng.uniform(-eps, eps)), T(0)), T(1));
    }
  }
  for (int s = 0; s < steps; ++s)
    cur = detail::signed_step(model, x, cur, labels, static_cast<T>(cfg.step_size()),
                              static_cast<T>(eps));
  return cur;
}

template <class T>
struct CwResult {
  Tensor<T> x_adv;
  std::vector<bool> failed;  // per sample: no adversarial found, original kept
};

// Tanh-space L2 attack: minimize ||delta||^2 + c * margin(x + delta).
template <class T>
CwResult<T> cw_l2(const VaeModel<T>& model, const Tensor<T>& x, const std::vector<int>& labels,
                  double c, int iters, double lr, double kappa = 0.0) {
  AttackConfig cfg;
  cfg.kind = AttackConfig::Kind::cw;
  cfg.cw_c = c;
  cfg.cw_iters = iters;
  cfg.cw_lr = lr;
  cfg.validate();
  const int64_t B = x.dim(0);
  const T delta = T(1e-6);

  Tensor<T> w0 = x;
  for (auto& v : w0.data) {
    T p = std::min(std::max(v, delta), T(1) - delta);
    v = std::atanh(T(2) * p - T(1));
  }
  auto w = ag::param(std::move(w0));
  nn::AdamConfig<T> ocfg;
  ocfg.lr = static_cast<T>(lr);
  nn::Adam<T> opt({w}, ocfg);

  CwResult<T> res;
  res.x_adv = x;
  res.failed.assign(static_cast<size_t>(B), true);
  std::vector<double> best_norm(static_cast<size_t>(B), 1e300);
  const int64_t per = x.numel() / B;

  for (int it = 0; it < iters; ++it) {
    opt.zero_grad();
    auto x_w = ag::scale(ag::add_scalar(ag::vtanh(w), T(1)), T(0.5));
    auto diff = ag::sub(x_w, ag::constant(x));
    auto dist = ag::sum_all(ag::mul(diff, diff));
    auto enc = model.encode_graph(ag::reshape(x_w, x.shape));
    auto logits = model.classify_graph(
        ag::slice_cols(enc.mu, 0, (int64_t)model.partition().dim_p));
    auto margin = ag::cw_margin_sum(logits, labels, static_cast<T>(kappa));
    auto loss = ag::add(dist, ag::scale(margin, static_cast<T>(c)));
    ag::backward(loss);
    opt.step();

    auto preds = argmax_rows(logits->value);
    for (int64_t b = 0; b < B; ++b) {
      if (preds[static_cast<size_t>(b)] == labels[static_cast<size_t>(b)]) continue;
      double norm = 0.0;
      for (int64_t i = 0; i < per; ++i) {
        double d = x_w->value[b * per + i] - x[b * per + i];
        norm += d * d;
      }
      if (norm < best_norm[static_cast<size_t>(b)]) {
        best_norm[static_cast<size_t>(b)] = norm;
        res.failed[static_cast<size_t>(b)] = false;
        for (int64_t i = 0; i < per; ++i)
          res.x_adv[b * per + i] = std::min(std::max(x_w->value[b * per + i], T(0)), T(1));
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// accuracy-vs-strength evaluation
// ---------------------------------------------------------------------------

struct AttackRow {
  std::string attack;
  double strength = 0.0;
  double clean_acc = 0.0;
  double attacked_acc = 0.0;
  double mean_norm = 0.0;  // L_inf for fgsm/pgd, L2 for cw
  int64_t n = 0;
};

struct AttackReport {
  std::vector<AttackRow> rows;

  void validate(double slack = 0.01) const {
    for (auto& r : rows)
      DIVREP_CHECK(r.attacked_acc <= r.clean_acc + slack,
                   "attacked accuracy above clean accuracy beyond slack");
  }

  static const char* csv_header() { return "attack,param,clean_acc,attacked_acc,mean_norm,n"; }
  void write_csv(std::ostream& os) const {
    os << csv_header() << "\n";
    for (auto& r : rows)
      os << r.attack << "," << r.strength << "," << r.clean_acc << "," << r.attacked_acc << ","
         << r.mean_norm << "," << r.n << "\n";
  }
};

template <class T>
struct EvalData {
  Tensor<T> x;  // [N, C, H, W]
  std::vector<int> labels;
};

template <class T>
double accuracy(const VaeModel<T>& model, const Tensor<T>& x, const std::vector<int>& labels,
                int64_t batch = 256) {
  const int64_t N = x.dim(0);
  DIVREP_CHECK(N >= 1, "empty dataset");
  const int64_t per = x.numel() / N;
  int64_t correct = 0;
  for (int64_t at = 0; at < N; at += batch) {
    int64_t n = std::min(batch, N - at);
    Tensor<T> chunk({n, x.dim(1), x.dim(2), x.dim(3)});
    std::copy(x.ptr() + at * per, x.ptr() + (at + n) * per, chunk.ptr());
    auto preds = argmax_rows(model_logits(model, chunk));
    for (int64_t b = 0; b < n; ++b)
      if (preds[static_cast<size_t>(b)] == labels[static_cast<size_t>(at + b)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(N);
}

template <class T>
AttackReport evaluate_attacks(const VaeModel<T>& model, const EvalData<T>& data,
                              const std::vector<AttackConfig>& configs, uint64_t seed = 0,
                              int64_t batch = 128) {
  DIVREP_CHECK(data.x.numel() > 0 && data.x.dim(0) >= 1, "empty dataset");
  for (auto& cfg : configs) cfg.validate();
  const int64_t N = data.x.dim(0);
  const int64_t per = data.x.numel() / N;
  double clean = accuracy(model, data.x, data.labels);

  AttackReport report;
  for (auto& cfg : configs) {
    int64_t correct = 0;
    double norm_acc = 0.0;
    for (int64_t at = 0; at < N; at += batch) {
      int64_t n = std::min(batch, N - at);
      Tensor<T> chunk({n, data.x.dim(1), data.x.dim(2), data.x.dim(3)});
      std::copy(data.x.ptr() + at * per, data.x.ptr() + (at + n) * per, chunk.ptr());
      std::vector<int> labels(data.labels.begin() + at, data.labels.begin() + at + n);
      Tensor<T> adv;
      if (cfg.kind == AttackConfig::Kind::fgsm) {
        adv = fgsm(model, chunk, labels, cfg.epsilon);
      } else if (cfg.kind == AttackConfig::Kind::pgd) {
        adv = pgd(model, chunk, labels, cfg.epsilon, cfg.pgd_steps, cfg.pgd_step_size,
                  cfg.pgd_random_start, derive_seed(seed, "pgd-" + std::to_string(at)));
      } else {
        adv = cw_l2(model, chunk, labels, cfg.cw_c, cfg.cw_iters, cfg.cw_lr, cfg.cw_kappa).x_adv;
      }
      auto preds = argmax_rows(model_logits(model, adv));
      for (int64_t b = 0; b < n; ++b) {
        if (preds[static_cast<size_t>(b)] == labels[static_cast<size_t>(b)]) ++correct;
        if (cfg.kind == AttackConfig::Kind::cw) {
          double l2 = 0.0;
          for (int64_t i = 0; i < per; ++i) {
            double d = adv[b * per + i] - chunk[b * per + i];
            l2 += d * d;
          }
          norm_acc += std::sqrt(l2);
        } else {
          double linf = 0.0;
          for (int64_t i = 0; i < per; ++i)
            linf = std::max(linf,
                            std::abs(static_cast<double>(adv[b * per + i] - chunk[b * per + i])));
          norm_acc += linf;
        }
      }
    }
    AttackRow row;
    row.attack = cfg.name();
    row.strength = cfg.strength();
    row.clean_acc = clean;
    row.attacked_acc = static_cast<double>(correct) / static_cast<double>(N);
    row.mean_norm = norm_acc / static_cast<double>(N);
    row.n = N;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace divrep
