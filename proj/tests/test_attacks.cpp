#include <catch2/catch_amalgamated.hpp>

#include "divrep/attacks.hpp"
#include "divrep/trainer.hpp"

using namespace divrep;

namespace {

ModelConfig toy_config(int classes = 2) {
  ModelConfig cfg;
  cfg.image_c = 1;
  cfg.image_h = 8;
  cfg.image_w = 8;
  cfg.enc_channels = {4, 8};
  cfg.fc_dim = 16;
  cfg.partition = {.dim_p = 3, .dim_nk = 1, .dim_nu = 1};
  cfg.classifier_hidden = {8};
  cfg.num_classes = classes;
  cfg.projection_hidden = {8};
  cfg.projection_dim = 4;
  return cfg;
}

// bright half-images: class = which half carries the mass
template <class T>
EvalData<T> half_field_data(int64_t n, uint64_t seed) {
  EvalData<T> d;
  d.x = Tensor<T>({n, 1, 8, 8});
  Rng rng(seed);
  for (int64_t i = 0; i < n; ++i) {
    int label = static_cast<int>(rng.below(2));
    d.labels.push_back(label);
    for (int64_t y = 0; y < 8; ++y)
      for (int64_t x = 0; x < 8; ++x) {
        bool bright = label == 0 ? x < 4 : x >= 4;
        d.x.at4(i, 0, y, x) =
            static_cast<T>(std::clamp(rng.uniform(0.0, 0.25) + (bright ? 0.65 : 0.0), 0.0, 1.0));
      }
  }
  return d;
}

VaeModel<float> trained_toy(uint64_t seed, int steps = 60) {
  VaeModel<float> model(toy_config(), seed);
  auto data = half_field_data<float>(64, derive_seed(seed, "train-data"));
  nn::AdamConfig<float> ocfg;
  ocfg.lr = 2e-3f;
  nn::Adam<float> opt(model.params().vars(), ocfg);
  Rng rng(derive_seed(seed, "steps"));
  for (int s = 0; s < steps; ++s) {
    TrainBatch<float> batch{data.x, data.labels, {}};
    ce_step(model, batch, opt, rng);
  }
  return model;
}

}  // namespace

TEST_CASE("fgsm contracts") {
  auto model = trained_toy(1);
  auto data = half_field_data<float>(32, 99);
  SECTION("zero budget returns the input bit-exactly") {
    auto adv = fgsm(model, data.x, data.labels, 0.0);
    REQUIRE(adv.data == data.x.data);
  }
  SECTION("negative epsilon is an argument error") {
    REQUIRE_THROWS_AS(fgsm(model, data.x, data.labels, -0.1), ArgError);
  }
  SECTION("L-inf budget holds on every sample and pixel") {
    auto adv = fgsm(model, data.x, data.labels, 0.07);
    float worst = 0.f;
    for (int64_t i = 0; i < adv.numel(); ++i) {
      worst = std::max(worst, std::abs(adv[i] - data.x[i]));
      REQUIRE(adv[i] >= 0.f);
      REQUIRE(adv[i] <= 1.f);
    }
    REQUIRE(worst <= 0.07f + 1e-6f);
  }
  SECTION("gradient sign agrees with finite differences on >=99% of pixels") {
    VaeModel<double> dmodel(toy_config(), 7);
    auto ddata = half_field_data<double>(2, 100);
    auto grad = classification_input_gradient(dmodel, ddata.x, ddata.labels);
    auto loss_at = [&](const Tensor<double>& x) {
      auto enc = dmodel.encode_graph(ag::constant(x));
      auto logits = dmodel.classify_graph(ag::slice_cols(enc.mu, 0, 3));
      return ag::softmax_ce_mean(logits, ddata.labels)->value[0];
    };
    int agree = 0, checked = 0;
    Tensor<double> x = ddata.x;
    const double h = 1e-6;
    for (int64_t i = 0; i < x.numel(); ++i) {
      double orig = x[i];
      x[i] = orig + h;
      double fp = loss_at(x);
      x[i] = orig - h;
      double fm = loss_at(x);
      x[i] = orig;
      double num = (fp - fm) / (2 * h);
      if (std::abs(num) < 1e-12 && std::abs(grad[i]) < 1e-12) continue;
      ++checked;
      if ((num > 0) == (grad[i] > 0)) ++agree;
    }
    REQUIRE(checked > 0);
    REQUIRE(static_cast<double>(agree) / checked >= 0.99);
  }
}

TEST_CASE("fgsm on a linear logistic model matches the closed form") {
  // 2-dim input, binary logistic: logits = [w.x + b, 0]
  Tensor<double> w({2, 1});
  w.data = {1.3, -0.7};
  double b = 0.2;
  Tensor<double> x0({1, 2});
  x0.data = {0.4, -0.1};
  int y = 0;  // class 0 <-> logit index 0
  double eps = 0.25;

  auto loss_at = [&](const Tensor<double>& x) {
    auto xv = ag::constant(x);
    auto wv = ag::constant(w);
    auto z = ag::matmul(xv, wv);
    double margin = z->value[0] + b;
    // CE for the two-logit layout [margin, 0]
    return std::log(1.0 + std::exp(-margin)) * (y == 0 ? 1.0 : 0.0) +
           std::log(1.0 + std::exp(margin)) * (y == 1 ? 1.0 : 0.0);
  };
  double clean = loss_at(x0);
  // gradient of the logistic loss wrt x is (sigma(margin) - 1[y=0]) * w
  double margin = x0[0] * w[0] + x0[1] * w[1] + b;
  double sig = 1.0 / (1.0 + std::exp(-margin));
  Tensor<double> x_adv = x0;
  for (int i = 0; i < 2; ++i) {
    double g = (sig - (y == 0 ? 1.0 : 0.0)) * w[i];
    x_adv[i] += eps * (g > 0 ? 1.0 : (g < 0 ? -1.0 : 0.0));
  }
  double attacked = loss_at(x_adv);
  double hand = std::log(1.0 + std::exp(-(x_adv[0] * w[0] + x_adv[1] * w[1] + b)));
  REQUIRE(std::abs(attacked - hand) < 1e-12);
  REQUIRE(attacked >= clean);
}

TEST_CASE("pgd contracts") {
  auto model = trained_toy(2);
  auto data = half_field_data<float>(32, 101);
  SECTION("one step without random start equals fgsm bit-exactly") {
    auto a = fgsm(model, data.x, data.labels, 0.1);
    auto b = pgd(model, data.x, data.labels, 0.1, 1, 0.1, false);
    REQUIRE(a.data == b.data);
  }
  SECTION("step size above epsilon is a configuration error") {
    REQUIRE_THROWS_AS(pgd(model, data.x, data.labels, 0.1, 5, 0.2, false), ConfigError);
  }
  SECTION("budget holds with random start") {
    auto adv = pgd(model, data.x, data.labels, 0.08, 5, 0.02, true, 3);
    for (int64_t i = 0; i < adv.numel(); ++i)
      REQUIRE(std::abs(adv[i] - data.x[i]) <= 0.08f + 1e-6f);
  }
  SECTION("multi-step pgd is at least as strong as fgsm (3 seeds, median)") {
    std::vector<double> diff;
    for (uint64_t s = 0; s < 3; ++s) {
      auto m = trained_toy(10 + s, 80);
      auto d = half_field_data<float>(96, 200 + s);
      std::vector<AttackConfig> cfgs(2);
      cfgs[0].kind = AttackConfig::Kind::fgsm;
      cfgs[0].epsilon = 0.12;
      cfgs[1].kind = AttackConfig::Kind::pgd;
      cfgs[1].epsilon = 0.12;
      cfgs[1].pgd_steps = 20;
      auto report = evaluate_attacks(m, d, cfgs, s);
      diff.push_back(report.rows[1].attacked_acc - report.rows[0].attacked_acc);
    }
    REQUIRE(median_of(diff) <= 0.0);
  }
}

TEST_CASE("carlini-wagner contracts") {
  auto model = trained_toy(3, 100);
  auto data = half_field_data<float>(48, 102);
  SECTION("c in the zero limit keeps accuracy and norm near clean") {
    double clean = accuracy(model, data.x, data.labels);
    std::vector<AttackConfig> cfgs(1);
    cfgs[0].kind = AttackConfig::Kind::cw;
    cfgs[0].cw_c = 1e-6;
    cfgs[0].cw_iters = 15;
    cfgs[0].cw_lr = 0.001;
    auto report = evaluate_attacks(model, data, cfgs, 1);
    REQUIRE(report.rows[0].mean_norm < 0.05);
    REQUIRE(std::abs(report.rows[0].attacked_acc - clean) <= 0.03);
  }
  SECTION("stronger c is at least as damaging (3 seeds, median)") {
    std::vector<double> diff;
    for (uint64_t s = 0; s < 3; ++s) {
      auto m = trained_toy(20 + s, 80);
      auto d = half_field_data<float>(48, 300 + s);
      std::vector<AttackConfig> cfgs(2);
      cfgs[0].kind = AttackConfig::Kind::cw;
      cfgs[0].cw_c = 0.01;
      cfgs[0].cw_iters = 60;
      cfgs[1].kind = AttackConfig::Kind::cw;
      cfgs[1].cw_c = 1.0;
      cfgs[1].cw_iters = 60;
      auto report = evaluate_attacks(m, d, cfgs, s);
      diff.push_back(report.rows[1].attacked_acc - report.rows[0].attacked_acc);
    }
    REQUIRE(median_of(diff) <= 0.0);
  }
  SECTION("unsuccessful samples keep the original and raise the failed flag") {
    auto res = cw_l2(model, data.x, data.labels, 1e-9, 2, 1e-4);
    const int64_t per = data.x.numel() / data.x.dim(0);
    for (int64_t b = 0; b < data.x.dim(0); ++b) {
      if (!res.failed[static_cast<size_t>(b)]) continue;
      for (int64_t i = 0; i < per; ++i)
        REQUIRE(res.x_adv[b * per + i] == data.x[b * per + i]);
    }
  }
}

TEST_CASE("evaluate_attacks") {
  auto model = trained_toy(4, 80);
  auto data = half_field_data<float>(64, 103);
  std::vector<AttackConfig> cfgs(2);
  cfgs[0].kind = AttackConfig::Kind::fgsm;
  cfgs[0].epsilon = 0.1;
  cfgs[1].kind = AttackConfig::Kind::pgd;
  cfgs[1].epsilon = 0.1;
  cfgs[1].pgd_steps = 5;
  SECTION("deterministic given the seed") {
    auto a = evaluate_attacks(model, data, cfgs, 7);
    auto b = evaluate_attacks(model, data, cfgs, 7);
    for (size_t i = 0; i < a.rows.size(); ++i) {
      REQUIRE(a.rows[i].attacked_acc == b.rows[i].attacked_acc);
      REQUIRE(a.rows[i].mean_norm == b.rows[i].mean_norm);
    }
  }
  SECTION("attacked accuracy does not exceed clean beyond the documented slack") {
    auto report = evaluate_attacks(model, data, cfgs, 8);
    REQUIRE_NOTHROW(report.validate(0.01));
  }
  SECTION("empty dataset is an argument error") {
    EvalData<float> empty;
    empty.x = Tensorf({0, 1, 8, 8});
    REQUIRE_THROWS_AS(evaluate_attacks(model, empty, cfgs, 9), ArgError);
  }
  SECTION("csv report has the fixed header") {
    auto report = evaluate_attacks(model, data, cfgs, 10);
    std::ostringstream os;
    report.write_csv(os);
    REQUIRE(os.str().rfind("attack,param,clean_acc,attacked_acc,mean_norm,n\n", 0) == 0);
  }
}
