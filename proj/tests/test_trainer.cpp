#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "divrep/trainer.hpp"

using namespace divrep;

namespace {

// micro shapes config that trains in seconds
RunConfig micro_shapes(uint64_t seed, const std::string& scheme = "alternating") {
  RunConfig cfg;
  cfg.dataset.kind = "shapes_grid";
  cfg.dataset.canvas = 24;
  cfg.dataset.colors = 4;
  cfg.dataset.scales = 2;
  cfg.dataset.pos = 4;
  cfg.model.dim_p = 4;
  cfg.model.dim_nk = 2;
  cfg.model.dim_nu = 2;
  cfg.model.enc_channels = {8, 16};
  cfg.model.fc_dim = 32;
  cfg.model.classifier_hidden = {16};
  cfg.model.projection_hidden = {16};
  cfg.model.projection_dim = 8;
  cfg.train.scheme = scheme;
  cfg.train.epochs = 1;
  cfg.train.pairs_per_batch = 12;
  cfg.train.steps_per_epoch = 25;
  cfg.train.log_every = 5;
  cfg.curriculum.k_max = 2;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("run config json round trip and strictness") {
  SECTION("defaults fill every field and round-trip") {
    RunConfig cfg;
    auto j = cfg.to_json();
    auto back = RunConfig::from_json(j);
    REQUIRE(back.to_json() == j);
    REQUIRE(j.contains("dataset"));
    REQUIRE(j.contains("loss"));
  }
  SECTION("unknown keys are rejected at every level") {
    REQUIRE_THROWS_AS(RunConfig::from_json({{"bogus", 1}}), ConfigError);
    REQUIRE_THROWS_AS(RunConfig::from_json({{"train", {{"bogus", 1}}}}), ConfigError);
    REQUIRE_THROWS_AS(RunConfig::from_json({{"dataset", {{"kindd", "x"}}}}), ConfigError);
    REQUIRE_THROWS_AS(RunConfig::from_json({{"loss", {{"delta", 2.0}}}}), ConfigError);
  }
  SECTION("empty object yields pure defaults") {
    auto cfg = RunConfig::from_json(nlohmann::json::object());
    REQUIRE(cfg.train.scheme == "alternating");
    REQUIRE(cfg.loss.tau == 0.1);
  }
}

TEST_CASE("checkpoint round trip with hash verification") {
  namespace fs = std::filesystem;
  auto path = fs::temp_directory_path() / "divrep_ckpt_test.ckpt";
  RunConfig cfg = micro_shapes(1);
  auto bundle = cfg.dataset.build();
  VaeModel<float> model(cfg.model.build(bundle), 5);
  save_checkpoint(path, {{"note", "test"}}, model.params());

  SECTION("load restores identical tensors") {
    auto ck = load_checkpoint(path);
    REQUIRE(ck.config.at("note") == "test");
    VaeModel<float> other(cfg.model.build(bundle), 999);
    restore_params(other.params(), ck);
    auto a = model.params().vars(), b = other.params().vars();
    for (size_t i = 0; i < a.size(); ++i) REQUIRE(a[i]->value.data == b[i]->value.data);
  }
  SECTION("bit corruption is caught by the content hash") {
    auto bytes = data::read_raw<uint8_t>(path, static_cast<int64_t>(fs::file_size(path)));
    bytes[bytes.size() - 3] ^= 0x40;
    data::write_raw(path, bytes.data(), static_cast<int64_t>(bytes.size()));
    REQUIRE_THROWS_AS(load_checkpoint(path), ArgError);
  }
  fs::remove(path);
}

TEST_CASE("training smoke: reconstruction improves over the untrained baseline") {
  RunConfig cfg = micro_shapes(7);
  cfg.train.steps_per_epoch = 60;
  auto bundle = cfg.dataset.build();
  auto splits = data::make_splits(bundle.grid, bundle.policy);
  VaeModel<float> untrained(cfg.model.build(bundle), cfg.seed);

  auto probe = render_rows<float>(bundle.grid, splits.test.members, 0,
                                  std::min<int64_t>(32, splits.test.members.size()));
  auto recon_of = [&](const VaeModel<float>& m) {
    auto code = m.encode(probe);
    Rng r(3);
    auto z = reparameterize(code, r);
    auto rec = m.decode(z);
    return elbo_loss(probe, rec, code).recon;
  };
  double before = recon_of(untrained);
  auto art = run_train(cfg);
  double after = recon_of(*art.model);
  REQUIRE(after < before);
  REQUIRE(art.eval.n_test > 0);
}

TEST_CASE("identical config and seed reproduce results bit-identically") {
  RunConfig cfg = micro_shapes(11);
  auto a = run_train(cfg);
  auto b = run_train(cfg);
  ResultTable ta, tb;
  ta.rows.push_back(a.eval);
  tb.rows.push_back(b.eval);
  REQUIRE(ta.to_csv() == tb.to_csv());
  REQUIRE(a.log_csv == b.log_csv);
  auto pa = a.model->params().vars(), pb = b.model->params().vars();
  for (size_t i = 0; i < pa.size(); ++i) REQUIRE(pa[i]->value.data == pb[i]->value.data);
}

TEST_CASE("run_eval group accounting") {
  RunConfig cfg = micro_shapes(13);
  cfg.train.steps_per_epoch = 40;
  cfg.train.scheme = "ce_only";
  auto art = run_train(cfg);
  SECTION("group counts partition the test set") {
    int64_t total = 0;
    for (auto& g : art.eval.groups) total += g.count;
    REQUIRE(total == art.eval.n_test);
    REQUIRE(art.eval.groups.size() == 2);  // 4 colors, second half held out
  }
  SECTION("worst group accuracy never exceeds the average") {
    REQUIRE(art.eval.worst_acc <= art.eval.avg_acc + 1e-12);
  }
  SECTION("result csv carries the fixed header") {
    ResultTable t;
    t.rows.push_back(art.eval);
    REQUIRE(t.to_csv().rfind(ResultTable::csv_header(), 0) == 0);
  }
}

TEST_CASE("perfect classifier toy reaches avg = worst = 1") {
  // binary shape classification without holdout: separable in a few steps
  RunConfig cfg = micro_shapes(17, "ce_only");
  cfg.dataset.colors = 2;
  cfg.dataset.scales = 2;
  cfg.dataset.pos = 2;
  cfg.train.steps_per_epoch = 250;
  cfg.train.pairs_per_batch = 16;
  auto bundle = cfg.dataset.build();
  bundle.policy.held_out.clear();  // plain sample partition
  bundle.policy.test_fraction = 0.25;
  bundle.group_factor = -1;
  auto splits = data::make_splits(bundle.grid, bundle.policy);

  auto model_cfg = cfg.model.build(bundle);
  VaeModel<float> model(model_cfg, cfg.seed);
  nn::AdamConfig<float> ocfg;
  ocfg.lr = 2e-3f;
  nn::Adam<float> opt(model.params().vars(), ocfg);
  data::PairOptions popt;
  popt.eligible = bundle.pair_eligible;
  popt.allowed = splits.train.allowed_values;
  Rng prng(derive_seed(cfg.seed, "pairs")), erng(derive_seed(cfg.seed, "eps"));
  for (int s = 0; s < cfg.train.steps_per_epoch; ++s) {
    auto batch = assemble_pair_batch<float>(bundle.grid, popt, cfg.train.pairs_per_batch, 1, prng);
    ce_step(model, batch, opt, erng);
  }
  auto row = run_eval(model, bundle, splits);
  REQUIRE(row.avg_acc == 1.0);
  REQUIRE(row.worst_acc == 1.0);
}

TEST_CASE("metrics plumbing over a code table from the grid") {
  RunConfig cfg = micro_shapes(19);
  auto bundle = cfg.dataset.build();
  VaeModel<float> model(cfg.model.build(bundle), cfg.seed);
  auto table = make_code_table(model, bundle.grid, 512, 3);
  REQUIRE(table.rows() == 512);
  REQUIRE(table.dims() == model.partition().total());
  REQUIRE(table.num_factors == 5);
  metrics::MetricSettings ms;
  ms.fvae_votes = 100;
  ms.fvae_probe = 16;
  ms.dci_trees = 3;
  auto report = metrics::compute_metrics(table, ms);
  REQUIRE_NOTHROW(report.validate());
}

TEST_CASE("gamma regularizer reduces z_p / nuisance correlation (3 seeds)") {
  auto mean_abs_corr = [](const VaeModel<float>& model, const data::DatasetBundle& bundle,
                          int dim_p) {
    auto table = make_code_table(model, bundle.grid, 1024, 5);
    std::vector<double> cs;
    for (int f = 1; f < table.num_factors; ++f) {  // nuisance factors only
      std::vector<double> fac(static_cast<size_t>(table.rows()));
      for (int64_t r = 0; r < table.rows(); ++r) fac[static_cast<size_t>(r)] = table.factor(r, f);
      for (int d = 0; d < dim_p; ++d) {
        std::vector<double> col(static_cast<size_t>(table.rows()));
        for (int64_t r = 0; r < table.rows(); ++r) col[static_cast<size_t>(r)] = table.codes.at2(r, d);
        if (stddev_of(col) > 0) cs.push_back(std::abs(pearson_corr(col, fac)));
      }
    }
    return mean_of(cs);
  };
  std::vector<double> deltas;
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    RunConfig base = micro_shapes(seed * 100);
    base.train.steps_per_epoch = 50;
    RunConfig off = base, on = base;
    off.loss.gamma = 0.0;
    on.loss.gamma = 3.0;
    auto a = run_train(off);
    auto b = run_train(on);
    deltas.push_back(mean_abs_corr(*b.model, b.bundle, base.model.dim_p) -
                     mean_abs_corr(*a.model, a.bundle, base.model.dim_p));
  }
  REQUIRE(median_of(deltas) < 0.0);
}

TEST_CASE("non-finite loss aborts with the last good checkpoint") {
  namespace fs = std::filesystem;
  RunConfig cfg = micro_shapes(23);
  cfg.train.lr = 1e10;  // drives the objective into overflow quickly
  cfg.train.steps_per_epoch = 30;
  cfg.train.snapshot_every = 5;
  auto dir = fs::temp_directory_path() / "divrep_abort_test";
  fs::remove_all(dir);
  bool threw = false;
  try {
    run_train(cfg, dir);
  } catch (const NumericError&) {
    threw = true;
  }
  if (threw) {
    auto ck = load_checkpoint(dir / "ckpt" / "model.ckpt");
    REQUIRE(ck.config.at("aborted").get<bool>());
    for (auto& [name, t] : ck.tensors) REQUIRE(t.all_finite());
  }
  fs::remove_all(dir);
}
