// divrep: train / evaluate / probe the detect-and-swap invariance framework.

#include <CLI11.hpp>

#include <iostream>

#include "divrep/attack_grid.hpp"
#include "divrep/metrics/bijection.hpp"
#include "divrep/trainer.hpp"
#include "divrep/viz/emit.hpp"

using namespace divrep;
namespace fs = std::filesystem;

namespace {

RunConfig load_config(const std::string& path, uint64_t seed_override, bool has_seed) {
  RunConfig cfg = path.empty() ? RunConfig{} : RunConfig::from_file(path);
  if (has_seed) cfg.seed = seed_override;
  return cfg;
}

struct RestoredModel {
  RunConfig cfg;
  data::DatasetBundle bundle;
  data::SplitPair splits;
  std::unique_ptr<VaeModel<float>> model;
};

RestoredModel restore_from_checkpoint(const std::string& ckpt_path,
                                      const std::string& config_path) {
  auto ck = load_checkpoint(ckpt_path);
  RestoredModel out;
  if (!config_path.empty())
    out.cfg = RunConfig::from_file(config_path);
  else
    out.cfg = RunConfig::from_json(ck.config.at("run_config"));
  out.bundle = out.cfg.dataset.build();
  out.splits = data::make_splits(out.bundle.grid, out.bundle.policy);
  out.model = std::make_unique<VaeModel<float>>(out.cfg.model.build(out.bundle), out.cfg.seed);
  restore_params(out.model->params(), ck);
  return out;
}

EvalData<float> loaded_test_data(const data::LoadedDataset& ds, int64_t cap, uint64_t seed) {
  std::vector<int64_t> rows(static_cast<size_t>(ds.test.count));
  for (int64_t i = 0; i < ds.test.count; ++i) rows[static_cast<size_t>(i)] = i;
  if (cap > 0 && cap < ds.test.count) {
    Rng rng(derive_seed(seed, "attack-subsample"));
    rng.shuffle(rows);
    rows.resize(static_cast<size_t>(cap));
    std::sort(rows.begin(), rows.end());
  }
  const auto& sh = ds.test.images.shape;
  const int64_t per = sh[1] * sh[2] * sh[3];
  EvalData<float> data;
  data.x = Tensorf({static_cast<int64_t>(rows.size()), sh[1], sh[2], sh[3]});
  for (size_t i = 0; i < rows.size(); ++i) {
    std::copy(ds.test.images.ptr() + rows[i] * per, ds.test.images.ptr() + (rows[i] + 1) * per,
              data.x.ptr() + static_cast<int64_t>(i) * per);
    data.labels.push_back(ds.label_of(ds.test, rows[i]));
  }
  return data;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  size_t p = 0;
  while (p <= s.size()) {
    auto e = s.find(',', p);
    if (e == std::string::npos) {
      out.push_back(s.substr(p));
      break;
    }
    out.push_back(s.substr(p, e - p));
    p = e + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"detect-and-swap invariant representation framework"};
  app.require_subcommand(1);

  std::string config_path, out_path, ckpt_path, dataset_path, grid_path;
  std::string codes_path, factors_path;
  uint64_t seed = 0;
  bool seed_set = false;
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option_function<uint64_t>(
        "--seed",
        [&](const uint64_t& v) {
          seed = v;
          seed_set = true;
        },
        "seed override");
  };

  auto* forge = app.add_subcommand("forge", "synthesize factorized datasets");
  auto* forge_build = forge->add_subcommand("build", "materialize a dataset directory");
  forge_build->add_option("--config", config_path, "run config JSON");
  forge_build->add_option("--out", out_path, "output directory")->required();
  int64_t max_train = 0, max_test = 0;
  forge_build->add_option("--max-train", max_train, "cap on train images (0 = all)");
  forge_build->add_option("--max-test", max_test, "cap on test images (0 = all)");
  add_seed(forge_build);

  auto* train = app.add_subcommand("train", "run the two-step training loop");
  train->add_option("--config", config_path, "run config JSON");
  train->add_option("--out", out_path, "output directory")->required();
  add_seed(train);

  auto* eval = app.add_subcommand("eval", "average and worst-group test accuracy");
  eval->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  eval->add_option("--config", config_path, "run config JSON (defaults to the checkpoint's)");
  eval->add_option("--dataset", dataset_path, "forged dataset directory instead of lazy renders");
  eval->add_option("--out", out_path, "output directory for result CSVs");
  add_seed(eval);

  auto* metrics_cmd = app.add_subcommand("metrics", "disentanglement scores");
  auto* metrics_run = metrics_cmd->add_subcommand("run", "score a code/factor table");
  metrics_run->add_option("--codes", codes_path, "f32 array of posterior means");
  metrics_run->add_option("--factors", factors_path, "i32 array of factor values");
  metrics_run->add_option("--ckpt", ckpt_path, "checkpoint: encode the dataset grid instead");
  metrics_run->add_option("--config", config_path, "run config override for --ckpt");
  int64_t metric_samples = 4096;
  metrics_run->add_option("--samples", metric_samples, "grid samples when encoding");
  metrics_run->add_option("--out", out_path, "report JSON path")->required();
  add_seed(metrics_run);
  auto* metrics_bij = metrics_cmd->add_subcommand("bijection", "entangling bijection demo");
  double bij_alpha = 0.3;
  int64_t bij_n = 100000;
  metrics_bij->add_option("--alpha", bij_alpha, "Householder alpha in (0, 0.5)");
  metrics_bij->add_option("--n", bij_n, "sample count");
  metrics_bij->add_option("--out", out_path, "report JSON path")->required();
  add_seed(metrics_bij);

  auto* attack = app.add_subcommand("attack", "adversarial robustness sweeps");
  auto* attack_run = attack->add_subcommand("run", "evaluate an attack grid");
  attack_run->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  attack_run->add_option("--dataset", dataset_path, "forged dataset directory")->required();
  attack_run->add_option("--grid", grid_path, "attack grid JSON (defaults to the full sweep)");
  attack_run->add_option("--out", out_path, "report CSV path")->required();
  int64_t attack_max = 512;
  attack_run->add_option("--max", attack_max, "cap on attacked samples (0 = all)");
  add_seed(attack_run);

  auto* ablate = app.add_subcommand("ablate", "warmup x scheme comparison grid");
  ablate->add_option("--config", config_path, "run config JSON");
  ablate->add_option("--out", out_path, "output directory")->required();
  std::string warmups = "none,amount,both", schemes = "ce_only,joint,alternating";
  bool ablate_metrics = false;
  ablate->add_option("--warmups", warmups, "comma list: none,amount,both");
  ablate->add_option("--schemes", schemes, "comma list: ce_only,joint,alternating");
  ablate->add_flag("--metrics", ablate_metrics, "also compute MIG per cell");
  add_seed(ablate);

  auto* plots = app.add_subcommand("plots", "embeddings, probe heatmaps, reconstruction grid");
  plots->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  plots->add_option("--config", config_path, "run config override");
  plots->add_option("--out", out_path, "output directory")->required();
  int64_t embed_max = 0;
  bool pca_fallback = false;
  plots->add_option("--embed-max", embed_max, "cap embedding points (0 = all test samples)");
  plots->add_flag("--pca", pca_fallback, "PCA projection instead of t-SNE");
  add_seed(plots);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*forge_build) {
      auto cfg = load_config(config_path, seed, seed_set);
      auto bundle = cfg.dataset.build();
      data::MaterializeOptions opt;
      opt.max_train = max_train;
      opt.max_test = max_test;
      opt.seed = cfg.seed;
      data::forge_build(bundle, out_path, opt);
      std::cout << "wrote " << out_path << " (" << bundle.name << ")\n";
    } else if (*train) {
      auto cfg = load_config(config_path, seed, seed_set);
      auto art = run_train(cfg, out_path);
      std::cout << "scheme=" << cfg.train.scheme << " seed=" << cfg.seed
                << " avg_acc=" << fmt_double(art.eval.avg_acc)
                << " worst_acc=" << fmt_double(art.eval.worst_acc) << "\n"
                << "checkpoint: " << (fs::path(out_path) / "ckpt" / "model.ckpt").string()
                << "\n";
    } else if (*eval) {
      auto restored = restore_from_checkpoint(ckpt_path, config_path);
      if (seed_set) restored.cfg.seed = seed;
      EvalRow row;
      if (!dataset_path.empty()) {
        auto ds = data::load_dataset(dataset_path);
        auto data = loaded_test_data(ds, 0, restored.cfg.seed);
        row.n_test = data.x.dim(0);
        row.groups.resize(static_cast<size_t>(ds.group_count()));
        for (int g = 0; g < ds.group_count(); ++g) row.groups[static_cast<size_t>(g)].group = g;
        auto preds = argmax_rows(model_logits(*restored.model, data.x));
        int64_t correct = 0;
        for (int64_t i = 0; i < row.n_test; ++i) {
          auto& grp = row.groups[static_cast<size_t>(ds.group_of(ds.test, i))];
          ++grp.count;
          if (preds[static_cast<size_t>(i)] == data.labels[static_cast<size_t>(i)]) {
            ++grp.correct;
            ++correct;
          }
        }
        row.avg_acc = static_cast<double>(correct) / static_cast<double>(row.n_test);
        row.worst_acc = 1.0;
        for (auto& g : row.groups)
          if (g.count > 0 && g.acc() <= row.worst_acc) {
            row.worst_acc = g.acc();
            row.worst_group = g.group;
          }
        row.validate();
      } else {
        row = run_eval(*restored.model, restored.bundle, restored.splits,
                       restored.cfg.train.eval_max, restored.cfg.seed);
      }
      row.seed = restored.cfg.seed;
      row.scheme = restored.cfg.train.scheme;
      ResultTable table;
      table.rows.push_back(row);
      std::cout << table.to_csv();
      if (!out_path.empty()) {
        fs::create_directories(out_path);
        std::ofstream rf(fs::path(out_path) / "result.csv");
        rf << table.to_csv();
        std::ofstream gf(fs::path(out_path) / "groups.csv");
        gf << table.groups_csv();
      }
    } else if (*metrics_run) {
      metrics::MetricSettings settings;
      settings.seed = seed_set ? seed : 0;
      metrics::MetricReport report;
      if (!codes_path.empty() || !factors_path.empty()) {
        DIVREP_CHECK_CFG(!codes_path.empty() && !factors_path.empty(),
                         "metrics run needs both --codes and --factors");
        metrics::CodeFactorTable table;
        auto codes = data::read_f32_array(codes_path);
        table.codes = codes.cast<double>();
        auto [fshape, fdata] = data::read_i32_array(factors_path);
        DIVREP_CHECK_CFG(fshape.size() == 2 && fshape[0] == table.codes.dim(0),
                         "codes/factors row mismatch");
        table.num_factors = static_cast<int>(fshape[1]);
        table.factors.assign(fdata.begin(), fdata.end());
        report = metrics::compute_metrics(table, settings);
      } else {
        DIVREP_CHECK_CFG(!ckpt_path.empty(), "metrics run needs --codes/--factors or --ckpt");
        auto restored = restore_from_checkpoint(ckpt_path, config_path);
        report = run_metrics(*restored.model, restored.bundle, settings, metric_samples);
      }
      std::ofstream out(out_path);
      out << report.to_json().dump(2) << "\n";
      std::cout << "mig=" << fmt_double(report.mig) << " sap=" << fmt_double(report.sap)
                << " irs=" << fmt_double(report.irs) << " fvae=" << fmt_double(report.fvae)
                << " dci=" << fmt_double(report.dci) << "\n";
    } else if (*metrics_bij) {
      Rng rng(seed_set ? seed : 0);
      Tensord u({bij_n, 2});
      rng.fill_uniform(u, 0.0, 1.0);
      auto res = metrics::entangling_bijection(bij_alpha, u);
      std::vector<double> f1, f2, u2;
      for (int64_t i = 0; i < bij_n; ++i) {
        f1.push_back(res.outputs.at2(i, 0));
        f2.push_back(res.outputs.at2(i, 1));
        u2.push_back(u.at2(i, 1));
      }
      nlohmann::json j;
      j["alpha"] = bij_alpha;
      j["A"] = {{res.A[0][0], res.A[0][1]}, {res.A[1][0], res.A[1][1]}};
      j["ks_f1"] = ks_statistic_uniform(f1);
      j["ks_f2"] = ks_statistic_uniform(f2);
      j["corr_f1_u2"] = pearson_corr(f1, u2);
      j["n"] = bij_n;
      std::ofstream out(out_path);
      out << j.dump(2) << "\n";
      std::cout << j.dump(2) << "\n";
    } else if (*attack_run) {
      auto restored = restore_from_checkpoint(ckpt_path, "");
      auto ds = data::load_dataset(dataset_path);
      auto data = loaded_test_data(ds, attack_max, seed_set ? seed : restored.cfg.seed);
      std::vector<AttackConfig> grid;
      if (grid_path.empty()) {
        grid = default_attack_grid();
      } else {
        std::ifstream gf(grid_path);
        DIVREP_CHECK_CFG(gf.good(), "cannot open attack grid: " + grid_path);
        grid = parse_attack_grid(nlohmann::json::parse(gf));
      }
      auto report =
          evaluate_attacks(*restored.model, data, grid, seed_set ? seed : restored.cfg.seed);
      std::ofstream out(out_path);
      report.write_csv(out);
      report.write_csv(std::cout);
    } else if (*ablate) {
      auto cfg = load_config(config_path, seed, seed_set);
      auto table = run_ablation(cfg, split_list(warmups), split_list(schemes), ablate_metrics);
      fs::create_directories(out_path);
      std::ofstream out(fs::path(out_path) / "ablation.csv");
      out << table.to_csv();
      std::cout << table.to_csv();
    } else if (*plots) {
      auto restored = restore_from_checkpoint(ckpt_path, config_path);
      viz::PlotOptions popt;
      popt.embed_max = embed_max;
      popt.pca_fallback = pca_fallback;
      popt.seed = seed_set ? seed : restored.cfg.seed;
      auto outputs =
          viz::export_plots(*restored.model, restored.bundle, restored.splits, out_path, popt);
      for (auto& f : outputs.files) std::cout << (fs::path(out_path) / f).string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
