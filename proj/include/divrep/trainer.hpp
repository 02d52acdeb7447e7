#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "divrep/attacks.hpp"
#include "divrep/checkpoint.hpp"
#include "divrep/config.hpp"
#include "divrep/data/manifest.hpp"
#include "divrep/metrics/report.hpp"

namespace divrep {

namespace fs = std::filesystem;

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

struct GroupAcc {
  int group = 0;
  int64_t count = 0;
  int64_t correct = 0;
  double acc() const { return count ? static_cast<double>(correct) / count : 0.0; }
};

struct EvalRow {
  uint64_t seed = 0;
  std::string scheme;
  double avg_acc = 0.0;
  double worst_acc = 0.0;
  int worst_group = 0;
  std::vector<GroupAcc> groups;
  int64_t n_test = 0;

  void validate() const {
    DIVREP_CHECK(worst_acc <= avg_acc + 1e-12, "worst-group accuracy above the average");
    int64_t total = 0;
    for (auto& g : groups) total += g.count;
    DIVREP_CHECK(total == n_test, "group counts must partition the test set");
  }
};

struct ResultTable {
  std::vector<EvalRow> rows;

  static const char* csv_header() { return "seed,scheme,avg_acc,worst_acc,worst_group"; }
  std::string to_csv() const {
    std::string out = csv_header();
    out += "\n";
    for (auto& r : rows)
      out += std::to_string(r.seed) + "," + r.scheme + "," + fmt_double(r.avg_acc) + "," +
             fmt_double(r.worst_acc) + "," + std::to_string(r.worst_group) + "\n";
    return out;
  }
  std::string groups_csv() const {
    std::string out = "seed,scheme,group,count,acc\n";
    for (auto& r : rows)
      for (auto& g : r.groups)
        out += std::to_string(r.seed) + "," + r.scheme + "," + std::to_string(g.group) + "," +
               std::to_string(g.count) + "," + fmt_double(g.acc()) + "\n";
    return out;
  }
  std::pair<double, double> mean_std_avg() const {
    std::vector<double> v;
    for (auto& r : rows) v.push_back(r.avg_acc);
    return {mean_of(v), stddev_of(v)};
  }
  std::pair<double, double> mean_std_worst() const {
    std::vector<double> v;
    for (auto& r : rows) v.push_back(r.worst_acc);
    return {mean_of(v), stddev_of(v)};
  }
};

// ---------------------------------------------------------------------------
// batch assembly
// ---------------------------------------------------------------------------

template <class T>
TrainBatch<T> assemble_pair_batch(const data::FactorGrid& grid, const data::PairOptions& opt,
                                  int pairs, int k, Rng& rng) {
  TrainBatch<T> batch;
  const auto& sh = grid.image_shape;
  batch.x = Tensor<T>({2 * pairs, sh[0], sh[1], sh[2]});
  const int64_t per = sh[0] * sh[1] * sh[2];
  std::vector<data::PairSample> samples;
  samples.reserve(static_cast<size_t>(pairs));
  for (int p = 0; p < pairs; ++p) samples.push_back(data::sample_pair(grid, k, rng, opt));
  // rendering is pure; parallelize the pixel copies only after sampling so
  // the rng stream stays sequential
  for (int p = 0; p < pairs; ++p) {
    auto& s = samples[static_cast<size_t>(p)];
    std::copy(s.x_l.ptr(), s.x_l.ptr() + per, batch.x.ptr() + (2 * p) * per);
    std::copy(s.x_m.ptr(), s.x_m.ptr() + per, batch.x.ptr() + (2 * p + 1) * per);
    batch.labels.push_back(s.y_l);
    batch.labels.push_back(s.y_m);
    batch.pair_k.push_back(s.k);
  }
  return batch;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

template <class T>
Tensor<T> render_rows(const data::FactorGrid& grid, const std::vector<int64_t>& members,
                      int64_t lo, int64_t hi) {
  const auto& sh = grid.image_shape;
  const int64_t per = sh[0] * sh[1] * sh[2];
  Tensor<T> x({hi - lo, sh[0], sh[1], sh[2]});
  parallel_for(hi - lo, [&](int64_t a, int64_t b) {
    for (int64_t i = a; i < b; ++i) {
      auto img = grid.image(members[static_cast<size_t>(lo + i)]);
      for (int64_t p = 0; p < per; ++p) x[i * per + p] = static_cast<T>(img[p]);
    }
  });
  return x;
}

template <class T>
EvalRow run_eval(const VaeModel<T>& model, const data::DatasetBundle& bundle,
                 const data::SplitPair& splits, int64_t eval_max = 0, uint64_t seed = 0) {
  std::vector<int64_t> members = splits.test.members;
  if (eval_max > 0 && eval_max < static_cast<int64_t>(members.size())) {
    Rng rng(derive_seed(seed, "eval-subsample"));
    rng.shuffle(members);
    members.resize(static_cast<size_t>(eval_max));
    std::sort(members.begin(), members.end());
  }
  DIVREP_CHECK(!members.empty(), "empty test split");

  int n_groups = 1;
  const std::vector<int>* group_vals = nullptr;
  if (bundle.group_factor >= 0) {
    group_vals = &splits.test.allowed_values[static_cast<size_t>(bundle.group_factor)];
    n_groups = static_cast<int>(group_vals->size());
  }
  EvalRow row;
  row.groups.resize(static_cast<size_t>(n_groups));
  for (int g = 0; g < n_groups; ++g) row.groups[static_cast<size_t>(g)].group = g;
  row.n_test = static_cast<int64_t>(members.size());

  const int64_t batch = 256;
  int64_t correct_total = 0;
  for (int64_t at = 0; at < static_cast<int64_t>(members.size()); at += batch) {
    int64_t hi = std::min<int64_t>(members.size(), at + batch);
    auto x = render_rows<T>(bundle.grid, members, at, hi);
    auto preds = argmax_rows(model_logits(model, x));
    for (int64_t i = 0; i < hi - at; ++i) {
      auto tuple = bundle.grid.tuple_of(members[static_cast<size_t>(at + i)]);
      int label = bundle.grid.label_of(tuple);
      int g = 0;
      if (group_vals) {
        int v = tuple[static_cast<size_t>(bundle.group_factor)];
        auto it = std::find(group_vals->begin(), group_vals->end(), v);
        DIVREP_CHECK(it != group_vals->end(), "test tuple outside held-out group values");
        g = static_cast<int>(it - group_vals->begin());
      }
      auto& grp = row.groups[static_cast<size_t>(g)];
      ++grp.count;
      if (preds[static_cast<size_t>(i)] == label) {
        ++grp.correct;
        ++correct_total;
      }
    }
  }
  row.avg_acc = static_cast<double>(correct_total) / static_cast<double>(members.size());
  row.worst_acc = 1.0;
  for (auto& g : row.groups) {
    if (g.count == 0) continue;
    if (g.acc() <= row.worst_acc) {
      row.worst_acc = g.acc();
      row.worst_group = g.group;
    }
  }
  row.validate();
  return row;
}

// posterior means over grid samples, with ground-truth factor columns
template <class T>
metrics::CodeFactorTable make_code_table(const VaeModel<T>& model, const data::FactorGrid& grid,
                                         int64_t max_samples = 0, uint64_t seed = 0) {
  std::vector<int64_t> members(static_cast<size_t>(grid.size()));
  for (int64_t i = 0; i < grid.size(); ++i) members[static_cast<size_t>(i)] = i;
  if (max_samples > 0 && max_samples < grid.size()) {
    Rng rng(derive_seed(seed, "table-subsample"));
    rng.shuffle(members);
    members.resize(static_cast<size_t>(max_samples));
    std::sort(members.begin(), members.end());
  }
  metrics::CodeFactorTable table;
  table.num_factors = grid.spec.num_factors();
  const int dz = model.partition().total();
  table.codes = Tensord({static_cast<int64_t>(members.size()), dz});
  table.factors.resize(members.size() * static_cast<size_t>(table.num_factors));
  const int64_t batch = 256;
  for (int64_t at = 0; at < static_cast<int64_t>(members.size()); at += batch) {
    int64_t hi = std::min<int64_t>(members.size(), at + batch);
    auto x = render_rows<T>(grid, members, at, hi);
    auto code = model.encode(x);
    for (int64_t i = 0; i < hi - at; ++i) {
      for (int d = 0; d < dz; ++d)
        table.codes.at2(at + i, d) = static_cast<double>(code.mu.at2(i, d));
      auto tuple = grid.tuple_of(members[static_cast<size_t>(at + i)]);
      for (int f = 0; f < table.num_factors; ++f)
        table.factors[static_cast<size_t>((at + i) * table.num_factors + f)] =
            tuple[static_cast<size_t>(f)];
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

struct TrainArtifacts {
  std::unique_ptr<VaeModel<float>> model;
  data::DatasetBundle bundle;
  data::SplitPair splits;
  EvalRow eval;
  int64_t total_steps = 0;
  std::string log_csv;
};

inline TrainArtifacts run_train(const RunConfig& cfg, const fs::path& out_dir = {}) {
  TrainArtifacts art;
  art.bundle = cfg.dataset.build();
  art.splits = data::make_splits(art.bundle.grid, art.bundle.policy);
  auto model_cfg = cfg.model.build(art.bundle);
  art.model = std::make_unique<VaeModel<float>>(model_cfg, cfg.seed);
  auto& model = *art.model;

  TrainScheme scheme = parse_scheme(cfg.train.scheme);
  nn::AdamConfig<float> gen_cfg{.lr = static_cast<float>(cfg.train.lr),
                                .grad_clip = static_cast<float>(cfg.train.grad_clip)};
  nn::AdamConfig<float> cls_cfg{.lr = static_cast<float>(cfg.train.lr_classifier),
                                .grad_clip = static_cast<float>(cfg.train.grad_clip)};
  nn::Adam<float> cls_opt(model.classifier_params(), cls_cfg);
  nn::Adam<float> gen_opt(model.generative_params(), gen_cfg);
  nn::Adam<float> all_opt(model.params().vars(), gen_cfg);

  data::PairOptions pair_opt;
  pair_opt.eligible = art.bundle.pair_eligible;
  pair_opt.allowed = art.splits.train.allowed_values;
  const int k_cap = static_cast<int>(pair_opt.eligible.size());
  const int k_max = std::min(cfg.curriculum.k_max, k_cap);

  const int pairs = cfg.train.pairs_per_batch;
  int64_t steps_per_epoch = cfg.train.steps_per_epoch;
  if (steps_per_epoch <= 0)
    steps_per_epoch = std::max<int64_t>(
        1, static_cast<int64_t>(art.splits.train.members.size()) / (2 * pairs));
  art.total_steps = steps_per_epoch * cfg.train.epochs;

  CurriculumState curriculum;
  curriculum.amount_on = cfg.curriculum.warmup_amount;
  curriculum.difficulty_on = cfg.curriculum.warmup_difficulty;
  curriculum.amount_end = std::max(1, model.partition().total() - k_max);
  curriculum.amount_ramp_steps =
      std::max<int64_t>(1, static_cast<int64_t>(cfg.curriculum.ramp_frac * art.total_steps));
  curriculum.k_max = k_max;
  curriculum.difficulty_ramp_steps = curriculum.amount_ramp_steps;

  Rng pair_rng(derive_seed(cfg.seed, "pairs"));
  Rng eps_rng(derive_seed(cfg.seed, "eps"));

  StepOptions opt;
  opt.scheme = scheme;
  opt.divergence = cfg.divergence;
  opt.detach_ce_input = scheme == TrainScheme::alternating;

  std::string log = "step,ce,vae_recon,vae_kl,disentangle,contrastive,zp,total,lr,num_swap,k_eff\n";
  std::vector<Tensorf> last_good;
  auto snapshot = [&] {
    last_good.clear();
    for (auto& [name, v] : model.params().items) last_good.push_back(v->value);
  };
  auto write_outputs = [&](bool aborted) {
    if (out_dir.empty()) return;
    fs::create_directories(out_dir / "ckpt");
    fs::create_directories(out_dir / "logs");
    fs::create_directories(out_dir / "reports");
    nlohmann::json meta = {{"run_config", cfg.to_json()},
                           {"model_config_classes", model.config().num_classes},
                           {"aborted", aborted}};
    save_checkpoint(out_dir / "ckpt" / "model.ckpt", meta, model.params());
    std::ofstream lf(out_dir / "logs" / "train_log.csv");
    lf << log;
  };
  snapshot();

  try {
    for (int64_t step = 0; step < art.total_steps; ++step) {
      curriculum.step = step;
      auto cur = curriculum_step(curriculum);
      auto batch =
          assemble_pair_batch<float>(art.bundle.grid, pair_opt, pairs, cur.k_effective, pair_rng);
      opt.num_swap = cur.num_swap;

      LossBreakdown terms;
      switch (scheme) {
        case TrainScheme::alternating:
          terms = alternate_step(model, batch, cfg.loss, opt, cls_opt, gen_opt, eps_rng);
          break;
        case TrainScheme::joint:
          terms = joint_step(model, batch, cfg.loss, opt, all_opt, eps_rng);
          break;
        case TrainScheme::ce_only:
          terms = ce_step(model, batch, all_opt, eps_rng);
          break;
      }
      if (step % std::max(1, cfg.train.log_every) == 0 || step + 1 == art.total_steps) {
        log += std::to_string(step) + "," + fmt_double(terms.ce) + "," +
               fmt_double(terms.vae_recon) + "," + fmt_double(terms.vae_kl) + "," +
               fmt_double(terms.disentangle) + "," + fmt_double(terms.contrastive) + "," +
               fmt_double(terms.zp) + "," + fmt_double(terms.total) + "," +
               fmt_double(cfg.train.lr) + "," + std::to_string(cur.num_swap) + "," +
               std::to_string(cur.k_effective) + "\n";
      }
      if (cfg.train.snapshot_every > 0 && (step + 1) % cfg.train.snapshot_every == 0) snapshot();
    }
  } catch (const NumericError&) {
    // roll back to the last finite state and persist it before propagating
    size_t i = 0;
    for (auto& [name, v] : model.params().items) v->value = last_good[i++];
    write_outputs(true);
    throw;
  }

  art.eval = run_eval(model, art.bundle, art.splits, cfg.train.eval_max, cfg.seed);
  art.eval.seed = cfg.seed;
  art.eval.scheme = cfg.train.scheme;
  art.log_csv = log;
  write_outputs(false);
  if (!out_dir.empty()) {
    ResultTable table;
    table.rows.push_back(art.eval);
    std::ofstream rf(out_dir / "reports" / "result.csv");
    rf << table.to_csv();
    std::ofstream gf(out_dir / "reports" / "groups.csv");
    gf << table.groups_csv();
  }
  return art;
}

inline metrics::MetricReport run_metrics(const VaeModel<float>& model,
                                         const data::DatasetBundle& bundle,
                                         metrics::MetricSettings settings = {},
                                         int64_t max_samples = 4096) {
  auto table = make_code_table(model, bundle.grid, max_samples, settings.seed);
  return metrics::compute_metrics(table, settings);
}

// ---------------------------------------------------------------------------
// ablation grid: {no warmup, amount only, both} x {ce, joint, alternating}
// ---------------------------------------------------------------------------

struct AblationCell {
  std::string warmup;
  std::string scheme;
  EvalRow eval;
  double mig = -1.0;  // filled when metrics are requested
};

struct AblationTable {
  std::vector<AblationCell> cells;
  std::string to_csv() const {
    std::string out = "warmup,scheme,avg_acc,worst_acc,mig\n";
    for (auto& c : cells)
      out += c.warmup + "," + c.scheme + "," + fmt_double(c.eval.avg_acc) + "," +
             fmt_double(c.eval.worst_acc) + "," + (c.mig >= 0 ? fmt_double(c.mig) : "") + "\n";
    return out;
  }
};

inline void apply_warmup_variant(RunConfig& cfg, const std::string& warmup) {
  if (warmup == "none") {
    cfg.curriculum.warmup_amount = false;
    cfg.curriculum.warmup_difficulty = false;
  } else if (warmup == "amount") {
    cfg.curriculum.warmup_amount = true;
    cfg.curriculum.warmup_difficulty = false;
  } else if (warmup == "both") {
    cfg.curriculum.warmup_amount = true;
    cfg.curriculum.warmup_difficulty = true;
  } else {
    throw ConfigError("unknown warmup variant: " + warmup);
  }
}

inline AblationTable run_ablation(const RunConfig& base,
                                  const std::vector<std::string>& warmups,
                                  const std::vector<std::string>& schemes,
                                  bool with_metrics = false) {
  AblationTable table;
  for (const auto& warmup : warmups) {
    for (const auto& scheme : schemes) {
      RunConfig cfg = base;
      apply_warmup_variant(cfg, warmup);
      cfg.train.scheme = scheme;
      auto art = run_train(cfg);
      AblationCell cell;
      cell.warmup = warmup;
      cell.scheme = scheme;
      cell.eval = art.eval;
      if (with_metrics) {
        metrics::MetricSettings ms;
        ms.seed = cfg.seed;
        cell.mig = run_metrics(*art.model, art.bundle, ms).mig;
      }
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

}  // namespace divrep
