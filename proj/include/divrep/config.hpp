#pragma once

#include <fstream>

#include <json.hpp>

#include "divrep/data/shapes.hpp"
#include "divrep/invariance.hpp"

namespace divrep {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& scope,
                       const std::vector<std::string>& allowed) {
  DIVREP_CHECK_CFG(j.is_object(), scope + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError("unknown key '" + it.key() + "' in " + scope);
  }
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

struct DatasetConfig {
  std::string kind = "colored_mnist";  // colored_mnist | rotation_colored_mnist | shapes_grid
  // colored mnist family
  int image_size = 28;
  int sources = 40;
  int train_sources = 32;
  bool pairs_fix_class = false;
  bool stroke_jitter = false;
  // shapes grid
  int canvas = 64;
  int colors = 8;
  int scales = 4;
  int pos = 8;

  static DatasetConfig from_json(const json& j) {
    DatasetConfig c;
    check_keys(j, "dataset",
               {"kind", "image_size", "sources", "train_sources", "pairs_fix_class",
                "stroke_jitter", "canvas", "colors", "scales", "pos"});
    c.kind = get_or<std::string>(j, "kind", c.kind);
    c.image_size = get_or(j, "image_size", c.image_size);
    c.sources = get_or(j, "sources", c.sources);
    c.train_sources = get_or(j, "train_sources", c.train_sources);
    c.pairs_fix_class = get_or(j, "pairs_fix_class", c.pairs_fix_class);
    c.stroke_jitter = get_or(j, "stroke_jitter", c.stroke_jitter);
    c.canvas = get_or(j, "canvas", c.canvas);
    c.colors = get_or(j, "colors", c.colors);
    c.scales = get_or(j, "scales", c.scales);
    c.pos = get_or(j, "pos", c.pos);
    return c;
  }
  json to_json() const {
    return {{"kind", kind},
            {"image_size", image_size},
            {"sources", sources},
            {"train_sources", train_sources},
            {"pairs_fix_class", pairs_fix_class},
            {"stroke_jitter", stroke_jitter},
            {"canvas", canvas},
            {"colors", colors},
            {"scales", scales},
            {"pos", pos}};
  }

  data::DatasetBundle build() const {
    if (kind == "colored_mnist" || kind == "rotation_colored_mnist") {
      data::ColoredMnistConfig cfg =
          kind == "rotation_colored_mnist" ? data::rotation_colored_mnist_defaults()
                                           : data::ColoredMnistConfig{};
      cfg.image_size = image_size;
      cfg.sources = sources;
      cfg.train_sources = train_sources;
      cfg.pairs_fix_class = pairs_fix_class;
      cfg.stroke_jitter = stroke_jitter;
      return data::make_colored_mnist(cfg);
    }
    if (kind == "shapes_grid") {
      data::ShapesConfig cfg;
      cfg.canvas = canvas;
      cfg.colors = colors;
      cfg.scales = scales;
      cfg.pos = pos;
      cfg.pairs_fix_class = pairs_fix_class;
      return data::synth_shapes_grid(cfg);
    }
    throw ConfigError("unknown dataset kind: " + kind);
  }
};

struct ModelSection {
  int dim_p = 10;
  int dim_nk = 0;  // 0 = one per known nuisance factor
  int dim_nu = 4;
  std::vector<int64_t> enc_channels{32, 64, 128};
  int64_t fc_dim = 256;
  std::vector<int64_t> classifier_hidden{64, 64};
  std::vector<int64_t> projection_hidden{64};
  int64_t projection_dim = 32;
  std::string distance = "bce";

  static ModelSection from_json(const json& j) {
    ModelSection c;
    check_keys(j, "model",
               {"dim_p", "dim_nk", "dim_nu", "enc_channels", "fc_dim", "classifier_hidden",
                "projection_hidden", "projection_dim", "distance"});
    c.dim_p = get_or(j, "dim_p", c.dim_p);
    c.dim_nk = get_or(j, "dim_nk", c.dim_nk);
    c.dim_nu = get_or(j, "dim_nu", c.dim_nu);
    c.enc_channels = get_or(j, "enc_channels", c.enc_channels);
    c.fc_dim = get_or(j, "fc_dim", c.fc_dim);
    c.classifier_hidden = get_or(j, "classifier_hidden", c.classifier_hidden);
    c.projection_hidden = get_or(j, "projection_hidden", c.projection_hidden);
    c.projection_dim = get_or(j, "projection_dim", c.projection_dim);
    c.distance = get_or<std::string>(j, "distance", c.distance);
    DIVREP_CHECK_CFG(c.distance == "bce" || c.distance == "mse", "distance must be bce or mse");
    return c;
  }
  json to_json() const {
    return {{"dim_p", dim_p},
            {"dim_nk", dim_nk},
            {"dim_nu", dim_nu},
            {"enc_channels", enc_channels},
            {"fc_dim", fc_dim},
            {"classifier_hidden", classifier_hidden},
            {"projection_hidden", projection_hidden},
            {"projection_dim", projection_dim},
            {"distance", distance}};
  }

  ModelConfig build(const data::DatasetBundle& bundle) const {
    ModelConfig cfg;
    cfg.image_c = static_cast<int>(bundle.grid.image_shape[0]);
    cfg.image_h = static_cast<int>(bundle.grid.image_shape[1]);
    cfg.image_w = static_cast<int>(bundle.grid.image_shape[2]);
    cfg.enc_channels = enc_channels;
    cfg.fc_dim = fc_dim;
    cfg.partition.dim_p = dim_p;
    cfg.partition.dim_nk =
        dim_nk > 0 ? dim_nk
                   : std::max<int>(1, static_cast<int>(
                                          bundle.grid.spec.known_nuisance_indices.size()));
    cfg.partition.dim_nu = dim_nu;
    cfg.classifier_hidden = classifier_hidden;
    cfg.num_classes = bundle.grid.spec.num_classes();
    cfg.projection_hidden = projection_hidden;
    cfg.projection_dim = projection_dim;
    cfg.distance = distance == "bce" ? ReconDistance::bce : ReconDistance::mse;
    cfg.validate();
    return cfg;
  }
};

struct CurriculumSection {
  bool warmup_amount = true;
  bool warmup_difficulty = true;
  double ramp_frac = 0.5;  // fraction of total training steps
  int k_max = 2;

  static CurriculumSection from_json(const json& j) {
    CurriculumSection c;
    check_keys(j, "curriculum", {"warmup_amount", "warmup_difficulty", "ramp_frac", "k_max"});
    c.warmup_amount = get_or(j, "warmup_amount", c.warmup_amount);
    c.warmup_difficulty = get_or(j, "warmup_difficulty", c.warmup_difficulty);
    c.ramp_frac = get_or(j, "ramp_frac", c.ramp_frac);
    c.k_max = get_or(j, "k_max", c.k_max);
    DIVREP_CHECK_CFG(c.ramp_frac > 0.0 && c.ramp_frac <= 1.0, "ramp_frac in (0,1]");
    DIVREP_CHECK_CFG(c.k_max >= 1, "k_max >= 1");
    return c;
  }
  json to_json() const {
    return {{"warmup_amount", warmup_amount},
            {"warmup_difficulty", warmup_difficulty},
            {"ramp_frac", ramp_frac},
            {"k_max", k_max}};
  }
};

struct TrainSection {
  std::string scheme = "alternating";
  int epochs = 12;
  int pairs_per_batch = 48;
  double lr = 1e-3;
  double lr_classifier = 1e-3;
  double grad_clip = 5.0;
  int steps_per_epoch = 0;  // 0 = one pass over the train tuples
  int64_t eval_max = 0;     // 0 = whole test split
  int log_every = 10;
  int snapshot_every = 50;

  static TrainSection from_json(const json& j) {
    TrainSection c;
    check_keys(j, "train",
               {"scheme", "epochs", "pairs_per_batch", "lr", "lr_classifier", "grad_clip",
                "steps_per_epoch", "eval_max", "log_every", "snapshot_every"});
    c.scheme = get_or<std::string>(j, "scheme", c.scheme);
    c.epochs = get_or(j, "epochs", c.epochs);
    c.pairs_per_batch = get_or(j, "pairs_per_batch", c.pairs_per_batch);
    c.lr = get_or(j, "lr", c.lr);
    c.lr_classifier = get_or(j, "lr_classifier", c.lr_classifier);
    c.grad_clip = get_or(j, "grad_clip", c.grad_clip);
    c.steps_per_epoch = get_or(j, "steps_per_epoch", c.steps_per_epoch);
    c.eval_max = get_or(j, "eval_max", c.eval_max);
    c.log_every = get_or(j, "log_every", c.log_every);
    c.snapshot_every = get_or(j, "snapshot_every", c.snapshot_every);
    parse_scheme(c.scheme);
    DIVREP_CHECK_CFG(c.epochs >= 1 && c.pairs_per_batch >= 1, "training budget");
    return c;
  }
  json to_json() const {
    return {{"scheme", scheme},
            {"epochs", epochs},
            {"pairs_per_batch", pairs_per_batch},
            {"lr", lr},
            {"lr_classifier", lr_classifier},
            {"grad_clip", grad_clip},
            {"steps_per_epoch", steps_per_epoch},
            {"eval_max", eval_max},
            {"log_every", log_every},
            {"snapshot_every", snapshot_every}};
  }
};

struct RunConfig {
  DatasetConfig dataset;
  ModelSection model;
  LossWeights loss;
  CurriculumSection curriculum;
  DivergenceOptions divergence;
  TrainSection train;
  uint64_t seed = 0;

  static RunConfig from_json(const json& j) {
    RunConfig c;
    check_keys(j, "config",
               {"dataset", "model", "loss", "curriculum", "divergence", "train", "seed"});
    if (j.contains("dataset")) c.dataset = DatasetConfig::from_json(j.at("dataset"));
    if (j.contains("model")) c.model = ModelSection::from_json(j.at("model"));
    if (j.contains("loss")) {
      const auto& l = j.at("loss");
      check_keys(l, "loss", {"alpha", "beta", "gamma", "tau"});
      c.loss.alpha = get_or(l, "alpha", c.loss.alpha);
      c.loss.beta = get_or(l, "beta", c.loss.beta);
      c.loss.gamma = get_or(l, "gamma", c.loss.gamma);
      c.loss.tau = get_or(l, "tau", c.loss.tau);
      c.loss.validate();
    }
    if (j.contains("curriculum")) c.curriculum = CurriculumSection::from_json(j.at("curriculum"));
    if (j.contains("divergence")) {
      const auto& d = j.at("divergence");
      check_keys(d, "divergence", {"form", "symmetric"});
      std::string form = get_or<std::string>(d, "form", "standard");
      DIVREP_CHECK_CFG(form == "standard" || form == "printed",
                       "divergence form must be standard or printed");
      c.divergence.form = form == "standard" ? DivergenceForm::standard : DivergenceForm::printed;
      c.divergence.symmetric = get_or(d, "symmetric", false);
    }
    if (j.contains("train")) c.train = TrainSection::from_json(j.at("train"));
    c.seed = get_or<uint64_t>(j, "seed", c.seed);
    return c;
  }

  json to_json() const {
    json d = {{"form", divergence.form == DivergenceForm::standard ? "standard" : "printed"},
              {"symmetric", divergence.symmetric}};
    return {{"dataset", dataset.to_json()},
            {"model", model.to_json()},
            {"loss",
             {{"alpha", loss.alpha}, {"beta", loss.beta}, {"gamma", loss.gamma}, {"tau", loss.tau}}},
            {"curriculum", curriculum.to_json()},
            {"divergence", d},
            {"train", train.to_json()},
            {"seed", seed}};
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream in(path);
    DIVREP_CHECK_CFG(in.good(), "cannot open config file: " + path);
    return from_json(json::parse(in));
  }
};

}  // namespace divrep
