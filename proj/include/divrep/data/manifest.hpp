#pragma once

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "divrep/data/factors.hpp"

namespace divrep::data {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// flat binary arrays with a JSON sidecar describing shape and dtype
// ---------------------------------------------------------------------------

inline void write_sidecar(const fs::path& path, const std::string& dtype,
                          const std::vector<int64_t>& shape) {
  json j;
  j["dtype"] = dtype;
  j["shape"] = shape;
  std::ofstream out(path.string() + ".json");
  DIVREP_CHECK(out.good(), "cannot write sidecar for " + path.string());
  out << j.dump(2) << "\n";
}

inline std::pair<std::string, std::vector<int64_t>> read_sidecar(const fs::path& path) {
  std::ifstream in(path.string() + ".json");
  DIVREP_CHECK(in.good(), "missing sidecar for " + path.string());
  json j = json::parse(in);
  return {j.at("dtype").get<std::string>(), j.at("shape").get<std::vector<int64_t>>()};
}

template <class T>
void write_raw(const fs::path& path, const T* data, int64_t count) {
  std::ofstream out(path, std::ios::binary);
  DIVREP_CHECK(out.good(), "cannot open for write: " + path.string());
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  DIVREP_CHECK(out.good(), "short write: " + path.string());
}

template <class T>
std::vector<T> read_raw(const fs::path& path, int64_t count) {
  std::ifstream in(path, std::ios::binary);
  DIVREP_CHECK(in.good(), "cannot open for read: " + path.string());
  std::vector<T> data(static_cast<size_t>(count));
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(T)));
  DIVREP_CHECK(in.gcount() == static_cast<std::streamsize>(count * sizeof(T)),
               "short read: " + path.string());
  return data;
}

inline void write_f32_array(const fs::path& path, const Tensorf& t) {
  write_raw(path, t.ptr(), t.numel());
  write_sidecar(path, "f32", t.shape);
}

inline Tensorf read_f32_array(const fs::path& path) {
  auto [dtype, shape] = read_sidecar(path);
  DIVREP_CHECK(dtype == "f32", "expected f32 array at " + path.string());
  Tensorf t(shape);
  auto raw = read_raw<float>(path, t.numel());
  t.data.assign(raw.begin(), raw.end());
  return t;
}

inline void write_i32_array(const fs::path& path, const std::vector<int32_t>& data,
                            const std::vector<int64_t>& shape) {
  DIVREP_CHECK(Tensorf::numel_of(shape) == static_cast<int64_t>(data.size()),
               "i32 array shape mismatch");
  write_raw(path, data.data(), static_cast<int64_t>(data.size()));
  write_sidecar(path, "i32", shape);
}

inline std::pair<std::vector<int64_t>, std::vector<int32_t>> read_i32_array(const fs::path& path) {
  auto [dtype, shape] = read_sidecar(path);
  DIVREP_CHECK(dtype == "i32", "expected i32 array at " + path.string());
  auto data = read_raw<int32_t>(path, Tensorf::numel_of(shape));
  return {shape, std::move(data)};
}

// ---------------------------------------------------------------------------
// forged dataset directory: manifest + u8 image blobs + factor tables
// ---------------------------------------------------------------------------

struct MaterializeOptions {
  int64_t max_train = 0;  // 0 = all split members
  int64_t max_test = 0;
  uint64_t seed = 0;  // subsample seed when capped
};

inline std::vector<int64_t> capped_members(const std::vector<int64_t>& members, int64_t cap,
                                           uint64_t seed, const char* tag) {
  if (cap <= 0 || cap >= static_cast<int64_t>(members.size())) return members;
  std::vector<int64_t> shuffled = members;
  Rng rng(derive_seed(seed, std::string("cap-") + tag));
  rng.shuffle(shuffled);
  shuffled.resize(static_cast<size_t>(cap));
  std::sort(shuffled.begin(), shuffled.end());
  return shuffled;
}

inline void write_split_blob(const fs::path& dir, const std::string& split_name,
                             const FactorGrid& grid, const std::vector<int64_t>& members) {
  const auto& sh = grid.image_shape;
  int64_t per = sh[0] * sh[1] * sh[2];
  std::vector<uint8_t> blob(static_cast<size_t>(per * static_cast<int64_t>(members.size())));
  std::vector<int32_t> factors;
  factors.reserve(members.size() * static_cast<size_t>(grid.spec.num_factors()));
  parallel_for(static_cast<int64_t>(members.size()), [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      Tensorf img = grid.image(members[static_cast<size_t>(i)]);
      uint8_t* dst = blob.data() + i * per;
      for (int64_t p = 0; p < per; ++p)
        dst[p] = static_cast<uint8_t>(std::lround(std::clamp(img[p], 0.f, 1.f) * 255.f));
    }
  });
  for (int64_t m : members) {
    auto tuple = grid.tuple_of(m);
    for (int v : tuple) factors.push_back(v);
  }
  write_raw(dir / (split_name + "_images.u8"), blob.data(), static_cast<int64_t>(blob.size()));
  write_sidecar(dir / (split_name + "_images.u8"), "u8",
                {static_cast<int64_t>(members.size()), sh[0], sh[1], sh[2]});
  write_i32_array(dir / (split_name + "_factors.i32"), factors,
                  {static_cast<int64_t>(members.size()),
                   static_cast<int64_t>(grid.spec.num_factors())});
}

inline json bundle_manifest(const DatasetBundle& bundle, const SplitPair& splits,
                            int64_t n_train, int64_t n_test, uint64_t seed) {
  json j;
  j["version"] = 1;
  j["name"] = bundle.name;
  j["seed"] = seed;
  j["image_shape"] = bundle.grid.image_shape;
  json jf = json::array();
  for (auto& f : bundle.grid.spec.factors)
    jf.push_back({{"name", f.name}, {"cardinality", f.cardinality}});
  j["factors"] = jf;
  j["predictive_index"] = bundle.grid.spec.predictive_index;
  j["known_nuisance_indices"] = bundle.grid.spec.known_nuisance_indices;
  j["group_factor"] = bundle.group_factor;
  j["pair_eligible"] = bundle.pair_eligible;
  json held = json::array();
  for (auto& [f, vals] : bundle.policy.held_out) held.push_back({{"factor", f}, {"values", vals}});
  j["split_policy"] = {{"held_out", held},
                       {"test_fraction", bundle.policy.test_fraction},
                       {"seed", bundle.policy.seed}};
  j["train_allowed_values"] = splits.train.allowed_values;
  j["test_allowed_values"] = splits.test.allowed_values;
  j["splits"] = {{"train", {{"count", n_train}, {"images", "train_images.u8"},
                            {"factors", "train_factors.i32"}}},
                 {"test", {{"count", n_test}, {"images", "test_images.u8"},
                           {"factors", "test_factors.i32"}}}};
  return j;
}

inline void forge_build(const DatasetBundle& bundle, const fs::path& out_dir,
                        MaterializeOptions opt = {}) {
  fs::create_directories(out_dir);
  auto splits = make_splits(bundle.grid, bundle.policy);
  auto train = capped_members(splits.train.members, opt.max_train, opt.seed, "train");
  auto test = capped_members(splits.test.members, opt.max_test, opt.seed, "test");
  write_split_blob(out_dir, "train", bundle.grid, train);
  write_split_blob(out_dir, "test", bundle.grid, test);
  json manifest = bundle_manifest(bundle, splits, static_cast<int64_t>(train.size()),
                                  static_cast<int64_t>(test.size()), opt.seed);
  std::ofstream mf(out_dir / "manifest.json");
  DIVREP_CHECK(mf.good(), "cannot write manifest");
  mf << manifest.dump(2) << "\n";
}

struct LoadedSplit {
  Tensorf images;                 // [N, C, H, W] dequantized to [0,1]
  std::vector<int32_t> factors;   // [N * F]
  int64_t count = 0;
};

struct LoadedDataset {
  json manifest;
  FactorSpec spec;
  int group_factor = -1;
  std::vector<std::vector<int>> test_allowed_values;
  LoadedSplit train, test;

  int factor_of(const LoadedSplit& split, int64_t row, int f) const {
    return split.factors[static_cast<size_t>(row * spec.num_factors() + f)];
  }
  int label_of(const LoadedSplit& split, int64_t row) const {
    return factor_of(split, row, spec.predictive_index);
  }
  // worst-group axis: index of the held-out value within the test value list
  int group_of(const LoadedSplit& split, int64_t row) const {
    if (group_factor < 0) return 0;
    const auto& vals = test_allowed_values[static_cast<size_t>(group_factor)];
    int v = factor_of(split, row, group_factor);
    auto it = std::find(vals.begin(), vals.end(), v);
    DIVREP_CHECK(it != vals.end(), "group value not in the held-out list");
    return static_cast<int>(it - vals.begin());
  }
  int group_count() const {
    if (group_factor < 0) return 1;
    return static_cast<int>(test_allowed_values[static_cast<size_t>(group_factor)].size());
  }
};

inline LoadedSplit load_split(const fs::path& dir, const json& split_json) {
  LoadedSplit s;
  s.count = split_json.at("count").get<int64_t>();
  fs::path img_path = dir / split_json.at("images").get<std::string>();
  auto [dtype, shape] = read_sidecar(img_path);
  DIVREP_CHECK(dtype == "u8" && shape.size() == 4, "image blob must be u8 [N,C,H,W]");
  DIVREP_CHECK(shape[0] == s.count, "image count mismatch");
  auto bytes = read_raw<uint8_t>(img_path, Tensorf::numel_of(shape));
  s.images = Tensorf(shape);
  for (size_t i = 0; i < bytes.size(); ++i)
    s.images[static_cast<int64_t>(i)] = static_cast<float>(bytes[i]) / 255.f;
  auto [fshape, fdata] = read_i32_array(dir / split_json.at("factors").get<std::string>());
  DIVREP_CHECK(fshape.size() == 2 && fshape[0] == s.count, "factor table shape");
  s.factors = std::move(fdata);
  return s;
}

inline LoadedDataset load_dataset(const fs::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  DIVREP_CHECK(mf.good(), "missing manifest.json in " + dir.string());
  LoadedDataset ds;
  ds.manifest = json::parse(mf);
  for (auto& f : ds.manifest.at("factors"))
    ds.spec.factors.push_back({f.at("name").get<std::string>(), f.at("cardinality").get<int>()});
  ds.spec.predictive_index = ds.manifest.at("predictive_index").get<int>();
  ds.spec.known_nuisance_indices =
      ds.manifest.at("known_nuisance_indices").get<std::vector<int>>();
  ds.group_factor = ds.manifest.at("group_factor").get<int>();
  ds.test_allowed_values =
      ds.manifest.at("test_allowed_values").get<std::vector<std::vector<int>>>();
  ds.train = load_split(dir, ds.manifest.at("splits").at("train"));
  ds.test = load_split(dir, ds.manifest.at("splits").at("test"));
  return ds;
}

}  // namespace divrep::data
