#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "divrep/nn.hpp"

namespace divrep {

// Checkpoint container: magic + JSON header (config + array index with
// per-tensor content hashes) followed by raw little-endian f32 blobs.
inline constexpr char kCheckpointMagic[8] = {'D', 'V', 'R', 'P', 'C', 'K', '0', '1'};

inline void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& config,
                            const nn::ParamSet<float>& params) {
  nlohmann::json header;
  header["version"] = 1;
  header["config"] = config;
  nlohmann::json index = nlohmann::json::array();
  int64_t offset = 0;
  for (auto& [name, var] : params.items) {
    const auto& t = var->value;
    int64_t nbytes = t.numel() * static_cast<int64_t>(sizeof(float));
    index.push_back({{"name", name},
                     {"shape", t.shape},
                     {"offset", offset},
                     {"nbytes", nbytes},
                     {"fnv64", fnv1a64(t.ptr(), static_cast<size_t>(nbytes))}});
    offset += nbytes;
  }
  header["params"] = index;
  std::string hbytes = header.dump();

  std::ofstream out(path, std::ios::binary);
  DIVREP_CHECK(out.good(), "cannot write checkpoint: " + path.string());
  out.write(kCheckpointMagic, 8);
  uint64_t hlen = hbytes.size();
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(hbytes.data(), static_cast<std::streamsize>(hbytes.size()));
  for (auto& [name, var] : params.items)
    out.write(reinterpret_cast<const char*>(var->value.ptr()),
              var->value.numel() * static_cast<int64_t>(sizeof(float)));
  DIVREP_CHECK(out.good(), "short checkpoint write: " + path.string());
}

struct Checkpoint {
  nlohmann::json config;
  std::map<std::string, Tensorf> tensors;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  DIVREP_CHECK(in.good(), "cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, 8);
  DIVREP_CHECK(in.gcount() == 8 && std::memcmp(magic, kCheckpointMagic, 8) == 0,
               "not a checkpoint file: " + path.string());
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 8);
  std::string hbytes(hlen, '\0');
  in.read(hbytes.data(), static_cast<std::streamsize>(hlen));
  DIVREP_CHECK(in.good(), "truncated checkpoint header");
  nlohmann::json header = nlohmann::json::parse(hbytes);
  DIVREP_CHECK(header.at("version").get<int>() == 1, "unsupported checkpoint version");

  Checkpoint ck;
  ck.config = header.at("config");
  std::streampos blob_start = in.tellg();
  for (auto& entry : header.at("params")) {
    auto name = entry.at("name").get<std::string>();
    Tensorf t(entry.at("shape").get<std::vector<int64_t>>());
    in.seekg(blob_start + std::streampos(entry.at("offset").get<int64_t>()));
    in.read(reinterpret_cast<char*>(t.ptr()), t.numel() * static_cast<int64_t>(sizeof(float)));
    DIVREP_CHECK(in.good(), "truncated checkpoint blob for " + name);
    uint64_t expect = entry.at("fnv64").get<uint64_t>();
    uint64_t got = fnv1a64(t.ptr(), static_cast<size_t>(t.numel()) * sizeof(float));
    DIVREP_CHECK(got == expect, "checkpoint hash mismatch for " + name);
    ck.tensors.emplace(std::move(name), std::move(t));
  }
  return ck;
}

// Load by exact key names; every model parameter must be present and match.
inline void restore_params(nn::ParamSet<float>& params, const Checkpoint& ck) {
  for (auto& [name, var] : params.items) {
    auto it = ck.tensors.find(name);
    DIVREP_CHECK(it != ck.tensors.end(), "checkpoint missing parameter: " + name);
    DIVREP_CHECK(it->second.shape == var->value.shape, "checkpoint shape mismatch: " + name);
    var->value = it->second;
  }
  DIVREP_CHECK(ck.tensors.size() == params.items.size(),
               "checkpoint carries extra parameters");
}

}  // namespace divrep
