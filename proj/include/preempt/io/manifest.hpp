#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "preempt/forecast/model.hpp"
#include "preempt/io/codec.hpp"
#include "preempt/sim/dataset.hpp"

namespace preempt::io {

inline std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1)
    throw Error("SHA-256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string sha256_file(const std::filesystem::path& p) { return sha256_hex(read_file(p)); }

// Dataset manifest -------------------------------------------------------

struct DataFile {
  std::string name;  // relative to the data directory
  sim::Split split = sim::Split::Train;
  std::string sha256;
  friend bool operator==(const DataFile&, const DataFile&) = default;
};

struct DataManifest {
  int version = kFormatVersion;
  std::uint64_t seed = 0;
  std::size_t keypoints = 42;
  std::vector<DataFile> files;
  friend bool operator==(const DataManifest&, const DataManifest&) = default;

  /// Hash over the listed file hashes, in order.
  std::string dataset_hash() const {
    std::string all;
    for (const auto& f : files) all += f.name + ":" + f.sha256 + "\n";
    return sha256_hex(all);
  }
};

inline sim::Split split_from_name(std::string_view s) {
  for (auto x : {sim::Split::Train, sim::Split::Val, sim::Split::Test})
    if (sim::split_name(x) == s) return x;
  throw DataError("unknown split '" + std::string(s) + "'");
}

inline Json data_manifest_json(const DataManifest& m) {
  Json files = Json::array();
  for (const auto& f : m.files)
    files.push_back(Json{{"name", f.name}, {"split", std::string(sim::split_name(f.split))}, {"sha256", f.sha256}});
  return Json{{"version", m.version},
              {"seed", m.seed},
              {"K", m.keypoints},
              {"dataset_hash", m.dataset_hash()},
              {"files", files}};
}

inline DataManifest data_manifest_from(const Json& j) {
  DataManifest m;
  m.version = get<int>(j, "version");
  m.seed = get<std::uint64_t>(j, "seed");
  m.keypoints = get<std::size_t>(j, "K");
  for (const auto& f : j.at("files"))
    m.files.push_back({get<std::string>(f, "name"), split_from_name(get<std::string>(f, "split")), get<std::string>(f, "sha256")});
  return m;
}

inline DataManifest load_data_manifest(const std::filesystem::path& dir) {
  try {
    return data_manifest_from(Json::parse(read_file(dir / "manifest.json")));
  } catch (const nlohmann::json::exception& e) {
    throw DataError((dir / "manifest.json").string() + ": " + e.what());
  }
}

/// Loads every trajectory listed in the manifest, checking hashes.
inline sim::Dataset load_dataset(const std::filesystem::path& dir) {
  const auto m = load_data_manifest(dir);
  sim::Dataset d;
  for (const auto& f : m.files) {
    const auto bytes = read_file(dir / f.name);
    if (sha256_hex(bytes) != f.sha256) throw DataError((dir / f.name).string() + ": hash does not match the manifest");
    std::istringstream is(bytes);
    d.trials.push_back(read_trial_jsonl(is, (dir / f.name).string()).log);
    d.split.push_back(f.split);
  }
  return d;
}

// Checkpoint sidecar -------------------------------------------------------

struct CheckpointManifest {
  std::string variant;
  std::size_t keypoints = 42;
  forecast::StgcnConfig hyper;
  std::uint64_t training_seed = 0;
  std::string dataset_hash;
  std::size_t param_count = 0;
  std::string checkpoint_sha256;
  int best_epoch = 0;
  double best_val = 0.0;
  friend bool operator==(const CheckpointManifest&, const CheckpointManifest&) = default;
};

inline Json checkpoint_manifest_json(const CheckpointManifest& m) {
  return Json{{"version", kFormatVersion},
              {"variant", m.variant},
              {"K", m.keypoints},
              {"hyperparameters",
               {{"channels", m.hyper.channels},
                {"kernel", m.hyper.kernel},
                {"motion_dim", m.hyper.motion_dim},
                {"scene_hidden", m.hyper.scene_hidden},
                {"fusion_hidden", m.hyper.fusion_hidden},
                {"scene_aware", m.hyper.scene_aware},
                {"history", m.hyper.history},
                {"horizon", m.hyper.horizon}}},
              {"training_seed", m.training_seed},
              {"dataset_hash", m.dataset_hash},
              {"param_count", m.param_count},
              {"checkpoint_sha256", m.checkpoint_sha256},
              {"best_epoch", m.best_epoch},
              {"best_val", m.best_val}};
}

inline CheckpointManifest checkpoint_manifest_from(const Json& j) {
  if (get<int>(j, "version") != kFormatVersion) throw DataError("unsupported checkpoint manifest version");
  CheckpointManifest m;
  m.variant = get<std::string>(j, "variant");
  m.keypoints = get<std::size_t>(j, "K");
  const auto& h = j.at("hyperparameters");
  m.hyper.keypoints = m.keypoints;
  m.hyper.channels = get<std::vector<std::size_t>>(h, "channels");
  m.hyper.kernel = get<std::size_t>(h, "kernel");
  m.hyper.motion_dim = get<std::size_t>(h, "motion_dim");
  m.hyper.scene_hidden = get<std::size_t>(h, "scene_hidden");
  m.hyper.fusion_hidden = get<std::size_t>(h, "fusion_hidden");
  m.hyper.scene_aware = get<bool>(h, "scene_aware");
  m.hyper.history = get<std::size_t>(h, "history");
  m.hyper.horizon = get<std::size_t>(h, "horizon");
  m.training_seed = get<std::uint64_t>(j, "training_seed");
  m.dataset_hash = get<std::string>(j, "dataset_hash");
  m.param_count = get<std::size_t>(j, "param_count");
  m.checkpoint_sha256 = get<std::string>(j, "checkpoint_sha256");
  m.best_epoch = get<int>(j, "best_epoch");
  m.best_val = get<double>(j, "best_val");
  return m;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& ckpt) {
  auto p = ckpt;
  p += ".json";
  return p;
}

/// Loads a learned forecaster from its checkpoint, using the sidecar for
/// the architecture and verifying the payload hash.
inline forecast::ForecastModel load_learned_model(const std::filesystem::path& ckpt) {
  CheckpointManifest m;
  try {
    m = checkpoint_manifest_from(Json::parse(read_file(sidecar_path(ckpt))));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(sidecar_path(ckpt).string() + ": " + e.what());
  }
  if (sha256_file(ckpt) != m.checkpoint_sha256) throw DataError(ckpt.string() + ": hash does not match its manifest");
  auto model = forecast::ForecastModel::learned(forecast::variant_from_name(m.variant), m.hyper);
  model.load(ckpt);
  return model;
}

}  // namespace preempt::io
