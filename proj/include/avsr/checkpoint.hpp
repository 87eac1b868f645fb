// SPDX-License-Identifier: Apache-2.0
//
// Flat tensor archive used for model checkpoints, cached features and
// spectrogram dumps. Byte layout (all integers little-endian):
//
//   magic   8 bytes  "AVSRCKP1"
//   u32     format version (currently 1)
//   u32     metadata length in bytes
//   bytes   metadata, UTF-8 JSON
//   u64     entry count
//   entry*  u32 name length, name bytes,
//           u32 rank, u64 dims[rank],
//           f64 payload[prod(dims)]  (IEEE-754 little-endian)

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"

#include "avsr/nn.hpp"
#include "avsr/tensor.hpp"

namespace avsr::checkpoint {

inline constexpr char kMagic[9] = "AVSRCKP1";
inline constexpr uint32_t kVersion = 1;

struct Archive {
  std::map<std::string, Tensor> tensors;
  nlohmann::json meta = nlohmann::json::object();
};

void save_archive(const std::filesystem::path& path, const Archive& archive);
Archive load_archive(const std::filesystem::path& path);

// Serializes parameters and buffers under their path names.
void save_model(const std::filesystem::path& path, nn::Module& model,
                nlohmann::json meta);
// Strict load: every parameter/buffer must be present with matching shape.
nlohmann::json load_model(const std::filesystem::path& path, nn::Module& model);

// Single-tensor convenience used for feature caches and magnitude dumps.
void save_tensor(const std::filesystem::path& path, const std::string& name,
                 const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path, const std::string& name);

}  // namespace avsr::checkpoint
