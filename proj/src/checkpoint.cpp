// SPDX-License-Identifier: Apache-2.0

#include "avsr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "avsr/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint layout assumes a little-endian host");

namespace avsr::checkpoint {

namespace {

template <typename T>
void write_pod(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_archive(const std::filesystem::path& path, const Archive& archive) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(kMagic, 8);
  write_pod<uint32_t>(os, kVersion);
  const std::string meta = archive.meta.dump();
  write_pod<uint32_t>(os, static_cast<uint32_t>(meta.size()));
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  write_pod<uint64_t>(os, archive.tensors.size());
  for (const auto& [name, t] : archive.tensors) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint32_t>(os, static_cast<uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) write_pod<uint64_t>(os, static_cast<uint64_t>(t.dim(i)));
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!os) throw IoError("write failed for " + path.string());
}

Archive load_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw VersionError("not a checkpoint archive: " + path.string());
  const auto version = read_pod<uint32_t>(is);
  if (version != kVersion)
    throw VersionError("unsupported checkpoint version " + std::to_string(version));
  const auto meta_len = read_pod<uint32_t>(is);
  std::string meta(meta_len, '\0');
  is.read(meta.data(), meta_len);
  if (!is) throw FormatError("checkpoint: truncated metadata");

  Archive archive;
  try {
    archive.meta = meta.empty() ? nlohmann::json::object() : nlohmann::json::parse(meta);
  } catch (const nlohmann::json::parse_error&) {
    throw FormatError("checkpoint: malformed metadata JSON");
  }

  const auto count = read_pod<uint64_t>(is);
  for (uint64_t e = 0; e < count; ++e) {
    const auto name_len = read_pod<uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto rank = read_pod<uint32_t>(is);
    if (rank > 8) throw FormatError("checkpoint: implausible tensor rank");
    Shape shape(rank);
    int64_t n = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<int64_t>(read_pod<uint64_t>(is));
      n *= shape[d];
    }
    std::vector<double> data(static_cast<size_t>(n));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw FormatError("checkpoint: truncated payload for " + name);
    archive.tensors.emplace(std::move(name), Tensor::from_data(std::move(shape), std::move(data)));
  }
  return archive;
}

void save_model(const std::filesystem::path& path, nn::Module& model,
                nlohmann::json meta) {
  Archive archive;
  archive.meta = std::move(meta);
  for (nn::Parameter* p : model.parameters()) {
    if (!archive.tensors.emplace(p->name, p->value.clone_detached()).second)
      throw ContractError("duplicate parameter name: " + p->name);
  }
  for (nn::Buffer* b : model.buffers()) {
    if (!archive.tensors.emplace(b->name, Tensor::from_data(b->shape, b->data)).second)
      throw ContractError("duplicate buffer name: " + b->name);
  }
  save_archive(path, archive);
}

nlohmann::json load_model(const std::filesystem::path& path, nn::Module& model) {
  Archive archive = load_archive(path);
  for (nn::Parameter* p : model.parameters()) {
    auto it = archive.tensors.find(p->name);
    if (it == archive.tensors.end())
      throw VersionError("checkpoint misses parameter " + p->name);
    if (it->second.shape() != p->value.shape())
      throw VersionError("checkpoint shape mismatch for " + p->name + ": " +
                         shape_str(it->second.shape()) + " vs " +
                         shape_str(p->value.shape()));
    auto dst = p->value.mutable_data();
    const auto src = it->second.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  for (nn::Buffer* b : model.buffers()) {
    auto it = archive.tensors.find(b->name);
    if (it == archive.tensors.end())
      throw VersionError("checkpoint misses buffer " + b->name);
    if (it->second.numel() != static_cast<int64_t>(b->data.size()))
      throw VersionError("checkpoint shape mismatch for buffer " + b->name);
    const auto src = it->second.data();
    std::copy(src.begin(), src.end(), b->data.begin());
  }
  return archive.meta;
}

void save_tensor(const std::filesystem::path& path, const std::string& name,
                 const Tensor& t) {
  Archive archive;
  archive.tensors.emplace(name, t.clone_detached());
  save_archive(path, archive);
}

Tensor load_tensor(const std::filesystem::path& path, const std::string& name) {
  Archive archive = load_archive(path);
  auto it = archive.tensors.find(name);
  if (it == archive.tensors.end())
    throw FormatError("archive " + path.string() + " has no tensor '" + name + "'");
  return it->second;
}

}  // namespace avsr::checkpoint
