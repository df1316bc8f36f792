#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "repur/tensor.hpp"

namespace repur {

struct NamedMatrix {
  std::string name;
  Matrix value;
};

struct Checkpoint {
  nlohmann::json config;
  std::vector<NamedMatrix> tensors;
};

/// One JSON manifest line ({"format", "config", "tensors": [{name, shape}]})
/// followed by the tensors as little-endian float64, in manifest order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over the checkpoint file bytes.
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace repur
