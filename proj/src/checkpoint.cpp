#include "repur/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "repur/hash.hpp"

namespace repur {

namespace {

constexpr const char* kFormat = "repur-checkpoint-v1";

std::uint64_t to_little_endian(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((bits >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return out;
  }
  return bits;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["format"] = kFormat;
  manifest["config"] = ckpt.config;
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& t : ckpt.tensors) {
    manifest["tensors"].push_back({{"name", t.name}, {"shape", {t.value.rows(), t.value.cols()}}});
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << manifest.dump() << '\n';
  for (const auto& t : ckpt.tensors) {
    for (Index i = 0; i < t.value.size(); ++i) {
      const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(t.value.data()[i]));
      char bytes[8];
      std::memcpy(bytes, &bits, 8);
      out.write(bytes, 8);
    }
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("checkpoint " + path.string() + " is empty");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint " + path.string() + " has a malformed manifest: " + e.what());
  }
  if (manifest.value("format", "") != kFormat) throw std::runtime_error("checkpoint " + path.string() + " has an unknown format");
  Checkpoint ckpt;
  ckpt.config = manifest["config"];
  for (const auto& entry : manifest["tensors"]) {
    const Index rows = entry["shape"][0].get<Index>();
    const Index cols = entry["shape"][1].get<Index>();
    Matrix value(rows, cols);
    for (Index i = 0; i < value.size(); ++i) {
      char bytes[8];
      if (!in.read(bytes, 8)) throw std::runtime_error("checkpoint " + path.string() + " is truncated");
      std::uint64_t bits;
      std::memcpy(&bits, bytes, 8);
      value.data()[i] = std::bit_cast<double>(to_little_endian(bits));
    }
    ckpt.tensors.push_back({entry["name"].get<std::string>(), std::move(value)});
  }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("checkpoint " + path.string() + " has trailing bytes");
  return ckpt;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a(bytes);
}

}  // namespace repur
