#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "repur/model.hpp"
#include "repur/seqrep.hpp"
#include "repur/spectral.hpp"

namespace repur {

enum class PretrainDirection { p2c, c2p };
enum class Variant { sum_only, fft_lpf };

std::string to_string(PretrainDirection d);
std::string to_string(Variant v);
PretrainDirection direction_from_string(const std::string& s);
Variant variant_from_string(const std::string& s);

struct Vocabs {
  Vocab protein;
  Vocab compound;
};

struct SequencePair {
  std::string protein_seq;
  std::string compound_smiles;
};

/// How stage-3 memory is formed from the fused encoder latents.
struct MemorySettings {
  Variant variant = Variant::fft_lpf;
  std::optional<Index> alpha;  // required for fft_lpf, rejected for sum_only
  spectral::LpfMode lpf_mode = spectral::LpfMode::both_axes;
  std::size_t protein_len = 64;   // T_p
  std::size_t compound_len = 48;  // T_c

  /// Throws std::invalid_argument on a variant/alpha inconsistency.
  void validate() const;
  nlohmann::json to_json() const;
  static MemorySettings from_json(const nlohmann::json& j);
};

struct TrainConfig {
  int epochs = 20;
  int batch_size = 64;
  double lr = 5e-5;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint_dir;  // empty = no checkpoint written
  MemorySettings memory;
  /// Architecture; vocab sizes, lengths and seed are filled in per stage.
  ModelConfig model;
  /// Skip triples whose positive is reachable only through the target protein.
  bool drop_same_protein = true;

  void validate() const;
};

struct TrainLog {
  std::vector<double> step_loss;
  std::vector<double> epoch_loss;  // mean step loss per epoch
};

/// Trains a fresh encoder-decoder from proteins to compounds (p2c) or the
/// reverse (c2p). Writes pretrain_<dir>.ckpt into cfg.checkpoint_dir if set.
ModelBundle pretrain_direction(std::span<const SequencePair> pairs, PretrainDirection direction,
                               const Vocabs& vocabs, const TrainConfig& cfg, TrainLog* log = nullptr);

struct FusedLatent {
  Matrix h;  // (T, d)
  Index protein_len = 0;
  Index compound_len = 0;
  Index length() const { return h.rows(); }
};

/// Zero-pads the shorter latent along the sequence axis to
/// T = max(T_p, T_c) and sums.
FusedLatent fuse_latents(const Matrix& z_p, const Matrix& z_c);

/// sum_only: h unchanged. fft_lpf: ifft_2d(apply_lpf(real_project(fft_2d(h)))).
/// The discarded imaginary residue is written to imag_residue when given.
Matrix filter_memory(const Matrix& h, const MemorySettings& settings, double* imag_residue = nullptr);

struct Memory {
  Matrix values;               // (T, d)
  std::vector<bool> keep;      // cross-attention keys, length T
  double imag_residue = 0.0;
};

/// Memory for (protein, anchor) from the frozen encoders. enc_p reads the
/// protein, enc_c the anchor compound.
class MemoryBuilder {
 public:
  MemoryBuilder(const ModelBundle& enc_p, const ModelBundle& enc_c, const Vocabs& vocabs, MemorySettings settings);

  Memory build(const std::string& protein_seq, const std::string& anchor_smiles) const;
  std::vector<Memory> build_many(std::span<const SequencePair> inputs) const;
  const MemorySettings& settings() const { return settings_; }

 private:
  const ModelBundle& enc_p_;
  const ModelBundle& enc_c_;
  const Vocabs& vocabs_;
  MemorySettings settings_;
};

/// Stacks memories into a (B, T, d) constant and its (B, T) key mask.
std::pair<Tensor, Mask> stack_memories(std::span<const Memory* const> memories);

struct TripleExample {
  std::string protein_seq;
  std::string anchor_smiles;
  std::string positive_smiles;
};

struct RepurformerModel {
  ModelBundle decoder;
  MemorySettings settings;

  void save(const std::filesystem::path& path) const;
  static RepurformerModel load(const std::filesystem::path& path);
};

/// Trains a fresh compound decoder on the positives with the encoders
/// frozen. Writes repurformer.ckpt into cfg.checkpoint_dir if set.
RepurformerModel train_repurformer(std::span<const TripleExample> triples, const ModelBundle& enc_p,
                                   const ModelBundle& enc_c, const Vocabs& vocabs, const TrainConfig& cfg,
                                   TrainLog* log = nullptr);

/// Eval-mode teacher-forced token accuracy of the decoder on the triples.
double repurformer_token_accuracy(const RepurformerModel& model, std::span<const TripleExample> triples,
                                  const ModelBundle& enc_p, const ModelBundle& enc_c, const Vocabs& vocabs);

enum class Strategy { greedy, sample };

struct GenerationConfig {
  Strategy strategy = Strategy::greedy;
  double temperature = 1.0;
  std::size_t max_len = 46;  // generated content tokens
  std::uint64_t seed = 0;
};

struct GenerationResult {
  std::string smiles;
  bool unk_present = false;
  bool truncated = false;  // max_len reached before EOS
};

GenerationResult generate_from_memory(const ModelBundle& decoder, const Memory& memory, const Vocab& compound_vocab,
                                      const GenerationConfig& cfg);

GenerationResult generate(const RepurformerModel& model, const ModelBundle& enc_p, const ModelBundle& enc_c,
                          const Vocabs& vocabs, const std::string& protein_seq, const std::string& anchor_smiles,
                          const GenerationConfig& cfg);

}  // namespace repur
