#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "repur/seqrep.hpp"
#include "repur/tensor.hpp"

namespace repur {

struct ModelConfig {
  int n_layers = 4;
  int d_model = 256;
  int n_heads = 4;
  int d_head = 64;
  int d_ff = 1024;
  double dropout = 0.1;
  int src_vocab = 0;  // 0 = decoder only; memory is supplied by the caller
  int tgt_vocab = 0;
  int src_len = 64;
  int tgt_len = 48;
  std::uint64_t seed = 0;
  double layer_norm_eps = 1e-5;

  bool has_encoder() const { return src_vocab > 0; }
  /// Throws std::invalid_argument unless n_heads * d_head == d_model and all
  /// counts are positive.
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Fixed-length ids of a batch laid out row-major as (batch, length).
struct TokenBatch {
  std::vector<int> ids;
  Index batch = 0;
  Index length = 0;

  static TokenBatch from(std::span<const TokenSeq> seqs);
  int at(Index b, Index t) const { return ids[static_cast<std::size_t>(b * length + t)]; }
  /// (batch, length) with true at non-PAD ids.
  Mask keep_mask() const;
  /// Columns [start, start + count) of every row.
  TokenBatch columns(Index start, Index count) const;
};

struct ForwardOptions {
  bool training = false;
  std::mt19937_64* rng = nullptr;  // required when training with dropout
};

/// Cross-attention weights: [layer][head], each (batch * tgt_len, src_len).
using AttentionMaps = std::vector<std::vector<Matrix>>;

struct Linear {
  Tensor weight;  // (in, out)
  Tensor bias;    // (1, out)
};

struct LayerNormParams {
  Tensor gain;
  Tensor bias;
};

struct AttentionParams {
  Linear query, key, value, out;
};

struct EncoderLayer {
  AttentionParams self_attn;
  LayerNormParams norm1;
  Linear ff1, ff2;
  LayerNormParams norm2;
};

struct DecoderLayer {
  AttentionParams self_attn;
  LayerNormParams norm1;
  AttentionParams cross_attn;
  LayerNormParams norm2;
  Linear ff1, ff2;
  LayerNormParams norm3;
};

/// Post-norm encoder-decoder transformer with sinusoidal positions.
class ModelBundle {
 public:
  explicit ModelBundle(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;
  /// FNV-1a over every parameter value in canonical order.
  std::uint64_t parameter_hash() const;

  /// Extra keys are stored next to the model config in the checkpoint.
  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static ModelBundle load(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

  /// (B, T_src, d_model). PAD keys are masked out of self-attention.
  Tensor encode(const TokenBatch& src, const ForwardOptions& opts = {}) const;
  /// Logits (B, t, tgt_vocab) for every prefix position; causal
  /// self-attention, cross-attention over memory rows where memory_keep.
  Tensor decode(const TokenBatch& tgt_prefix, const Tensor& memory, const Mask& memory_keep,
                const ForwardOptions& opts = {}, AttentionMaps* cross_maps = nullptr) const;

 private:
  ModelConfig cfg_;
  Tensor src_embedding_;
  Tensor tgt_embedding_;
  std::vector<EncoderLayer> encoder_;
  std::vector<DecoderLayer> decoder_;
  Linear output_;
};

/// Fixed sinusoidal position table (length, d_model).
Matrix sinusoidal_positions(Index length, Index d_model);

Tensor encode(const ModelBundle& bundle, const TokenBatch& src, const ForwardOptions& opts = {});

Tensor decode_step(const ModelBundle& bundle, const TokenBatch& tgt_prefix, const Tensor& memory,
                   const Mask& memory_keep, const ForwardOptions& opts = {});

/// Teacher-forced mean NLL of tgt[1:] given tgt[:-1] and the source; PAD
/// targets are ignored.
Tensor seq2seq_loss(const ModelBundle& bundle, const TokenBatch& src, const TokenBatch& tgt,
                    const ForwardOptions& opts = {});

/// Same loss with externally supplied memory (decoder-only bundles).
Tensor memory_loss(const ModelBundle& bundle, const Tensor& memory, const Mask& memory_keep, const TokenBatch& tgt,
                   const ForwardOptions& opts = {});

/// Fraction of non-PAD next-token targets predicted by argmax.
double token_accuracy(const Tensor& logits, const TokenBatch& tgt);

/// Eval-mode cross-attention of one (src, tgt) example:
/// [layer][head] -> (T_tgt - 1, T_src).
AttentionMaps export_cross_attention(const ModelBundle& bundle, const TokenSeq& src, const TokenSeq& tgt);

}  // namespace repur
