#include "repur/model.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "repur/checkpoint.hpp"
#include "repur/hash.hpp"

namespace repur {

namespace {

class Initializer {
 public:
  Initializer(std::uint64_t seed, int d_model)
      : rng_(seed), bound_(1.0 / std::sqrt(static_cast<double>(d_model))) {}

  Tensor matrix(Index rows, Index cols) {
    std::uniform_real_distribution<double> dist(-bound_, bound_);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng_);
    return Tensor::parameter(std::move(m));
  }
  Tensor zeros(Index cols) { return Tensor::parameter(Matrix::Zero(1, cols)); }
  Tensor ones(Index cols) { return Tensor::parameter(Matrix::Ones(1, cols)); }

  Linear linear(Index in, Index out) { return {matrix(in, out), zeros(out)}; }
  LayerNormParams norm(Index d) { return {ones(d), zeros(d)}; }
  AttentionParams attention(Index d) { return {linear(d, d), linear(d, d), linear(d, d), linear(d, d)}; }

 private:
  std::mt19937_64 rng_;
  double bound_;
};

void push(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix, const Linear& l) {
  out.emplace_back(prefix + ".weight", l.weight);
  out.emplace_back(prefix + ".bias", l.bias);
}

void push(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix, const LayerNormParams& n) {
  out.emplace_back(prefix + ".gain", n.gain);
  out.emplace_back(prefix + ".bias", n.bias);
}

void push(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix, const AttentionParams& a) {
  push(out, prefix + ".query", a.query);
  push(out, prefix + ".key", a.key);
  push(out, prefix + ".value", a.value);
  push(out, prefix + ".out", a.out);
}

Tensor linear(const Tensor& x, const Linear& l) { return add(matmul(x, l.weight), l.bias); }

Tensor norm(const Tensor& x, const LayerNormParams& n, double eps) {
  return add(mul(layer_norm(x, eps), n.gain), n.bias);
}

Tensor maybe_dropout(const Tensor& x, const ModelConfig& cfg, const ForwardOptions& opts) {
  if (!opts.training || cfg.dropout <= 0.0) return x;
  if (!opts.rng) throw std::invalid_argument("training forward pass with dropout needs an RNG");
  return dropout(x, cfg.dropout, *opts.rng);
}

// Multi-head attention. keep is (B * Tq, Tk).
Tensor attention(const AttentionParams& p, const Tensor& query_in, const Tensor& kv_in, const Mask& keep,
                 const ModelConfig& cfg, std::vector<Matrix>* capture) {
  const Tensor q = linear(query_in, p.query);
  const Tensor k = linear(kv_in, p.key);
  const Tensor v = linear(kv_in, p.value);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(cfg.d_head));
  std::vector<Tensor> heads;
  heads.reserve(static_cast<std::size_t>(cfg.n_heads));
  for (int h = 0; h < cfg.n_heads; ++h) {
    const Index start = static_cast<Index>(h) * cfg.d_head;
    Tensor qh = slice(q, -1, start, cfg.d_head);
    Tensor kh = slice(k, -1, start, cfg.d_head);
    Tensor vh = slice(v, -1, start, cfg.d_head);
    Tensor weights = masked_softmax(scale(matmul(qh, transpose(kh)), inv_sqrt), keep);
    if (capture) capture->push_back(weights.value());
    heads.push_back(matmul(weights, vh));
  }
  return linear(concat(heads, -1), p.out);
}

Tensor embed(const Tensor& table, const TokenBatch& tokens, const ModelConfig& cfg) {
  Tensor x = embedding_lookup(table, tokens.ids, {tokens.batch, tokens.length});
  x = scale(x, std::sqrt(static_cast<double>(cfg.d_model)));
  const Matrix pe = sinusoidal_positions(tokens.length, cfg.d_model);
  Matrix tiled(tokens.batch * tokens.length, cfg.d_model);
  for (Index b = 0; b < tokens.batch; ++b) tiled.middleRows(b * tokens.length, tokens.length) = pe;
  return add(x, Tensor(x.shape(), std::move(tiled)));
}

}  // namespace

// ---------------------------------------------------------------- config

void ModelConfig::validate() const {
  if (n_layers <= 0 || d_model <= 0 || n_heads <= 0 || d_head <= 0 || d_ff <= 0 || tgt_vocab <= 0 ||
      src_vocab < 0 || src_len <= 0 || tgt_len <= 0) {
    throw std::invalid_argument("model config counts must be positive");
  }
  if (n_heads * d_head != d_model) {
    throw std::invalid_argument("n_heads * d_head (" + std::to_string(n_heads * d_head) + ") must equal d_model (" +
                                std::to_string(d_model) + ")");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must lie in [0, 1)");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"n_layers", n_layers}, {"d_model", d_model},     {"n_heads", n_heads},   {"d_head", d_head},
          {"d_ff", d_ff},         {"dropout", dropout},     {"src_vocab", src_vocab}, {"tgt_vocab", tgt_vocab},
          {"src_len", src_len},   {"tgt_len", tgt_len},     {"seed", seed},         {"layer_norm_eps", layer_norm_eps}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n_layers = j.at("n_layers").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_head = j.at("d_head").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.src_vocab = j.at("src_vocab").get<int>();
  c.tgt_vocab = j.at("tgt_vocab").get<int>();
  c.src_len = j.at("src_len").get<int>();
  c.tgt_len = j.at("tgt_len").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.layer_norm_eps = j.at("layer_norm_eps").get<double>();
  return c;
}

// ---------------------------------------------------------------- batches

TokenBatch TokenBatch::from(std::span<const TokenSeq> seqs) {
  if (seqs.empty()) throw std::invalid_argument("empty token batch");
  TokenBatch batch;
  batch.batch = static_cast<Index>(seqs.size());
  batch.length = static_cast<Index>(seqs.front().ids.size());
  batch.ids.reserve(seqs.size() * seqs.front().ids.size());
  for (const auto& s : seqs) {
    if (static_cast<Index>(s.ids.size()) != batch.length) throw std::invalid_argument("token batch mixes sequence lengths");
    batch.ids.insert(batch.ids.end(), s.ids.begin(), s.ids.end());
  }
  return batch;
}

Mask TokenBatch::keep_mask() const {
  Mask keep(batch, length);
  for (Index b = 0; b < batch; ++b)
    for (Index t = 0; t < length; ++t) keep(b, t) = at(b, t) != kPad;
  return keep;
}

TokenBatch TokenBatch::columns(Index start, Index count) const {
  if (start < 0 || count <= 0 || start + count > length) throw std::out_of_range("token batch column range");
  TokenBatch out;
  out.batch = batch;
  out.length = count;
  out.ids.reserve(static_cast<std::size_t>(batch * count));
  for (Index b = 0; b < batch; ++b)
    for (Index t = start; t < start + count; ++t) out.ids.push_back(at(b, t));
  return out;
}

// ---------------------------------------------------------------- bundle

ModelBundle::ModelBundle(ModelConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  Initializer init(cfg_.seed, cfg_.d_model);
  const Index d = cfg_.d_model;
  if (cfg_.has_encoder()) {
    src_embedding_ = init.matrix(cfg_.src_vocab, d);
    for (int l = 0; l < cfg_.n_layers; ++l) {
      EncoderLayer layer;
      layer.self_attn = init.attention(d);
      layer.norm1 = init.norm(d);
      layer.ff1 = init.linear(d, cfg_.d_ff);
      layer.ff2 = init.linear(cfg_.d_ff, d);
      layer.norm2 = init.norm(d);
      encoder_.push_back(std::move(layer));
    }
  }
  tgt_embedding_ = init.matrix(cfg_.tgt_vocab, d);
  for (int l = 0; l < cfg_.n_layers; ++l) {
    DecoderLayer layer;
    layer.self_attn = init.attention(d);
    layer.norm1 = init.norm(d);
    layer.cross_attn = init.attention(d);
    layer.norm2 = init.norm(d);
    layer.ff1 = init.linear(d, cfg_.d_ff);
    layer.ff2 = init.linear(cfg_.d_ff, d);
    layer.norm3 = init.norm(d);
    decoder_.push_back(std::move(layer));
  }
  output_ = init.linear(d, cfg_.tgt_vocab);
}

std::vector<std::pair<std::string, Tensor>> ModelBundle::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  if (cfg_.has_encoder()) {
    out.emplace_back("encoder.embedding", src_embedding_);
    for (std::size_t l = 0; l < encoder_.size(); ++l) {
      const std::string p = "encoder." + std::to_string(l);
      push(out, p + ".self_attn", encoder_[l].self_attn);
      push(out, p + ".norm1", encoder_[l].norm1);
      push(out, p + ".ff1", encoder_[l].ff1);
      push(out, p + ".ff2", encoder_[l].ff2);
      push(out, p + ".norm2", encoder_[l].norm2);
    }
  }
  out.emplace_back("decoder.embedding", tgt_embedding_);
  for (std::size_t l = 0; l < decoder_.size(); ++l) {
    const std::string p = "decoder." + std::to_string(l);
    push(out, p + ".self_attn", decoder_[l].self_attn);
    push(out, p + ".norm1", decoder_[l].norm1);
    push(out, p + ".cross_attn", decoder_[l].cross_attn);
    push(out, p + ".norm2", decoder_[l].norm2);
    push(out, p + ".ff1", decoder_[l].ff1);
    push(out, p + ".ff2", decoder_[l].ff2);
    push(out, p + ".norm3", decoder_[l].norm3);
  }
  push(out, "output", output_);
  return out;
}

std::vector<Tensor> ModelBundle::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t ModelBundle::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += static_cast<std::size_t>(t.value().size());
  return n;
}

std::uint64_t ModelBundle::parameter_hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& [name, t] : named_parameters()) {
    h = fnv1a(name, h);
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.value().data());
    h = fnv1a(std::span<const unsigned char>(bytes, static_cast<std::size_t>(t.value().size()) * sizeof(double)), h);
  }
  return h;
}

void ModelBundle::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  Checkpoint ckpt;
  ckpt.config = {{"model", cfg_.to_json()}};
  if (!extra.is_null()) ckpt.config["extra"] = extra;
  for (const auto& [name, t] : named_parameters()) ckpt.tensors.push_back({name, t.value()});
  save_checkpoint(path, ckpt);
}

ModelBundle ModelBundle::load(const std::filesystem::path& path, nlohmann::json* extra) {
  Checkpoint ckpt = load_checkpoint(path);
  ModelBundle bundle(ModelConfig::from_json(ckpt.config.at("model")));
  auto params = bundle.named_parameters();
  if (params.size() != ckpt.tensors.size()) {
    throw std::runtime_error("checkpoint " + path.string() + " holds " + std::to_string(ckpt.tensors.size()) +
                             " tensors, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, t] = params[i];
    const auto& stored = ckpt.tensors[i];
    if (stored.name != name || stored.value.rows() != t.value().rows() || stored.value.cols() != t.value().cols()) {
      throw std::runtime_error("checkpoint tensor " + stored.name + " does not match model parameter " + name);
    }
    t.mutable_value() = stored.value;
  }
  if (extra) *extra = ckpt.config.contains("extra") ? ckpt.config["extra"] : nlohmann::json{};
  return bundle;
}

Tensor ModelBundle::encode(const TokenBatch& src, const ForwardOptions& opts) const {
  if (!cfg_.has_encoder()) throw std::logic_error("decoder-only bundle has no encoder");
  const Mask pad = src.keep_mask();
  Mask keep(src.batch * src.length, src.length);
  for (Index b = 0; b < src.batch; ++b)
    for (Index q = 0; q < src.length; ++q) keep.row(b * src.length + q) = pad.row(b);

  Tensor x = maybe_dropout(embed(src_embedding_, src, cfg_), cfg_, opts);
  for (const auto& layer : encoder_) {
    Tensor attended = attention(layer.self_attn, x, x, keep, cfg_, nullptr);
    x = norm(add(x, maybe_dropout(attended, cfg_, opts)), layer.norm1, cfg_.layer_norm_eps);
    Tensor ff = linear(relu(linear(x, layer.ff1)), layer.ff2);
    x = norm(add(x, maybe_dropout(ff, cfg_, opts)), layer.norm2, cfg_.layer_norm_eps);
  }
  return x;
}

Tensor ModelBundle::decode(const TokenBatch& tgt, const Tensor& memory, const Mask& memory_keep,
                           const ForwardOptions& opts, AttentionMaps* cross_maps) const {
  const Shape& ms = memory.shape();
  if (ms.rank() != 3 || ms[0] != tgt.batch || ms[2] != cfg_.d_model) {
    throw std::invalid_argument("decoder memory has shape " + ms.str() + ", expected (" + std::to_string(tgt.batch) +
                                ", S, " + std::to_string(cfg_.d_model) + ")");
  }
  const Index src_len = ms[1];
  if (memory_keep.rows() != tgt.batch || memory_keep.cols() != src_len) {
    throw std::invalid_argument("memory mask does not match the memory shape " + ms.str());
  }
  const Mask pad = tgt.keep_mask();
  Mask self_keep(tgt.batch * tgt.length, tgt.length);
  Mask cross_keep(tgt.batch * tgt.length, src_len);
  for (Index b = 0; b < tgt.batch; ++b) {
    for (Index q = 0; q < tgt.length; ++q) {
      for (Index k = 0; k < tgt.length; ++k) self_keep(b * tgt.length + q, k) = k <= q && pad(b, k);
      cross_keep.row(b * tgt.length + q) = memory_keep.row(b);
    }
  }
  if (cross_maps) cross_maps->assign(decoder_.size(), {});

  Tensor y = maybe_dropout(embed(tgt_embedding_, tgt, cfg_), cfg_, opts);
  for (std::size_t l = 0; l < decoder_.size(); ++l) {
    const auto& layer = decoder_[l];
    Tensor self = attention(layer.self_attn, y, y, self_keep, cfg_, nullptr);
    y = norm(add(y, maybe_dropout(self, cfg_, opts)), layer.norm1, cfg_.layer_norm_eps);
    Tensor cross = attention(layer.cross_attn, y, memory, cross_keep, cfg_, cross_maps ? &(*cross_maps)[l] : nullptr);
    y = norm(add(y, maybe_dropout(cross, cfg_, opts)), layer.norm2, cfg_.layer_norm_eps);
    Tensor ff = linear(relu(linear(y, layer.ff1)), layer.ff2);
    y = norm(add(y, maybe_dropout(ff, cfg_, opts)), layer.norm3, cfg_.layer_norm_eps);
  }
  return linear(y, output_);
}

// ---------------------------------------------------------------- free functions

Matrix sinusoidal_positions(Index length, Index d_model) {
  Matrix pe(length, d_model);
  for (Index pos = 0; pos < length; ++pos) {
    for (Index i = 0; i < d_model; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model));
      const double angle = static_cast<double>(pos) * rate;
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

Tensor encode(const ModelBundle& bundle, const TokenBatch& src, const ForwardOptions& opts) {
  return bundle.encode(src, opts);
}

Tensor decode_step(const ModelBundle& bundle, const TokenBatch& tgt_prefix, const Tensor& memory,
                   const Mask& memory_keep, const ForwardOptions& opts) {
  if (tgt_prefix.length < 1) throw std::invalid_argument("decode_step needs at least the BOS token");
  return bundle.decode(tgt_prefix, memory, memory_keep, opts);
}

Tensor memory_loss(const ModelBundle& bundle, const Tensor& memory, const Mask& memory_keep, const TokenBatch& tgt,
                   const ForwardOptions& opts) {
  if (tgt.length < 2) throw std::invalid_argument("target sequences need at least two tokens");
  const TokenBatch input = tgt.columns(0, tgt.length - 1);
  const TokenBatch target = tgt.columns(1, tgt.length - 1);
  Tensor logits = bundle.decode(input, memory, memory_keep, opts);
  return cross_entropy(logits, target.ids, kPad);
}

Tensor seq2seq_loss(const ModelBundle& bundle, const TokenBatch& src, const TokenBatch& tgt,
                    const ForwardOptions& opts) {
  if (src.batch != tgt.batch) {
    throw std::invalid_argument("source batch of " + std::to_string(src.batch) + " does not match target batch of " +
                                std::to_string(tgt.batch));
  }
  Tensor memory = bundle.encode(src, opts);
  return memory_loss(bundle, memory, src.keep_mask(), tgt, opts);
}

double token_accuracy(const Tensor& logits, const TokenBatch& tgt) {
  const TokenBatch target = tgt.columns(1, tgt.length - 1);
  const Matrix& v = logits.value();
  if (v.rows() != static_cast<Index>(target.ids.size())) throw std::invalid_argument("token_accuracy: logits/target size mismatch");
  std::size_t hits = 0, total = 0;
  for (Index r = 0; r < v.rows(); ++r) {
    const int t = target.ids[static_cast<std::size_t>(r)];
    if (t == kPad) continue;
    Index best = 0;
    v.row(r).maxCoeff(&best);
    hits += best == t ? 1 : 0;
    ++total;
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

AttentionMaps export_cross_attention(const ModelBundle& bundle, const TokenSeq& src, const TokenSeq& tgt) {
  const TokenBatch s = TokenBatch::from(std::span<const TokenSeq>(&src, 1));
  const TokenBatch t = TokenBatch::from(std::span<const TokenSeq>(&tgt, 1));
  Tensor memory = bundle.encode(s);
  AttentionMaps maps;
  bundle.decode(t, memory, s.keep_mask(), {}, &maps);
  return maps;
}

}  // namespace repur
