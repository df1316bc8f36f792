#include "repur/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "repur/optim.hpp"
#include "repur/parallel.hpp"

namespace repur {

namespace {

struct Batcher {
  std::vector<std::size_t> order;
  std::size_t batch_size;

  std::size_t batches() const { return (order.size() + batch_size - 1) / batch_size; }
  std::span<const std::size_t> batch(std::size_t i) const {
    const std::size_t start = i * batch_size;
    return std::span<const std::size_t>(order).subspan(start, std::min(batch_size, order.size() - start));
  }
};

Batcher shuffled(std::size_t n, std::size_t batch_size, std::mt19937_64& rng) {
  Batcher b{std::vector<std::size_t>(n), batch_size};
  std::iota(b.order.begin(), b.order.end(), 0);
  std::shuffle(b.order.begin(), b.order.end(), rng);
  return b;
}

void record_epoch(TrainLog* log, double total, std::size_t steps) {
  if (log && steps) log->epoch_loss.push_back(total / static_cast<double>(steps));
}

}  // namespace

std::string to_string(PretrainDirection d) { return d == PretrainDirection::p2c ? "p2c" : "c2p"; }
std::string to_string(Variant v) { return v == Variant::sum_only ? "sum_only" : "fft_lpf"; }

PretrainDirection direction_from_string(const std::string& s) {
  if (s == "p2c") return PretrainDirection::p2c;
  if (s == "c2p") return PretrainDirection::c2p;
  throw std::invalid_argument("unknown direction '" + s + "' (expected p2c or c2p)");
}

Variant variant_from_string(const std::string& s) {
  if (s == "sum_only") return Variant::sum_only;
  if (s == "fft_lpf") return Variant::fft_lpf;
  throw std::invalid_argument("unknown variant '" + s + "' (expected sum_only or fft_lpf)");
}

// ---------------------------------------------------------------- configs

void MemorySettings::validate() const {
  if (variant == Variant::sum_only && alpha) throw std::invalid_argument("alpha has no effect with variant sum_only");
  if (variant == Variant::fft_lpf && !alpha) throw std::invalid_argument("variant fft_lpf needs a cutoff alpha");
  if (alpha && *alpha < 0) throw std::invalid_argument("alpha must be non-negative");
  if (protein_len < 3 || compound_len < 3) throw std::invalid_argument("sequence lengths must be at least 3");
}

nlohmann::json MemorySettings::to_json() const {
  nlohmann::json j = {{"variant", to_string(variant)},
                      {"lpf_mode", spectral::to_string(lpf_mode)},
                      {"protein_len", protein_len},
                      {"compound_len", compound_len}};
  j["alpha"] = alpha ? nlohmann::json(*alpha) : nlohmann::json(nullptr);
  return j;
}

MemorySettings MemorySettings::from_json(const nlohmann::json& j) {
  MemorySettings s;
  s.variant = variant_from_string(j.at("variant").get<std::string>());
  s.lpf_mode = spectral::lpf_mode_from_string(j.at("lpf_mode").get<std::string>());
  s.protein_len = j.at("protein_len").get<std::size_t>();
  s.compound_len = j.at("compound_len").get<std::size_t>();
  if (!j.at("alpha").is_null()) s.alpha = j.at("alpha").get<Index>();
  return s;
}

void TrainConfig::validate() const {
  if (epochs <= 0 || batch_size <= 0) throw std::invalid_argument("epochs and batch size must be positive");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

// ---------------------------------------------------------------- stage 1/2

ModelBundle pretrain_direction(std::span<const SequencePair> pairs, PretrainDirection direction,
                               const Vocabs& vocabs, const TrainConfig& cfg, TrainLog* log) {
  if (pairs.empty()) throw std::invalid_argument("pretraining needs at least one protein-compound pair");
  cfg.validate();
  const bool p2c = direction == PretrainDirection::p2c;
  const Vocab& src_vocab = p2c ? vocabs.protein : vocabs.compound;
  const Vocab& tgt_vocab = p2c ? vocabs.compound : vocabs.protein;
  const std::size_t src_len = p2c ? cfg.memory.protein_len : cfg.memory.compound_len;
  const std::size_t tgt_len = p2c ? cfg.memory.compound_len : cfg.memory.protein_len;

  ModelConfig mc = cfg.model;
  mc.src_vocab = static_cast<int>(src_vocab.size());
  mc.tgt_vocab = static_cast<int>(tgt_vocab.size());
  mc.src_len = static_cast<int>(src_len);
  mc.tgt_len = static_cast<int>(tgt_len);
  mc.seed = cfg.seed;
  ModelBundle bundle(mc);

  std::vector<TokenSeq> src, tgt;
  src.reserve(pairs.size());
  tgt.reserve(pairs.size());
  for (const auto& pair : pairs) {
    src.push_back(encode(p2c ? pair.protein_seq : pair.compound_smiles, src_vocab, src_len));
    tgt.push_back(encode(p2c ? pair.compound_smiles : pair.protein_seq, tgt_vocab, tgt_len));
  }

  Adam optimizer(bundle.parameters(), AdamConfig{.lr = cfg.lr});
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  ForwardOptions opts{.training = true, .rng = &rng};
  std::vector<TokenSeq> src_batch, tgt_batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Batcher batches = shuffled(pairs.size(), static_cast<std::size_t>(cfg.batch_size), rng);
    double total = 0.0;
    for (std::size_t b = 0; b < batches.batches(); ++b) {
      src_batch.clear();
      tgt_batch.clear();
      for (std::size_t i : batches.batch(b)) {
        src_batch.push_back(src[i]);
        tgt_batch.push_back(tgt[i]);
      }
      GradTape tape;
      Tensor loss = seq2seq_loss(bundle, TokenBatch::from(src_batch), TokenBatch::from(tgt_batch), opts);
      tape.backward(loss);
      optimizer.step();
      optimizer.zero_grad();
      total += loss.item();
      if (log) log->step_loss.push_back(loss.item());
    }
    record_epoch(log, total, batches.batches());
  }
  if (!cfg.checkpoint_dir.empty()) {
    bundle.save(cfg.checkpoint_dir / ("pretrain_" + to_string(direction) + ".ckpt"),
                {{"direction", to_string(direction)}});
  }
  return bundle;
}

// ---------------------------------------------------------------- fusion and filtering

FusedLatent fuse_latents(const Matrix& z_p, const Matrix& z_c) {
  if (z_p.cols() != z_c.cols()) {
    throw std::invalid_argument("latent feature dims differ: " + std::to_string(z_p.cols()) + " vs " +
                                std::to_string(z_c.cols()));
  }
  FusedLatent fused;
  fused.protein_len = z_p.rows();
  fused.compound_len = z_c.rows();
  fused.h = Matrix::Zero(std::max(z_p.rows(), z_c.rows()), z_p.cols());
  fused.h.topRows(z_p.rows()) += z_p;
  fused.h.topRows(z_c.rows()) += z_c;
  return fused;
}

Matrix filter_memory(const Matrix& h, const MemorySettings& settings, double* imag_residue) {
  settings.validate();
  if (settings.variant == Variant::sum_only) {
    if (imag_residue) *imag_residue = 0.0;
    return h;
  }
  auto result = spectral::low_pass_filter(h, *settings.alpha, settings.lpf_mode);
  if (imag_residue) *imag_residue = result.max_imag_residue;
  return result.values;
}

MemoryBuilder::MemoryBuilder(const ModelBundle& enc_p, const ModelBundle& enc_c, const Vocabs& vocabs,
                             MemorySettings settings)
    : enc_p_(enc_p), enc_c_(enc_c), vocabs_(vocabs), settings_(settings) {
  settings_.validate();
  if (!enc_p.config().has_encoder() || !enc_c.config().has_encoder()) {
    throw std::invalid_argument("memory builder needs two encoder bundles");
  }
  if (enc_p.config().d_model != enc_c.config().d_model) {
    throw std::invalid_argument("protein and compound encoders have different widths");
  }
}

std::vector<Memory> MemoryBuilder::build_many(std::span<const SequencePair> inputs) const {
  std::vector<Memory> out(inputs.size());
  constexpr std::size_t kChunk = 32;
  const std::size_t chunks = (inputs.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t start = c * kChunk;
    const std::size_t n = std::min(kChunk, inputs.size() - start);
    std::vector<TokenSeq> proteins, anchors;
    for (std::size_t i = start; i < start + n; ++i) {
      proteins.push_back(encode(inputs[i].protein_seq, vocabs_.protein, settings_.protein_len));
      anchors.push_back(encode(inputs[i].compound_smiles, vocabs_.compound, settings_.compound_len));
    }
    const Tensor zp = enc_p_.encode(TokenBatch::from(proteins));
    const Tensor zc = enc_c_.encode(TokenBatch::from(anchors));
    const auto tp = static_cast<Index>(settings_.protein_len);
    const auto tc = static_cast<Index>(settings_.compound_len);
    for (std::size_t k = 0; k < n; ++k) {
      const auto row = static_cast<Index>(k);
      FusedLatent fused = fuse_latents(zp.value().middleRows(row * tp, tp), zc.value().middleRows(row * tc, tc));
      Memory& m = out[start + k];
      m.values = filter_memory(fused.h, settings_, &m.imag_residue);
      m.keep.assign(static_cast<std::size_t>(fused.length()), settings_.variant == Variant::fft_lpf);
      if (settings_.variant == Variant::sum_only) {
        for (std::size_t t = 0; t < m.keep.size(); ++t) {
          const bool protein_real = t < proteins[k].pad_mask.size() && proteins[k].pad_mask[t];
          const bool anchor_real = t < anchors[k].pad_mask.size() && anchors[k].pad_mask[t];
          m.keep[t] = protein_real || anchor_real;
        }
      }
    }
  });
  return out;
}

Memory MemoryBuilder::build(const std::string& protein_seq, const std::string& anchor_smiles) const {
  const SequencePair input{protein_seq, anchor_smiles};
  return std::move(build_many(std::span<const SequencePair>(&input, 1)).front());
}

std::pair<Tensor, Mask> stack_memories(std::span<const Memory* const> memories) {
  if (memories.empty()) throw std::invalid_argument("no memories to stack");
  const Index t = memories.front()->values.rows();
  const Index d = memories.front()->values.cols();
  const auto b = static_cast<Index>(memories.size());
  Matrix values(b * t, d);
  Mask keep(b, t);
  for (Index i = 0; i < b; ++i) {
    const Memory& m = *memories[static_cast<std::size_t>(i)];
    if (m.values.rows() != t || m.values.cols() != d) throw std::invalid_argument("memories differ in shape");
    values.middleRows(i * t, t) = m.values;
    for (Index k = 0; k < t; ++k) keep(i, k) = m.keep[static_cast<std::size_t>(k)];
  }
  return {Tensor(Shape{b, t, d}, std::move(values)), std::move(keep)};
}

// ---------------------------------------------------------------- stage 3

void RepurformerModel::save(const std::filesystem::path& path) const {
  decoder.save(path, {{"memory", settings.to_json()}});
}

RepurformerModel RepurformerModel::load(const std::filesystem::path& path) {
  nlohmann::json extra;
  ModelBundle decoder = ModelBundle::load(path, &extra);
  if (!extra.contains("memory")) throw std::runtime_error(path.string() + " is not a Repurformer decoder checkpoint");
  return {std::move(decoder), MemorySettings::from_json(extra["memory"])};
}

namespace {

struct PreparedTriples {
  std::vector<Memory> memories;            // one per distinct (protein, anchor)
  std::vector<std::size_t> memory_of;      // per triple
  std::vector<TokenSeq> targets;           // per triple
};

PreparedTriples prepare(std::span<const TripleExample> triples, const MemoryBuilder& builder, const Vocabs& vocabs) {
  PreparedTriples prep;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::vector<SequencePair> inputs;
  for (const auto& t : triples) {
    auto [it, inserted] = index.try_emplace({t.protein_seq, t.anchor_smiles}, inputs.size());
    if (inserted) inputs.push_back({t.protein_seq, t.anchor_smiles});
    prep.memory_of.push_back(it->second);
    prep.targets.push_back(encode(t.positive_smiles, vocabs.compound, builder.settings().compound_len));
  }
  prep.memories = builder.build_many(inputs);
  return prep;
}

}  // namespace

RepurformerModel train_repurformer(std::span<const TripleExample> triples, const ModelBundle& enc_p,
                                   const ModelBundle& enc_c, const Vocabs& vocabs, const TrainConfig& cfg,
                                   TrainLog* log) {
  if (triples.empty()) throw std::invalid_argument("stage-3 training needs at least one triple");
  cfg.validate();
  MemoryBuilder builder(enc_p, enc_c, vocabs, cfg.memory);
  const PreparedTriples prep = prepare(triples, builder, vocabs);

  ModelConfig mc = cfg.model;
  mc.d_model = enc_p.config().d_model;
  if (mc.n_heads * mc.d_head != mc.d_model) mc.d_head = mc.d_model / mc.n_heads;
  mc.src_vocab = 0;
  mc.tgt_vocab = static_cast<int>(vocabs.compound.size());
  mc.src_len = static_cast<int>(std::max(cfg.memory.protein_len, cfg.memory.compound_len));
  mc.tgt_len = static_cast<int>(cfg.memory.compound_len);
  mc.seed = cfg.seed;
  RepurformerModel model{ModelBundle(mc), cfg.memory};

  Adam optimizer(model.decoder.parameters(), AdamConfig{.lr = cfg.lr});
  std::mt19937_64 rng(cfg.seed ^ 0x5851f42d4c957f2dull);
  ForwardOptions opts{.training = true, .rng = &rng};
  std::vector<const Memory*> mem_batch;
  std::vector<TokenSeq> tgt_batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Batcher batches = shuffled(triples.size(), static_cast<std::size_t>(cfg.batch_size), rng);
    double total = 0.0;
    for (std::size_t b = 0; b < batches.batches(); ++b) {
      mem_batch.clear();
      tgt_batch.clear();
      for (std::size_t i : batches.batch(b)) {
        mem_batch.push_back(&prep.memories[prep.memory_of[i]]);
        tgt_batch.push_back(prep.targets[i]);
      }
      auto [memory, keep] = stack_memories(mem_batch);
      GradTape tape;
      Tensor loss = memory_loss(model.decoder, memory, keep, TokenBatch::from(tgt_batch), opts);
      tape.backward(loss);
      optimizer.step();
      optimizer.zero_grad();
      total += loss.item();
      if (log) log->step_loss.push_back(loss.item());
    }
    record_epoch(log, total, batches.batches());
  }
  if (!cfg.checkpoint_dir.empty()) model.save(cfg.checkpoint_dir / "repurformer.ckpt");
  return model;
}

double repurformer_token_accuracy(const RepurformerModel& model, std::span<const TripleExample> triples,
                                  const ModelBundle& enc_p, const ModelBundle& enc_c, const Vocabs& vocabs) {
  if (triples.empty()) throw std::invalid_argument("no triples to score");
  MemoryBuilder builder(enc_p, enc_c, vocabs, model.settings);
  const PreparedTriples prep = prepare(triples, builder, vocabs);
  std::vector<const Memory*> mems;
  for (std::size_t i : prep.memory_of) mems.push_back(&prep.memories[i]);
  auto [memory, keep] = stack_memories(mems);
  const TokenBatch tgt = TokenBatch::from(prep.targets);
  Tensor logits = model.decoder.decode(tgt.columns(0, tgt.length - 1), memory, keep);
  return token_accuracy(logits, tgt);
}

// ---------------------------------------------------------------- generation

GenerationResult generate_from_memory(const ModelBundle& decoder, const Memory& memory, const Vocab& compound_vocab,
                                      const GenerationConfig& cfg) {
  if (cfg.strategy == Strategy::sample && !(cfg.temperature > 0.0)) {
    throw std::invalid_argument("sampling temperature must be positive");
  }
  const Memory* mem_ptr = &memory;
  auto [mem, keep] = stack_memories(std::span<const Memory* const>(&mem_ptr, 1));
  std::mt19937_64 rng(cfg.seed);
  TokenBatch prefix;
  prefix.batch = 1;
  prefix.ids = {kBos};
  prefix.length = 1;
  GenerationResult result;
  bool terminated = false;
  for (std::size_t step = 0; step < cfg.max_len + 1; ++step) {
    Tensor logits = decoder.decode(prefix, mem, keep);
    Eigen::RowVectorXd last = logits.value().row(prefix.length - 1);
    last[kPad] = -std::numeric_limits<double>::infinity();
    last[kBos] = -std::numeric_limits<double>::infinity();
    if (step == cfg.max_len) break;  // only EOS could still be emitted
    Index next = 0;
    if (cfg.strategy == Strategy::greedy) {
      last.maxCoeff(&next);
    } else {
      const double m = last.maxCoeff();
      Eigen::RowVectorXd weights = ((last.array() - m) / cfg.temperature).exp();
      std::discrete_distribution<Index> dist(weights.data(), weights.data() + weights.size());
      next = dist(rng);
    }
    if (next == kEos) {
      terminated = true;
      break;
    }
    prefix.ids.push_back(static_cast<int>(next));
    ++prefix.length;
  }
  const Decoded decoded = decode(prefix.ids, compound_vocab);
  result.smiles = decoded.text;
  result.unk_present = decoded.has_unk;
  result.truncated = !terminated;
  return result;
}

GenerationResult generate(const RepurformerModel& model, const ModelBundle& enc_p, const ModelBundle& enc_c,
                          const Vocabs& vocabs, const std::string& protein_seq, const std::string& anchor_smiles,
                          const GenerationConfig& cfg) {
  MemoryBuilder builder(enc_p, enc_c, vocabs, model.settings);
  return generate_from_memory(model.decoder, builder.build(protein_seq, anchor_smiles), vocabs.compound, cfg);
}

}  // namespace repur
