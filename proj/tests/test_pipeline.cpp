#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "repur/checkpoint.hpp"
#include "repur/pipeline.hpp"
#include "support.hpp"
#include "toy_fixture.hpp"

using namespace repur;
using repur::testing::toy_config;
using repur::testing::toy_pairs;
using repur::testing::toy_triples;

namespace {

struct Encoders {
  Vocabs vocabs = repur::testing::fixed_vocabs();
  ModelBundle enc_p;
  ModelBundle enc_c;
};

Encoders& encoders() {
  static Encoders* e = [] {
    const Vocabs v = repur::testing::fixed_vocabs();
    TrainConfig cfg = toy_config(Variant::sum_only);
    cfg.epochs = 3;
    const auto pairs = toy_pairs();
    return new Encoders{v, pretrain_direction(pairs, PretrainDirection::p2c, v, cfg),
                        pretrain_direction(pairs, PretrainDirection::c2p, v, cfg)};
  }();
  return *e;
}

}  // namespace

TEST(FuseLatents, EqualLengthsSum) {
  std::mt19937_64 rng(1);
  const Matrix a = repur::testing::random_matrix(4, 3, rng), b = repur::testing::random_matrix(4, 3, rng);
  const FusedLatent f = fuse_latents(a, b);
  EXPECT_EQ(f.h, a + b);
  EXPECT_EQ(f.length(), 4);
}

TEST(FuseLatents, ZeroCompoundIsPaddedProtein) {
  std::mt19937_64 rng(2);
  const Matrix a = repur::testing::random_matrix(6, 3, rng);
  const FusedLatent f = fuse_latents(a, Matrix::Zero(4, 3));
  EXPECT_EQ(f.h, a);
}

TEST(FuseLatents, LongerTailCopiedExactly) {
  std::mt19937_64 rng(3);
  const Matrix p = repur::testing::random_matrix(6, 5, rng), c = repur::testing::random_matrix(4, 5, rng);
  const FusedLatent f = fuse_latents(p, c);
  EXPECT_EQ(f.length(), 6);
  EXPECT_EQ(f.protein_len, 6);
  EXPECT_EQ(f.compound_len, 4);
  EXPECT_EQ(Matrix(f.h.bottomRows(2)), Matrix(p.bottomRows(2)));
  const FusedLatent g = fuse_latents(c, p);
  EXPECT_EQ(Matrix(g.h.bottomRows(2)), Matrix(p.bottomRows(2)));
}

TEST(FuseLatents, FeatureMismatchThrows) {
  EXPECT_THROW(fuse_latents(Matrix::Zero(2, 3), Matrix::Zero(2, 4)), std::invalid_argument);
}

TEST(MemorySettings, VariantAlphaConsistency) {
  MemorySettings s;
  s.variant = Variant::sum_only;
  EXPECT_NO_THROW(s.validate());
  s.alpha = 2;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.variant = Variant::fft_lpf;
  EXPECT_NO_THROW(s.validate());
  s.alpha.reset();
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.alpha = -1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.alpha = 3;
  s.lpf_mode = spectral::LpfMode::seq_only;
  const MemorySettings back = MemorySettings::from_json(s.to_json());
  EXPECT_EQ(back.to_json(), s.to_json());
}

TEST(FilterMemory, RealEvenLatentPassesUnchanged) {
  // h[t, d] = h[-t mod T, -d mod D] makes the 2D spectrum real, so the
  // real projection discards nothing and the all-pass filter is identity.
  const Index T = 8, D = 6;
  std::mt19937_64 rng(4);
  Matrix h(T, D);
  std::uniform_real_distribution<double> u(-1, 1);
  for (Index t = 0; t < T; ++t)
    for (Index d = 0; d < D; ++d) h(t, d) = u(rng);
  for (Index t = 0; t < T; ++t)
    for (Index d = 0; d < D; ++d) h((T - t) % T, (D - d) % D) = h(t, d);
  MemorySettings fft;
  fft.variant = Variant::fft_lpf;
  fft.alpha = T - 1;
  fft.lpf_mode = spectral::LpfMode::seq_only;
  MemorySettings sum;
  sum.variant = Variant::sum_only;
  double residue = 1.0;
  const Matrix a = filter_memory(h, fft, &residue);
  EXPECT_LT((a - filter_memory(h, sum)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(residue, 1e-9);
}

TEST(FilterMemory, GeneralLatentLosesImaginaryPart) {
  std::mt19937_64 rng(5);
  const Matrix h = repur::testing::random_matrix(8, 6, rng);
  MemorySettings fft;
  fft.variant = Variant::fft_lpf;
  fft.alpha = 7;
  // Dropping the imaginary part keeps the even part of h.
  Matrix even(8, 6);
  for (Index t = 0; t < 8; ++t)
    for (Index d = 0; d < 6; ++d) even(t, d) = 0.5 * (h(t, d) + h((8 - t) % 8, (6 - d) % 6));
  EXPECT_LT((filter_memory(h, fft) - even).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(MemoryBuilder, SumOnlyEqualsHandComposedForward) {
  Encoders& e = encoders();
  MemorySettings s = toy_config(Variant::sum_only).memory;
  MemoryBuilder builder(e.enc_p, e.enc_c, e.vocabs, s);
  const std::string protein = "MKVLAG", anchor = "CC(=O)O";
  const Memory m = builder.build(protein, anchor);
  const TokenSeq ps = encode(protein, e.vocabs.protein, s.protein_len);
  const TokenSeq cs = encode(anchor, e.vocabs.compound, s.compound_len);
  const Matrix zp = e.enc_p.encode(TokenBatch::from(std::span<const TokenSeq>(&ps, 1))).value();
  const Matrix zc = e.enc_c.encode(TokenBatch::from(std::span<const TokenSeq>(&cs, 1))).value();
  EXPECT_EQ(m.values, Matrix(zp + zc));
  EXPECT_EQ(m.imag_residue, 0.0);
  // keys kept where either side holds a real token
  for (std::size_t t = 0; t < m.keep.size(); ++t) EXPECT_EQ(m.keep[t], ps.pad_mask[t] || cs.pad_mask[t]);
}

TEST(MemoryBuilder, BatchedEqualsSingle) {
  Encoders& e = encoders();
  MemoryBuilder builder(e.enc_p, e.enc_c, e.vocabs, toy_config(Variant::fft_lpf, 4).memory);
  std::vector<SequencePair> inputs;
  for (int i = 0; i < 40; ++i) inputs.push_back({repur::testing::toy_proteins()[i % 8], repur::testing::toy_compounds()[i % 9]});
  const auto many = builder.build_many(inputs);
  for (std::size_t i = 0; i < inputs.size(); i += 7) {
    const Memory one = builder.build(inputs[i].protein_seq, inputs[i].compound_smiles);
    EXPECT_LT((many[i].values - one.values).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Pretrain, LossStartsNearLogVocabAndDecreases) {
  const Vocabs v = repur::testing::fixed_vocabs();
  TrainConfig cfg = toy_config(Variant::sum_only);
  cfg.epochs = 30;
  TrainLog log;
  pretrain_direction(toy_pairs(), PretrainDirection::p2c, v, cfg, &log);
  ASSERT_EQ(log.epoch_loss.size(), 30u);
  EXPECT_NEAR(log.step_loss.front(), std::log(static_cast<double>(v.compound.size())), 0.5);
  EXPECT_LT(log.epoch_loss.back(), 0.5 * log.epoch_loss.front());
}

TEST(Pretrain, DeterministicCheckpoint) {
  repur::testing::TempDir a("pre"), b("pre");
  const Vocabs v = repur::testing::fixed_vocabs();
  TrainConfig cfg = toy_config(Variant::sum_only);
  cfg.epochs = 2;
  cfg.checkpoint_dir = a.path();
  pretrain_direction(toy_pairs(), PretrainDirection::c2p, v, cfg);
  cfg.checkpoint_dir = b.path();
  pretrain_direction(toy_pairs(), PretrainDirection::c2p, v, cfg);
  EXPECT_EQ(file_hash(a / "pretrain_c2p.ckpt"), file_hash(b / "pretrain_c2p.ckpt"));
}

TEST(Pretrain, EmptyDatasetThrows) {
  const Vocabs v = repur::testing::fixed_vocabs();
  EXPECT_THROW(pretrain_direction({}, PretrainDirection::p2c, v, toy_config(Variant::sum_only)),
               std::invalid_argument);
}

TEST(Repurformer, EncodersFrozen) {
  Encoders& e = encoders();
  const auto hp = e.enc_p.parameter_hash(), hc = e.enc_c.parameter_hash();
  TrainConfig cfg = toy_config(Variant::fft_lpf, 3);
  cfg.epochs = 3;
  const auto triples = toy_triples();
  train_repurformer(triples, e.enc_p, e.enc_c, e.vocabs, cfg);
  EXPECT_EQ(e.enc_p.parameter_hash(), hp);
  EXPECT_EQ(e.enc_c.parameter_hash(), hc);
  for (const Tensor& p : e.enc_p.parameters()) EXPECT_FALSE(p.has_grad());
}

TEST(Repurformer, SumOnlyOverfitsSixTriples) {
  Encoders& e = encoders();
  TrainConfig cfg = toy_config(Variant::sum_only);
  cfg.epochs = 300;
  const auto triples = toy_triples(6);
  const RepurformerModel model = train_repurformer(triples, e.enc_p, e.enc_c, e.vocabs, cfg);
  EXPECT_GE(repurformer_token_accuracy(model, triples, e.enc_p, e.enc_c, e.vocabs), 0.95);

  // Memorization: greedy decoding reproduces each training target.
  for (const auto& t : triples) {
    const auto r = generate(model, e.enc_p, e.enc_c, e.vocabs, t.protein_seq, t.anchor_smiles, {});
    EXPECT_EQ(r.smiles, t.positive_smiles);
    EXPECT_FALSE(r.unk_present);
    EXPECT_FALSE(r.truncated);
  }

  // Capping the length before EOS truncates and flags.
  const auto& t = triples[1];
  const auto r = generate(model, e.enc_p, e.enc_c, e.vocabs, t.protein_seq, t.anchor_smiles, {.max_len = 3});
  EXPECT_TRUE(r.truncated);
  EXPECT_EQ(r.smiles, t.positive_smiles.substr(0, 3));
}

TEST(Repurformer, StageThreeDeterministic) {
  Encoders& e = encoders();
  TrainConfig cfg = toy_config(Variant::fft_lpf, 2);
  cfg.epochs = 3;
  const auto triples = toy_triples();
  TrainLog a, b;
  const auto m1 = train_repurformer(triples, e.enc_p, e.enc_c, e.vocabs, cfg, &a);
  const auto m2 = train_repurformer(triples, e.enc_p, e.enc_c, e.vocabs, cfg, &b);
  EXPECT_EQ(a.step_loss, b.step_loss);
  EXPECT_EQ(m1.decoder.parameter_hash(), m2.decoder.parameter_hash());
}

TEST(Repurformer, InconsistentSettingsRejected) {
  Encoders& e = encoders();
  TrainConfig cfg = toy_config(Variant::sum_only, 4);
  const auto triples = toy_triples();
  EXPECT_THROW(train_repurformer(triples, e.enc_p, e.enc_c, e.vocabs, cfg), std::invalid_argument);
  cfg = toy_config(Variant::fft_lpf);
  EXPECT_THROW(train_repurformer(triples, e.enc_p, e.enc_c, e.vocabs, cfg), std::invalid_argument);
}

TEST(Repurformer, SaveLoad) {
  repur::testing::TempDir dir("rf");
  Encoders& e = encoders();
  TrainConfig cfg = toy_config(Variant::fft_lpf, 4);
  cfg.epochs = 1;
  cfg.checkpoint_dir = dir.path();
  const auto triples = toy_triples();
  const auto model = train_repurformer(triples, e.enc_p, e.enc_c, e.vocabs, cfg);
  const auto back = RepurformerModel::load(dir / "repurformer.ckpt");
  EXPECT_EQ(back.decoder.parameter_hash(), model.decoder.parameter_hash());
  EXPECT_EQ(back.settings.to_json(), model.settings.to_json());
}

TEST(Generate, GreedyRepeatableSamplingSeeded) {
  Encoders& e = encoders();
  TrainConfig cfg = toy_config(Variant::fft_lpf, 4);
  cfg.epochs = 2;
  const auto triples = toy_triples();
  const auto model = train_repurformer(triples, e.enc_p, e.enc_c, e.vocabs, cfg);
  const auto& t = triples.front();
  const auto g1 = generate(model, e.enc_p, e.enc_c, e.vocabs, t.protein_seq, t.anchor_smiles, {});
  const auto g2 = generate(model, e.enc_p, e.enc_c, e.vocabs, t.protein_seq, t.anchor_smiles, {});
  EXPECT_EQ(g1.smiles, g2.smiles);
  GenerationConfig s{.strategy = Strategy::sample, .temperature = 1.0, .max_len = 10, .seed = 9};
  const auto s1 = generate(model, e.enc_p, e.enc_c, e.vocabs, t.protein_seq, t.anchor_smiles, s);
  const auto s2 = generate(model, e.enc_p, e.enc_c, e.vocabs, t.protein_seq, t.anchor_smiles, s);
  EXPECT_EQ(s1.smiles, s2.smiles);
  EXPECT_LE(s1.smiles.size(), 10u);
}

TEST(Enums, RoundTrip) {
  EXPECT_EQ(direction_from_string(to_string(PretrainDirection::c2p)), PretrainDirection::c2p);
  EXPECT_EQ(variant_from_string("sum_only"), Variant::sum_only);
  EXPECT_THROW(variant_from_string("fft"), std::invalid_argument);
}
