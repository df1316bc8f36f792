#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "repur/chem.hpp"
#include "repur/dataio.hpp"
#include "support.hpp"

using namespace repur;

namespace {

std::vector<InteractionRecord> random_table(std::mt19937_64& rng, std::size_t rows, int proteins, int compounds) {
  std::uniform_int_distribution<int> p(0, proteins - 1), c(0, compounds - 1);
  std::vector<InteractionRecord> out;
  std::set<std::pair<int, int>> seen;
  while (out.size() < rows && seen.size() < static_cast<std::size_t>(proteins * compounds)) {
    const int i = p(rng), j = c(rng);
    if (!seen.insert({i, j}).second) continue;
    out.push_back({"P" + std::to_string(i), "C" + std::to_string(j), "MKV", "CCO"});
  }
  return out;
}

}  // namespace

TEST(Records, WriteLoadRoundTrip) {
  repur::testing::TempDir dir("records");
  std::mt19937_64 rng(1);
  auto records = random_table(rng, 40, 6, 12);
  write_records(dir / "a.tsv", records);
  const LoadResult loaded = load_records(dir / "a.tsv");
  EXPECT_EQ(loaded.records, records);
  write_records(dir / "b.tsv", loaded.records);
  EXPECT_EQ(repur::testing::read_file(dir / "a.tsv"), repur::testing::read_file(dir / "b.tsv"));
}

TEST(Records, HeaderMappingAndExtraColumns) {
  repur::testing::TempDir dir("records");
  repur::testing::write_file(dir / "in.tsv",
                      "compound_smiles\taffinity\tprotein_id\tcompound_id\tprotein_seq\n"
                      "CCO\t5.1\tP1\tC1\tMKV\n"
                      "CCN\t\tP1\tC2\tMKV\n");
  const LoadResult r = load_records(dir / "in.tsv");
  ASSERT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.records[0].protein_id, "P1");
  EXPECT_EQ(r.records[0].compound_id, "C1");
  EXPECT_EQ(r.records[0].protein_seq, "MKV");
  EXPECT_EQ(r.records[0].compound_smiles, "CCO");
}

TEST(Records, DuplicatesCollapsedAndEmptyDropped) {
  repur::testing::TempDir dir("records");
  repur::testing::write_file(dir / "in.tsv",
                      "protein_id\tcompound_id\tprotein_seq\tcompound_smiles\n"
                      "P1\tC1\tMKV\tCCO\n"
                      "P1\tC1\tMKV\tCCO\n"
                      "P2\tC1\t\tCCO\n"
                      "P2\tC2\tMK\tCN\n");
  const LoadResult r = load_records(dir / "in.tsv");
  EXPECT_EQ(r.records.size(), 2u);
  EXPECT_EQ(r.duplicates, 1u);
  EXPECT_EQ(r.dropped_empty, 1u);
}

TEST(Records, MalformedRowReportsLine) {
  repur::testing::TempDir dir("records");
  repur::testing::write_file(dir / "in.tsv",
                      "protein_id\tcompound_id\tprotein_seq\tcompound_smiles\n"
                      "P1\tC1\tMKV\tCCO\n"
                      "P1\tC2\tMKV\n");
  try {
    load_records(dir / "in.tsv");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Records, MissingColumnIsDataError) {
  repur::testing::TempDir dir("records");
  repur::testing::write_file(dir / "in.tsv", "protein_id\tcompound_id\tprotein_seq\nP\tC\tM\n");
  EXPECT_THROW(load_records(dir / "in.tsv"), DataError);
}

TEST(Filters, LengthBounds) {
  DatasetConfig cfg;
  cfg.max_protein_len = 3;
  cfg.max_compound_len = 2;
  const std::vector<InteractionRecord> in = {
      {"P1", "C1", "MKV", "CC"}, {"P2", "C1", "MKVL", "CC"}, {"P1", "C2", "MKV", "CCO"}};
  const auto out = filter_by_length(in, cfg);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].protein_id, "P1");
  EXPECT_EQ(out[0].compound_id, "C1");
}

TEST(Filters, DegreeMatchesBruteForce) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const auto table = random_table(rng, 1 + rng() % 300, 30, 25);
    DatasetConfig cfg;
    cfg.min_degree = 1 + rng() % 6;
    cfg.max_degree = cfg.min_degree + rng() % 10;
    std::vector<InteractionRecord> expected;
    for (const auto& r : table) {
      std::set<std::string> proteins;
      for (const auto& s : table) {
        if (s.compound_id == r.compound_id) proteins.insert(s.protein_id);
      }
      if (proteins.size() >= cfg.min_degree && proteins.size() <= cfg.max_degree) expected.push_back(r);
    }
    EXPECT_EQ(filter_by_degree(table, cfg), expected);
  }
}

TEST(Split, NoProteinOverlapPerCompound) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto table = random_table(rng, 20 + rng() % 200, 2 + static_cast<int>(rng() % 20), 15);
    DatasetConfig cfg;
    cfg.seed = rng();
    const DatasetSplit split = split_no_protein_overlap(table, cfg);
    EXPECT_EQ(split.train.size() + split.test.size(), table.size());
    std::map<std::string, std::set<std::string>> train, test;
    for (const auto& r : split.train) train[r.compound_id].insert(r.protein_id);
    for (const auto& r : split.test) test[r.compound_id].insert(r.protein_id);
    for (const auto& [c, ps] : train) {
      for (const auto& p : ps) EXPECT_EQ(test[c].count(p), 0u);
    }
    std::set<std::string> train_p, test_p;
    for (const auto& r : split.train) train_p.insert(r.protein_id);
    for (const auto& r : split.test) test_p.insert(r.protein_id);
    EXPECT_FALSE(train_p.empty());
    EXPECT_FALSE(test_p.empty());
    for (const auto& p : train_p) EXPECT_EQ(test_p.count(p), 0u);
  }
}

TEST(Split, RatioAppliesToProteins) {
  std::vector<InteractionRecord> table;
  for (int p = 0; p < 10; ++p) table.push_back({"P" + std::to_string(p), "C", "M", "C"});
  DatasetConfig cfg;
  cfg.split_ratio = 0.8;
  const DatasetSplit split = split_no_protein_overlap(table, cfg);
  EXPECT_EQ(split.train.size(), 8u);
  EXPECT_EQ(split.test.size(), 2u);
}

TEST(Split, NeedsTwoProteins) {
  const std::vector<InteractionRecord> table = {{"P", "C1", "M", "C"}, {"P", "C2", "M", "N"}};
  EXPECT_THROW(split_no_protein_overlap(table, DatasetConfig{}), std::invalid_argument);
}

TEST(Synthetic, CompleteBipartite) {
  const auto records = generate_synthetic(3, 4, 1.0, 9);
  EXPECT_EQ(records.size(), 12u);
}

TEST(Synthetic, Deterministic) {
  repur::testing::TempDir dir("synthetic");
  write_records(dir / "a.tsv", generate_synthetic(6, 10, 0.4, 17));
  write_records(dir / "b.tsv", generate_synthetic(6, 10, 0.4, 17));
  EXPECT_EQ(repur::testing::read_file(dir / "a.tsv"), repur::testing::read_file(dir / "b.tsv"));
}

TEST(Synthetic, Errors) {
  EXPECT_THROW(generate_synthetic(0, 4, 0.5, 1), std::invalid_argument);
  EXPECT_THROW(generate_synthetic(3, 0, 0.5, 1), std::invalid_argument);
  EXPECT_THROW(generate_synthetic(3, 4, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(generate_synthetic(3, 4, 1.5, 1), std::invalid_argument);
}

TEST(Synthetic, GeneratedSmilesAreValid) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 1000; ++i) {
    const std::string s = random_smiles(rng);
    ASSERT_GE(s.size(), 10u);
    ASSERT_LE(s.size(), 40u);
    ASSERT_TRUE(chem::check_validity(s).valid) << s << ": " << chem::check_validity(s).reason;
  }
}

TEST(Synthetic, ProteinsUseStandardResidues) {
  std::mt19937_64 rng(4);
  const std::string residues = "ACDEFGHIKLMNPQRSTVWY";
  for (int i = 0; i < 200; ++i) {
    const std::string p = random_protein(rng);
    ASSERT_GE(p.size(), 20u);
    ASSERT_LE(p.size(), 60u);
    for (char c : p) ASSERT_NE(residues.find(c), std::string::npos);
  }
}

TEST(DatasetConfig, Validation) {
  DatasetConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.min_degree = 200;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = DatasetConfig{};
  cfg.split_ratio = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
