#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <tuple>

#include "repur/pcgraph.hpp"
#include "support.hpp"

using namespace repur;

namespace {

InteractionRecord edge(const std::string& p, const std::string& c) { return {p, c, "M", "C"}; }

struct RandomGraph {
  std::vector<InteractionRecord> records;
  std::vector<std::vector<bool>> e;  // dense incidence [protein][compound]
  int proteins = 0;
  int compounds = 0;
};

std::string pid(int i) { return "P" + std::to_string(100 + i); }
std::string cid(int j) { return "C" + std::to_string(100 + j); }

RandomGraph random_graph(std::mt19937_64& rng, int max_nodes = 50) {
  RandomGraph g;
  std::uniform_int_distribution<int> split(1, max_nodes - 1);
  const int total = 2 + static_cast<int>(rng() % static_cast<unsigned>(max_nodes - 1));
  g.proteins = std::max(1, std::min(total - 1, split(rng) % total));
  g.compounds = total - g.proteins;
  const double density = std::uniform_real_distribution<double>(0.05, 0.5)(rng);
  g.e.assign(static_cast<std::size_t>(g.proteins), std::vector<bool>(static_cast<std::size_t>(g.compounds)));
  std::bernoulli_distribution keep(density);
  for (int i = 0; i < g.proteins; ++i) {
    for (int j = 0; j < g.compounds; ++j) {
      if (keep(rng)) {
        g.e[i][j] = true;
        g.records.push_back(edge(pid(i), cid(j)));
      }
    }
  }
  return g;
}

using Triple = std::tuple<std::string, std::string, std::string>;

std::set<Triple> brute_force(const RandomGraph& g) {
  std::set<Triple> out;
  for (int i = 0; i < g.proteins; ++i)
    for (int j = 0; j < g.compounds; ++j)
      for (int k = 0; k < g.proteins; ++k)
        for (int l = 0; l < g.compounds; ++l)
          if (g.e[i][j] && g.e[k][j] && g.e[k][l] && l != j) out.insert({pid(i), cid(j), cid(l)});
  return out;
}

}  // namespace

TEST(Graph, SingleRecord) {
  const std::vector<InteractionRecord> r = {edge("P", "C")};
  const auto g = build_graph(r);
  EXPECT_EQ(g.protein_count(), 1u);
  EXPECT_EQ(g.compound_count(), 1u);
  EXPECT_EQ(g.edge_count(), 1u);
}

TEST(Graph, ManyToManyTopology) {
  const std::vector<InteractionRecord> r = {edge("P1", "C1"), edge("P1", "C2"), edge("P2", "C2"),
                                            edge("P2", "C3"), edge("P3", "C3"), edge("P3", "C1")};
  const auto g = build_graph(r);
  const auto p1 = *g.protein_index("P1");
  const auto c3 = *g.compound_index("C3");
  EXPECT_EQ(g.compounds_of(p1).size(), 2u);
  EXPECT_FALSE(g.has_edge(p1, c3));
  EXPECT_EQ(g.proteins_of(c3).size(), 2u);
  EXPECT_FALSE(g.protein_index("P9").has_value());
}

TEST(Graph, AdjacencyMatchesIncidenceMatrix) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const RandomGraph rg = random_graph(rng);
    const auto g = build_graph(rg.records);
    std::size_t edges = 0;
    for (int i = 0; i < rg.proteins; ++i) {
      for (int j = 0; j < rg.compounds; ++j) {
        const auto pi = g.protein_index(pid(i));
        const auto cj = g.compound_index(cid(j));
        const bool present = pi && cj && g.has_edge(*pi, *cj);
        ASSERT_EQ(present, static_cast<bool>(rg.e[i][j]));
        edges += rg.e[i][j];
      }
    }
    EXPECT_EQ(g.edge_count(), edges);
    for (std::size_t c = 0; c < g.compound_count(); ++c) {
      for (std::size_t p : g.proteins_of(c)) {
        const auto& cs = g.compounds_of(p);
        ASSERT_TRUE(std::find(cs.begin(), cs.end(), c) != cs.end());
      }
    }
  }
}

TEST(Triples, RepurposingFlowPath) {
  const std::vector<InteractionRecord> r = {edge("P-45984", "C-16046126"), edge("P-via", "C-16046126"),
                                            edge("P-via", "C-5280445")};
  const auto triples = mine_triples(build_graph(r), kUnlimited);
  bool found = false;
  for (const auto& t : triples) {
    if (t.protein == "P-45984" && t.anchor == "C-16046126" && t.positive == "C-5280445") {
      found = true;
      EXPECT_EQ(t.via, "P-via");
      EXPECT_FALSE(t.same_protein());
    }
  }
  EXPECT_TRUE(found);
}

TEST(Triples, StarGraphHasNone) {
  const std::vector<InteractionRecord> r = {edge("P1", "C1"), edge("P2", "C2"), edge("P3", "C3")};
  EXPECT_TRUE(mine_triples(build_graph(r)).empty());
}

TEST(Triples, SameProteinFlagOnlyWithoutOtherBridge) {
  const std::vector<InteractionRecord> r = {edge("P1", "C1"), edge("P1", "C2")};
  const auto triples = mine_triples(build_graph(r), kUnlimited);
  ASSERT_EQ(triples.size(), 2u);
  for (const auto& t : triples) EXPECT_TRUE(t.same_protein());
}

TEST(Triples, MatchBruteForceEnumeration) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const RandomGraph rg = random_graph(rng);
    const auto g = build_graph(rg.records);
    const auto triples = mine_triples(g, kUnlimited, trial);
    std::set<Triple> got;
    for (const auto& t : triples) {
      ASSERT_TRUE(got.insert({t.protein, t.anchor, t.positive}).second) << "duplicate triple";
      const auto i = *g.protein_index(t.protein);
      const auto j = *g.compound_index(t.anchor);
      const auto k = *g.protein_index(t.via);
      const auto l = *g.compound_index(t.positive);
      ASSERT_TRUE(g.has_edge(i, j) && g.has_edge(k, j) && g.has_edge(k, l));
      ASSERT_NE(j, l);
      if (t.same_protein()) {
        for (std::size_t other : g.proteins_of(j)) {
          ASSERT_FALSE(other != i && g.has_edge(other, l)) << "a non-target bridge exists";
        }
      }
    }
    ASSERT_EQ(got, brute_force(rg));
  }
}

TEST(Triples, CapSamplesWithoutReplacement) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const RandomGraph rg = random_graph(rng);
    const auto g = build_graph(rg.records);
    const auto full = mine_triples(g, kUnlimited);
    const auto capped = mine_triples(g, 2, 99);
    std::map<std::pair<std::string, std::string>, std::size_t> full_count, capped_count;
    for (const auto& t : full) ++full_count[{t.protein, t.anchor}];
    std::set<TripleSample> full_set(full.begin(), full.end());
    for (const auto& t : capped) {
      ++capped_count[{t.protein, t.anchor}];
      ASSERT_TRUE(full_set.count(t));
    }
    for (const auto& [key, n] : full_count) ASSERT_EQ(capped_count[key], std::min<std::size_t>(n, 2));
  }
}

TEST(Triples, Deterministic) {
  std::mt19937_64 rng(6);
  const RandomGraph rg = random_graph(rng);
  const auto g = build_graph(rg.records);
  EXPECT_EQ(mine_triples(g, 3, 7), mine_triples(g, 3, 7));
}

TEST(Triples, WriteLoadRoundTrip) {
  repur::testing::TempDir dir("triples");
  std::mt19937_64 rng(12);
  const RandomGraph rg = random_graph(rng);
  const auto triples = mine_triples(build_graph(rg.records));
  write_triples(dir / "t.tsv", triples);
  EXPECT_EQ(load_triples(dir / "t.tsv"), triples);
  EXPECT_EQ(repur::testing::read_file(dir / "t.tsv").substr(0, 40), "protein_id\tanchor_id\tpositive_id\tvia_id\n");
}

TEST(TripleStats, Counts) {
  EXPECT_EQ(triple_stats({}).total, 0u);
  EXPECT_TRUE(triple_stats({}).per_protein.empty());
  const std::vector<TripleSample> t = {{"P", "A", "X", "V"}, {"P", "B", "Y", "V"}, {"P", "A", "Z", "V"}};
  const auto s = triple_stats(t);
  EXPECT_EQ(s.total, 3u);
  EXPECT_EQ(s.per_protein.at("P"), 3u);
  EXPECT_EQ(s.per_anchor.at("A"), 2u);
  EXPECT_EQ(s.per_anchor.at("B"), 1u);
}

TEST(TripleStats, MatchRecount) {
  std::mt19937_64 rng(13);
  const RandomGraph rg = random_graph(rng);
  const auto triples = mine_triples(build_graph(rg.records));
  std::map<std::string, std::size_t> per_p, per_a;
  for (const auto& t : triples) {
    per_p[t.protein]++;
    per_a[t.anchor]++;
  }
  const auto s = triple_stats(triples);
  EXPECT_EQ(s.per_protein, per_p);
  EXPECT_EQ(s.per_anchor, per_a);
}
