#include "repur/pcgraph.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

namespace repur {

InteractionGraph InteractionGraph::build(std::span<const InteractionRecord> records) {
  InteractionGraph g;
  std::set<std::string> proteins, compounds;
  for (const auto& r : records) {
    proteins.insert(r.protein_id);
    compounds.insert(r.compound_id);
  }
  g.proteins_.assign(proteins.begin(), proteins.end());
  g.compounds_.assign(compounds.begin(), compounds.end());
  for (std::size_t i = 0; i < g.proteins_.size(); ++i) g.protein_index_[g.proteins_[i]] = i;
  for (std::size_t j = 0; j < g.compounds_.size(); ++j) g.compound_index_[g.compounds_[j]] = j;

  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& r : records) edges.emplace(g.protein_index_[r.protein_id], g.compound_index_[r.compound_id]);
  g.compounds_of_.resize(g.proteins_.size());
  g.proteins_of_.resize(g.compounds_.size());
  for (auto [p, c] : edges) {  // set order keeps both lists sorted
    g.compounds_of_[p].push_back(c);
    g.proteins_of_[c].push_back(p);
  }
  g.edges_ = edges.size();
  return g;
}

std::optional<std::size_t> InteractionGraph::protein_index(const std::string& id) const {
  auto it = protein_index_.find(id);
  if (it == protein_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> InteractionGraph::compound_index(const std::string& id) const {
  auto it = compound_index_.find(id);
  if (it == compound_index_.end()) return std::nullopt;
  return it->second;
}

bool InteractionGraph::has_edge(std::size_t protein, std::size_t compound) const {
  const auto& list = compounds_of_.at(protein);
  return std::binary_search(list.begin(), list.end(), compound);
}

std::vector<TripleSample> mine_triples(const InteractionGraph& g, std::size_t max_per_pair, std::uint64_t seed) {
  std::vector<TripleSample> triples;
  constexpr std::size_t kNone = kUnlimited;
  std::vector<std::size_t> via_of(g.compound_count(), kNone);
  std::vector<std::size_t> candidates;

  for (std::size_t i = 0; i < g.protein_count(); ++i) {
    for (std::size_t j : g.compounds_of(i)) {
      candidates.clear();
      for (std::size_t k : g.proteins_of(j)) {
        for (std::size_t l : g.compounds_of(k)) {
          if (l == j) continue;
          if (via_of[l] == kNone) {
            via_of[l] = k;
            candidates.push_back(l);
          } else if (via_of[l] == i && k != i) {
            via_of[l] = k;
          }
        }
      }
      std::sort(candidates.begin(), candidates.end());
      if (candidates.size() > max_per_pair) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)};
        std::mt19937_64 rng(seq);
        std::vector<std::size_t> picked;
        std::sample(candidates.begin(), candidates.end(), std::back_inserter(picked),
                    static_cast<std::ptrdiff_t>(max_per_pair), rng);
        for (std::size_t l : candidates)
          if (!std::binary_search(picked.begin(), picked.end(), l)) via_of[l] = kNone;
        candidates.swap(picked);
      }
      for (std::size_t l : candidates) {
        triples.push_back({g.proteins()[i], g.compounds()[j], g.compounds()[l], g.proteins()[via_of[l]]});
        via_of[l] = kNone;
      }
    }
  }
  return triples;
}

TripleStats triple_stats(std::span<const TripleSample> triples) {
  TripleStats stats;
  stats.total = triples.size();
  for (const auto& t : triples) {
    ++stats.per_protein[t.protein];
    ++stats.per_anchor[t.anchor];
  }
  return stats;
}

void write_triples(const std::filesystem::path& path, std::span<const TripleSample> triples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write triples file " + path.string());
  out << "protein_id\tanchor_id\tpositive_id\tvia_id\n";
  for (const auto& t : triples) out << t.protein << '\t' << t.anchor << '\t' << t.positive << '\t' << t.via << '\n';
}

std::vector<TripleSample> load_triples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open triples file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("protein_id\tanchor_id\tpositive_id", 0) != 0) {
    throw DataError("triples file " + path.string() + " lacks the expected header", 1);
  }
  std::vector<TripleSample> triples;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    TripleSample t;
    std::size_t a = line.find('\t');
    std::size_t b = a == std::string::npos ? a : line.find('\t', a + 1);
    std::size_t c = b == std::string::npos ? b : line.find('\t', b + 1);
    if (c == std::string::npos || line.find('\t', c + 1) != std::string::npos) {
      throw DataError("triples line " + std::to_string(line_no) + " does not have 4 columns", line_no);
    }
    t.protein = line.substr(0, a);
    t.anchor = line.substr(a + 1, b - a - 1);
    t.positive = line.substr(b + 1, c - b - 1);
    t.via = line.substr(c + 1);
    triples.push_back(std::move(t));
  }
  return triples;
}

}  // namespace repur
