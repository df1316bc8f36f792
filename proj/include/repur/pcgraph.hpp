#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "repur/dataio.hpp"

namespace repur {

/// Bipartite protein/compound graph. Node indices follow the sorted order of
/// the ids; adjacency lists are sorted and duplicate-free.
class InteractionGraph {
 public:
  static InteractionGraph build(std::span<const InteractionRecord> records);

  std::size_t protein_count() const { return proteins_.size(); }
  std::size_t compound_count() const { return compounds_.size(); }
  std::size_t edge_count() const { return edges_; }

  const std::vector<std::string>& proteins() const { return proteins_; }
  const std::vector<std::string>& compounds() const { return compounds_; }
  std::optional<std::size_t> protein_index(const std::string& id) const;
  std::optional<std::size_t> compound_index(const std::string& id) const;

  const std::vector<std::size_t>& compounds_of(std::size_t protein) const { return compounds_of_[protein]; }
  const std::vector<std::size_t>& proteins_of(std::size_t compound) const { return proteins_of_[compound]; }
  bool has_edge(std::size_t protein, std::size_t compound) const;

 private:
  std::vector<std::string> proteins_;
  std::vector<std::string> compounds_;
  std::unordered_map<std::string, std::size_t> protein_index_;
  std::unordered_map<std::string, std::size_t> compound_index_;
  std::vector<std::vector<std::size_t>> compounds_of_;
  std::vector<std::vector<std::size_t>> proteins_of_;
  std::size_t edges_ = 0;
};

inline InteractionGraph build_graph(std::span<const InteractionRecord> records) {
  return InteractionGraph::build(records);
}

/// Target protein, anchor it binds, and a positive reached through a protein
/// (via) that also binds the anchor.
struct TripleSample {
  std::string protein;
  std::string anchor;
  std::string positive;
  std::string via;

  /// The positive is reachable only through the target protein itself.
  bool same_protein() const { return via == protein; }

  friend auto operator<=>(const TripleSample&, const TripleSample&) = default;
};

inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

/// Enumerates (protein, anchor) pairs in index order; for each, collects the
/// 3-hop positives (one triple per positive, via = first bridging protein
/// other than the target when one exists) and keeps at most max_per_pair of
/// them, sampled without replacement under the seed.
std::vector<TripleSample> mine_triples(const InteractionGraph& g, std::size_t max_per_pair = 8,
                                       std::uint64_t seed = 0);

struct TripleStats {
  std::size_t total = 0;
  std::map<std::string, std::size_t> per_protein;
  std::map<std::string, std::size_t> per_anchor;
};

TripleStats triple_stats(std::span<const TripleSample> triples);

void write_triples(const std::filesystem::path& path, std::span<const TripleSample> triples);
std::vector<TripleSample> load_triples(const std::filesystem::path& path);

}  // namespace repur
