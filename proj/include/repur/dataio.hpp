#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace repur {

struct InteractionRecord {
  std::string protein_id;
  std::string compound_id;
  std::string protein_seq;
  std::string compound_smiles;

  friend auto operator<=>(const InteractionRecord&, const InteractionRecord&) = default;
};

struct DatasetConfig {
  std::size_t min_degree = 10;
  std::size_t max_degree = 100;
  std::size_t max_protein_len = 62;   // T_p - 2 with T_p = 64
  std::size_t max_compound_len = 46;  // T_c - 2 with T_c = 48
  double split_ratio = 0.8;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
};

/// Malformed input table; line is 1-based.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct LoadResult {
  std::vector<InteractionRecord> records;
  std::size_t duplicates = 0;
  std::size_t dropped_empty = 0;
};

/// Reads a tab-separated table whose header names protein_id, compound_id,
/// protein_seq and compound_smiles (other columns are ignored). Rows repeating
/// an id pair are collapsed onto the first occurrence.
LoadResult load_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, std::span<const InteractionRecord> records);

/// Drops records whose sequences exceed the configured lengths or are empty.
std::vector<InteractionRecord> filter_by_length(std::span<const InteractionRecord> records,
                                                const DatasetConfig& cfg);

/// Keeps records of compounds whose distinct-protein degree, counted once on
/// the input, lies in [min_degree, max_degree].
std::vector<InteractionRecord> filter_by_degree(std::span<const InteractionRecord> records,
                                                const DatasetConfig& cfg);

struct DatasetSplit {
  std::vector<InteractionRecord> train;
  std::vector<InteractionRecord> test;
};

/// Partitions proteins (seeded shuffle, round(ratio * n) to train, clamped so
/// both sides are non-empty); each record follows its protein.
DatasetSplit split_no_protein_overlap(std::span<const InteractionRecord> records,
                                      const DatasetConfig& cfg);

/// Random SMILES accepted by chem::check_validity, length in [min_len, max_len].
std::string random_smiles(std::mt19937_64& rng, std::size_t min_len = 10, std::size_t max_len = 40);

/// Random amino-acid string over the 20 standard residues.
std::string random_protein(std::mt19937_64& rng, std::size_t min_len = 20, std::size_t max_len = 60);

/// Bipartite table where every protein/compound pair is present with
/// probability density.
std::vector<InteractionRecord> generate_synthetic(std::size_t n_proteins, std::size_t n_compounds,
                                                  double density, std::uint64_t seed);

}  // namespace repur
