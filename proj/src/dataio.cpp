#include "repur/dataio.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "repur/chem.hpp"

namespace repur {

namespace {

constexpr std::array<std::string_view, 4> kColumns = {"protein_id", "compound_id", "protein_seq",
                                                       "compound_smiles"};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

// Valence-tracking builder behind random_smiles.
class SmilesBuilder {
 public:
  explicit SmilesBuilder(std::mt19937_64& rng) : rng_(rng) {}

  std::optional<std::string> build(int main_atoms) {
    out_.clear();
    free_.clear();
    open_digits_.clear();
    if (!chain(-1, main_atoms, 0)) return std::nullopt;
    if (!open_digits_.empty()) return std::nullopt;
    return out_;
  }

 private:
  struct Element {
    std::string_view symbol;
    int valence;
  };

  bool coin(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  Element pick_element(bool last) {
    static constexpr Element kInterior[] = {{"C", 4}, {"C", 4}, {"C", 4}, {"C", 4}, {"C", 4},
                                            {"C", 4}, {"N", 3}, {"N", 3}, {"O", 2}, {"S", 2}};
    static constexpr Element kTerminal[] = {{"F", 1}, {"Cl", 1}, {"Br", 1}};
    if (last && coin(0.2)) return kTerminal[uniform(0, 2)];
    return kInterior[uniform(0, 9)];
  }

  int place_atom(int prev, const Element& e, bool last) {
    int order = 1;
    if (prev >= 0) {
      const int room_needed_after = last ? 0 : 1;
      if (coin(0.15) && free_[prev] >= 2 && e.valence - 2 >= room_needed_after) order = 2;
      if (coin(0.03) && free_[prev] >= 3 && e.valence - 3 >= room_needed_after) order = 3;
      out_ += order == 2 ? "=" : order == 3 ? "#" : "";
      free_[prev] -= order;
    }
    out_ += e.symbol;
    free_.push_back(e.valence - (prev >= 0 ? order : 0));
    return static_cast<int>(free_.size()) - 1;
  }

  int free_digit() const {
    for (int d = 1; d <= 9; ++d)
      if (!open_digits_.contains(d)) return d;
    return -1;
  }

  // Appends c1ccccc1 bonded to prev; returns the last ring atom (one free
  // valence left).
  int place_benzene(int prev) {
    const int digit = free_digit();
    if (digit < 0) return -1;
    if (prev >= 0) free_[prev] -= 1;
    const std::string d = std::to_string(digit);
    out_ += "c" + d + "ccccc" + d;
    // First ring atom: two aromatic bonds + pi + the chain bond (if any).
    free_.push_back(prev >= 0 ? 0 : 1);
    for (int i = 0; i < 4; ++i) free_.push_back(1);
    free_.push_back(1);
    return static_cast<int>(free_.size()) - 1;
  }

  bool chain(int prev, int n_atoms, int depth) {
    struct Ring {
      int digit;
      int opener;
      int close_after;
    };
    std::optional<Ring> ring;
    int steps_since_open = 0;
    for (int k = 0; k < n_atoms; ++k) {
      const bool last = k == n_atoms - 1;
      if (prev >= 0 && free_[prev] < 1) return false;
      int cur;
      if (!ring && !last && coin(0.08) && free_digit() > 0) {
        cur = place_benzene(prev);
        if (cur < 0) return false;
      } else {
        cur = place_atom(prev, pick_element(last), last);
      }
      const int reserve = last ? 0 : 1;

      if (ring) {
        ++steps_since_open;
        if (steps_since_open >= ring->close_after) {
          if (free_[cur] - reserve < 1) return false;
          out_ += std::to_string(ring->digit);
          free_[cur] -= 1;
          open_digits_.erase(ring->digit);
          ring.reset();
        } else if (last) {
          return false;
        }
      } else if (depth == 0 && !last && n_atoms - k > 3 && coin(0.12) && free_[cur] - reserve >= 1 &&
                 free_digit() > 0) {
        const int digit = free_digit();
        out_ += std::to_string(digit);
        free_[cur] -= 1;
        open_digits_.insert(digit);
        ring = Ring{digit, cur, uniform(2, std::min(5, n_atoms - k - 1))};
        steps_since_open = 0;
      }

      if (depth < 2 && free_[cur] - reserve >= 1 && coin(0.2)) {
        out_ += "(";
        if (!chain(cur, uniform(1, 3), depth + 1)) return false;
        out_ += ")";
      }
      prev = cur;
    }
    return !ring;
  }

  std::mt19937_64& rng_;
  std::string out_;
  std::vector<int> free_;
  std::set<int> open_digits_;
};

}  // namespace

void DatasetConfig::validate() const {
  if (min_degree == 0 || min_degree > max_degree) {
    throw std::invalid_argument("degree bounds must satisfy 0 < min_degree <= max_degree");
  }
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
    throw std::invalid_argument("split ratio must lie strictly between 0 and 1");
  }
}

LoadResult load_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open interaction table " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("interaction table " + path.string() + " is empty", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_tabs(line);
  std::array<std::size_t, 4> column{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), kColumns[c]);
    if (it == header.end()) throw DataError("header lacks column " + std::string(kColumns[c]), 1);
    column[c] = static_cast<std::size_t>(it - header.begin());
  }

  LoadResult result;
  std::set<std::pair<std::string, std::string>> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                          " columns, found " + std::to_string(fields.size()),
                      line_no);
    }
    InteractionRecord r{fields[column[0]], fields[column[1]], fields[column[2]], fields[column[3]]};
    if (r.protein_id.empty() || r.compound_id.empty() || r.protein_seq.empty() || r.compound_smiles.empty()) {
      ++result.dropped_empty;
      continue;
    }
    if (!seen.emplace(r.protein_id, r.compound_id).second) {
      ++result.duplicates;
      continue;
    }
    result.records.push_back(std::move(r));
  }
  return result;
}

void write_records(const std::filesystem::path& path, std::span<const InteractionRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write interaction table " + path.string());
  out << "protein_id\tcompound_id\tprotein_seq\tcompound_smiles\n";
  for (const auto& r : records) {
    out << r.protein_id << '\t' << r.compound_id << '\t' << r.protein_seq << '\t' << r.compound_smiles << '\n';
  }
}

std::vector<InteractionRecord> filter_by_length(std::span<const InteractionRecord> records,
                                                const DatasetConfig& cfg) {
  std::vector<InteractionRecord> kept;
  for (const auto& r : records) {
    if (r.protein_seq.empty() || r.compound_smiles.empty()) continue;
    if (r.protein_seq.size() > cfg.max_protein_len || r.compound_smiles.size() > cfg.max_compound_len) continue;
    kept.push_back(r);
  }
  return kept;
}

std::vector<InteractionRecord> filter_by_degree(std::span<const InteractionRecord> records,
                                                const DatasetConfig& cfg) {
  std::map<std::string, std::set<std::string>> proteins_of;
  for (const auto& r : records) proteins_of[r.compound_id].insert(r.protein_id);
  std::vector<InteractionRecord> kept;
  for (const auto& r : records) {
    const std::size_t degree = proteins_of[r.compound_id].size();
    if (degree >= cfg.min_degree && degree <= cfg.max_degree) kept.push_back(r);
  }
  return kept;
}

DatasetSplit split_no_protein_overlap(std::span<const InteractionRecord> records, const DatasetConfig& cfg) {
  cfg.validate();
  std::set<std::string> distinct;
  for (const auto& r : records) distinct.insert(r.protein_id);
  if (distinct.size() < 2) {
    throw std::invalid_argument("a protein-disjoint split needs at least 2 distinct proteins, found " +
                                std::to_string(distinct.size()));
  }
  std::vector<std::string> proteins(distinct.begin(), distinct.end());
  std::mt19937_64 rng(cfg.seed);
  std::shuffle(proteins.begin(), proteins.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(cfg.split_ratio * static_cast<double>(proteins.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, proteins.size() - 1);
  const std::set<std::string> train_proteins(proteins.begin(), proteins.begin() + static_cast<std::ptrdiff_t>(n_train));

  DatasetSplit split;
  for (const auto& r : records) (train_proteins.contains(r.protein_id) ? split.train : split.test).push_back(r);
  return split;
}

std::string random_smiles(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
  if (min_len > max_len || max_len < 1) throw std::invalid_argument("invalid SMILES length range");
  SmilesBuilder builder(rng);
  std::uniform_int_distribution<int> atoms(3, static_cast<int>(std::max<std::size_t>(3, max_len * 2 / 3)));
  for (;;) {
    auto s = builder.build(atoms(rng));
    if (!s || s->size() < min_len || s->size() > max_len) continue;
    if (chem::check_validity(*s).valid) return *s;
  }
}

std::string random_protein(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
  static constexpr std::string_view kResidues = "ACDEFGHIKLMNPQRSTVWY";
  std::uniform_int_distribution<std::size_t> length(min_len, max_len);
  std::uniform_int_distribution<std::size_t> residue(0, kResidues.size() - 1);
  std::string s(length(rng), 'A');
  for (char& c : s) c = kResidues[residue(rng)];
  return s;
}

std::vector<InteractionRecord> generate_synthetic(std::size_t n_proteins, std::size_t n_compounds, double density,
                                                  std::uint64_t seed) {
  if (n_proteins == 0 || n_compounds == 0) throw std::invalid_argument("synthetic dataset needs at least one protein and one compound");
  if (!(density > 0.0 && density <= 1.0)) throw std::invalid_argument("density must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  auto id = [](char prefix, std::size_t i) {
    std::ostringstream os;
    os << prefix << '-' << std::setw(5) << std::setfill('0') << i;
    return os.str();
  };
  std::vector<std::string> proteins(n_proteins), compounds(n_compounds);
  for (auto& p : proteins) p = random_protein(rng);
  for (auto& c : compounds) c = random_smiles(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<InteractionRecord> records;
  for (std::size_t i = 0; i < n_proteins; ++i) {
    for (std::size_t j = 0; j < n_compounds; ++j) {
      if (unit(rng) < density) records.push_back({id('P', i), id('C', j), proteins[i], compounds[j]});
    }
  }
  return records;
}

}  // namespace repur
