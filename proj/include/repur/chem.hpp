#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace repur::chem {

enum class BondOrder : std::uint8_t { single = 1, double_ = 2, triple = 3, aromatic = 4 };

struct Atom {
  std::string element;  // capitalized symbol, e.g. "C", "Cl"
  int charge = 0;
  bool aromatic = false;
  bool bracket = false;
  int explicit_h = 0;  // bracket atoms only
};

struct Bond {
  std::size_t a = 0;
  std::size_t b = 0;
  BondOrder order = BondOrder::single;
};

struct Molecule {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::string source;
};

enum class SmilesErrorKind {
  empty,
  unmatched_paren,
  unpaired_ring,
  unknown_symbol,
  malformed_bracket,
  dangling_bond,
  duplicate_bond,
};

std::string_view to_string(SmilesErrorKind kind);

class SmilesError : public std::runtime_error {
 public:
  SmilesError(SmilesErrorKind kind, std::size_t position, const std::string& what)
      : std::runtime_error(what), kind_(kind), position_(position) {}
  SmilesErrorKind kind() const { return kind_; }
  std::size_t position() const { return position_; }

 private:
  SmilesErrorKind kind_;
  std::size_t position_;
};

/// Parses the supported SMILES subset: organic-subset and bracket atoms,
/// bonds - = # :, branches, ring closures 0-9 and %nn, aromatic lowercase
/// atoms and '.' separators. Stereo marks (/ \ @) are accepted and dropped.
/// Throws SmilesError.
Molecule parse_smiles(std::string_view smiles);

struct Validity {
  bool valid = false;
  std::string reason;  // empty when valid
};

/// Grammar plus a fixed max-valence table (C4 N3 O2 halogens1 S6 P5 B3).
Validity check_validity(std::string_view smiles);

/// Sum of valence consumed by bonds (with the aromatic pi contribution) and
/// explicit hydrogens of one atom.
int used_valence(const Molecule& m, std::size_t atom);
/// Hydrogens implied for an organic-subset atom; 0 for bracket atoms.
int implicit_hydrogens(const Molecule& m, std::size_t atom);

/// Average molecular weight in daltons including implicit hydrogens.
/// Throws std::domain_error for elements without a tabulated weight.
double molecular_weight(const Molecule& m);

/// Hashed linear-path fingerprint.
class Fingerprint {
 public:
  explicit Fingerprint(std::size_t size = 1024);

  void set(std::size_t bit);
  bool test(std::size_t bit) const;
  std::size_t size() const { return size_; }
  std::size_t count() const;
  std::size_t intersection_count(const Fingerprint& other) const;
  std::size_t union_count(const Fingerprint& other) const;

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;

 private:
  std::size_t size_;
  std::vector<std::uint64_t> words_;
};

struct FingerprintOptions {
  std::size_t size = 1024;
  std::size_t max_path_bonds = 5;
};

/// Every simple path of 0..max_path_bonds bonds, written as atom/bond labels,
/// canonicalized as min(forward, reverse) and hashed into the bit set.
Fingerprint fingerprint(const Molecule& m, const FingerprintOptions& options = {});

/// Canonical path labels that fingerprint() hashes; exposed for testing.
std::vector<std::string> path_labels(const Molecule& m, std::size_t max_path_bonds = 5);

/// 1 - |A n B| / |A u B|, 0 when both are empty. Throws on size mismatch.
double tanimoto_distance(const Fingerprint& a, const Fingerprint& b);

std::size_t levenshtein(std::string_view a, std::string_view b);

}  // namespace repur::chem
