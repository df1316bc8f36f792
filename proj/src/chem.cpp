#include "repur/chem.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <map>
#include <set>

#include "repur/hash.hpp"

namespace repur::chem {

namespace {

struct ElementInfo {
  std::string_view symbol;
  double weight;  // 0 = recognized but untabulated
};

// Standard atomic weights (IUPAC abridged).
constexpr ElementInfo kElements[] = {
    {"H", 1.008},     {"He", 4.0026},   {"Li", 6.94},     {"Be", 9.0122},   {"B", 10.81},
    {"C", 12.011},    {"N", 14.007},    {"O", 15.999},    {"F", 18.998},    {"Ne", 20.180},
    {"Na", 22.990},   {"Mg", 24.305},   {"Al", 26.982},   {"Si", 28.085},   {"P", 30.974},
    {"S", 32.06},     {"Cl", 35.45},    {"Ar", 39.95},    {"K", 39.098},    {"Ca", 40.078},
    {"Ti", 47.867},   {"V", 50.942},    {"Cr", 51.996},   {"Mn", 54.938},   {"Fe", 55.845},
    {"Co", 58.933},   {"Ni", 58.693},   {"Cu", 63.546},   {"Zn", 65.38},    {"Ga", 69.723},
    {"Ge", 72.630},   {"As", 74.922},   {"Se", 78.971},   {"Br", 79.904},   {"Kr", 83.798},
    {"Rb", 85.468},   {"Sr", 87.62},    {"Ru", 101.07},   {"Rh", 102.91},   {"Pd", 106.42},
    {"Ag", 107.87},   {"Cd", 112.41},   {"Sn", 118.71},   {"Sb", 121.76},   {"Te", 127.60},
    {"I", 126.90},    {"Xe", 131.29},   {"Cs", 132.91},   {"Ba", 137.33},   {"Gd", 157.25},
    {"Pt", 195.08},   {"Au", 196.97},   {"Hg", 200.59},   {"Bi", 208.98},
    // Radioactive elements without a standard atomic weight.
    {"Tc", 0.0},      {"Pm", 0.0},      {"Po", 0.0},      {"At", 0.0},      {"Rn", 0.0},
    {"Fr", 0.0},      {"Ra", 0.0},
};

const ElementInfo* find_element(std::string_view symbol) {
  for (const auto& e : kElements)
    if (e.symbol == symbol) return &e;
  return nullptr;
}

// Max valence used by the validity check; elements absent here are unchecked.
std::optional<int> max_valence(std::string_view element) {
  static const std::map<std::string_view, int> table = {
      {"B", 3}, {"C", 4}, {"N", 3}, {"O", 2}, {"P", 5},  {"S", 6},
      {"F", 1}, {"Cl", 1}, {"Br", 1}, {"I", 1}};
  auto it = table.find(element);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

// Allowed valence states, ascending; implicit H fills up to the first state
// that is not exceeded.
std::vector<int> valence_states(std::string_view element) {
  static const std::map<std::string_view, std::vector<int>> table = {
      {"B", {3}}, {"C", {4}}, {"N", {3, 5}}, {"O", {2}}, {"P", {3, 5}}, {"S", {2, 4, 6}},
      {"F", {1}}, {"Cl", {1}}, {"Br", {1}}, {"I", {1}}};
  auto it = table.find(element);
  return it == table.end() ? std::vector<int>{} : it->second;
}

bool donates_pi_electron(const Atom& atom) {
  // Aromatic C/B/N/P take part in a ring double bond; o, s and any bracket
  // atom with explicit H (e.g. [nH]) contribute a lone pair instead.
  if (atom.bracket && atom.explicit_h > 0) return false;
  return atom.element == "C" || atom.element == "B" || atom.element == "N" ||
         atom.element == "P";
}

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) { mol_.source = std::string(s); }

  Molecule run() {
    if (s_.empty()) fail(SmilesErrorKind::empty, 0, "empty SMILES string");
    while (pos_ < s_.size()) step();
    if (!branches_.empty()) {
      fail(SmilesErrorKind::unmatched_paren, branch_pos_.back(), "unclosed '('");
    }
    if (!rings_.empty()) {
      fail(SmilesErrorKind::unpaired_ring, rings_.begin()->second.position,
           "ring bond " + std::to_string(rings_.begin()->first) + " is never closed");
    }
    if (pending_) fail(SmilesErrorKind::dangling_bond, pending_pos_, "bond symbol without a following atom");
    return std::move(mol_);
  }

 private:
  struct OpenRing {
    std::size_t atom;
    std::optional<BondOrder> order;
    std::size_t position;
  };

  [[noreturn]] void fail(SmilesErrorKind kind, std::size_t pos, const std::string& msg) {
    throw SmilesError(kind, pos,
                      std::string(to_string(kind)) + " at position " + std::to_string(pos) + ": " + msg);
  }

  void step() {
    const char c = s_[pos_];
    switch (c) {
      case '(':
        if (!prev_) fail(SmilesErrorKind::unmatched_paren, pos_, "branch without a preceding atom");
        if (pending_) fail(SmilesErrorKind::dangling_bond, pending_pos_, "bond symbol before '('");
        branches_.push_back(*prev_);
        branch_pos_.push_back(pos_);
        ++pos_;
        return;
      case ')':
        if (branches_.empty()) fail(SmilesErrorKind::unmatched_paren, pos_, "')' without '('");
        if (pending_) fail(SmilesErrorKind::dangling_bond, pending_pos_, "bond symbol before ')'");
        if (s_[pos_ - 1] == '(') fail(SmilesErrorKind::unmatched_paren, pos_, "empty branch");
        prev_ = branches_.back();
        branches_.pop_back();
        branch_pos_.pop_back();
        ++pos_;
        return;
      case '-': set_pending(BondOrder::single); return;
      case '=': set_pending(BondOrder::double_); return;
      case '#': set_pending(BondOrder::triple); return;
      case ':': set_pending(BondOrder::aromatic); return;
      case '/':
      case '\\': set_pending(BondOrder::single); return;
      case '.':
        if (!prev_ || pending_) fail(SmilesErrorKind::dangling_bond, pos_, "misplaced '.'");
        prev_.reset();
        ++pos_;
        return;
      case '%': {
        if (pos_ + 2 >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])) ||
            !std::isdigit(static_cast<unsigned char>(s_[pos_ + 2]))) {
          fail(SmilesErrorKind::unknown_symbol, pos_, "'%' must be followed by two digits");
        }
        int digit = (s_[pos_ + 1] - '0') * 10 + (s_[pos_ + 2] - '0');
        ring_bond(digit, pos_);
        pos_ += 3;
        return;
      }
      case '[': bracket_atom(); return;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      ring_bond(c - '0', pos_);
      ++pos_;
      return;
    }
    organic_atom();
  }

  void set_pending(BondOrder order) {
    if (!prev_) fail(SmilesErrorKind::dangling_bond, pos_, "bond symbol without a preceding atom");
    if (pending_) fail(SmilesErrorKind::dangling_bond, pos_, "two consecutive bond symbols");
    pending_ = order;
    pending_pos_ = pos_;
    ++pos_;
  }

  void ring_bond(int digit, std::size_t at) {
    if (!prev_) fail(SmilesErrorKind::unpaired_ring, at, "ring bond without a preceding atom");
    auto it = rings_.find(digit);
    if (it == rings_.end()) {
      rings_[digit] = OpenRing{*prev_, pending_, at};
      pending_.reset();
      return;
    }
    OpenRing open = it->second;
    rings_.erase(it);
    if (open.atom == *prev_) fail(SmilesErrorKind::duplicate_bond, at, "ring bond closes on its own atom");
    std::optional<BondOrder> order = pending_ ? pending_ : open.order;
    if (pending_ && open.order && *pending_ != *open.order) {
      fail(SmilesErrorKind::duplicate_bond, at, "conflicting ring bond orders");
    }
    pending_.reset();
    add_bond(open.atom, *prev_, order, at);
  }

  void organic_atom() {
    const char c = s_[pos_];
    Atom atom;
    std::size_t len = 1;
    switch (c) {
      case 'B':
        if (pos_ + 1 < s_.size() && s_[pos_ + 1] == 'r') {
          atom.element = "Br";
          len = 2;
        } else {
          atom.element = "B";
        }
        break;
      case 'C':
        if (pos_ + 1 < s_.size() && s_[pos_ + 1] == 'l') {
          atom.element = "Cl";
          len = 2;
        } else {
          atom.element = "C";
        }
        break;
      case 'N': case 'O': case 'P': case 'S': case 'F': case 'I':
        atom.element = std::string(1, c);
        break;
      case 'b': case 'c': case 'n': case 'o': case 'p': case 's':
        atom.element = std::string(1, static_cast<char>(std::toupper(c)));
        atom.aromatic = true;
        break;
      default:
        fail(SmilesErrorKind::unknown_symbol, pos_, std::string("unexpected character '") + c + "'");
    }
    add_atom(std::move(atom));
    pos_ += len;
  }

  void bracket_atom() {
    const std::size_t start = pos_;
    const std::size_t close = s_.find(']', pos_);
    if (close == std::string_view::npos) fail(SmilesErrorKind::malformed_bracket, start, "unterminated '['");
    std::string_view body = s_.substr(pos_ + 1, close - pos_ - 1);
    std::size_t i = 0;
    auto at_end = [&] { return i >= body.size(); };
    while (!at_end() && std::isdigit(static_cast<unsigned char>(body[i]))) ++i;  // isotope
    if (at_end()) fail(SmilesErrorKind::malformed_bracket, start, "bracket atom without an element");

    Atom atom;
    atom.bracket = true;
    const char first = body[i];
    if (std::islower(static_cast<unsigned char>(first))) {
      atom.aromatic = true;
      std::string two = (i + 1 < body.size()) ? std::string{first, body[i + 1]} : std::string{};
      if (two == "se" || two == "as") {
        atom.element = std::string{static_cast<char>(std::toupper(first)), body[i + 1]};
        i += 2;
      } else if (std::string_view("bcnops").find(first) != std::string_view::npos) {
        atom.element = std::string(1, static_cast<char>(std::toupper(first)));
        ++i;
      } else {
        fail(SmilesErrorKind::unknown_symbol, start + 1 + i, "unknown aromatic element");
      }
    } else if (std::isupper(static_cast<unsigned char>(first))) {
      // Prefer the two-letter symbol when it names a known element.
      if (i + 1 < body.size() && std::islower(static_cast<unsigned char>(body[i + 1])) &&
          find_element(body.substr(i, 2))) {
        atom.element = std::string(body.substr(i, 2));
        i += 2;
      } else if (find_element(body.substr(i, 1))) {
        atom.element = std::string(1, first);
        ++i;
      } else {
        fail(SmilesErrorKind::unknown_symbol, start + 1 + i, "unknown element in bracket atom");
      }
    } else {
      fail(SmilesErrorKind::malformed_bracket, start + 1 + i, "bracket atom without an element");
    }

    while (!at_end() && body[i] == '@') ++i;  // chirality, ignored
    if (!at_end() && body[i] == 'H') {
      ++i;
      atom.explicit_h = 1;
      if (!at_end() && std::isdigit(static_cast<unsigned char>(body[i]))) {
        atom.explicit_h = body[i] - '0';
        ++i;
      }
    }
    if (!at_end() && (body[i] == '+' || body[i] == '-')) {
      const char sign_char = body[i];
      const int sign = sign_char == '+' ? 1 : -1;
      ++i;
      int magnitude = 1;
      if (!at_end() && std::isdigit(static_cast<unsigned char>(body[i]))) {
        magnitude = body[i] - '0';
        ++i;
      } else {
        while (!at_end() && body[i] == sign_char) {
          ++magnitude;
          ++i;
        }
      }
      atom.charge = sign * magnitude;
    }
    if (!at_end() && body[i] == ':') {  // atom class
      ++i;
      if (at_end()) fail(SmilesErrorKind::malformed_bracket, start, "empty atom class");
      while (!at_end() && std::isdigit(static_cast<unsigned char>(body[i]))) ++i;
    }
    if (!at_end()) fail(SmilesErrorKind::malformed_bracket, start + 1 + i, "trailing characters in bracket atom");
    add_atom(std::move(atom));
    pos_ = close + 1;
  }

  void add_atom(Atom atom) {
    const std::size_t idx = mol_.atoms.size();
    mol_.atoms.push_back(std::move(atom));
    if (prev_) {
      add_bond(*prev_, idx, pending_, pending_ ? pending_pos_ : pos_);
    } else if (pending_) {
      fail(SmilesErrorKind::dangling_bond, pending_pos_, "bond symbol without a preceding atom");
    }
    pending_.reset();
    prev_ = idx;
  }

  void add_bond(std::size_t a, std::size_t b, std::optional<BondOrder> order, std::size_t at) {
    for (const auto& bond : mol_.bonds) {
      if ((bond.a == a && bond.b == b) || (bond.a == b && bond.b == a)) {
        fail(SmilesErrorKind::duplicate_bond, at, "atoms are already bonded");
      }
    }
    BondOrder resolved = order.value_or(
        mol_.atoms[a].aromatic && mol_.atoms[b].aromatic ? BondOrder::aromatic : BondOrder::single);
    mol_.bonds.push_back(Bond{a, b, resolved});
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  Molecule mol_;
  std::optional<std::size_t> prev_;
  std::optional<BondOrder> pending_;
  std::size_t pending_pos_ = 0;
  std::vector<std::size_t> branches_;
  std::vector<std::size_t> branch_pos_;
  std::map<int, OpenRing> rings_;
};

char bond_symbol(BondOrder order) {
  switch (order) {
    case BondOrder::single: return '-';
    case BondOrder::double_: return '=';
    case BondOrder::triple: return '#';
    case BondOrder::aromatic: return ':';
  }
  return '?';
}

std::string atom_label(const Atom& atom) {
  std::string label = atom.element;
  if (atom.aromatic) label[0] = static_cast<char>(std::tolower(label[0]));
  if (atom.charge != 0) label += (atom.charge > 0 ? "+" : "-") + std::to_string(std::abs(atom.charge));
  return label;
}

}  // namespace

std::string_view to_string(SmilesErrorKind kind) {
  switch (kind) {
    case SmilesErrorKind::empty: return "empty";
    case SmilesErrorKind::unmatched_paren: return "unmatched_paren";
    case SmilesErrorKind::unpaired_ring: return "unpaired_ring";
    case SmilesErrorKind::unknown_symbol: return "unknown_symbol";
    case SmilesErrorKind::malformed_bracket: return "malformed_bracket";
    case SmilesErrorKind::dangling_bond: return "dangling_bond";
    case SmilesErrorKind::duplicate_bond: return "duplicate_bond";
  }
  return "unknown";
}

Molecule parse_smiles(std::string_view smiles) { return Parser(smiles).run(); }

int used_valence(const Molecule& m, std::size_t atom) {
  int sum = m.atoms[atom].explicit_h;
  int aromatic_bonds = 0;
  for (const auto& bond : m.bonds) {
    if (bond.a != atom && bond.b != atom) continue;
    if (bond.order == BondOrder::aromatic) {
      ++aromatic_bonds;
    } else {
      sum += static_cast<int>(bond.order);
    }
  }
  sum += aromatic_bonds;
  if (aromatic_bonds > 0 && m.atoms[atom].aromatic && donates_pi_electron(m.atoms[atom])) ++sum;
  return sum;
}

int implicit_hydrogens(const Molecule& m, std::size_t atom) {
  const Atom& a = m.atoms[atom];
  if (a.bracket) return 0;
  const int used = used_valence(m, atom);
  for (int state : valence_states(a.element))
    if (state >= used) return state - used;
  return 0;
}

Validity check_validity(std::string_view smiles) {
  Molecule m;
  try {
    m = parse_smiles(smiles);
  } catch (const SmilesError& e) {
    return {false, e.what()};
  }
  for (std::size_t i = 0; i < m.atoms.size(); ++i) {
    const Atom& atom = m.atoms[i];
    if (atom.aromatic) {
      int aromatic_bonds = 0;
      for (const auto& bond : m.bonds)
        if ((bond.a == i || bond.b == i) && bond.order == BondOrder::aromatic) ++aromatic_bonds;
      if (aromatic_bonds < 2) {
        return {false, "aromatic atom " + std::to_string(i) + " (" + atom.element + ") is not in an aromatic ring"};
      }
    }
    auto limit = max_valence(atom.element);
    if (!limit) continue;
    int allowed = *limit;
    if (atom.element == "N" || atom.element == "O") allowed += std::abs(atom.charge);
    const int used = used_valence(m, i);
    if (used > allowed) {
      return {false, "atom " + std::to_string(i) + " (" + atom.element + ") has valence " +
                         std::to_string(used) + " > " + std::to_string(allowed)};
    }
  }
  return {true, {}};
}

double molecular_weight(const Molecule& m) {
  const double hydrogen = find_element("H")->weight;
  double total = 0.0;
  for (std::size_t i = 0; i < m.atoms.size(); ++i) {
    const Atom& atom = m.atoms[i];
    const ElementInfo* info = find_element(atom.element);
    if (!info || info->weight == 0.0) {
      throw std::domain_error("no tabulated atomic weight for element " + atom.element);
    }
    total += info->weight + hydrogen * (atom.explicit_h + implicit_hydrogens(m, i));
  }
  return total;
}

Fingerprint::Fingerprint(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {
  if (size == 0) throw std::invalid_argument("fingerprint size must be positive");
}

void Fingerprint::set(std::size_t bit) { words_.at(bit / 64) |= std::uint64_t{1} << (bit % 64); }

bool Fingerprint::test(std::size_t bit) const { return (words_.at(bit / 64) >> (bit % 64)) & 1u; }

std::size_t Fingerprint::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::size_t Fingerprint::intersection_count(const Fingerprint& other) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < words_.size(); ++i) n += static_cast<std::size_t>(std::popcount(words_[i] & other.words_[i]));
  return n;
}

std::size_t Fingerprint::union_count(const Fingerprint& other) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < words_.size(); ++i) n += static_cast<std::size_t>(std::popcount(words_[i] | other.words_[i]));
  return n;
}

std::vector<std::string> path_labels(const Molecule& m, std::size_t max_path_bonds) {
  std::vector<std::vector<std::pair<std::size_t, BondOrder>>> adjacency(m.atoms.size());
  for (const auto& bond : m.bonds) {
    adjacency[bond.a].emplace_back(bond.b, bond.order);
    adjacency[bond.b].emplace_back(bond.a, bond.order);
  }
  std::vector<std::string> labels;
  std::vector<std::size_t> path_atoms;
  std::vector<BondOrder> path_bonds;
  std::vector<bool> on_path(m.atoms.size(), false);

  auto emit = [&] {
    std::string forward = atom_label(m.atoms[path_atoms.front()]);
    for (std::size_t k = 0; k < path_bonds.size(); ++k) {
      forward += bond_symbol(path_bonds[k]);
      forward += atom_label(m.atoms[path_atoms[k + 1]]);
    }
    std::string backward = atom_label(m.atoms[path_atoms.back()]);
    for (std::size_t k = path_bonds.size(); k-- > 0;) {
      backward += bond_symbol(path_bonds[k]);
      backward += atom_label(m.atoms[path_atoms[k]]);
    }
    labels.push_back(std::min(forward, backward));
  };

  auto extend = [&](auto&& self, std::size_t atom) -> void {
    emit();
    if (path_bonds.size() == max_path_bonds) return;
    for (auto [next, order] : adjacency[atom]) {
      if (on_path[next]) continue;
      on_path[next] = true;
      path_atoms.push_back(next);
      path_bonds.push_back(order);
      self(self, next);
      path_bonds.pop_back();
      path_atoms.pop_back();
      on_path[next] = false;
    }
  };

  for (std::size_t start = 0; start < m.atoms.size(); ++start) {
    on_path[start] = true;
    path_atoms.assign(1, start);
    extend(extend, start);
    on_path[start] = false;
  }
  return labels;
}

Fingerprint fingerprint(const Molecule& m, const FingerprintOptions& options) {
  Fingerprint fp(options.size);
  for (const auto& label : path_labels(m, options.max_path_bonds)) fp.set(fnv1a(label) % options.size);
  return fp;
}

double tanimoto_distance(const Fingerprint& a, const Fingerprint& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("fingerprint sizes differ: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
  const std::size_t uni = a.union_count(b);
  if (uni == 0) return 0.0;
  return 1.0 - static_cast<double>(a.intersection_count(b)) / static_cast<double>(uni);
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t substitute = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, substitute});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace repur::chem
