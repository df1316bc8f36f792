#include "repur/seqrep.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

namespace repur {

namespace {

constexpr std::array<std::string_view, kNumSpecials> kSpecialNames = {"<pad>", "<bos>",
                                                                       "<eos>", "<unk>"};

}  // namespace

Vocab::Vocab(std::vector<char> symbols, VocabKind kind)
    : symbols_(std::move(symbols)), kind_(kind) {
  lookup_.fill(kUnk);
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    auto& slot = lookup_[static_cast<unsigned char>(symbols_[i])];
    if (slot != kUnk) {
      throw std::invalid_argument(std::string("duplicate vocabulary symbol '") +
                                  symbols_[i] + "'");
    }
    slot = static_cast<int>(i) + kNumSpecials;
  }
}

Vocab Vocab::build(std::span<const std::string> corpus, VocabKind kind) {
  if (corpus.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");
  std::set<unsigned char> distinct;
  for (const auto& s : corpus)
    for (char c : s) distinct.insert(static_cast<unsigned char>(c));
  std::vector<char> symbols;
  symbols.reserve(distinct.size());
  for (unsigned char c : distinct) symbols.push_back(static_cast<char>(c));
  return Vocab(std::move(symbols), kind);
}

char Vocab::symbol_of(int id) const {
  if (!is_content(id)) throw std::out_of_range("token id " + std::to_string(id) + " is not a content symbol");
  return symbols_[static_cast<std::size_t>(id - kNumSpecials)];
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary file " + path.string());
  for (auto name : kSpecialNames) out << name << '\n';
  for (char c : symbols_) out << c << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path, VocabKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocabulary file " + path.string());
  std::string line;
  for (auto name : kSpecialNames) {
    if (!std::getline(in, line) || line != name) {
      throw std::runtime_error("vocabulary file " + path.string() + " lacks special token line " +
                               std::string(name));
    }
  }
  std::vector<char> symbols;
  while (std::getline(in, line)) {
    if (line.size() != 1) throw std::runtime_error("vocabulary line is not a single character: '" + line + "'");
    symbols.push_back(line[0]);
  }
  return Vocab(std::move(symbols), kind);
}

TokenSeq encode(std::string_view s, const Vocab& v, std::size_t length, bool truncate) {
  if (length < 3) throw std::invalid_argument("sequence length must be at least 3");
  if (s.size() + 2 > length) {
    if (!truncate) {
      throw std::length_error("sequence of " + std::to_string(s.size()) +
                              " symbols does not fit in length " + std::to_string(length));
    }
    s = s.substr(0, length - 2);
  }
  TokenSeq seq;
  seq.raw_len = s.size();
  seq.ids.assign(length, kPad);
  seq.ids[0] = kBos;
  for (std::size_t i = 0; i < s.size(); ++i) seq.ids[i + 1] = v.id_of(s[i]);
  seq.ids[s.size() + 1] = kEos;
  seq.pad_mask.resize(length);
  std::transform(seq.ids.begin(), seq.ids.end(), seq.pad_mask.begin(),
                 [](int id) { return id != kPad; });
  return seq;
}

Decoded decode(std::span<const int> ids, const Vocab& v) {
  Decoded out;
  for (int id : ids) {
    if (id == kEos) {
      out.terminated = true;
      break;
    }
    if (id == kPad || id == kBos) continue;
    if (v.is_content(id)) {
      out.text.push_back(v.symbol_of(id));
    } else {
      out.text.push_back(kUnkSentinel);
      out.has_unk = true;
    }
  }
  return out;
}

}  // namespace repur
