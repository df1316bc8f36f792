#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace repur {

// Content alphabets. Protein: the 26 IUPAC letters plus gap, stop and two
// placeholder marks. Compound: every character the SMILES grammar subset in
// chem.hpp can produce.
inline constexpr std::string_view kProteinAlphabet = "*-.ABCDEFGHIJKLMNOPQRSTUVWXYZ~";
inline constexpr std::string_view kSmilesAlphabet =
    "#%()+-./0123456789:=@BCFHIKLMNOPS[\\]aceilnoprs";

enum class VocabKind { protein, compound };

enum SpecialToken : int { kPad = 0, kBos = 1, kEos = 2, kUnk = 3 };
inline constexpr int kNumSpecials = 4;
/// Rendered in place of an UNK id when decoding.
inline constexpr char kUnkSentinel = '?';

class Vocab {
 public:
  Vocab(std::vector<char> symbols, VocabKind kind);

  /// Sorted distinct characters of the corpus.
  static Vocab build(std::span<const std::string> corpus, VocabKind kind);
  static Vocab load(const std::filesystem::path& path, VocabKind kind);
  void save(const std::filesystem::path& path) const;

  int id_of(char c) const { return lookup_[static_cast<unsigned char>(c)]; }
  char symbol_of(int id) const;
  bool is_content(int id) const {
    return id >= kNumSpecials && id < static_cast<int>(size());
  }

  std::size_t size() const { return symbols_.size() + kNumSpecials; }
  const std::vector<char>& symbols() const { return symbols_; }
  VocabKind kind() const { return kind_; }

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.kind_ == b.kind_ && a.symbols_ == b.symbols_;
  }

 private:
  std::vector<char> symbols_;
  std::array<int, 256> lookup_{};
  VocabKind kind_;
};

/// Fixed-length encoding: BOS, content ids, EOS, then PAD up to the length.
struct TokenSeq {
  std::vector<int> ids;
  std::vector<bool> pad_mask;  // true = real token (BOS/content/EOS)
  std::size_t raw_len = 0;
};

/// Throws std::invalid_argument when length < 3, and std::length_error when
/// the string does not fit and truncation is off.
TokenSeq encode(std::string_view s, const Vocab& v, std::size_t length,
                bool truncate = false);

struct Decoded {
  std::string text;
  bool has_unk = false;
  bool terminated = false;  // an EOS was seen
};

/// Content symbols up to the first EOS. PAD and BOS are skipped; UNK becomes
/// kUnkSentinel and sets has_unk.
Decoded decode(std::span<const int> ids, const Vocab& v);

}  // namespace repur
