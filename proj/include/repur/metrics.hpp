#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace repur::metrics {

// N-gram similarity over arbitrary token sequences. SMILES are scored
// character by character through the string_view overloads.

template <typename T>
using NgramCounts = std::map<std::vector<T>, std::size_t>;

template <typename T>
NgramCounts<T> ngram_counts(std::span<const T> seq, std::size_t n) {
  NgramCounts<T> counts;
  if (n == 0 || seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) ++counts[std::vector<T>(seq.begin() + i, seq.begin() + i + n)];
  return counts;
}

/// Size of the multiset intersection.
template <typename T>
std::size_t clipped_overlap(const NgramCounts<T>& a, const NgramCounts<T>& b) {
  std::size_t total = 0;
  for (const auto& [gram, count] : a) {
    auto it = b.find(gram);
    if (it != b.end()) total += std::min(count, it->second);
  }
  return total;
}

namespace detail {
inline void require_order(int n) {
  if (n < 1) throw std::invalid_argument("n-gram order must be at least 1, got " + std::to_string(n));
}
inline std::size_t grams(std::size_t len, std::size_t n) { return len >= n ? len - n + 1 : 0; }
}  // namespace detail

/// Brevity penalty times the geometric mean of clipped i-gram precisions,
/// i = 1..n. An order without candidate i-grams has precision 0.
template <typename T>
double bleu_n(std::span<const T> cand, std::span<const T> ref, int n) {
  detail::require_order(n);
  if (cand.empty()) return 0.0;
  double log_sum = 0.0;
  for (int i = 1; i <= n; ++i) {
    const std::size_t total = detail::grams(cand.size(), static_cast<std::size_t>(i));
    if (total == 0) return 0.0;
    const std::size_t hit = clipped_overlap(ngram_counts(cand, i), ngram_counts(ref, i));
    if (hit == 0) return 0.0;
    log_sum += std::log(static_cast<double>(hit) / static_cast<double>(total));
  }
  const double c = static_cast<double>(cand.size());
  const double r = static_cast<double>(ref.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / n);
}

/// min(precision, recall) with matches and totals pooled over orders 1..n.
template <typename T>
double gleu_n(std::span<const T> cand, std::span<const T> ref, int n) {
  detail::require_order(n);
  std::size_t hit = 0, cand_total = 0, ref_total = 0;
  for (int i = 1; i <= n; ++i) {
    hit += clipped_overlap(ngram_counts(cand, i), ngram_counts(ref, i));
    cand_total += detail::grams(cand.size(), static_cast<std::size_t>(i));
    ref_total += detail::grams(ref.size(), static_cast<std::size_t>(i));
  }
  if (cand_total == 0 || ref_total == 0) return 0.0;
  return std::min(static_cast<double>(hit) / static_cast<double>(cand_total),
                  static_cast<double>(hit) / static_cast<double>(ref_total));
}

/// Harmonic mean of order-n overlap precision and recall.
template <typename T>
double rouge_n_f1(std::span<const T> cand, std::span<const T> ref, int n) {
  detail::require_order(n);
  const std::size_t cand_total = detail::grams(cand.size(), static_cast<std::size_t>(n));
  const std::size_t ref_total = detail::grams(ref.size(), static_cast<std::size_t>(n));
  if (cand_total == 0 || ref_total == 0) return 0.0;
  const double hit = static_cast<double>(clipped_overlap(ngram_counts(cand, n), ngram_counts(ref, n)));
  const double p = hit / static_cast<double>(cand_total);
  const double r = hit / static_cast<double>(ref_total);
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

inline double bleu_n(std::string_view cand, std::string_view ref, int n) {
  return bleu_n(std::span<const char>(cand), std::span<const char>(ref), n);
}
inline double gleu_n(std::string_view cand, std::string_view ref, int n) {
  return gleu_n(std::span<const char>(cand), std::span<const char>(ref), n);
}
inline double rouge_n_f1(std::string_view cand, std::string_view ref, int n) {
  return rouge_n_f1(std::span<const char>(cand), std::span<const char>(ref), n);
}

// ---------------------------------------------------------------- set metrics

/// Fraction passing chem::check_validity. Throws on an empty list.
double validity_rate(std::span<const std::string> smiles);
/// Distinct strings over list size. Throws on an empty list.
double uniqueness_rate(std::span<const std::string> smiles);

enum class DiversityMetric { levenshtein_log10 };

/// log10 of the mean pairwise Levenshtein distance over unordered pairs;
/// -infinity when every pair is identical. Throws for fewer than 2 items.
double internal_diversity(std::span<const std::string> smiles,
                          DiversityMetric metric = DiversityMetric::levenshtein_log10);

inline constexpr std::size_t kHistogramBins = 20;

struct TanimotoDistribution {
  std::vector<double> distances;  // row-major over (a, b)
  std::array<std::size_t, kHistogramBins> histogram{};

  void add(double distance);
  void merge(const TanimotoDistribution& other);
};

/// Every cross pair of path fingerprints. Throws std::invalid_argument when a
/// string fails the validity check.
TanimotoDistribution tanimoto_distribution(std::span<const std::string> set_a, std::span<const std::string> set_b);

struct MwSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
};

/// Molecular weight summary of the valid strings; nullopt when none are valid.
std::optional<MwSummary> mw_summary(std::span<const std::string> smiles);

// ---------------------------------------------------------------- run evaluation

struct GeneratedRecord {
  std::string protein_id;
  std::string anchor_id;
  std::string smiles;
  bool unk_present = false;
  bool truncated = false;

  std::string flags() const;
};

/// TSV `protein_id\tanchor_id\tgenerated_smiles\tflags`.
void write_generated(const std::filesystem::path& path, std::span<const GeneratedRecord> records);
std::vector<GeneratedRecord> load_generated(const std::filesystem::path& path);

enum class Grouping { vs_anchor, vs_positive };
std::string to_string(Grouping g);

struct MetricReport {
  Grouping grouping = Grouping::vs_anchor;
  std::vector<int> orders;
  std::map<std::string, double> values;  // e.g. bleu_1, gleu_2, rouge_2_f1
  std::size_t samples = 0;
};

/// One (protein, anchor) query: its anchor and mined positives as SMILES.
struct QueryTargets {
  std::string anchor_smiles;
  std::vector<std::string> positive_smiles;
};

using QueryKey = std::pair<std::string, std::string>;  // (protein_id, anchor_id)

struct RunEvaluation {
  MetricReport vs_anchor;
  MetricReport vs_positive;
  std::size_t total = 0;
  std::size_t excluded_unk = 0;
  double validity = 0.0;
  double uniqueness = 0.0;
  std::optional<double> internal_diversity;  // needs two scored samples
  std::optional<MwSummary> mw;
  TanimotoDistribution generated_vs_anchor;
  TanimotoDistribution positive_vs_anchor;
};

/// Scores each generated sample against its anchor and against the best of
/// its positives, averaged over samples. UNK-flagged samples are excluded.
/// Throws std::invalid_argument when no sample matches a query.
RunEvaluation evaluate_run(std::span<const GeneratedRecord> generated, const std::map<QueryKey, QueryTargets>& queries,
                           std::span<const int> orders);

void write_report_tsv(const std::filesystem::path& path, const RunEvaluation& eval);
void write_histogram_csv(const std::filesystem::path& path, const TanimotoDistribution& dist);
void print_report(std::ostream& os, const RunEvaluation& eval);

}  // namespace repur::metrics
