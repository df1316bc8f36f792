#include "repur/metrics.hpp"

#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "repur/chem.hpp"
#include "repur/dataio.hpp"

namespace repur::metrics {

double validity_rate(std::span<const std::string> smiles) {
  if (smiles.empty()) throw std::invalid_argument("validity of an empty list is undefined");
  const auto valid = std::count_if(smiles.begin(), smiles.end(),
                                   [](const std::string& s) { return chem::check_validity(s).valid; });
  return static_cast<double>(valid) / static_cast<double>(smiles.size());
}

double uniqueness_rate(std::span<const std::string> smiles) {
  if (smiles.empty()) throw std::invalid_argument("uniqueness of an empty list is undefined");
  const std::set<std::string> distinct(smiles.begin(), smiles.end());
  return static_cast<double>(distinct.size()) / static_cast<double>(smiles.size());
}

double internal_diversity(std::span<const std::string> smiles, DiversityMetric) {
  if (smiles.size() < 2) throw std::invalid_argument("internal diversity needs at least two strings");
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < smiles.size(); ++i) {
    for (std::size_t j = i + 1; j < smiles.size(); ++j) {
      total += static_cast<double>(chem::levenshtein(smiles[i], smiles[j]));
      ++pairs;
    }
  }
  const double mean = total / static_cast<double>(pairs);
  return mean > 0.0 ? std::log10(mean) : -std::numeric_limits<double>::infinity();
}

void TanimotoDistribution::add(double distance) {
  distances.push_back(distance);
  const auto bin = std::min(kHistogramBins - 1, static_cast<std::size_t>(std::floor(distance * kHistogramBins)));
  ++histogram[bin];
}

void TanimotoDistribution::merge(const TanimotoDistribution& other) {
  distances.insert(distances.end(), other.distances.begin(), other.distances.end());
  for (std::size_t b = 0; b < kHistogramBins; ++b) histogram[b] += other.histogram[b];
}

namespace {

std::vector<chem::Fingerprint> fingerprints(std::span<const std::string> smiles) {
  std::vector<chem::Fingerprint> out;
  out.reserve(smiles.size());
  for (const auto& s : smiles) {
    const auto validity = chem::check_validity(s);
    if (!validity.valid) throw std::invalid_argument("invalid SMILES '" + s + "': " + validity.reason);
    out.push_back(chem::fingerprint(chem::parse_smiles(s)));
  }
  return out;
}

}  // namespace

TanimotoDistribution tanimoto_distribution(std::span<const std::string> set_a, std::span<const std::string> set_b) {
  const auto fa = fingerprints(set_a);
  const auto fb = fingerprints(set_b);
  TanimotoDistribution dist;
  dist.distances.reserve(fa.size() * fb.size());
  for (const auto& a : fa) {
    for (const auto& b : fb) dist.add(chem::tanimoto_distance(a, b));
  }
  return dist;
}

std::optional<MwSummary> mw_summary(std::span<const std::string> smiles) {
  std::vector<double> weights;
  for (const auto& s : smiles) {
    if (!chem::check_validity(s).valid) continue;
    try {
      weights.push_back(chem::molecular_weight(chem::parse_smiles(s)));
    } catch (const std::domain_error&) {
    }
  }
  if (weights.empty()) return std::nullopt;
  MwSummary mw;
  mw.count = weights.size();
  mw.mean = std::accumulate(weights.begin(), weights.end(), 0.0) / static_cast<double>(weights.size());
  double var = 0.0;
  for (double w : weights) var += (w - mw.mean) * (w - mw.mean);
  mw.stddev = std::sqrt(var / static_cast<double>(weights.size()));
  const auto [lo, hi] = std::minmax_element(weights.begin(), weights.end());
  mw.min = *lo;
  mw.max = *hi;
  return mw;
}

// ---------------------------------------------------------------- generated TSV

std::string GeneratedRecord::flags() const {
  if (unk_present && truncated) return "unk,truncated";
  if (unk_present) return "unk";
  if (truncated) return "truncated";
  return "-";
}

void write_generated(const std::filesystem::path& path, std::span<const GeneratedRecord> records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "protein_id\tanchor_id\tgenerated_smiles\tflags\n";
  for (const auto& r : records) out << r.protein_id << '\t' << r.anchor_id << '\t' << r.smiles << '\t' << r.flags() << '\n';
}

std::vector<GeneratedRecord> load_generated(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != "protein_id\tanchor_id\tgenerated_smiles\tflags") {
    throw DataError(path.string() + ": expected generated-set header", line_no);
  }
  std::vector<GeneratedRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
    if (!line.empty() && line.back() == '\t') fields.emplace_back();
    if (fields.size() != 4) throw DataError(path.string() + ": expected 4 columns", line_no);
    GeneratedRecord r{fields[0], fields[1], fields[2]};
    std::stringstream flags(fields[3]);
    for (std::string f; std::getline(flags, f, ',');) {
      if (f == "unk") r.unk_present = true;
      else if (f == "truncated") r.truncated = true;
      else if (f != "-") throw DataError(path.string() + ": unknown flag '" + f + "'", line_no);
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------- run evaluation

std::string to_string(Grouping g) { return g == Grouping::vs_anchor ? "vs_anchor" : "vs_positive"; }

namespace {

std::vector<std::string> metric_names(std::span<const int> orders) {
  std::vector<std::string> names;
  for (int n : orders) {
    names.push_back("bleu_" + std::to_string(n));
    names.push_back("gleu_" + std::to_string(n));
    names.push_back("rouge_" + std::to_string(n) + "_f1");
  }
  return names;
}

std::vector<double> score(const std::string& cand, const std::string& ref, std::span<const int> orders) {
  std::vector<double> s;
  for (int n : orders) {
    s.push_back(bleu_n(cand, ref, n));
    s.push_back(gleu_n(cand, ref, n));
    s.push_back(rouge_n_f1(cand, ref, n));
  }
  return s;
}

}  // namespace

RunEvaluation evaluate_run(std::span<const GeneratedRecord> generated, const std::map<QueryKey, QueryTargets>& queries,
                           std::span<const int> orders) {
  if (orders.empty()) throw std::invalid_argument("no n-gram orders requested");
  for (int n : orders) detail::require_order(n);
  const auto names = metric_names(orders);
  RunEvaluation eval;
  eval.vs_anchor.grouping = Grouping::vs_anchor;
  eval.vs_positive.grouping = Grouping::vs_positive;
  eval.vs_anchor.orders = eval.vs_positive.orders = std::vector<int>(orders.begin(), orders.end());
  std::vector<double> sum_anchor(names.size(), 0.0), sum_positive(names.size(), 0.0);
  std::vector<std::string> pool;
  std::size_t matched = 0, with_positives = 0;

  for (const auto& g : generated) {
    auto it = queries.find({g.protein_id, g.anchor_id});
    if (it == queries.end()) continue;
    ++matched;
    ++eval.total;
    if (g.unk_present) {
      ++eval.excluded_unk;
      continue;
    }
    const QueryTargets& q = it->second;
    pool.push_back(g.smiles);
    const auto a = score(g.smiles, q.anchor_smiles, orders);
    for (std::size_t m = 0; m < names.size(); ++m) sum_anchor[m] += a[m];
    if (!q.positive_smiles.empty()) {
      std::vector<double> best(names.size(), 0.0);
      for (const auto& pos : q.positive_smiles) {
        const auto s = score(g.smiles, pos, orders);
        for (std::size_t m = 0; m < names.size(); ++m) best[m] = std::max(best[m], s[m]);
      }
      for (std::size_t m = 0; m < names.size(); ++m) sum_positive[m] += best[m];
      ++with_positives;
    }
    if (chem::check_validity(g.smiles).valid && chem::check_validity(q.anchor_smiles).valid) {
      const std::string anchor[] = {q.anchor_smiles};
      const std::string sample[] = {g.smiles};
      eval.generated_vs_anchor.merge(tanimoto_distribution(sample, anchor));
    }
  }
  if (matched == 0) throw std::invalid_argument("no generated sample matches a (protein, anchor) query");

  eval.vs_anchor.samples = pool.size();
  eval.vs_positive.samples = with_positives;
  for (std::size_t m = 0; m < names.size(); ++m) {
    eval.vs_anchor.values[names[m]] = pool.empty() ? 0.0 : sum_anchor[m] / static_cast<double>(pool.size());
    eval.vs_positive.values[names[m]] =
        with_positives == 0 ? 0.0 : sum_positive[m] / static_cast<double>(with_positives);
  }
  if (!pool.empty()) {
    eval.validity = validity_rate(pool);
    eval.uniqueness = uniqueness_rate(pool);
  }
  if (pool.size() >= 2) eval.internal_diversity = internal_diversity(pool);
  eval.mw = mw_summary(pool);

  std::set<QueryKey> seen;
  for (const auto& g : generated) {
    auto it = queries.find({g.protein_id, g.anchor_id});
    if (it == queries.end() || !seen.insert(it->first).second) continue;
    const QueryTargets& q = it->second;
    if (!chem::check_validity(q.anchor_smiles).valid) continue;
    std::vector<std::string> positives;
    for (const auto& p : q.positive_smiles) {
      if (chem::check_validity(p).valid) positives.push_back(p);
    }
    const std::string anchor[] = {q.anchor_smiles};
    eval.positive_vs_anchor.merge(tanimoto_distribution(positives, anchor));
  }
  return eval;
}

namespace {

std::string format_value(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed << v;
  return os.str();
}

}  // namespace

void write_report_tsv(const std::filesystem::path& path, const RunEvaluation& eval) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "group\tmetric\tvalue\n";
  for (const MetricReport* r : {&eval.vs_anchor, &eval.vs_positive}) {
    for (const auto& [name, value] : r->values) out << to_string(r->grouping) << '\t' << name << '\t' << format_value(value) << '\n';
    out << to_string(r->grouping) << "\tsamples\t" << r->samples << '\n';
  }
  out << "set\ttotal\t" << eval.total << '\n';
  out << "set\texcluded_unk\t" << eval.excluded_unk << '\n';
  out << "set\tvalidity\t" << format_value(eval.validity) << '\n';
  out << "set\tuniqueness\t" << format_value(eval.uniqueness) << '\n';
  out << "set\tinternal_diversity_log10_levenshtein\t"
      << (eval.internal_diversity ? format_value(*eval.internal_diversity) : "N/A") << '\n';
  if (eval.mw) {
    out << "set\tmw_count\t" << eval.mw->count << '\n';
    out << "set\tmw_mean\t" << format_value(eval.mw->mean) << '\n';
    out << "set\tmw_std\t" << format_value(eval.mw->stddev) << '\n';
    out << "set\tmw_min\t" << format_value(eval.mw->min) << '\n';
    out << "set\tmw_max\t" << format_value(eval.mw->max) << '\n';
  } else {
    out << "set\tmw_mean\tN/A\n";
  }
}

void write_histogram_csv(const std::filesystem::path& path, const TanimotoDistribution& dist) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "bin_low,bin_high,count\n";
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    out << static_cast<double>(b) / kHistogramBins << ',' << static_cast<double>(b + 1) / kHistogramBins << ','
        << dist.histogram[b] << '\n';
  }
}

void print_report(std::ostream& os, const RunEvaluation& eval) {
  const auto& names = eval.vs_anchor.values;
  os << std::left << std::setw(14) << "metric" << std::setw(12) << "vs_anchor" << "vs_positive\n";
  for (const auto& [name, value] : names) {
    os << std::setw(14) << name << std::setw(12) << format_value(value)
       << format_value(eval.vs_positive.values.at(name)) << '\n';
  }
  os << "samples " << eval.total << " (excluded unk " << eval.excluded_unk << ")\n";
  os << "validity " << format_value(eval.validity) << "  uniqueness " << format_value(eval.uniqueness)
     << "  diversity " << (eval.internal_diversity ? format_value(*eval.internal_diversity) : "N/A") << '\n';
  if (eval.mw) {
    os << "MW " << format_value(eval.mw->mean) << " +/- " << format_value(eval.mw->stddev) << " (n=" << eval.mw->count
       << ")\n";
  } else {
    os << "MW N/A\n";
  }
}

}  // namespace repur::metrics
