#include "repur/commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "repur/chem.hpp"
#include "repur/checkpoint.hpp"
#include "repur/dataio.hpp"
#include "repur/metrics.hpp"
#include "repur/parallel.hpp"
#include "repur/pcgraph.hpp"
#include "repur/pipeline.hpp"

namespace repur {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw MissingFileError("missing file: " + p.string());
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

/// Command, flags, seeds and output hashes.
void write_manifest(const fs::path& path, const std::string& command, const json& config,
                    const std::vector<fs::path>& outputs, const json& results = json::object()) {
  json m;
  m["command"] = command;
  m["config"] = config;
  json hashes = json::object();
  for (const auto& o : outputs) hashes[o.filename().string()] = hex(file_hash(o));
  m["outputs"] = hashes;
  m["results"] = results;
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << m.dump(2) << '\n';
}

fs::path sidecar(const fs::path& file) { return fs::path(file.string() + ".manifest.json"); }

// ---------------------------------------------------------------- data directory

struct DataDir {
  fs::path root;
  Vocabs vocabs{Vocab({}, VocabKind::protein), Vocab({}, VocabKind::compound)};
  std::map<std::string, std::string> protein_seq;
  std::map<std::string, std::string> compound_smiles;

  /// eval only needs the id lookups, so vocab files are optional there.
  static DataDir open(const fs::path& dir, bool with_vocabs = true) {
    DataDir d;
    d.root = dir;
    require_file(dir / "records.tsv");
    if (with_vocabs) {
      require_file(dir / "vocab_protein.txt");
      require_file(dir / "vocab_compound.txt");
      d.vocabs.protein = Vocab::load(dir / "vocab_protein.txt", VocabKind::protein);
      d.vocabs.compound = Vocab::load(dir / "vocab_compound.txt", VocabKind::compound);
    }
    for (const auto& r : load_records(dir / "records.tsv").records) {
      d.protein_seq.emplace(r.protein_id, r.protein_seq);
      d.compound_smiles.emplace(r.compound_id, r.compound_smiles);
    }
    return d;
  }

  const std::string& protein(const std::string& id) const {
    auto it = protein_seq.find(id);
    if (it == protein_seq.end()) throw DataError("unknown protein id '" + id + "'", 0);
    return it->second;
  }
  const std::string& compound(const std::string& id) const {
    auto it = compound_smiles.find(id);
    if (it == compound_smiles.end()) throw DataError("unknown compound id '" + id + "'", 0);
    return it->second;
  }
};

struct ArchFlags {
  int layers = 4;
  int d_model = 256;
  int heads = 4;
  int d_ff = 1024;
  double dropout = 0.1;

  void add_to(CLI::App* app) {
    app->add_option("--layers", layers, "Transformer layers")->check(CLI::PositiveNumber);
    app->add_option("--d-model", d_model, "Model width")->check(CLI::PositiveNumber);
    app->add_option("--heads", heads, "Attention heads")->check(CLI::PositiveNumber);
    app->add_option("--d-ff", d_ff, "Feed-forward width")->check(CLI::PositiveNumber);
    app->add_option("--dropout", dropout, "Residual dropout")->check(CLI::Range(0.0, 0.99));
  }
  ModelConfig config() const {
    if (d_model % heads != 0) throw ConfigError("--d-model must be divisible by --heads");
    ModelConfig mc;
    mc.n_layers = layers;
    mc.d_model = d_model;
    mc.n_heads = heads;
    mc.d_head = d_model / heads;
    mc.d_ff = d_ff;
    mc.dropout = dropout;
    return mc;
  }
  json to_json() const {
    return {{"layers", layers}, {"d_model", d_model}, {"heads", heads}, {"d_ff", d_ff}, {"dropout", dropout}};
  }
};

// ---------------------------------------------------------------- prep

struct PrepOptions {
  fs::path input;
  std::vector<double> synthetic;  // N_P N_C DENSITY
  DatasetConfig dataset;
  std::size_t max_per_pair = 8;
  std::size_t protein_len = 64;
  std::size_t compound_len = 48;
  fs::path out;
};

json prep(const PrepOptions& o, std::ostream& log) {
  DatasetConfig cfg = o.dataset;
  if (o.protein_len < 3 || o.compound_len < 3) throw ConfigError("sequence lengths must be at least 3");
  cfg.max_protein_len = o.protein_len - 2;
  cfg.max_compound_len = o.compound_len - 2;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  std::vector<InteractionRecord> records;
  json source;
  if (!o.input.empty()) {
    require_file(o.input);
    LoadResult loaded = load_records(o.input);
    records = std::move(loaded.records);
    source = {{"input", o.input.string()}, {"duplicates", loaded.duplicates}, {"dropped_empty", loaded.dropped_empty}};
  } else {
    if (o.synthetic[0] < 1 || o.synthetic[1] < 1) throw ConfigError("--synthetic needs positive node counts");
    records = generate_synthetic(static_cast<std::size_t>(o.synthetic[0]), static_cast<std::size_t>(o.synthetic[1]),
                                 o.synthetic[2], cfg.seed);
    source = {{"synthetic", o.synthetic}};
  }
  const std::size_t raw = records.size();
  records = filter_by_length(records, cfg);
  const std::size_t after_length = records.size();
  records = filter_by_degree(records, cfg);
  if (records.empty()) throw DataError("no records survive the length and degree filters", 0);
  const DatasetSplit split = split_no_protein_overlap(records, cfg);

  fs::create_directories(o.out);
  write_records(o.out / "records.tsv", records);
  write_records(o.out / "train.tsv", split.train);
  write_records(o.out / "test.tsv", split.test);
  const auto train_graph = build_graph(split.train);
  const auto test_graph = build_graph(split.test);
  const auto train_triples = mine_triples(train_graph, o.max_per_pair, cfg.seed);
  const auto test_triples = mine_triples(test_graph, o.max_per_pair, cfg.seed);
  write_triples(o.out / "triples.tsv", train_triples);
  write_triples(o.out / "triples_test.tsv", test_triples);
  const std::string protein_alpha(kProteinAlphabet), smiles_alpha(kSmilesAlphabet);
  Vocab(std::vector<char>(protein_alpha.begin(), protein_alpha.end()), VocabKind::protein)
      .save(o.out / "vocab_protein.txt");
  Vocab(std::vector<char>(smiles_alpha.begin(), smiles_alpha.end()), VocabKind::compound)
      .save(o.out / "vocab_compound.txt");

  auto graph_json = [](const InteractionGraph& g, std::size_t triples) {
    return json{{"proteins", g.protein_count()}, {"compounds", g.compound_count()}, {"edges", g.edge_count()},
                {"triples", triples}};
  };
  const json stats = {{"raw_records", raw},
                      {"after_length_filter", after_length},
                      {"after_degree_filter", records.size()},
                      {"train", graph_json(train_graph, train_triples.size())},
                      {"test", graph_json(test_graph, test_triples.size())}};
  {
    std::ofstream out(o.out / "graph_stats.json");
    out << stats.dump(2) << '\n';
  }
  log << "prep: " << records.size() << " records, " << train_triples.size() << " train triples, "
      << test_triples.size() << " test triples -> " << o.out.string() << '\n';

  const json config = {{"source", source},
                       {"min_degree", cfg.min_degree},
                       {"max_degree", cfg.max_degree},
                       {"split", cfg.split_ratio},
                       {"seed", cfg.seed},
                       {"max_per_pair", o.max_per_pair},
                       {"protein_len", o.protein_len},
                       {"compound_len", o.compound_len}};
  std::vector<fs::path> outputs;
  for (const char* f : {"records.tsv", "train.tsv", "test.tsv", "triples.tsv", "triples_test.tsv",
                        "vocab_protein.txt", "vocab_compound.txt", "graph_stats.json"}) {
    outputs.push_back(o.out / f);
  }
  write_manifest(o.out / "manifest.json", "prep", config, outputs, stats);
  return stats;
}

// ---------------------------------------------------------------- pretrain

struct PretrainOptions {
  std::string direction = "p2c";
  fs::path data;
  int epochs = 20;
  int batch = 64;
  double lr = 5e-5;
  std::uint64_t seed = 0;
  std::size_t protein_len = 64;
  std::size_t compound_len = 48;
  ArchFlags arch;
  fs::path out;
};

void pretrain(const PretrainOptions& o, std::ostream& log) {
  const DataDir data = DataDir::open(o.data);
  require_file(o.data / "train.tsv");
  const auto records = load_records(o.data / "train.tsv").records;
  std::vector<SequencePair> pairs;
  for (const auto& r : records) pairs.push_back({r.protein_seq, r.compound_smiles});
  if (pairs.empty()) throw DataError("train.tsv has no records", 0);

  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.lr = o.lr;
  cfg.seed = o.seed;
  cfg.memory.protein_len = o.protein_len;
  cfg.memory.compound_len = o.compound_len;
  cfg.memory.variant = Variant::sum_only;
  cfg.model = o.arch.config();
  const PretrainDirection dir = direction_from_string(o.direction);
  TrainLog train_log;
  const auto start = std::chrono::steady_clock::now();
  ModelBundle bundle = pretrain_direction(pairs, dir, data.vocabs, cfg, &train_log);
  ensure_parent(o.out);
  bundle.save(o.out, {{"direction", o.direction}});
  for (std::size_t e = 0; e < train_log.epoch_loss.size(); ++e) {
    log << "pretrain " << o.direction << " epoch " << e + 1 << " loss " << train_log.epoch_loss[e] << '\n';
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const json config = {{"direction", o.direction}, {"data", o.data.string()}, {"epochs", o.epochs},
                       {"batch", o.batch},          {"lr", o.lr},              {"seed", o.seed},
                       {"protein_len", o.protein_len}, {"compound_len", o.compound_len},
                       {"arch", o.arch.to_json()}};
  write_manifest(sidecar(o.out), "pretrain", config, {o.out},
                 {{"epoch_loss", train_log.epoch_loss},
                  {"parameter_hash", hex(bundle.parameter_hash())},
                  {"seconds", seconds}});
}

// ---------------------------------------------------------------- train

struct EncoderPair {
  ModelBundle enc_p;
  ModelBundle enc_c;
};

EncoderPair load_encoders(const fs::path& p, const fs::path& c) {
  require_file(p);
  require_file(c);
  json extra_p, extra_c;
  ModelBundle enc_p = ModelBundle::load(p, &extra_p);
  ModelBundle enc_c = ModelBundle::load(c, &extra_c);
  if (extra_p.value("direction", "") != "p2c") throw ConfigError(p.string() + " is not a p2c checkpoint");
  if (extra_c.value("direction", "") != "c2p") throw ConfigError(c.string() + " is not a c2p checkpoint");
  if (enc_p.config().d_model != enc_c.config().d_model) throw ConfigError("encoders differ in d_model");
  return {std::move(enc_p), std::move(enc_c)};
}

struct TrainOptions {
  fs::path data;
  fs::path enc_p;
  fs::path enc_c;
  std::string variant = "fft_lpf";
  std::optional<long> alpha;
  std::string lpf_mode = "both_axes";
  int epochs = 20;
  int batch = 64;
  double lr = 5e-5;
  std::uint64_t seed = 0;
  bool keep_same_protein = false;
  ArchFlags arch;
  fs::path out;
};

MemorySettings memory_settings(const std::string& variant, std::optional<long> alpha, const std::string& mode,
                               const EncoderPair& enc) {
  MemorySettings s;
  try {
    s.variant = variant_from_string(variant);
    s.lpf_mode = spectral::lpf_mode_from_string(mode);
    if (alpha) s.alpha = *alpha;
    s.protein_len = static_cast<std::size_t>(enc.enc_p.config().src_len);
    s.compound_len = static_cast<std::size_t>(enc.enc_c.config().src_len);
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

std::vector<TripleExample> triple_examples(std::span<const TripleSample> triples, const DataDir& data,
                                           bool keep_same_protein) {
  std::vector<TripleExample> out;
  for (const auto& t : triples) {
    if (t.same_protein() && !keep_same_protein) continue;
    out.push_back({data.protein(t.protein), data.compound(t.anchor), data.compound(t.positive)});
  }
  return out;
}

void train(const TrainOptions& o, std::ostream& log) {
  const DataDir data = DataDir::open(o.data);
  require_file(o.data / "triples.tsv");
  const EncoderPair enc = load_encoders(o.enc_p, o.enc_c);
  const std::uint64_t hash_p = file_hash(o.enc_p);
  const std::uint64_t hash_c = file_hash(o.enc_c);

  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.lr = o.lr;
  cfg.seed = o.seed;
  cfg.memory = memory_settings(o.variant, o.alpha, o.lpf_mode, enc);
  cfg.model = o.arch.config();
  cfg.drop_same_protein = !o.keep_same_protein;
  const auto triples = load_triples(o.data / "triples.tsv");
  const auto examples = triple_examples(triples, data, o.keep_same_protein);
  if (examples.empty()) throw DataError("no usable training triples", 0);

  TrainLog train_log;
  const auto start = std::chrono::steady_clock::now();
  RepurformerModel model = train_repurformer(examples, enc.enc_p, enc.enc_c, data.vocabs, cfg, &train_log);
  ensure_parent(o.out);
  model.save(o.out);
  for (std::size_t e = 0; e < train_log.epoch_loss.size(); ++e) {
    log << "train " << o.variant << " epoch " << e + 1 << " loss " << train_log.epoch_loss[e] << '\n';
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (file_hash(o.enc_p) != hash_p || file_hash(o.enc_c) != hash_c) {
    throw std::runtime_error("encoder checkpoints changed during decoder training");
  }
  const json config = {{"data", o.data.string()},       {"enc_p", o.enc_p.string()}, {"enc_c", o.enc_c.string()},
                       {"memory", cfg.memory.to_json()}, {"epochs", o.epochs},        {"batch", o.batch},
                       {"lr", o.lr},                    {"seed", o.seed},            {"arch", o.arch.to_json()},
                       {"keep_same_protein", o.keep_same_protein}};
  write_manifest(sidecar(o.out), "train", config, {o.out},
                 {{"epoch_loss", train_log.epoch_loss},
                  {"triples", examples.size()},
                  {"enc_p_hash", hex(hash_p)},
                  {"enc_c_hash", hex(hash_c)},
                  {"seconds", seconds}});
}

// ---------------------------------------------------------------- generate

struct GenerateOptions {
  fs::path decoder;
  fs::path enc_p;
  fs::path enc_c;
  fs::path triples;
  fs::path data;  // defaults to the triples file's directory
  std::string strategy = "greedy";
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::size_t samples = 1;
  std::optional<std::size_t> max_len;
  fs::path out;
};

std::vector<metrics::GeneratedRecord> generate_set(const GenerateOptions& o, std::ostream& log) {
  require_file(o.decoder);
  require_file(o.triples);
  const fs::path data_dir = o.data.empty() ? o.triples.parent_path() : o.data;
  const DataDir data = DataDir::open(data_dir.empty() ? fs::path(".") : data_dir);
  const EncoderPair enc = load_encoders(o.enc_p, o.enc_c);
  const RepurformerModel model = RepurformerModel::load(o.decoder);
  if (static_cast<std::size_t>(enc.enc_p.config().src_len) != model.settings.protein_len ||
      static_cast<std::size_t>(enc.enc_c.config().src_len) != model.settings.compound_len ||
      enc.enc_p.config().d_model != model.decoder.config().d_model) {
    throw ConfigError("decoder checkpoint does not match the encoders");
  }
  if (o.strategy != "greedy" && o.strategy != "sample") throw ConfigError("--strategy must be greedy or sample");
  if (o.strategy == "sample" && !(o.temperature > 0.0)) throw ConfigError("--temperature must be positive");

  std::vector<metrics::QueryKey> queries;
  std::set<metrics::QueryKey> seen;
  for (const auto& t : load_triples(o.triples)) {
    if (seen.insert({t.protein, t.anchor}).second) queries.push_back({t.protein, t.anchor});
  }
  if (queries.empty()) throw DataError(o.triples.string() + " has no triples", 0);

  std::vector<SequencePair> inputs;
  for (const auto& [p, a] : queries) inputs.push_back({data.protein(p), data.compound(a)});
  MemoryBuilder builder(enc.enc_p, enc.enc_c, data.vocabs, model.settings);
  const std::vector<Memory> memories = builder.build_many(inputs);

  GenerationConfig base;
  base.strategy = o.strategy == "greedy" ? Strategy::greedy : Strategy::sample;
  base.temperature = o.temperature;
  base.max_len = o.max_len.value_or(static_cast<std::size_t>(model.decoder.config().tgt_len - 2));
  const std::size_t n = queries.size() * o.samples;
  std::vector<metrics::GeneratedRecord> records(n);
  parallel_for(n, [&](std::size_t task) {
    const std::size_t q = task / o.samples;
    GenerationConfig cfg = base;
    std::seed_seq seq{static_cast<std::uint32_t>(o.seed), static_cast<std::uint32_t>(o.seed >> 32),
                      static_cast<std::uint32_t>(task)};
    std::mt19937_64 seeder(seq);
    cfg.seed = seeder();
    const GenerationResult r = generate_from_memory(model.decoder, memories[q], data.vocabs.compound, cfg);
    records[task] = {queries[q].first, queries[q].second, r.smiles, r.unk_present, r.truncated};
  });
  log << "generate: " << n << " samples for " << queries.size() << " queries\n";
  return records;
}

void generate_cmd(const GenerateOptions& o, std::ostream& log) {
  const auto records = generate_set(o, log);
  ensure_parent(o.out);
  metrics::write_generated(o.out, records);
  const json config = {{"decoder", o.decoder.string()}, {"enc_p", o.enc_p.string()},
                       {"enc_c", o.enc_c.string()},     {"triples", o.triples.string()},
                       {"strategy", o.strategy},        {"temperature", o.temperature},
                       {"seed", o.seed},                {"samples", o.samples},
                       {"max_len", o.max_len ? json(*o.max_len) : json(nullptr)}};
  std::size_t unk = 0, truncated = 0;
  for (const auto& r : records) {
    unk += r.unk_present;
    truncated += r.truncated;
  }
  write_manifest(sidecar(o.out), "generate", config, {o.out},
                 {{"samples", records.size()}, {"unk", unk}, {"truncated", truncated}});
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  fs::path generated;
  fs::path triples;
  fs::path data;
  std::string ngram = "1,2";
  fs::path out;
};

std::vector<int> parse_orders(const std::string& s) {
  std::vector<int> orders;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(item, &used);
      if (used != item.size() || n < 1) throw std::invalid_argument(item);
      orders.push_back(n);
    } catch (const std::exception&) {
      throw ConfigError("--ngram expects a comma-separated list of positive orders, got '" + s + "'");
    }
  }
  if (orders.empty()) throw ConfigError("--ngram is empty");
  return orders;
}

metrics::RunEvaluation evaluate(const EvalOptions& o, std::ostream& out) {
  require_file(o.generated);
  require_file(o.triples);
  const std::vector<int> orders = parse_orders(o.ngram);
  const fs::path data_dir = o.data.empty() ? o.triples.parent_path() : o.data;
  const DataDir data = DataDir::open(data_dir.empty() ? fs::path(".") : data_dir, false);
  std::map<metrics::QueryKey, metrics::QueryTargets> queries;
  for (const auto& t : load_triples(o.triples)) {
    auto& q = queries[{t.protein, t.anchor}];
    q.anchor_smiles = data.compound(t.anchor);
    const std::string& pos = data.compound(t.positive);
    if (std::find(q.positive_smiles.begin(), q.positive_smiles.end(), pos) == q.positive_smiles.end()) {
      q.positive_smiles.push_back(pos);
    }
  }
  const auto generated = metrics::load_generated(o.generated);
  metrics::RunEvaluation eval;
  try {
    eval = metrics::evaluate_run(generated, queries, orders);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what(), 0);
  }
  fs::create_directories(o.out);
  metrics::write_report_tsv(o.out / "report.tsv", eval);
  metrics::write_histogram_csv(o.out / "tanimoto_generated_vs_anchor.csv", eval.generated_vs_anchor);
  metrics::write_histogram_csv(o.out / "tanimoto_positive_vs_anchor.csv", eval.positive_vs_anchor);
  metrics::print_report(out, eval);
  const json config = {{"generated", o.generated.string()}, {"triples", o.triples.string()},
                       {"data", data_dir.string()},         {"ngram", orders}};
  json results = {{"vs_anchor", eval.vs_anchor.values},
                  {"vs_positive", eval.vs_positive.values},
                  {"validity", eval.validity},
                  {"uniqueness", eval.uniqueness},
                  {"total", eval.total},
                  {"excluded_unk", eval.excluded_unk}};
  write_manifest(o.out / "manifest.json", "eval", config,
                 {o.out / "report.tsv", o.out / "tanimoto_generated_vs_anchor.csv",
                  o.out / "tanimoto_positive_vs_anchor.csv"},
                 results);
  return eval;
}

// ---------------------------------------------------------------- demo

struct DemoOptions {
  std::uint64_t seed = 7;
  fs::path out = "repur_demo";
};

void demo(const DemoOptions& o, std::ostream& out) {
  std::ostringstream quiet;
  const auto start = std::chrono::steady_clock::now();
  PrepOptions p;
  p.synthetic = {16, 40, 0.25};
  p.dataset.min_degree = 2;
  p.dataset.max_degree = 100;
  p.dataset.seed = o.seed;
  p.max_per_pair = 2;
  p.out = o.out / "data";
  const json stats = prep(p, quiet);

  ArchFlags arch{.layers = 2, .d_model = 32, .heads = 2, .d_ff = 64, .dropout = 0.0};
  PretrainOptions pre;
  pre.data = p.out;
  pre.epochs = 8;
  pre.batch = 32;
  pre.lr = 1e-3;
  pre.seed = o.seed;
  pre.arch = arch;
  for (const char* dir : {"p2c", "c2p"}) {
    pre.direction = dir;
    pre.out = o.out / (std::string("pretrain_") + dir + ".ckpt");
    pretrain(pre, quiet);
  }

  TrainOptions tr;
  tr.data = p.out;
  tr.enc_p = o.out / "pretrain_p2c.ckpt";
  tr.enc_c = o.out / "pretrain_c2p.ckpt";
  tr.variant = "fft_lpf";
  tr.alpha = 4;
  tr.epochs = 40;
  tr.batch = 32;
  tr.lr = 1e-3;
  tr.seed = o.seed;
  tr.arch = arch;
  tr.out = o.out / "repurformer.ckpt";
  train(tr, quiet);

  GenerateOptions gen;
  gen.decoder = tr.out;
  gen.enc_p = tr.enc_p;
  gen.enc_c = tr.enc_c;
  gen.triples = p.out / "triples_test.tsv";
  gen.data = p.out;
  gen.strategy = "sample";
  gen.temperature = 1.0;
  gen.seed = o.seed;
  gen.out = o.out / "generated.tsv";
  generate_cmd(gen, quiet);

  EvalOptions ev;
  ev.generated = gen.out;
  ev.triples = gen.triples;
  ev.data = p.out;
  ev.out = o.out / "eval";
  std::ostringstream report;
  evaluate(ev, report);
  out << "demo seed " << o.seed << ": " << stats["after_degree_filter"] << " records, "
      << stats["train"]["triples"] << " train triples, " << stats["test"]["triples"] << " test triples\n";
  out << report.str();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(o.out / "manifest.json", "demo", {{"seed", o.seed}, {"out", o.out.string()}},
                 {o.out / "generated.tsv", o.out / "eval" / "report.tsv", tr.out}, {{"seconds", seconds}});
}

int classify(std::ostream& err, const std::exception& e, int code) {
  err << "error: " << e.what() << '\n';
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Target-conditioned compound generation with Fourier-filtered latents"};
  app.require_subcommand(1);

  PrepOptions prep_o;
  auto* prep_cmd = app.add_subcommand("prep", "Filter, split and mine triples");
  auto* in_opt = prep_cmd->add_option("--input", prep_o.input, "Interaction TSV");
  auto* syn_opt = prep_cmd->add_option("--synthetic", prep_o.synthetic, "N_P N_C DENSITY")->expected(3);
  in_opt->excludes(syn_opt);
  prep_cmd->add_option("--min-degree", prep_o.dataset.min_degree);
  prep_cmd->add_option("--max-degree", prep_o.dataset.max_degree);
  prep_cmd->add_option("--split", prep_o.dataset.split_ratio);
  prep_cmd->add_option("--seed", prep_o.dataset.seed);
  prep_cmd->add_option("--max-per-pair", prep_o.max_per_pair);
  prep_cmd->add_option("--protein-len", prep_o.protein_len);
  prep_cmd->add_option("--compound-len", prep_o.compound_len);
  prep_cmd->add_option("--out", prep_o.out)->required();

  PretrainOptions pre_o;
  auto* pre_cmd = app.add_subcommand("pretrain", "Train one direction of the bi-directional pretraining");
  pre_cmd->add_option("--direction", pre_o.direction)->check(CLI::IsMember({"p2c", "c2p"}))->required();
  pre_cmd->add_option("--data", pre_o.data)->required();
  pre_cmd->add_option("--epochs", pre_o.epochs)->check(CLI::PositiveNumber);
  pre_cmd->add_option("--batch", pre_o.batch)->check(CLI::PositiveNumber);
  pre_cmd->add_option("--lr", pre_o.lr)->check(CLI::PositiveNumber);
  pre_cmd->add_option("--seed", pre_o.seed);
  pre_cmd->add_option("--protein-len", pre_o.protein_len);
  pre_cmd->add_option("--compound-len", pre_o.compound_len);
  pre_o.arch.add_to(pre_cmd);
  pre_cmd->add_option("--out", pre_o.out)->required();

  TrainOptions tr_o;
  long alpha = 0;
  auto* tr_cmd = app.add_subcommand("train", "Train the compound decoder on frozen encoders");
  tr_cmd->add_option("--data", tr_o.data)->required();
  tr_cmd->add_option("--enc-p", tr_o.enc_p)->required();
  tr_cmd->add_option("--enc-c", tr_o.enc_c)->required();
  tr_cmd->add_option("--variant", tr_o.variant)->check(CLI::IsMember({"sum_only", "fft_lpf"}));
  auto* alpha_opt = tr_cmd->add_option("--alpha", alpha, "LPF cutoff");
  tr_cmd->add_option("--lpf-mode", tr_o.lpf_mode)->check(CLI::IsMember({"both_axes", "seq_only"}));
  tr_cmd->add_option("--epochs", tr_o.epochs)->check(CLI::PositiveNumber);
  tr_cmd->add_option("--batch", tr_o.batch)->check(CLI::PositiveNumber);
  tr_cmd->add_option("--lr", tr_o.lr)->check(CLI::PositiveNumber);
  tr_cmd->add_option("--seed", tr_o.seed);
  tr_cmd->add_flag("--keep-same-protein", tr_o.keep_same_protein);
  tr_o.arch.add_to(tr_cmd);
  tr_cmd->add_option("--out", tr_o.out)->required();

  GenerateOptions gen_o;
  std::size_t max_len = 0;
  auto* gen_cmd = app.add_subcommand("generate", "Generate compounds for the triples' queries");
  gen_cmd->add_option("--decoder", gen_o.decoder)->required();
  gen_cmd->add_option("--enc-p", gen_o.enc_p)->required();
  gen_cmd->add_option("--enc-c", gen_o.enc_c)->required();
  gen_cmd->add_option("--triples", gen_o.triples)->required();
  gen_cmd->add_option("--data", gen_o.data, "Prep directory (default: the triples file's directory)");
  gen_cmd->add_option("--strategy", gen_o.strategy)->check(CLI::IsMember({"greedy", "sample"}));
  gen_cmd->add_option("--temperature", gen_o.temperature)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen_o.seed);
  gen_cmd->add_option("--samples", gen_o.samples)->check(CLI::PositiveNumber);
  auto* max_len_opt = gen_cmd->add_option("--max-len", max_len)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--out", gen_o.out)->required();

  EvalOptions ev_o;
  auto* ev_cmd = app.add_subcommand("eval", "Score a generated set");
  ev_cmd->add_option("--generated", ev_o.generated)->required();
  ev_cmd->add_option("--triples", ev_o.triples)->required();
  ev_cmd->add_option("--data", ev_o.data, "Prep directory (default: the triples file's directory)");
  ev_cmd->add_option("--ngram", ev_o.ngram);
  ev_cmd->add_option("--out", ev_o.out)->required();

  DemoOptions demo_o;
  auto* demo_cmd = app.add_subcommand("demo", "End-to-end run on a small synthetic dataset");
  demo_cmd->add_option("--seed", demo_o.seed);
  demo_cmd->add_option("--out", demo_o.out);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*prep_cmd) {
      if (prep_o.input.empty() && prep_o.synthetic.empty()) throw ConfigError("prep needs --input or --synthetic");
      prep(prep_o, out);
    } else if (*pre_cmd) {
      pretrain(pre_o, out);
    } else if (*tr_cmd) {
      if (alpha_opt->count()) tr_o.alpha = alpha;
      train(tr_o, out);
    } else if (*gen_cmd) {
      if (max_len_opt->count()) gen_o.max_len = max_len;
      generate_cmd(gen_o, out);
    } else if (*ev_cmd) {
      evaluate(ev_o, out);
    } else if (*demo_cmd) {
      demo(demo_o, out);
    }
  } catch (const MissingFileError& e) {
    return classify(err, e, kExitMissingFile);
  } catch (const ConfigError& e) {
    return classify(err, e, kExitBadConfig);
  } catch (const DataError& e) {
    return classify(err, e, kExitDataError);
  } catch (const chem::SmilesError& e) {
    return classify(err, e, kExitDataError);
  } catch (const std::invalid_argument& e) {
    return classify(err, e, kExitBadConfig);
  } catch (const std::exception& e) {
    return classify(err, e, kExitFailure);
  }
  return kExitOk;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace repur
