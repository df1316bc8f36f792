#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <sys/wait.h>

#include "json.hpp"
#include "repur/commands.hpp"
#include "repur/dataio.hpp"
#include "repur/metrics.hpp"
#include "repur/pcgraph.hpp"
#include "support.hpp"

using namespace repur;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

int process_exit(const std::string& args) {
  const std::string cmd = std::string(REPUR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const std::vector<std::string> kTinyArch = {"--layers", "1", "--d-model", "16", "--heads", "2", "--d-ff", "32",
                                            "--dropout", "0"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Minimal prep directory: records plus triples whose positives we control.
void write_eval_fixture(const repur::testing::TempDir& dir) {
  const std::vector<InteractionRecord> records = {
      {"P1", "C1", "MKV", "CCO"}, {"P1", "C2", "MKV", "CCN"}, {"P2", "C2", "MKL", "CCN"},
      {"P2", "C3", "MKL", "c1ccccc1"}, {"P3", "C3", "MAV", "c1ccccc1"}};
  write_records(dir / "records.tsv", records);
  const std::vector<TripleSample> triples = {{"P1", "C1", "C3", "P2"}, {"P2", "C2", "C1", "P1"}};
  write_triples(dir / "triples.tsv", triples);
  const std::vector<metrics::GeneratedRecord> generated = {{"P1", "C1", "c1ccccc1"}, {"P2", "C2", "CCO"}};
  metrics::write_generated(dir / "generated.tsv", generated);
}

}  // namespace

TEST(Cli, UnknownFlagIsUsageError) {
  EXPECT_EQ(cli({"prep", "--bogus", "1", "--out", "x"}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(process_exit("eval --nope"), kExitUsage);
}

TEST(Cli, HelpSucceeds) { EXPECT_EQ(cli({"--help"}).code, kExitOk); }

TEST(Cli, MissingFile) {
  repur::testing::TempDir dir("cli");
  EXPECT_EQ(cli({"prep", "--input", (dir / "absent.tsv").string(), "--out", (dir / "o").string()}).code,
            kExitMissingFile);
  EXPECT_EQ(process_exit("eval --generated /nonexistent/g.tsv --triples /nonexistent/t.tsv --out /tmp/x"),
            kExitMissingFile);
}

TEST(Cli, MalformedDataIsDataError) {
  repur::testing::TempDir dir("cli");
  repur::testing::write_file(dir / "bad.tsv", "protein_id\tcompound_id\tprotein_seq\tcompound_smiles\nP1\tC1\n");
  EXPECT_EQ(cli({"prep", "--input", (dir / "bad.tsv").string(), "--out", (dir / "o").string()}).code,
            kExitDataError);
}

TEST(Cli, InconsistentConfigRejected) {
  repur::testing::TempDir dir("cli");
  const std::string data = (dir / "data").string();
  ASSERT_EQ(cli({"prep", "--synthetic", "6", "12", "0.5", "--min-degree", "2", "--seed", "1", "--out", data}).code,
            kExitOk);
  const auto enc = [&](const std::string& d) {
    return cli(with({"pretrain", "--direction", d, "--data", data, "--epochs", "1", "--batch", "16", "--out",
                     (dir / (d + ".ckpt")).string()},
                    kTinyArch));
  };
  ASSERT_EQ(enc("p2c").code, kExitOk);
  ASSERT_EQ(enc("c2p").code, kExitOk);
  const std::vector<std::string> base = {"train", "--data", data, "--enc-p", (dir / "p2c.ckpt").string(), "--enc-c",
                                         (dir / "c2p.ckpt").string(), "--epochs", "1", "--out",
                                         (dir / "d.ckpt").string()};
  EXPECT_EQ(cli(with(base, {"--variant", "sum_only", "--alpha", "4"})).code, kExitBadConfig);
  EXPECT_EQ(cli(with(base, {"--variant", "fft_lpf"})).code, kExitBadConfig);
  // encoders passed in swapped slots
  std::vector<std::string> swapped = base;
  std::swap(swapped[4], swapped[6]);
  EXPECT_EQ(cli(with(swapped, {"--variant", "sum_only"})).code, kExitBadConfig);
  EXPECT_EQ(cli({"prep", "--synthetic", "6", "12", "0.5", "--split", "1.5", "--out", data}).code, kExitBadConfig);
}

TEST(Cli, EvalOnPositivesScoresOne) {
  repur::testing::TempDir dir("cli");
  write_eval_fixture(dir);
  const CliRun r = cli({"eval", "--generated", (dir / "generated.tsv").string(), "--triples",
                     (dir / "triples.tsv").string(), "--ngram", "1,2", "--out", (dir / "report").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const std::string report = repur::testing::read_file(dir / "report" / "report.tsv");
  std::istringstream lines(report);
  int checked = 0;
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind("vs_positive\t", 0) != 0) continue;
    std::istringstream fields(line);
    std::string group, metric, value;
    std::getline(fields, group, '\t');
    std::getline(fields, metric, '\t');
    std::getline(fields, value, '\t');
    if (metric == "samples") continue;
    EXPECT_DOUBLE_EQ(std::stod(value), 1.0) << metric;
    ++checked;
  }
  EXPECT_EQ(checked, 6);
  EXPECT_TRUE(std::filesystem::exists(dir / "report" / "tanimoto_generated_vs_anchor.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "report" / "tanimoto_positive_vs_anchor.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "report" / "manifest.json"));
}

TEST(Cli, FullLoopAndAlphaSweep) {
  repur::testing::TempDir dir("cli");
  const std::string data = (dir / "data").string();
  ASSERT_EQ(cli({"prep", "--synthetic", "8", "20", "0.4", "--min-degree", "2", "--max-per-pair", "2", "--seed", "3",
                 "--out", data})
                .code,
            kExitOk);
  for (const char* f : {"records.tsv", "train.tsv", "test.tsv", "triples.tsv", "vocab_protein.txt",
                        "vocab_compound.txt", "graph_stats.json", "manifest.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "data" / f)) << f;
  }
  for (const std::string d : {"p2c", "c2p"}) {
    const CliRun r = cli(with({"pretrain", "--direction", d, "--data", data, "--epochs", "1", "--batch", "32", "--lr",
                            "1e-3", "--seed", "2", "--out", (dir / (d + ".ckpt")).string()},
                           kTinyArch));
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }
  const auto enc_p = (dir / "p2c.ckpt").string(), enc_c = (dir / "c2p.ckpt").string();
  const std::string triples = (dir / "data" / "triples.tsv").string();
  for (const std::string alpha : {"2", "4", "6", "8"}) {
    const std::string dec = (dir / ("dec" + alpha + ".ckpt")).string();
    const std::string gen = (dir / ("gen" + alpha + ".tsv")).string();
    const std::string rep = (dir / ("report" + alpha)).string();
    CliRun r = cli(with({"train", "--data", data, "--enc-p", enc_p, "--enc-c", enc_c, "--variant", "fft_lpf", "--alpha",
                      alpha, "--epochs", "1", "--batch", "32", "--lr", "1e-3", "--out", dec},
                     kTinyArch));
    ASSERT_EQ(r.code, kExitOk) << r.err;
    r = cli({"generate", "--decoder", dec, "--enc-p", enc_p, "--enc-c", enc_c, "--triples", triples, "--strategy",
             "sample", "--temperature", "1.0", "--seed", "4", "--max-len", "12", "--out", gen});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_FALSE(metrics::load_generated(gen).empty());
    r = cli({"eval", "--generated", gen, "--triples", triples, "--out", rep});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(rep) / "report.tsv")) << alpha;
    const auto manifest = nlohmann::json::parse(repur::testing::read_file(dec + ".manifest.json"));
    EXPECT_EQ(manifest.dump().find("\"alpha\":" + alpha) != std::string::npos, true) << manifest.dump();
  }
}
