#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "catfill/cli/commands.hpp"
#include "catfill/model/gradient_check.hpp"
#include "support.hpp"

using namespace catfill;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "catfill");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> tiny_train_flags() {
  return {"--embed-dim", "4", "--hidden-dim", "6", "--window", "2", "--batch-size", "32",
          "--max-epochs", "2", "--patience", "2", "--seeds", "1,2"};
}

// Synthetic check-ins prepared into a bundle under `dir`.
fs::path synthetic_bundle(const testing_support::TempDir& dir, const std::string& lambda = "0.6") {
  const auto raw = dir / "raw";
  EXPECT_EQ(run_cli({"synth", "--out", raw.string(), "--categories", "6", "--users", "5", "--length",
                     "40", "--lambda", lambda, "--seed", "3"})
                .code,
            0);
  const auto bundle = dir / "bundle";
  EXPECT_EQ(run_cli({"prepare", "--input", (raw / "checkins.tsv").string(), "--format", "simple3",
                     "--window", "2", "--out", bundle.string()})
                .code,
            0);
  return bundle;
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, cli::kUsageError);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kUsageError);
  EXPECT_EQ(run_cli({"eval", "--bundle", "x"}).code, cli::kUsageError);
  EXPECT_EQ(run_cli({"eval", "--bundle", "x", "--checkpoint", "y", "--split", "dev"}).code,
            cli::kUsageError);
  EXPECT_EQ(run_cli({"--config", "/nonexistent/cfg.txt", "baseline", "--bundle", "x"}).code,
            cli::kUsageError);
  const auto help = run_cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("gradcheck"), std::string::npos);
}

TEST(Cli, MissingInputs) {
  testing_support::TempDir dir("cli_missing");
  const auto r = run_cli({"prepare", "--input", (dir / "nope.tsv").string(), "--out", (dir / "b").string()});
  EXPECT_EQ(r.code, cli::kMissingInput);
  EXPECT_NE(r.err.find("nope.tsv"), std::string::npos);
  EXPECT_EQ(run_cli({"baseline", "--bundle", (dir / "none").string()}).code, cli::kMissingInput);
  EXPECT_EQ(run_cli({"eval", "--bundle", (dir / "none").string(), "--checkpoint", (dir / "ck").string()}).code,
            cli::kMissingInput);
}

TEST(Cli, BadDataIsDataError) {
  testing_support::TempDir dir("cli_bad");
  std::ofstream(dir / "raw.tsv") << "only\ttwo\n"
                                  << "cols\there\n";
  const auto r = run_cli({"prepare", "--input", (dir / "raw.tsv").string(), "--format", "simple3",
                          "--out", (dir / "b").string()});
  EXPECT_EQ(r.code, cli::kDataError);
  // a checkpoint trained for another vocabulary
  const auto bundle = synthetic_bundle(dir);
  const model::Hyperparams hp{7, 5, 2, 2, 2, model::Direction::Bi, model::PreferenceInit::Counting};
  model::save_checkpoint(dir / "ck", {hp, 1, model::ModelParams::zeros(hp)});
  EXPECT_EQ(run_cli({"eval", "--bundle", bundle.string(), "--checkpoint", (dir / "ck").string()}).code,
            cli::kDataError);
}

TEST(Cli, GradcheckPassesAndFailsWithCode) {
  const auto ok = run_cli({"gradcheck", "--seeds", "1,2"});
  EXPECT_EQ(ok.code, 0) << ok.out << ok.err;
  EXPECT_NE(ok.out.find("PASS"), std::string::npos);
  // a huge step cannot meet the tolerance
  const auto bad = run_cli({"gradcheck", "--seeds", "1", "--step", "0.5"});
  EXPECT_EQ(bad.code, cli::kCheckFailed);
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
  EXPECT_EQ(run_cli({"gradcheck", "--categories", "0"}).code, cli::kUsageError);
}

TEST(Cli, PrepareStatsAndRejects) {
  testing_support::TempDir dir("cli_prepare");
  {
    std::ofstream raw(dir / "raw.tsv");
    for (int i = 0; i < 12; ++i) raw << "alice\tcafe\t2012-04-03T10:" << (10 + i) << ":00Z\n";
    for (int i = 0; i < 3; ++i) raw << "bob\tbar\t2012-04-03T10:" << (10 + i) << ":00Z\n";
    for (int i = 0; i < 10; ++i) raw << "carol\t" << (i % 2 ? "bar" : "gym") << "\t2012-04-04T08:" << (10 + i) << ":00Z\n";
    for (int i = 0; i < 200; ++i) raw << "dave\tcafe\t2012-04-05T08:" << (10 + i % 40) << ":00Z\n";
    raw << "broken line\n";
  }
  const auto r = run_cli({"prepare", "--input", (dir / "raw.tsv").string(), "--format", "simple3",
                          "--out", (dir / "b").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "users=3 categories=3 checkins=222 avg_checkins=74.0\n");
  EXPECT_NE(r.err.find(":226: rejected"), std::string::npos);
  EXPECT_EQ(slurp(dir / "b" / "rejects.txt").rfind("226\t", 0), 0u);
}

TEST(Cli, SyntheticBundleRoundTripsThroughPrepare) {
  testing_support::TempDir dir("cli_roundtrip");
  const auto bundle = synthetic_bundle(dir);
  const auto loaded = data::load_bundle(bundle);
  const auto world = synthetic::read_world(dir / "raw" / "world.txt");
  const auto paths = synthetic::sample_paths(world);
  ASSERT_EQ(loaded.dataset.users.size(), paths.size());
  for (std::size_t u = 0; u < paths.size(); ++u) {
    const auto& seq = loaded.dataset.users[u];
    ASSERT_EQ(seq.categories.size(), paths[u].size());
    for (std::size_t i = 0; i < seq.categories.size(); ++i)
      EXPECT_EQ(loaded.dataset.vocab.category_name(seq.categories[i]), synthetic::category_name(paths[u][i]));
  }
}

TEST(Cli, TrainWritesArtifactsAndReplaysFromManifest) {
  testing_support::TempDir dir("cli_train");
  const auto bundle = synthetic_bundle(dir);
  auto args = std::vector<std::string>{"train", "--bundle", bundle.string(), "--out", (dir / "run1").string()};
  for (const auto& f : tiny_train_flags()) args.push_back(f);
  const auto r = run_cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"manifest.txt", "metrics.csv", "seed_1/runlog.csv", "seed_1/timing.csv",
                        "seed_2/checkpoint/manifest.txt", "seed_2/checkpoint/output.bin"})
    EXPECT_TRUE(fs::exists(dir / "run1" / f)) << f;
  const auto manifest = slurp(dir / "run1" / "manifest.txt");
  EXPECT_EQ(manifest.rfind("meta.command=train\n", 0), 0u);
  EXPECT_NE(manifest.find("seeds=1,2\n"), std::string::npos);
  EXPECT_NE(r.out.find("map="), std::string::npos);
  const auto metrics_csv = slurp(dir / "run1" / "metrics.csv");
  EXPECT_NE(metrics_csv.find("mean,test,map,"), std::string::npos);

  const auto replay = run_cli({"--config", (dir / "run1" / "manifest.txt").string(), "train", "--out",
                               (dir / "run2").string()});
  ASSERT_EQ(replay.code, 0) << replay.err;
  for (const char* f : {"metrics.csv", "seed_1/runlog.csv", "seed_1/checkpoint/output.bin",
                        "seed_2/checkpoint/forward_lstm.recurrent.bin", "seed_2/checkpoint/manifest.txt"})
    EXPECT_EQ(slurp(dir / "run1" / f), slurp(dir / "run2" / f)) << f;

  const auto eval = run_cli({"eval", "--checkpoint", (dir / "run1" / "seed_1" / "checkpoint").string(),
                             "--bundle", bundle.string(), "--split", "test", "--csv",
                             (dir / "eval.csv").string()});
  ASSERT_EQ(eval.code, 0) << eval.err;
  EXPECT_NE(slurp(dir / "eval.csv").find("seed_1,test,map,"), std::string::npos);
  EXPECT_NE(r.out.find("seed=1 "), std::string::npos);
}

TEST(Cli, FlagsOverrideConfigFile) {
  testing_support::TempDir dir("cli_config");
  const auto bundle = synthetic_bundle(dir);
  std::ofstream(dir / "cfg.txt") << "# tiny\nembed-dim=4\nhidden-dim=6\nwindow=2\nmax-epochs=1\n"
                                    "seeds=5\nbundle="
                                 << bundle.string() << "\n";
  const auto r = run_cli({"train", "--config", (dir / "cfg.txt").string(), "--out", (dir / "run").string(),
                          "--hidden-dim", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto manifest = slurp(dir / "run" / "manifest.txt");
  EXPECT_NE(manifest.find("hidden-dim=3\n"), std::string::npos);
  EXPECT_NE(manifest.find("embed-dim=4\n"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "run" / "seed_5"));
  std::ofstream(dir / "dup.txt") << "window=2\nwindow=3\n";
  EXPECT_EQ(run_cli({"train", "--config", (dir / "dup.txt").string(), "--bundle", bundle.string(), "--out",
                     (dir / "x").string()})
                .code,
            cli::kUsageError);
  EXPECT_EQ(run_cli({"train", "--bundle", bundle.string(), "--out", (dir / "y").string(), "--direction",
                     "sideways"})
                .code,
            cli::kUsageError);
}

TEST(Cli, BaselineTop1OnIidWorldPicksMostFrequentCategory) {
  testing_support::TempDir dir("cli_baseline");
  const auto bundle = synthetic_bundle(dir, "0");
  const auto b = data::load_bundle(bundle);
  std::vector<int> counts(static_cast<std::size_t>(b.dataset.vocab.category_count()) + 1);
  for (const auto& s : b.samples)
    if (s.split == data::Split::Train) ++counts[static_cast<std::size_t>(s.target)];
  const auto top = std::max_element(counts.begin() + 1, counts.end()) - counts.begin();
  const auto fitted = baselines::CountingBaselines::fit(b.samples, b.dataset.vocab.category_count(),
                                                        b.dataset.vocab.user_count());
  EXPECT_EQ(metrics::rank_categories(fitted.rank(b.samples.front(), baselines::Method::Top1)).front(), top);

  const auto r = run_cli({"baseline", "--bundle", bundle.string(), "--method", "all", "--export-tables",
                          (dir / "tables").string(), "--csv", (dir / "b.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* m : {"# forward test", "# backward test", "# top1 test", "# top2 test"})
    EXPECT_NE(r.out.find(m), std::string::npos) << m;
  EXPECT_TRUE(fs::exists(dir / "tables" / "forward.tsv"));
  EXPECT_TRUE(fs::exists(dir / "tables" / "backward.tsv"));
  EXPECT_NE(slurp(dir / "b.csv").find("top2,test,recall@1,"), std::string::npos);
  EXPECT_EQ(run_cli({"baseline", "--bundle", bundle.string(), "--method", "top3"}).code, cli::kUsageError);
}

TEST(Cli, ProbeWithFreshInitAndCheckpoint) {
  testing_support::TempDir dir("cli_probe");
  const auto bundle = synthetic_bundle(dir);
  const auto p = run_cli({"probe", "--bundle", bundle.string(), "--mode", "p", "--split", "test"});
  ASSERT_EQ(p.code, 0) << p.err;
  const auto top2 = run_cli({"baseline", "--bundle", bundle.string(), "--method", "top2"});
  // counting-initialized preference ranks exactly like TOP2
  EXPECT_EQ(p.out.substr(p.out.find('\n')), top2.out.substr(top2.out.find('\n')));
  EXPECT_EQ(run_cli({"probe", "--bundle", bundle.string(), "--mode", "sideways"}).code, cli::kUsageError);
}

TEST(Cli, ZeroCheckpointRecallMatchesUniformExpectation) {
  testing_support::TempDir dir("cli_zero");
  const int M = 251;
  const auto ds = model::random_dataset(M, 120, 90, 110, 8);
  data::write_bundle(dir / "bundle", ds, data::materialize(ds, 2), 2);
  const model::Hyperparams hp{M, 120, 3, 3, 2, model::Direction::Bi, model::PreferenceInit::Random};
  model::save_checkpoint(dir / "ck", {hp, 0, model::ModelParams::zeros(hp)});
  const auto r = run_cli({"eval", "--checkpoint", (dir / "ck").string(), "--bundle",
                          (dir / "bundle").string(), "--csv", (dir / "m.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  // uniform scores rank 1..M in order, so recall@10 is the share of test targets in 1..10
  const auto set = data::partition(ds, 2);
  double hits = 0;
  for (const auto& s : set.test) hits += s.target <= 10;
  const double expected = hits / static_cast<double>(set.test.size());
  const auto csv = slurp(dir / "m.csv");
  const auto pos = csv.find("test,recall@10,");
  ASSERT_NE(pos, std::string::npos);
  const double recall10 = std::stod(csv.substr(pos + 15));
  EXPECT_NEAR(recall10, expected, 1e-9);
  EXPECT_NEAR(recall10, 10.0 / M, 0.02);
}

TEST(Cli, GridWritesTable) {
  testing_support::TempDir dir("cli_grid");
  const auto bundle = synthetic_bundle(dir);
  const auto r = run_cli({"grid", "--bundle", bundle.string(), "--out", (dir / "g").string(), "--embed-dims",
                          "2,4", "--hidden-dims", "3", "--windows", "1,2", "--max-epochs", "1", "--seeds", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(dir / "g" / "grid.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  std::size_t selected = 0;
  for (auto pos = csv.find(",1\n"); pos != std::string::npos; pos = csv.find(",1\n", pos + 1)) ++selected;
  EXPECT_EQ(selected, 1u);
  EXPECT_NE(slurp(dir / "g" / "manifest.txt").find("windows=1,2\n"), std::string::npos);
}

TEST(Cli, ExecutableExitCodes) {
  testing_support::TempDir dir("cli_exe");
  const std::string tool = CATFILL_TOOL;
  auto status = [&](const std::string& args) {
    const int raw = std::system((tool + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(status("--version"), 0);
  EXPECT_EQ(status("bogus"), cli::kUsageError);
  EXPECT_EQ(status("prepare --input " + (dir / "none.tsv").string() + " --out " + (dir / "b").string()),
            cli::kMissingInput);
  EXPECT_EQ(status("gradcheck --seeds 1"), 0);
}
