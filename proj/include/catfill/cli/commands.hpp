#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "catfill/baselines/counting.hpp"
#include "catfill/cli/config.hpp"
#include "catfill/data/bundle.hpp"
#include "catfill/data/dataset.hpp"
#include "catfill/data/ingest.hpp"
#include "catfill/error.hpp"
#include "catfill/metrics/ranking.hpp"
#include "catfill/model/gradient_check.hpp"
#include "catfill/model/network.hpp"
#include "catfill/model/params.hpp"
#include "catfill/synthetic/world.hpp"
#include "catfill/train/trainer.hpp"

#ifndef CATFILL_VERSION
#define CATFILL_VERSION "0.0.0"
#endif

namespace catfill::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kInternalError = 1,
  kUsageError = 2,     // bad flags, bad or conflicting config
  kMissingInput = 3,   // input file, bundle or checkpoint not found
  kDataError = 4,      // malformed or incompatible data
  kNumericError = 5,   // NaN/Inf during training or evaluation
  kCheckFailed = 6,    // an internal invariant or acceptance check failed
};

/// Raised when a command finished but one of its own checks failed.
class CheckFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return data::format_iso8601_utc(static_cast<std::int64_t>(t));
}

inline std::string bundle_hash(const fs::path& dir) {
  std::uint64_t h = 0;
  for (const char* f : {"bundle.txt", "vocab.txt", "users.txt", "samples.txt"})
    h = h * 31 + fnv1a_file(dir / f);
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

using Snapshot = std::vector<std::pair<std::string, std::string>>;

/// Run manifest: metadata under "meta." plus the full option snapshot, so
/// the file can be replayed with --config.
inline void write_manifest(const fs::path& dir, const std::string& command,
                           const Snapshot& config, const std::string& input_hash) {
  fs::create_directories(dir);
  std::ofstream out(dir / "manifest.txt", std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in '" + dir.string() + "'");
  out << "meta.command=" << command << "\n"
      << "meta.tool_version=" << CATFILL_VERSION << "\n"
      << "meta.started_utc=" << utc_now() << "\n"
      << "meta.input_hash=" << input_hash << "\n";
  for (const auto& [k, v] : config) out << k << "=" << v << "\n";
}

inline void check_report(const metrics::EvalReport& r, const std::string& what) {
  const double tol = 1e-12;
  const bool ok = r.recall[0] <= r.recall[1] + tol && r.recall[1] <= r.recall[2] + tol &&
                  std::abs(r.f1[0] - r.recall[0]) <= tol && r.map + tol >= r.recall[0] &&
                  r.map <= 1.0 + tol;
  if (!ok) throw CheckFailed(what + ": evaluation report violates metric invariants");
}

struct TrainOptions {
  train::TrainConfig config;
  std::string direction = "bi";
  std::string preference_init = "counting";
  std::size_t threads = 1;

  void add_to(CLI::App* app) {
    auto& c = config;
    app->add_option("--embed-dim", c.embed_dim, "Category embedding dimension d")->capture_default_str();
    app->add_option("--hidden-dim", c.hidden_dim, "LSTM output dimension h")->capture_default_str();
    app->add_option("--window", c.window, "Context window width w")->capture_default_str();
    app->add_option("--batch-size", c.batch_size, "Mini-batch size")->capture_default_str();
    app->add_option("--learning-rate", c.learning_rate, "Adam learning rate")->capture_default_str();
    app->add_option("--max-epochs", c.max_epochs, "Epoch budget")->capture_default_str();
    app->add_option("--patience", c.patience, "Early-stopping patience in epochs")->capture_default_str();
    app->add_option("--seeds", c.seeds, "Comma-separated run seeds")->delimiter(',')->capture_default_str();
    app->add_option("--direction", direction, "bi | forward_only | backward_only")->capture_default_str();
    app->add_option("--preference-init", preference_init, "counting | random")->capture_default_str();
    app->add_flag("--skip-padded", c.skip_padded, "Drop training samples with PAD context");
    app->add_option("--threads", threads, "Worker cap for independent runs")->capture_default_str();
  }

  void finalize() {
    try {
      config.direction = model::parse_direction(direction);
      config.preference_init = model::parse_preference_init(preference_init);
      config.validate();
    } catch (const ContractError& e) {
      throw ConfigError(e.what());
    }
    if (config.seeds.empty()) throw ConfigError("--seeds must list at least one seed");
    if (threads < 1) throw ConfigError("--threads must be at least 1");
  }

  Snapshot snapshot() const {
    const auto& c = config;
    return {{"embed-dim", std::to_string(c.embed_dim)},
            {"hidden-dim", std::to_string(c.hidden_dim)},
            {"window", std::to_string(c.window)},
            {"batch-size", std::to_string(c.batch_size)},
            {"learning-rate", fmt(c.learning_rate)},
            {"max-epochs", std::to_string(c.max_epochs)},
            {"patience", std::to_string(c.patience)},
            {"seeds", join(c.seeds)},
            {"direction", std::string(model::to_string(c.direction))},
            {"preference-init", std::string(model::to_string(c.preference_init))},
            {"skip-padded", c.skip_padded ? "true" : "false"},
            {"threads", std::to_string(threads)}};
  }
};

/// Samples for a bundle at window w; rebuilt from the sequences when w
/// differs from the bundle's own width.
inline data::SampleSet sample_set(const data::Bundle& b, std::size_t w) {
  const int M = b.dataset.vocab.category_count();
  const int N = b.dataset.vocab.user_count();
  if (w == b.window) return data::partition(b.samples, M, N);
  return data::partition(b.dataset, w);
}

inline void print_report(std::ostream& out, const std::string& title, const metrics::EvalReport& r) {
  out << "# " << title << "\n" << r.to_key_values();
}

}  // namespace detail

inline int cmd_prepare(const std::string& input, const std::string& format, std::size_t min_checkins,
                       std::size_t window, const std::string& out_dir, std::ostream& out,
                       std::ostream& err) {
  if (!fs::exists(input)) throw IoError("input file '" + input + "' does not exist");
  data::InputFormat fmt_kind;
  try {
    fmt_kind = data::parse_format(format);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  if (window < 1) throw ConfigError("--window must be at least 1");
  auto ingested = data::ingest(input, fmt_kind);
  for (const auto& r : ingested.rejects) err << input << ":" << r.line << ": rejected: " << r.reason << "\n";
  const auto ds = data::filter_users(ingested.records, min_checkins);
  const auto samples = data::materialize(ds, window);
  data::write_bundle(out_dir, ds, samples, window);
  {
    std::ofstream rej(fs::path(out_dir) / "rejects.txt", std::ios::trunc);
    for (const auto& r : ingested.rejects) rej << r.line << "\t" << r.reason << "\n";
  }
  const auto st = data::stats(ds);
  out << "users=" << st.users << " categories=" << st.categories << " checkins=" << st.checkins
      << " avg_checkins=" << std::fixed << std::setprecision(1) << st.average << "\n";
  out.unsetf(std::ios::fixed);
  out << std::setprecision(6);
  return kOk;
}

inline int cmd_train(const std::string& bundle_dir, const std::string& out_dir,
                     detail::TrainOptions opts, std::ostream& out, std::ostream& err) {
  opts.finalize();
  const auto bundle = data::load_bundle(bundle_dir);
  const auto& cfg = opts.config;
  auto snap = opts.snapshot();
  snap.insert(snap.begin(), {{"bundle", bundle_dir}, {"out", out_dir}});
  detail::write_manifest(out_dir, "train", snap, detail::bundle_hash(bundle_dir));

  const auto data = detail::sample_set(bundle, cfg.window);
  std::vector<train::TrainResult> runs(cfg.seeds.size());
  train::parallel_for(cfg.seeds.size(), opts.threads, [&](std::size_t i) {
    runs[i] = train::train_loop(cfg, data, cfg.seeds[i], opts.threads == 1 ? &err : nullptr);
  });

  std::ofstream metrics_csv(fs::path(out_dir) / "metrics.csv", std::ios::trunc);
  metrics_csv << metrics::kCsvHeader;
  std::vector<metrics::EvalReport> tests;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& run = runs[i];
    const auto seed = cfg.seeds[i];
    const fs::path dir = fs::path(out_dir) / ("seed_" + std::to_string(seed));
    model::save_checkpoint(dir / "checkpoint", {run.hyperparams, seed, run.params});
    {
      std::ofstream log(dir / "runlog.csv", std::ios::trunc);
      run.log.write_csv(log);
      std::ofstream timing(dir / "timing.csv", std::ios::trunc);
      run.log.write_timing_csv(timing);
    }
    const auto test = train::evaluate(run.hyperparams, run.params, data.test);
    detail::check_report(test, "seed " + std::to_string(seed));
    tests.push_back(test);
    metrics_csv << test.to_csv_rows("seed_" + std::to_string(seed), "test");
    out << "seed=" << seed << " best_epoch=" << run.log.best_epoch
        << " epochs=" << run.log.epochs.size() << " test_map=" << test.map << "\n";
  }
  const auto mean = metrics::mean_report(tests);
  metrics_csv << mean.to_csv_rows("mean", "test");
  detail::print_report(out, "test mean over " + std::to_string(tests.size()) + " seed(s)", mean);
  return kOk;
}

inline int cmd_eval(const std::string& checkpoint_dir, const std::string& bundle_dir,
                    const std::string& split, const std::string& csv_path, std::ostream& out) {
  const auto ck = model::load_checkpoint(checkpoint_dir);
  const auto bundle = data::load_bundle(bundle_dir);
  if (ck.hyperparams.categories != bundle.dataset.vocab.category_count() ||
      ck.hyperparams.users != bundle.dataset.vocab.user_count())
    throw DataError("checkpoint was trained for M=" + std::to_string(ck.hyperparams.categories) +
                    ", N=" + std::to_string(ck.hyperparams.users) + " but the bundle has M=" +
                    std::to_string(bundle.dataset.vocab.category_count()) +
                    ", N=" + std::to_string(bundle.dataset.vocab.user_count()));
  const auto data = detail::sample_set(bundle, ck.hyperparams.window);
  const auto report = train::evaluate(ck.hyperparams, ck.params, data.of(data::parse_split(split)));
  detail::check_report(report, "eval");
  detail::print_report(out, "eval " + split, report);
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw IoError("cannot write '" + csv_path + "'");
    csv << metrics::kCsvHeader << report.to_csv_rows("seed_" + std::to_string(ck.seed), split);
  }
  return kOk;
}

inline int cmd_baseline(const std::string& bundle_dir, const std::string& method,
                        const std::string& split, const std::string& tables_dir,
                        const std::string& csv_path, std::ostream& out) {
  const auto bundle = data::load_bundle(bundle_dir);
  const int M = bundle.dataset.vocab.category_count();
  const int N = bundle.dataset.vocab.user_count();
  const auto fitted = baselines::CountingBaselines::fit(bundle.samples, M, N);
  std::vector<std::string> methods;
  if (method == "all")
    methods = {"forward", "backward", "top1", "top2"};
  else
    methods = {method};
  const auto which = data::parse_split(split);
  std::ofstream csv;
  if (!csv_path.empty()) {
    csv.open(csv_path, std::ios::trunc);
    if (!csv) throw IoError("cannot write '" + csv_path + "'");
    csv << metrics::kCsvHeader;
  }
  for (const auto& m : methods) {
    baselines::Method kind;
    try {
      kind = baselines::parse_method(m);
    } catch (const ContractError& e) {
      throw ConfigError(e.what());
    }
    metrics::Evaluator ev;
    for (const auto& s : bundle.samples)
      if (s.split == which) ev.add(fitted.rank(s, kind), s.target);
    const auto report = ev.report();
    detail::check_report(report, m);
    detail::print_report(out, m + " " + split, report);
    if (csv.is_open()) csv << report.to_csv_rows(m, split);
  }
  if (!tables_dir.empty()) {
    fs::create_directories(tables_dir);
    std::ofstream f(fs::path(tables_dir) / "forward.tsv", std::ios::trunc);
    fitted.forward_table().write_tsv(f);
    std::ofstream b(fs::path(tables_dir) / "backward.tsv", std::ios::trunc);
    fitted.backward_table().write_tsv(b);
  }
  return kOk;
}

inline int cmd_probe(const std::string& bundle_dir, const std::string& checkpoint_dir,
                     const std::string& mode, const std::string& split, std::uint64_t init_seed,
                     std::ostream& out) {
  const auto bundle = data::load_bundle(bundle_dir);
  model::ProbeMode probe_mode;
  try {
    probe_mode = model::parse_probe_mode(mode);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  model::Hyperparams hp;
  model::ModelParams params;
  if (!checkpoint_dir.empty()) {
    auto ck = model::load_checkpoint(checkpoint_dir);
    hp = ck.hyperparams;
    params = std::move(ck.params);
  } else {
    // Fresh initialization; only the embedding tables matter to a probe.
    hp = model::Hyperparams{bundle.dataset.vocab.category_count(), bundle.dataset.vocab.user_count(),
                            1, 1, bundle.window, model::Direction::Bi, model::PreferenceInit::Counting};
    params = train::initial_params(hp, bundle.samples, init_seed);
  }
  if (hp.categories != bundle.dataset.vocab.category_count() || hp.users != bundle.dataset.vocab.user_count())
    throw DataError("checkpoint and bundle disagree on M or N");
  const auto data = detail::sample_set(bundle, hp.window);
  metrics::Evaluator ev;
  for (const auto& s : data.of(data::parse_split(split)))
    ev.add(model::probe_identify(s, params, hp, probe_mode), s.target);
  const auto report = ev.report();
  detail::check_report(report, "probe");
  detail::print_report(out, "probe " + mode + " " + split, report);
  return kOk;
}

inline constexpr double kGradCheckTolerance = 1e-4;

inline int cmd_gradcheck(const model::Hyperparams& hp, const std::vector<std::uint64_t>& seeds,
                         std::size_t batch, double step, std::ostream& out) {
  if (seeds.empty()) throw ConfigError("--seeds must list at least one seed");
  try {
    hp.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  double worst = 0.0;
  for (auto seed : seeds) {
    const auto r = model::check_model_gradient(hp, seed, batch, step);
    out << "seed=" << seed << " max_rel_error=" << std::scientific << std::setprecision(3)
        << r.max_rel_error << " worst=" << r.worst_tensor << "\n";
    for (std::size_t i = 0; i < r.names.size(); ++i)
      out << "  " << r.names[i] << " " << r.per_tensor[i] << "\n";
    out.unsetf(std::ios::scientific);
    out << std::setprecision(6);
    worst = std::max(worst, r.max_rel_error);
  }
  const bool pass = worst < kGradCheckTolerance;
  out << "max_rel_error=" << std::scientific << std::setprecision(3) << worst
      << " tolerance=" << kGradCheckTolerance << " " << (pass ? "PASS" : "FAIL") << "\n";
  out.unsetf(std::ios::scientific);
  out << std::setprecision(6);
  if (!pass) throw CheckFailed("gradient check exceeded tolerance");
  return kOk;
}

inline int cmd_synth(const synthetic::WorldParams& p, const std::string& out_dir, std::ostream& out) {
  synthetic::WorldSpec world;
  try {
    world = synthetic::make_world(p);
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  fs::create_directories(out_dir);
  const auto records = synthetic::generate_records(world);
  {
    std::ofstream tsv(fs::path(out_dir) / "checkins.tsv", std::ios::trunc);
    if (!tsv) throw IoError("cannot write into '" + out_dir + "'");
    synthetic::write_simple3(tsv, records);
    std::ofstream spec(fs::path(out_dir) / "world.txt", std::ios::trunc);
    synthetic::write_world(spec, world);
  }
  out << "wrote " << records.size() << " check-ins for " << world.users << " users over "
      << world.categories << " categories to " << out_dir << "\n";
  return kOk;
}

inline int cmd_grid(const std::string& bundle_dir, const std::string& out_dir,
                    const train::Grid& grid, detail::TrainOptions opts, std::ostream& out,
                    std::ostream& err) {
  opts.finalize();
  if (grid.embed_dims.empty() || grid.hidden_dims.empty() || grid.windows.empty())
    throw ConfigError("grid axes must be non-empty");
  const auto bundle = data::load_bundle(bundle_dir);
  auto snap = opts.snapshot();
  snap.insert(snap.begin(), {{"bundle", bundle_dir},
                             {"out", out_dir},
                             {"embed-dims", detail::join(grid.embed_dims)},
                             {"hidden-dims", detail::join(grid.hidden_dims)},
                             {"windows", detail::join(grid.windows)}});
  detail::write_manifest(out_dir, "grid", snap, detail::bundle_hash(bundle_dir));
  const auto rows = train::grid_search(grid, opts.config, bundle.dataset, &err, opts.threads);
  std::ofstream csv(fs::path(out_dir) / "grid.csv", std::ios::trunc);
  csv << "embed_dim,hidden_dim,window,val_map,test_map,selected\n";
  csv << std::setprecision(10);
  out << "embed_dim hidden_dim window val_map test_map\n";
  for (const auto& r : rows) {
    csv << r.embed_dim << "," << r.hidden_dim << "," << r.window << "," << r.val_map << ","
        << r.test_map << "," << (r.selected ? 1 : 0) << "\n";
    out << r.embed_dim << " " << r.hidden_dim << " " << r.window << " " << r.val_map << " "
        << r.test_map << (r.selected ? " *" : "") << "\n";
  }
  return kOk;
}

/// Entry point shared by the executable and in-process tests. args[0] is the
/// program name.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Missing check-in category identification: data preparation, training, evaluation"};
  app.set_version_flag("--version", CATFILL_VERSION);
  app.require_subcommand(1);
  app.add_option("--config", "Plain-text key=value config; flags override it");

  std::function<int()> action;

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Ingest raw check-ins into a dataset bundle");
  std::string p_input, p_format = "foursquare8", p_out;
  std::size_t p_min = 10, p_window = 18;
  prepare->add_option("--input", p_input, "Raw check-in file")->required();
  prepare->add_option("--format", p_format, "foursquare8 | simple3")->capture_default_str();
  prepare->add_option("--min-checkins", p_min, "Drop users with fewer check-ins")->capture_default_str();
  prepare->add_option("--window", p_window, "Context window width stored in the bundle")->capture_default_str();
  prepare->add_option("--out", p_out, "Bundle directory")->required();
  prepare->callback([&] {
    action = [&] { return cmd_prepare(p_input, p_format, p_min, p_window, p_out, out, err); };
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one model per seed and evaluate on test");
  std::string t_bundle, t_out;
  detail::TrainOptions t_opts;
  train_cmd->add_option("--bundle", t_bundle, "Dataset bundle directory")->required();
  train_cmd->add_option("--out", t_out, "Run output directory")->required();
  t_opts.add_to(train_cmd);
  train_cmd->callback([&] { action = [&] { return cmd_train(t_bundle, t_out, t_opts, out, err); }; });

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a bundle split");
  std::string e_ck, e_bundle, e_split = "test", e_csv;
  eval->add_option("--checkpoint", e_ck, "Checkpoint directory")->required();
  eval->add_option("--bundle", e_bundle, "Dataset bundle directory")->required();
  eval->add_option("--split", e_split, "train | val | test")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  eval->add_option("--csv", e_csv, "Also write metrics as CSV");
  eval->callback([&] { action = [&] { return cmd_eval(e_ck, e_bundle, e_split, e_csv, out); }; });

  // baseline
  auto* baseline = app.add_subcommand("baseline", "Counting baselines (forward, backward, top1, top2)");
  std::string b_bundle, b_method = "all", b_split = "test", b_tables, b_csv;
  baseline->add_option("--bundle", b_bundle, "Dataset bundle directory")->required();
  baseline->add_option("--method", b_method, "forward | backward | top1 | top2 | all")->capture_default_str();
  baseline->add_option("--split", b_split, "train | val | test")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  baseline->add_option("--export-tables", b_tables, "Write transition tables as TSV here");
  baseline->add_option("--csv", b_csv, "Also write metrics as CSV");
  baseline->callback([&] {
    action = [&] { return cmd_baseline(b_bundle, b_method, b_split, b_tables, b_csv, out); };
  });

  // probe
  auto* probe = app.add_subcommand("probe", "Rank directly with the transition or preference embeddings");
  std::string pr_bundle, pr_ck, pr_mode = "p", pr_split = "test";
  std::uint64_t pr_seed = 1;
  probe->add_option("--bundle", pr_bundle, "Dataset bundle directory")->required();
  probe->add_option("--checkpoint", pr_ck, "Checkpoint; omit to probe a fresh counting initialization");
  probe->add_option("--mode", pr_mode, "gf | gb | gf+gb | p")->capture_default_str();
  probe->add_option("--split", pr_split, "train | val | test")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  probe->add_option("--init-seed", pr_seed, "Seed for a fresh initialization")->capture_default_str();
  probe->callback([&] {
    action = [&] { return cmd_probe(pr_bundle, pr_ck, pr_mode, pr_split, pr_seed, out); };
  });

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the full model gradient");
  model::Hyperparams g_hp{10, 6, 8, 12, 3, model::Direction::Bi, model::PreferenceInit::Random};
  std::vector<std::uint64_t> g_seeds = {1};
  std::size_t g_batch = 8;
  double g_step = 3e-4;
  std::string g_direction = "bi";
  gradcheck->add_option("--categories", g_hp.categories, "M")->capture_default_str();
  gradcheck->add_option("--users", g_hp.users, "N")->capture_default_str();
  gradcheck->add_option("--embed-dim", g_hp.embed_dim, "d")->capture_default_str();
  gradcheck->add_option("--hidden-dim", g_hp.hidden_dim, "h")->capture_default_str();
  gradcheck->add_option("--window", g_hp.window, "w")->capture_default_str();
  gradcheck->add_option("--direction", g_direction, "bi | forward_only | backward_only")->capture_default_str();
  gradcheck->add_option("--seeds", g_seeds, "Comma-separated seeds")->delimiter(',')->capture_default_str();
  gradcheck->add_option("--batch", g_batch, "Samples in the checked batch")->capture_default_str();
  gradcheck->add_option("--step", g_step, "Central-difference step")->capture_default_str();
  gradcheck->callback([&] {
    action = [&] {
      try {
        g_hp.direction = model::parse_direction(g_direction);
      } catch (const ContractError& e) {
        throw ConfigError(e.what());
      }
      return cmd_gradcheck(g_hp, g_seeds, g_batch, g_step, out);
    };
  });

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a planted synthetic world as simple3 TSV");
  synthetic::WorldParams s_params;
  std::string s_out;
  synth->add_option("--out", s_out, "Output directory")->required();
  synth->add_option("--categories", s_params.categories, "M")->capture_default_str();
  synth->add_option("--users", s_params.users, "N")->capture_default_str();
  synth->add_option("--length", s_params.length, "Check-ins per user")->capture_default_str();
  synth->add_option("--lambda", s_params.mixing, "Weight of the global transition kernel")->capture_default_str();
  synth->add_option("--seed", s_params.seed, "World seed")->capture_default_str();
  synth->add_option("--transition-concentration", s_params.transition_concentration,
                    "Dirichlet concentration of kernel rows")->capture_default_str();
  synth->add_option("--preference-concentration", s_params.preference_concentration,
                    "Dirichlet concentration of user preferences")->capture_default_str();
  synth->callback([&] { action = [&] { return cmd_synth(s_params, s_out, out); }; });

  // grid
  auto* grid_cmd = app.add_subcommand("grid", "Grid search over d, h, w");
  std::string gr_bundle, gr_out;
  train::Grid grid{{128}, {512}, {18}};
  detail::TrainOptions gr_opts;
  grid_cmd->add_option("--bundle", gr_bundle, "Dataset bundle directory")->required();
  grid_cmd->add_option("--out", gr_out, "Output directory")->required();
  grid_cmd->add_option("--embed-dims", grid.embed_dims, "Comma-separated d values")->delimiter(',')->capture_default_str();
  grid_cmd->add_option("--hidden-dims", grid.hidden_dims, "Comma-separated h values")->delimiter(',')->capture_default_str();
  grid_cmd->add_option("--windows", grid.windows, "Comma-separated w values")->delimiter(',')->capture_default_str();
  gr_opts.add_to(grid_cmd);
  grid_cmd->callback([&] { action = [&] { return cmd_grid(gr_bundle, gr_out, grid, gr_opts, out, err); }; });

  try {
    args = merge_config_args(args);
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    const int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? kOk : kUsageError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    return action ? action() : kUsageError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kMissingInput;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericError;
  } catch (const CheckFailed& e) {
    err << "error: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
}

}  // namespace catfill::cli
