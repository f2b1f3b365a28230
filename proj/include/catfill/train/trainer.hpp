#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "catfill/data/dataset.hpp"
#include "catfill/error.hpp"
#include "catfill/metrics/ranking.hpp"
#include "catfill/model/network.hpp"
#include "catfill/model/params.hpp"
#include "catfill/nd/adam.hpp"
#include "catfill/nd/rng.hpp"

namespace catfill::train {

using model::Direction;
using model::Hyperparams;
using model::ModelParams;
using model::PreferenceInit;

struct TrainConfig {
  std::size_t embed_dim = 128;
  std::size_t hidden_dim = 512;
  std::size_t window = 18;
  std::size_t batch_size = 128;
  double learning_rate = 0.001;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  PreferenceInit preference_init = PreferenceInit::Counting;
  Direction direction = Direction::Bi;
  bool skip_padded = false;  // drop training samples whose windows contain PAD

  void validate() const {
    if (batch_size < 1) throw ContractError("train config: batch_size must be at least 1");
    if (patience < 1) throw ContractError("train config: patience must be at least 1");
    if (embed_dim < 1 || hidden_dim < 1 || window < 1)
      throw ContractError("train config: embed_dim, hidden_dim, window must be at least 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw ContractError("train config: learning_rate must be finite and non-negative");
  }

  Hyperparams hyperparams(int categories, int users) const {
    return Hyperparams{categories, users, embed_dim, hidden_dim, window, direction, preference_init};
  }
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  metrics::EvalReport validation;
  double wall_seconds = 0.0;
};

struct RunLog {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 before any epoch

  /// One line per epoch. Wall time is left out so that identical runs
  /// produce identical bytes; see write_timing_csv.
  void write_csv(std::ostream& out) const {
    out << "epoch,train_loss,val_recall@1,val_recall@5,val_recall@10,val_map,best\n";
    out.precision(17);
    for (const auto& e : epochs) {
      out << e.epoch << "," << e.train_loss << "," << e.validation.recall[0] << ","
          << e.validation.recall[1] << "," << e.validation.recall[2] << "," << e.validation.map
          << "," << (e.epoch == best_epoch ? 1 : 0) << "\n";
    }
  }

  void write_timing_csv(std::ostream& out) const {
    out << "epoch,wall_seconds\n";
    for (const auto& e : epochs) out << e.epoch << "," << e.wall_seconds << "\n";
  }
};

/// Row u = user u's train-position category frequencies; users without train
/// positions get the uniform row.
inline nd::Tensor init_ep_counting(std::span<const data::Sample> samples, int users, int categories) {
  const auto M = static_cast<std::size_t>(categories);
  nd::Tensor ep(static_cast<std::size_t>(users), M);
  std::vector<std::size_t> totals(static_cast<std::size_t>(users));
  for (const auto& s : samples) {
    if (s.split != data::Split::Train) continue;
    require(s.user >= 0 && s.user < users && s.target >= 1 && s.target <= categories,
            "init_ep_counting: sample index out of range");
    ep(static_cast<std::size_t>(s.user), static_cast<std::size_t>(s.target - 1)) += 1.0;
    ++totals[static_cast<std::size_t>(s.user)];
  }
  for (std::size_t u = 0; u < totals.size(); ++u) {
    auto row = ep.row(u);
    if (totals[u] == 0) {
      for (auto& v : row) v = 1.0 / static_cast<double>(M);
    } else {
      for (auto& v : row) v /= static_cast<double>(totals[u]);
    }
  }
  return ep;
}

/// Initial parameters for one run: glorot everywhere, then the preference
/// matrix from counts when requested.
inline ModelParams initial_params(const Hyperparams& hp, std::span<const data::Sample> train,
                                  std::uint64_t seed) {
  auto params = model::initialize(hp, seed);
  if (hp.preference_init == PreferenceInit::Counting)
    params.preference = init_ep_counting(train, hp.users, hp.categories);
  return params;
}

inline metrics::EvalReport evaluate(model::Network& net, std::span<const data::Sample> samples) {
  metrics::Evaluator ev;
  for (const auto& s : samples) ev.add(net.probabilities(s), s.target);
  return ev.report();
}

inline metrics::EvalReport evaluate(const Hyperparams& hp, const ModelParams& params,
                                    std::span<const data::Sample> samples) {
  model::Network net(hp, params);
  return evaluate(net, samples);
}

struct TrainResult {
  Hyperparams hyperparams;
  ModelParams params;  // from the best validation-MAP epoch
  RunLog log;
};

/// Shuffled mini-batch Adam with early stopping on validation MAP.
inline TrainResult train_loop(const TrainConfig& config, const data::SampleSet& data,
                              std::uint64_t seed, std::ostream* progress = nullptr) {
  config.validate();
  if (data.train.empty() || data.val.empty())
    throw DataError("train_loop: train and validation splits must be non-empty");
  const auto hp = config.hyperparams(data.categories, data.users);
  hp.validate();

  std::vector<data::Sample> train;
  train.reserve(data.train.size());
  for (const auto& s : data.train)
    if (!config.skip_padded || !s.padded()) train.push_back(s);
  if (train.empty()) throw DataError("train_loop: no training samples left after filtering");

  TrainResult result{hp, initial_params(hp, data.train, seed), {}};
  ModelParams params = result.params;
  model::Network net(hp, params);
  nd::Adam adam(nd::AdamOptions{config.learning_rate});
  const auto param_ptrs = params.tensors();
  nd::Rng shuffler(nd::mix_seed(seed, 0x5EED));

  std::vector<std::size_t> order(train.size());
  std::vector<data::Sample> batch;
  double best_map = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffler.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(train[order[i]]);
      double batch_loss = 0.0;
      const auto& grads = net.gradient(batch, &batch_loss);
      if (!std::isfinite(batch_loss))
        throw NumericError("train_loop: non-finite loss at epoch " + std::to_string(epoch));
      loss_sum += batch_loss * static_cast<double>(batch.size());
      const auto grad_ptrs = grads.tensors();
      adam.step(param_ptrs, grad_ptrs);
    }
    if (!params.all_finite())
      throw NumericError("train_loop: parameters became non-finite at epoch " + std::to_string(epoch));

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(train.size());
    log.validation = evaluate(net, data.val);
    log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.epochs.push_back(log);

    if (log.validation.map > best_map) {
      best_map = log.validation.map;
      result.log.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (progress) {
      *progress << "seed " << seed << " epoch " << epoch << " loss " << log.train_loss
                << " val_map " << log.validation.map << (since_best == 0 ? " *" : "") << "\n";
    }
    if (since_best >= config.patience) break;
  }
  return result;
}

struct SeedReport {
  std::uint64_t seed = 0;
  metrics::EvalReport test;
  RunLog log;
};

struct MultiSeedReport {
  std::vector<SeedReport> per_seed;
  metrics::EvalReport mean;

  double map_population_std() const {
    if (per_seed.empty()) return 0.0;
    double var = 0.0;
    for (const auto& r : per_seed) var += (r.test.map - mean.map) * (r.test.map - mean.map);
    return std::sqrt(var / static_cast<double>(per_seed.size()));
  }
};

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers; results must be
/// written to per-index slots so the outcome does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// One independent run per seed, each evaluated on the test split.
inline MultiSeedReport multi_seed_eval(const TrainConfig& config, const data::SampleSet& data,
                                       std::ostream* progress = nullptr, std::size_t threads = 1) {
  require(!config.seeds.empty(), "multi_seed_eval: at least one seed required");
  MultiSeedReport out;
  out.per_seed.resize(config.seeds.size());
  parallel_for(config.seeds.size(), threads, [&](std::size_t i) {
    const auto seed = config.seeds[i];
    auto run = train_loop(config, data, seed, threads == 1 ? progress : nullptr);
    out.per_seed[i] = {seed, evaluate(run.hyperparams, run.params, data.test), std::move(run.log)};
  });
  std::vector<metrics::EvalReport> reports;
  for (const auto& r : out.per_seed) reports.push_back(r.test);
  out.mean = metrics::mean_report(reports);
  return out;
}

struct Grid {
  std::vector<std::size_t> embed_dims;
  std::vector<std::size_t> hidden_dims;
  std::vector<std::size_t> windows;
};

struct GridRow {
  std::size_t embed_dim = 0, hidden_dim = 0, window = 0;
  double val_map = 0.0;
  double test_map = 0.0;
  bool selected = false;
};

/// Trains one model per grid point (first configured seed) and marks the
/// point with the highest validation MAP; the first one wins ties.
inline std::vector<GridRow> grid_search(const Grid& grid, const TrainConfig& config,
                                        const data::Dataset& dataset,
                                        std::ostream* progress = nullptr, std::size_t threads = 1) {
  require(!grid.embed_dims.empty() && !grid.hidden_dims.empty() && !grid.windows.empty(),
          "grid_search: every grid axis needs at least one value");
  require(!config.seeds.empty(), "grid_search: at least one seed required");
  std::vector<GridRow> rows;
  for (auto w : grid.windows)
    for (auto d : grid.embed_dims)
      for (auto h : grid.hidden_dims) rows.push_back({d, h, w});

  parallel_for(rows.size(), threads, [&](std::size_t i) {
    auto& row = rows[i];
    TrainConfig c = config;
    c.embed_dim = row.embed_dim;
    c.hidden_dim = row.hidden_dim;
    c.window = row.window;
    const auto data = data::partition(dataset, row.window);
    auto run = train_loop(c, data, config.seeds.front(), threads == 1 ? progress : nullptr);
    row.val_map = run.log.epochs[run.log.best_epoch - 1].validation.map;
    row.test_map = evaluate(run.hyperparams, run.params, data.test).map;
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].val_map > rows[best].val_map) best = i;
  rows[best].selected = true;
  return rows;
}

}  // namespace catfill::train
