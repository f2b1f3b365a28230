#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "catfill/error.hpp"

namespace catfill::metrics {

// Scores are indexed by category - 1 (categories are 1-based; PAD is never scored).
// Rankings list category indices best first; equal scores fall back to the
// smaller category index.

inline std::vector<int> rank_categories(std::span<const double> scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a - 1)] > scores[static_cast<std::size_t>(b - 1)];
  });
  return order;
}

/// 1-based rank of `truth` under the same ordering as rank_categories, in O(M).
inline std::size_t rank_of(std::span<const double> scores, int truth) {
  require(truth >= 1 && static_cast<std::size_t>(truth) <= scores.size(),
          "rank_of: truth category out of range");
  const auto t = static_cast<std::size_t>(truth - 1);
  const double st = scores[t];
  std::size_t rank = 1;
  for (std::size_t j = 0; j < scores.size(); ++j)
    if (scores[j] > st || (scores[j] == st && j < t)) ++rank;
  return rank;
}

inline int recall_at_k(std::span<const int> ranking, int truth, int k) {
  require(k >= 1, "recall_at_k: k must be at least 1");
  require(truth >= 1, "recall_at_k: truth must be a real category");
  const auto n = std::min(static_cast<std::size_t>(k), ranking.size());
  return std::find(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(n), truth) !=
                 ranking.begin() + static_cast<std::ptrdiff_t>(n)
             ? 1
             : 0;
}

/// With one relevant item per sample, precision@K = hit/K, so the harmonic
/// mean of the averaged recall R and precision R/K is 2R/(K+1).
inline double f1_at_k(double recall_mean, int k) {
  return 2.0 * recall_mean / (static_cast<double>(k) + 1.0);
}

/// Mean reciprocal rank of the truth: average precision with a single
/// relevant item.
inline double mean_average_precision(std::span<const std::vector<int>> rankings,
                                     std::span<const int> truths) {
  require(rankings.size() == truths.size(), "map: one truth per ranking required");
  if (rankings.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    const auto& r = rankings[i];
    const auto it = std::find(r.begin(), r.end(), truths[i]);
    require(it != r.end(), "map: truth missing from ranking");
    total += 1.0 / static_cast<double>(it - r.begin() + 1);
  }
  return total / static_cast<double>(rankings.size());
}

inline constexpr std::array<int, 3> kCutoffs = {1, 5, 10};

struct EvalReport {
  std::array<double, 3> recall{};  // @1, @5, @10
  std::array<double, 3> f1{};
  double map = 0.0;
  std::size_t sample_count = 0;

  double recall_at(int k) const { return recall[index(k)]; }
  double f1_at(int k) const { return f1[index(k)]; }

  /// Flat "key=value" lines.
  std::string to_key_values() const {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed;
    for (std::size_t i = 0; i < 3; ++i) out << "recall@" << kCutoffs[i] << "=" << recall[i] << "\n";
    for (std::size_t i = 0; i < 3; ++i) out << "f1@" << kCutoffs[i] << "=" << f1[i] << "\n";
    out << "map=" << map << "\n"
        << "samples=" << sample_count << "\n";
    return out.str();
  }

  /// Rows "run_id,split,metric,value".
  std::string to_csv_rows(const std::string& run_id, const std::string& split) const {
    std::ostringstream out;
    out.precision(10);
    for (std::size_t i = 0; i < 3; ++i)
      out << run_id << "," << split << ",recall@" << kCutoffs[i] << "," << recall[i] << "\n";
    for (std::size_t i = 0; i < 3; ++i)
      out << run_id << "," << split << ",f1@" << kCutoffs[i] << "," << f1[i] << "\n";
    out << run_id << "," << split << ",map," << map << "\n";
    return out.str();
  }

  static std::size_t index(int k) {
    for (std::size_t i = 0; i < kCutoffs.size(); ++i)
      if (kCutoffs[i] == k) return i;
    throw ContractError("EvalReport: no metric at K=" + std::to_string(k));
  }
};

inline constexpr const char* kCsvHeader = "run_id,split,metric,value\n";

/// Streams (scores, truth) pairs; reductions happen in insertion order.
class Evaluator {
 public:
  void add(std::span<const double> scores, int truth) { add_rank(rank_of(scores, truth)); }

  void add_rank(std::size_t rank) {
    for (std::size_t i = 0; i < 3; ++i)
      if (rank <= static_cast<std::size_t>(kCutoffs[i])) hits_[i] += 1.0;
    reciprocal_ += 1.0 / static_cast<double>(rank);
    ++count_;
  }

  EvalReport report() const {
    EvalReport r;
    r.sample_count = count_;
    if (count_ == 0) return r;
    const double n = static_cast<double>(count_);
    for (std::size_t i = 0; i < 3; ++i) {
      r.recall[i] = hits_[i] / n;
      r.f1[i] = f1_at_k(r.recall[i], kCutoffs[i]);
    }
    r.map = reciprocal_ / n;
    return r;
  }

 private:
  std::array<double, 3> hits_{};
  double reciprocal_ = 0.0;
  std::size_t count_ = 0;
};

/// Elementwise mean of several reports.
inline EvalReport mean_report(std::span<const EvalReport> reports) {
  EvalReport m;
  if (reports.empty()) return m;
  const double n = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < 3; ++i) {
      m.recall[i] += r.recall[i] / n;
      m.f1[i] += r.f1[i] / n;
    }
    m.map += r.map / n;
  }
  m.sample_count = reports.front().sample_count;
  return m;
}

}  // namespace catfill::metrics
