#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "catfill/data/dataset.hpp"
#include "catfill/error.hpp"

namespace catfill::baselines {

enum class Method { Forward, Backward, Top1, Top2 };

inline Method parse_method(std::string_view s) {
  if (s == "forward") return Method::Forward;
  if (s == "backward") return Method::Backward;
  if (s == "top1") return Method::Top1;
  if (s == "top2") return Method::Top2;
  throw ContractError("unknown baseline method '" + std::string(s) +
                      "' (forward, backward, top1, top2)");
}

enum class TransitionDirection { Forward, Backward };

/// counts(from, to), both 1-based categories. Forward tables count
/// previous -> next; backward tables count next -> previous.
struct TransitionTable {
  TransitionDirection direction = TransitionDirection::Forward;
  int categories = 0;
  std::vector<std::uint64_t> counts;  // M x M, row = from - 1

  std::uint64_t at(int from, int to) const {
    return counts[static_cast<std::size_t>(from - 1) * static_cast<std::size_t>(categories) +
                  static_cast<std::size_t>(to - 1)];
  }
  std::uint64_t& at(int from, int to) {
    return counts[static_cast<std::size_t>(from - 1) * static_cast<std::size_t>(categories) +
                  static_cast<std::size_t>(to - 1)];
  }

  TransitionTable transposed() const {
    TransitionTable t{direction == TransitionDirection::Forward ? TransitionDirection::Backward
                                                                : TransitionDirection::Forward,
                      categories, counts};
    for (int a = 1; a <= categories; ++a)
      for (int b = 1; b <= categories; ++b) t.at(b, a) = at(a, b);
    return t;
  }

  /// Non-zero cells as "from_idx\tto_idx\tcount" lines.
  void write_tsv(std::ostream& out) const {
    for (int a = 1; a <= categories; ++a)
      for (int b = 1; b <= categories; ++b)
        if (const auto c = at(a, b)) out << a << '\t' << b << '\t' << c << '\n';
  }
};

struct PopularityTable {
  int categories = 0;
  std::vector<std::uint64_t> global;    // M
  std::vector<std::uint64_t> per_user;  // N x M

  std::span<const std::uint64_t> user(int u) const {
    return {per_user.data() + static_cast<std::size_t>(u) * static_cast<std::size_t>(categories),
            static_cast<std::size_t>(categories)};
  }
};

/// Forward / Backward / TOP1 / TOP2 counting predictors fitted on train
/// positions. A transition pair counts only when both endpoints are train
/// positions of the same user; no smoothing.
class CountingBaselines {
 public:
  CountingBaselines() = default;

  static CountingBaselines fit(std::span<const data::Sample> samples, int categories, int users) {
    require(categories >= 1 && users >= 1, "baselines: need at least one category and user");
    CountingBaselines b;
    const auto M = static_cast<std::size_t>(categories);
    b.forward_ = {TransitionDirection::Forward, categories, std::vector<std::uint64_t>(M * M)};
    b.backward_ = {TransitionDirection::Backward, categories, std::vector<std::uint64_t>(M * M)};
    b.popularity_ = {categories, std::vector<std::uint64_t>(M),
                     std::vector<std::uint64_t>(static_cast<std::size_t>(users) * M)};

    struct Point {
      int user;
      std::size_t position;
      int category;
    };
    std::vector<Point> points;
    for (const auto& s : samples) {
      if (s.split != data::Split::Train) continue;
      require(s.user >= 0 && s.user < users && s.target >= 1 && s.target <= categories,
              "baselines: sample index out of range");
      points.push_back({s.user, s.position, s.target});
    }
    std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) {
      return a.user != b.user ? a.user < b.user : a.position < b.position;
    });
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& p = points[i];
      ++b.popularity_.global[static_cast<std::size_t>(p.category - 1)];
      ++b.popularity_.per_user[static_cast<std::size_t>(p.user) * M +
                               static_cast<std::size_t>(p.category - 1)];
      if (i + 1 < points.size() && points[i + 1].user == p.user &&
          points[i + 1].position == p.position + 1) {
        ++b.forward_.at(p.category, points[i + 1].category);
        ++b.backward_.at(points[i + 1].category, p.category);
      }
    }
    b.users_ = users;
    b.fitted_ = true;
    return b;
  }

  bool fitted() const { return fitted_; }
  const TransitionTable& forward_table() const { return checked(forward_); }
  const TransitionTable& backward_table() const { return checked(backward_); }
  const PopularityTable& popularity() const { return checked(popularity_); }

  /// Scores over categories 1..M (index category - 1). Rank with
  /// metrics::rank_categories for the index tie-break.
  std::vector<double> rank(const data::Sample& sample, Method method) const {
    require(fitted_, "baselines: rank() called before fit()");
    const auto M = static_cast<std::size_t>(popularity_.categories);
    std::vector<double> scores(M, 0.0);
    auto from_row = [&](const TransitionTable& t, int from) {
      if (from == data::kPad) return;
      require(from >= 1 && from <= t.categories, "baselines: context index out of range");
      for (std::size_t j = 0; j < M; ++j) scores[j] = static_cast<double>(t.at(from, static_cast<int>(j) + 1));
    };
    switch (method) {
      case Method::Forward:
        from_row(forward_, sample.previous());
        break;
      case Method::Backward:
        from_row(backward_, sample.next());
        break;
      case Method::Top1:
        for (std::size_t j = 0; j < M; ++j) scores[j] = static_cast<double>(popularity_.global[j]);
        break;
      case Method::Top2: {
        require(sample.user >= 0 && sample.user < users_, "baselines: user index out of range");
        const auto row = popularity_.user(sample.user);
        for (std::size_t j = 0; j < M; ++j) scores[j] = static_cast<double>(row[j]);
        break;
      }
    }
    return scores;
  }

 private:
  template <class T>
  const T& checked(const T& t) const {
    require(fitted_, "baselines: tables requested before fit()");
    return t;
  }

  TransitionTable forward_, backward_;
  PopularityTable popularity_;
  int users_ = 0;
  bool fitted_ = false;
};

}  // namespace catfill::baselines
