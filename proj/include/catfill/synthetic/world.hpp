#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "catfill/data/bundle.hpp"
#include "catfill/data/ingest.hpp"
#include "catfill/error.hpp"
#include "catfill/nd/rng.hpp"

namespace catfill::synthetic {

/// Planted first-order world: every next category is drawn from
///   lambda * T[current, :] + (1 - lambda) * pi_u
/// and each user's first category from pi_u. Categories are 0-based here and
/// are written out as "cat00", "cat01", ... so that the lexicographic
/// vocabulary maps category k to index k + 1.
struct WorldSpec {
  int categories = 0;             // M
  int users = 0;                  // N
  std::size_t length = 0;         // L per user
  std::vector<double> transition;  // M x M row-stochastic
  std::vector<double> preference;  // N x M, rows sum to 1
  double mixing = 0.5;            // lambda
  std::uint64_t seed = 1;

  double t(int a, int b) const {
    return transition[static_cast<std::size_t>(a) * static_cast<std::size_t>(categories) +
                      static_cast<std::size_t>(b)];
  }
  double pi(int u, int c) const {
    return preference[static_cast<std::size_t>(u) * static_cast<std::size_t>(categories) +
                      static_cast<std::size_t>(c)];
  }
  /// P(next = b | current = a, user u)
  double step(int a, int b, int u) const { return mixing * t(a, b) + (1.0 - mixing) * pi(u, b); }

  void validate() const {
    if (categories < 1 || users < 1 || length < 1) throw ContractError("world: M, N, L must be positive");
    const auto M = static_cast<std::size_t>(categories);
    if (transition.size() != M * M || preference.size() != static_cast<std::size_t>(users) * M)
      throw ShapeError("world: kernel or preference table has the wrong size");
    if (!(mixing >= 0.0 && mixing <= 1.0)) throw ContractError("world: lambda must lie in [0, 1]");
    auto check_rows = [&](const std::vector<double>& v, std::size_t rows, const char* what) {
      for (std::size_t r = 0; r < rows; ++r) {
        double total = 0.0;
        for (std::size_t j = 0; j < M; ++j) {
          const double x = v[r * M + j];
          if (!(x >= 0.0)) throw ContractError(std::string("world: negative entry in ") + what);
          total += x;
        }
        if (std::abs(total - 1.0) > 1e-9)
          throw ContractError(std::string("world: row ") + std::to_string(r) + " of " + what +
                              " does not sum to 1");
      }
    };
    check_rows(transition, M, "T");
    check_rows(preference, static_cast<std::size_t>(users), "pi");
  }
};

struct WorldParams {
  int categories = 15;
  int users = 50;
  std::size_t length = 400;
  double mixing = 0.6;
  std::uint64_t seed = 1;
  double transition_concentration = 0.2;  // Dirichlet alpha per T row
  double preference_concentration = 0.3;  // Dirichlet alpha per pi_u
};

inline WorldSpec make_world(const WorldParams& p) {
  WorldSpec w;
  w.categories = p.categories;
  w.users = p.users;
  w.length = p.length;
  w.mixing = p.mixing;
  w.seed = p.seed;
  nd::Rng rng(nd::mix_seed(p.seed, 0x3071D));
  for (int a = 0; a < p.categories; ++a) {
    const auto row = rng.dirichlet(static_cast<std::size_t>(p.categories), p.transition_concentration);
    w.transition.insert(w.transition.end(), row.begin(), row.end());
  }
  for (int u = 0; u < p.users; ++u) {
    const auto row = rng.dirichlet(static_cast<std::size_t>(p.categories), p.preference_concentration);
    w.preference.insert(w.preference.end(), row.begin(), row.end());
  }
  w.validate();
  return w;
}

inline std::string category_name(int c) {
  std::ostringstream s;
  s << "cat" << std::setw(2) << std::setfill('0') << c;
  return s.str();
}

inline std::string user_name(int u) {
  std::ostringstream s;
  s << "u" << std::setw(4) << std::setfill('0') << u;
  return s.str();
}

/// Category paths per user (0-based categories). Each user draws from its
/// own stream derived from (seed, user).
inline std::vector<std::vector<int>> sample_paths(const WorldSpec& w) {
  w.validate();
  std::vector<std::vector<int>> paths(static_cast<std::size_t>(w.users));
  std::vector<double> weights(static_cast<std::size_t>(w.categories));
  for (int u = 0; u < w.users; ++u) {
    nd::Rng rng(nd::mix_seed(w.seed, 0x5000 + static_cast<std::uint64_t>(u)));
    auto& path = paths[static_cast<std::size_t>(u)];
    for (int c = 0; c < w.categories; ++c) weights[static_cast<std::size_t>(c)] = w.pi(u, c);
    path.push_back(static_cast<int>(rng.categorical(weights)));
    while (path.size() < w.length) {
      const int cur = path.back();
      for (int c = 0; c < w.categories; ++c) weights[static_cast<std::size_t>(c)] = w.step(cur, c, u);
      path.push_back(static_cast<int>(rng.categorical(weights)));
    }
  }
  return paths;
}

inline constexpr std::int64_t kSyntheticEpoch = 1333411200;  // 2012-04-03T00:00:00Z

inline std::vector<data::CheckinRecord> generate_records(const WorldSpec& w) {
  const auto paths = sample_paths(w);
  std::vector<data::CheckinRecord> out;
  for (int u = 0; u < w.users; ++u) {
    nd::Rng clock(nd::mix_seed(w.seed, 0x9000 + static_cast<std::uint64_t>(u)));
    std::int64_t t = kSyntheticEpoch + static_cast<std::int64_t>(clock.below(86400));
    for (int c : paths[static_cast<std::size_t>(u)]) {
      out.push_back({user_name(u), category_name(c), t});
      t += 600 + static_cast<std::int64_t>(clock.below(7200));
    }
  }
  return out;
}

/// Simplified three-column TSV: user_id, category_name, ISO-8601 UTC time.
inline void write_simple3(std::ostream& out, const std::vector<data::CheckinRecord>& records) {
  for (const auto& r : records)
    out << r.user_id << '\t' << r.category_name << '\t' << data::format_iso8601_utc(r.timestamp) << '\n';
}

inline void write_world(std::ostream& out, const WorldSpec& w) {
  out << std::setprecision(17);
  out << "categories=" << w.categories << "\nusers=" << w.users << "\nlength=" << w.length
      << "\nlambda=" << w.mixing << "\nseed=" << w.seed << "\n";
  const auto M = static_cast<std::size_t>(w.categories);
  for (std::size_t a = 0; a < M; ++a) {
    out << "T." << a << "=";
    for (std::size_t b = 0; b < M; ++b) out << (b ? " " : "") << w.transition[a * M + b];
    out << "\n";
  }
  for (std::size_t u = 0; u < static_cast<std::size_t>(w.users); ++u) {
    out << "pi." << u << "=";
    for (std::size_t b = 0; b < M; ++b) out << (b ? " " : "") << w.preference[u * M + b];
    out << "\n";
  }
}

inline WorldSpec read_world(const std::filesystem::path& file) {
  const auto kv = data::read_key_values(file);
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw DataError("world file: missing key '" + key + "'");
    return it->second;
  };
  WorldSpec w;
  w.categories = std::stoi(get("categories"));
  w.users = std::stoi(get("users"));
  w.length = std::stoull(get("length"));
  w.mixing = std::stod(get("lambda"));
  w.seed = std::stoull(get("seed"));
  auto read_row = [&](const std::string& key, std::vector<double>& dst) {
    std::istringstream in(get(key));
    for (int j = 0; j < w.categories; ++j) {
      double x;
      if (!(in >> x)) throw DataError("world file: short row '" + key + "'");
      dst.push_back(x);
    }
  };
  for (int a = 0; a < w.categories; ++a) read_row("T." + std::to_string(a), w.transition);
  for (int u = 0; u < w.users; ++u) read_row("pi." + std::to_string(u), w.preference);
  w.validate();
  return w;
}

/// Exact posterior of the hidden category (0-based) given its neighbours:
///   P(c | prev, next, u) ∝ P(c | prev, u) * P(next | c, u).
/// A missing previous neighbour means the hidden check-in is the user's first
/// (prior pi_u); a missing next neighbour drops the second factor. This is
/// the full posterior: in a first-order chain the two neighbours shield the
/// hidden position from everything else.
inline std::vector<double> bayes_identify(const WorldSpec& w, std::optional<int> previous,
                                          std::optional<int> next, int user) {
  require(user >= 0 && user < w.users, "bayes_identify: user out of range");
  auto in_range = [&](std::optional<int> c) { return !c || (*c >= 0 && *c < w.categories); };
  require(in_range(previous) && in_range(next), "bayes_identify: category out of range");
  std::vector<double> post(static_cast<std::size_t>(w.categories));
  double total = 0.0;
  for (int c = 0; c < w.categories; ++c) {
    const double into = previous ? w.step(*previous, c, user) : w.pi(user, c);
    const double out = next ? w.step(c, *next, user) : 1.0;
    post[static_cast<std::size_t>(c)] = into * out;
    total += into * out;
  }
  if (!(total > 0.0)) throw ContractError("bayes_identify: zero total mass");
  for (auto& p : post) p /= total;
  return post;
}

/// Bayes posterior for a prepared sample whose vocabulary came from this
/// world's generator (index k + 1 <-> world category k), as scores over 1..M.
inline std::vector<double> bayes_scores(const WorldSpec& w, const data::Vocab& vocab,
                                        const data::Sample& s) {
  auto world_cat = [&](int idx) -> std::optional<int> {
    if (idx == data::kPad) return std::nullopt;
    return std::stoi(vocab.category_name(idx).substr(3));
  };
  const int user = std::stoi(vocab.user_id(s.user).substr(1));
  const auto post = bayes_identify(w, world_cat(s.previous()), world_cat(s.next()), user);
  std::vector<double> scores(static_cast<std::size_t>(vocab.category_count()));
  for (int idx = 1; idx <= vocab.category_count(); ++idx)
    scores[static_cast<std::size_t>(idx - 1)] = post[static_cast<std::size_t>(*world_cat(idx))];
  return scores;
}

}  // namespace catfill::synthetic
