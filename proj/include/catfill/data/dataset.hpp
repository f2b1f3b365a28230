#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "catfill/data/ingest.hpp"
#include "catfill/error.hpp"

namespace catfill::data {

/// Reserved category index for absent context.
inline constexpr int kPad = 0;

/// Category names map to [1, M] (0 is PAD); user ids map to [0, N).
/// Both sides are assigned in lexicographic order of the raw strings.
class Vocab {
 public:
  Vocab() = default;

  Vocab(std::vector<std::string> categories, std::vector<std::string> users)
      : categories_(std::move(categories)), users_(std::move(users)) {
    for (std::size_t i = 0; i < categories_.size(); ++i) {
      if (categories_[i].empty()) throw DataError("vocab: empty category name");
      if (!category_ids_.emplace(categories_[i], static_cast<int>(i) + 1).second)
        throw DataError("vocab: duplicate category '" + categories_[i] + "'");
    }
    for (std::size_t i = 0; i < users_.size(); ++i)
      if (!user_ids_.emplace(users_[i], static_cast<int>(i)).second)
        throw DataError("vocab: duplicate user '" + users_[i] + "'");
  }

  int category_count() const { return static_cast<int>(categories_.size()); }
  int user_count() const { return static_cast<int>(users_.size()); }

  int category_index(const std::string& name) const {
    const auto it = category_ids_.find(name);
    if (it == category_ids_.end()) throw ContractError("vocab: unknown category '" + name + "'");
    return it->second;
  }

  int user_index(const std::string& id) const {
    const auto it = user_ids_.find(id);
    if (it == user_ids_.end()) throw ContractError("vocab: unknown user '" + id + "'");
    return it->second;
  }

  const std::string& category_name(int index) const {
    require(index >= 1 && index <= category_count(),
            "vocab: category index " + std::to_string(index) + " out of range");
    return categories_[static_cast<std::size_t>(index - 1)];
  }

  const std::string& user_id(int index) const {
    require(index >= 0 && index < user_count(),
            "vocab: user index " + std::to_string(index) + " out of range");
    return users_[static_cast<std::size_t>(index)];
  }

  const std::vector<std::string>& categories() const { return categories_; }
  const std::vector<std::string>& users() const { return users_; }

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.categories_ == b.categories_ && a.users_ == b.users_;
  }

 private:
  std::vector<std::string> categories_;
  std::vector<std::string> users_;
  std::unordered_map<std::string, int> category_ids_;
  std::unordered_map<std::string, int> user_ids_;
};

struct UserSequence {
  int user = 0;
  std::vector<int> categories;          // chronological
  std::vector<std::int64_t> timestamps;  // non-decreasing

  std::size_t length() const { return categories.size(); }
  friend bool operator==(const UserSequence&, const UserSequence&) = default;
};

struct Dataset {
  Vocab vocab;
  std::vector<UserSequence> users;  // ordered by user index

  std::size_t checkin_count() const {
    std::size_t n = 0;
    for (const auto& u : users) n += u.length();
    return n;
  }
};

/// Groups records per user, drops users with fewer than `min_checkins`, sorts
/// each survivor by timestamp (stable, so ties keep input order), and builds
/// the vocabulary over all surviving check-ins.
inline Dataset filter_users(std::span<const CheckinRecord> records, std::size_t min_checkins = 10) {
  std::map<std::string, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < records.size(); ++i) by_user[records[i].user_id].push_back(i);

  std::vector<std::string> user_names;
  std::vector<std::vector<std::size_t>> kept;
  for (auto& [id, rows] : by_user) {
    if (rows.size() < min_checkins) continue;
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
      return records[a].timestamp < records[b].timestamp;
    });
    user_names.push_back(id);
    kept.push_back(std::move(rows));
  }
  if (kept.empty())
    throw DataError("filter_users: no user has at least " + std::to_string(min_checkins) +
                    " check-ins");

  std::vector<std::string> cats;
  for (const auto& rows : kept)
    for (auto r : rows) cats.push_back(records[r].category_name);
  std::sort(cats.begin(), cats.end());
  cats.erase(std::unique(cats.begin(), cats.end()), cats.end());

  Dataset ds{Vocab(std::move(cats), std::move(user_names)), {}};
  for (std::size_t u = 0; u < kept.size(); ++u) {
    UserSequence seq;
    seq.user = static_cast<int>(u);
    for (auto r : kept[u]) {
      seq.categories.push_back(ds.vocab.category_index(records[r].category_name));
      seq.timestamps.push_back(records[r].timestamp);
    }
    ds.users.push_back(std::move(seq));
  }
  return ds;
}

enum class Split : std::uint8_t { Train, Val, Test };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::Test:
      return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw DataError("unknown split tag '" + std::string(s) + "'");
}

/// Chronological per-user ranges: [0, train_end) train, [train_end, val_end)
/// validation, [val_end, length) test.
struct SplitRanges {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t length = 0;

  std::size_t train_size() const { return train_end; }
  std::size_t val_size() const { return val_end - train_end; }
  std::size_t test_size() const { return length - val_end; }

  Split tag(std::size_t position) const {
    return position < train_end ? Split::Train : position < val_end ? Split::Val : Split::Test;
  }
};

/// floor(0.8 L) / floor(0.9 L), computed in integers.
inline SplitRanges split(std::size_t length) {
  return {length * 8 / 10, length * 9 / 10, length};
}

struct Sample {
  int user = 0;
  std::size_t position = 0;  // 0-based index of the hidden check-in
  int target = kPad;
  std::vector<int> forward;   // oldest -> newest, ends at position - 1
  std::vector<int> backward;  // farthest -> nearest, ends at position + 1
  Split split = Split::Train;

  int previous() const { return forward.empty() ? kPad : forward.back(); }
  int next() const { return backward.empty() ? kPad : backward.back(); }
  bool padded() const {
    return (!forward.empty() && forward.front() == kPad) ||
           (!backward.empty() && backward.front() == kPad);
  }

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// One sample per position. Windows read the full sequence regardless of
/// split boundaries; only the target itself is hidden. Short windows are
/// padded on the far side.
inline std::vector<Sample> make_samples(const UserSequence& seq, const SplitRanges& ranges,
                                        std::size_t w) {
  require(w >= 1, "make_samples: window width must be at least 1");
  require(ranges.length == seq.length(), "make_samples: split ranges do not match sequence");
  const auto& c = seq.categories;
  const std::size_t len = c.size();
  std::vector<Sample> out;
  out.reserve(len);
  for (std::size_t l = 0; l < len; ++l) {
    Sample s;
    s.user = seq.user;
    s.position = l;
    s.target = c[l];
    s.split = ranges.tag(l);
    s.forward.assign(w, kPad);
    s.backward.assign(w, kPad);
    // forward[w-1] = c[l-1], forward[w-1-k] = c[l-1-k]
    for (std::size_t k = 0; k < w && k < l; ++k) s.forward[w - 1 - k] = c[l - 1 - k];
    // backward[w-1] = c[l+1], backward[w-1-k] = c[l+1+k]
    for (std::size_t k = 0; k < w && l + 1 + k < len; ++k) s.backward[w - 1 - k] = c[l + 1 + k];
    out.push_back(std::move(s));
  }
  return out;
}

/// All samples of a dataset ordered by (user, position).
inline std::vector<Sample> materialize(const Dataset& ds, std::size_t w) {
  std::vector<Sample> out;
  out.reserve(ds.checkin_count());
  for (const auto& seq : ds.users) {
    auto s = make_samples(seq, split(seq.length()), w);
    std::move(s.begin(), s.end(), std::back_inserter(out));
  }
  return out;
}

struct SampleSet {
  int categories = 0;  // M
  int users = 0;       // N
  std::vector<Sample> train, val, test;

  const std::vector<Sample>& of(Split s) const {
    return s == Split::Train ? train : s == Split::Val ? val : test;
  }
};

inline SampleSet partition(std::vector<Sample> samples, int categories, int users) {
  SampleSet set{categories, users, {}, {}, {}};
  for (auto& s : samples) {
    switch (s.split) {
      case Split::Train:
        set.train.push_back(std::move(s));
        break;
      case Split::Val:
        set.val.push_back(std::move(s));
        break;
      case Split::Test:
        set.test.push_back(std::move(s));
        break;
    }
  }
  return set;
}

inline SampleSet partition(const Dataset& ds, std::size_t w) {
  return partition(materialize(ds, w), ds.vocab.category_count(), ds.vocab.user_count());
}

}  // namespace catfill::data
