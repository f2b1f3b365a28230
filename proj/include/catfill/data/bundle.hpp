#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "catfill/data/dataset.hpp"
#include "catfill/error.hpp"

namespace catfill::data {

inline constexpr int kBundleFormatVersion = 1;

/// A prepared dataset on disk:
///   bundle.txt   key=value header (format_version, window, users, categories, checkins)
///   vocab.txt    one category name per line; index = line number starting at 1
///   users.txt    one user id per line; index = line number starting at 0
///   samples.txt  "user split target f_1..f_w b_1..b_w", ordered by (user, position)
struct Bundle {
  Dataset dataset;
  std::vector<Sample> samples;
  std::size_t window = 0;
};

struct DatasetStats {
  std::size_t users = 0;
  std::size_t categories = 0;
  std::size_t checkins = 0;
  double average = 0.0;
};

inline DatasetStats stats(const Dataset& ds) {
  DatasetStats s;
  s.users = ds.users.size();
  s.categories = static_cast<std::size_t>(ds.vocab.category_count());
  s.checkins = ds.checkin_count();
  s.average = s.users ? static_cast<double>(s.checkins) / static_cast<double>(s.users) : 0.0;
  return s;
}

inline std::map<std::string, std::string> read_key_values(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open '" + file.string() + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("'" + file.string() + "': expected key=value, got '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline void write_bundle(const std::filesystem::path& dir, const Dataset& ds,
                         const std::vector<Sample>& samples, std::size_t window) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + (dir / name).string() + "'");
    return out;
  };
  {
    auto out = open("bundle.txt");
    const auto st = stats(ds);
    out << "format_version=" << kBundleFormatVersion << "\n"
        << "window=" << window << "\n"
        << "users=" << st.users << "\n"
        << "categories=" << st.categories << "\n"
        << "checkins=" << st.checkins << "\n";
  }
  {
    auto out = open("vocab.txt");
    for (const auto& c : ds.vocab.categories()) out << c << "\n";
  }
  {
    auto out = open("users.txt");
    for (const auto& u : ds.vocab.users()) out << u << "\n";
  }
  {
    auto out = open("samples.txt");
    for (const auto& s : samples) {
      out << s.user << ' ' << split_name(s.split) << ' ' << s.target;
      for (int c : s.forward) out << ' ' << c;
      for (int c : s.backward) out << ' ' << c;
      out << '\n';
    }
  }
}

namespace detail {

inline std::vector<std::string> read_lines(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open '" + file.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace detail

/// Loads a bundle and rebuilds each user's sequence from the sample targets.
/// Timestamps are not stored; the rebuilt sequences carry their positions
/// instead. Every sample line is cross-checked against the rebuilt sequence.
inline Bundle load_bundle(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw IoError("dataset bundle '" + dir.string() + "' does not exist");
  const auto header = read_key_values(dir / "bundle.txt");
  auto get = [&](const std::string& key) {
    const auto it = header.find(key);
    if (it == header.end()) throw DataError("bundle.txt: missing key '" + key + "'");
    return std::stoull(it->second);
  };
  if (get("format_version") != kBundleFormatVersion)
    throw DataError("bundle.txt: unsupported format_version " + header.at("format_version"));
  const std::size_t w = get("window");
  if (w == 0) throw DataError("bundle.txt: window must be positive");

  Bundle b;
  b.window = w;
  b.dataset.vocab = Vocab(detail::read_lines(dir / "vocab.txt"), detail::read_lines(dir / "users.txt"));
  const int M = b.dataset.vocab.category_count();
  const int N = b.dataset.vocab.user_count();
  if (static_cast<std::size_t>(M) != get("categories") || static_cast<std::size_t>(N) != get("users"))
    throw DataError("bundle.txt: counts disagree with vocab.txt/users.txt");

  std::ifstream in(dir / "samples.txt");
  if (!in) throw IoError("cannot open '" + (dir / "samples.txt").string() + "'");
  std::string line;
  std::size_t lineno = 0;
  b.dataset.users.resize(static_cast<std::size_t>(N));
  for (int u = 0; u < N; ++u) b.dataset.users[static_cast<std::size_t>(u)].user = u;
  int last_user = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Sample s;
    std::string tag;
    if (!(ls >> s.user >> tag >> s.target))
      throw DataError("samples.txt:" + std::to_string(lineno) + ": malformed line");
    s.split = parse_split(tag);
    s.forward.resize(w);
    s.backward.resize(w);
    for (auto& c : s.forward) ls >> c;
    for (auto& c : s.backward) ls >> c;
    std::string extra;
    if (!ls || (ls >> extra))
      throw DataError("samples.txt:" + std::to_string(lineno) + ": expected " +
                      std::to_string(3 + 2 * w) + " fields");
    if (s.user < 0 || s.user >= N || s.user < last_user || s.target < 1 || s.target > M)
      throw DataError("samples.txt:" + std::to_string(lineno) + ": index out of range or out of order");
    last_user = s.user;
    auto& seq = b.dataset.users[static_cast<std::size_t>(s.user)];
    s.position = seq.length();
    seq.timestamps.push_back(static_cast<std::int64_t>(s.position));
    seq.categories.push_back(s.target);
    b.samples.push_back(std::move(s));
  }
  if (b.dataset.checkin_count() != get("checkins"))
    throw DataError("bundle.txt: checkins count disagrees with samples.txt");

  const auto rebuilt = materialize(b.dataset, w);
  for (std::size_t i = 0; i < rebuilt.size(); ++i)
    if (!(rebuilt[i] == b.samples[i]))
      throw DataError("samples.txt: sample " + std::to_string(i + 1) +
                      " is inconsistent with the reconstructed sequence");
  return b;
}

}  // namespace catfill::data
