#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "catfill/error.hpp"

namespace catfill::cli {

/// Thrown for unusable configuration (bad file, conflicting or invalid values).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigEntry {
  std::string key;
  std::string value;
};

/// Plain "key=value" lines; '#' starts a comment line. Keys under "meta." are
/// run metadata and are skipped, so a run manifest can be fed back as a config.
inline std::vector<ConfigEntry> read_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file '" + file.string() + "'");
  std::vector<ConfigEntry> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": expected key=value");
    auto key = line.substr(first, eq - first);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    auto value = line.substr(eq + 1);
    const auto vstart = value.find_first_not_of(" \t");
    value = vstart == std::string::npos ? "" : value.substr(vstart);
    if (key.empty())
      throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": empty key");
    if (key.starts_with("meta.")) continue;
    if (!seen.insert(key).second)
      throw ConfigError(file.string() + ": key '" + key + "' given twice");
    out.push_back({std::move(key), std::move(value)});
  }
  return out;
}

/// Splices config-file entries into an argument list as "--key=value" right
/// after the subcommand. Keys already present on the command line are left
/// out, so flags always win over the file. The "--config" argument itself is
/// removed.
inline std::vector<std::string> merge_config_args(const std::vector<std::string>& args) {
  std::vector<std::string> kept;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config requires a file argument");
      config_path = args[++i];
    } else if (a.starts_with("--config=")) {
      config_path = a.substr(9);
    } else {
      kept.push_back(a);
    }
  }
  if (config_path.empty()) return kept;

  std::set<std::string> given;
  for (const auto& a : kept) {
    if (!a.starts_with("--")) continue;
    const auto eq = a.find('=');
    given.insert(a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2));
  }
  std::size_t insert_at = kept.size();
  for (std::size_t i = 1; i < kept.size(); ++i)
    if (!kept[i].starts_with("-")) {
      insert_at = i + 1;
      break;
    }
  std::vector<std::string> injected;
  for (const auto& e : read_config(config_path))
    if (!given.contains(e.key)) injected.push_back("--" + e.key + "=" + e.value);
  kept.insert(kept.begin() + static_cast<std::ptrdiff_t>(insert_at), injected.begin(), injected.end());
  return kept;
}

/// 64-bit FNV-1a over the bytes of a file.
inline std::uint64_t fnv1a_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot hash '" + file.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace catfill::cli
