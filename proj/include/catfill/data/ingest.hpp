#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "catfill/error.hpp"

namespace catfill::data {

struct CheckinRecord {
  std::string user_id;
  std::string category_name;
  std::int64_t timestamp = 0;  // UTC seconds since the epoch

  friend bool operator==(const CheckinRecord&, const CheckinRecord&) = default;
};

enum class InputFormat { Foursquare8, Simple3 };

struct Reject {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct IngestResult {
  std::vector<CheckinRecord> records;
  std::vector<Reject> rejects;
  std::size_t lines_read = 0;
};

inline InputFormat parse_format(std::string_view name) {
  if (name == "foursquare8") return InputFormat::Foursquare8;
  if (name == "simple3") return InputFormat::Simple3;
  throw ContractError("unknown input format '" + std::string(name) +
                      "' (expected foursquare8 or simple3)");
}

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::optional<int> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

inline std::optional<std::int64_t> civil_to_epoch(int y, int mo, int d, int hh, int mm, int ss) {
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + hh * 3600 + mm * 60 + ss;
}

inline std::optional<std::int64_t> parse_hms(std::string_view s, int y, int mo, int d) {
  if (s.size() != 8 || s[2] != ':' || s[5] != ':') return std::nullopt;
  const auto hh = parse_int(s.substr(0, 2));
  const auto mm = parse_int(s.substr(3, 2));
  const auto ss = parse_int(s.substr(6, 2));
  if (!hh || !mm || !ss) return std::nullopt;
  return civil_to_epoch(y, mo, d, *hh, *mm, *ss);
}

}  // namespace detail

/// "2012-04-03T18:00:09Z"; a trailing "Z" or "+00:00" is accepted, as is no zone.
inline std::optional<std::int64_t> parse_iso8601_utc(std::string_view s) {
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' '))
    return std::nullopt;
  const auto rest = s.substr(19);
  if (!(rest.empty() || rest == "Z" || rest == "+00:00" || rest == "+0000")) return std::nullopt;
  const auto y = detail::parse_int(s.substr(0, 4));
  const auto mo = detail::parse_int(s.substr(5, 2));
  const auto d = detail::parse_int(s.substr(8, 2));
  if (!y || !mo || !d) return std::nullopt;
  return detail::parse_hms(s.substr(11, 8), *y, *mo, *d);
}

inline std::string format_iso8601_utc(std::int64_t t) {
  using namespace std::chrono;
  const auto days = static_cast<int>(t >= 0 ? t / 86400 : (t - 86399) / 86400);
  const std::int64_t secs = t - static_cast<std::int64_t>(days) * 86400;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(secs / 3600), static_cast<int>(secs / 60 % 60),
                static_cast<int>(secs % 60));
  return buf;
}

/// Foursquare dump layout: "Tue Apr 03 18:00:09 +0000 2012".
inline std::optional<std::int64_t> parse_foursquare_time(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start < s.size()) {
    const auto pos = s.find(' ', start);
    const auto end = pos == std::string_view::npos ? s.size() : pos;
    if (end > start) parts.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  if (parts.size() != 6) return std::nullopt;
  static constexpr std::string_view kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                 "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  int month = 0;
  for (int i = 0; i < 12; ++i)
    if (parts[1] == kMonths[i]) month = i + 1;
  const auto day = detail::parse_int(parts[2]);
  const auto year = detail::parse_int(parts[5]);
  if (month == 0 || !day || !year) return std::nullopt;
  return detail::parse_hms(parts[3], *year, month, *day);
}

/// Valid UTF-8 passes through; anything else is re-read as Latin-1.
inline std::string to_utf8_permissive(std::string_view s) {
  auto valid = [&] {
    std::size_t i = 0;
    while (i < s.size()) {
      const auto c = static_cast<unsigned char>(s[i]);
      std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
      if (len == 0 || i + len > s.size()) return false;
      for (std::size_t k = 1; k < len; ++k)
        if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
      i += len;
    }
    return true;
  };
  if (valid()) return std::string(s);
  std::string out;
  out.reserve(s.size() * 2);
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80) {
      out.push_back(ch);
    } else {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

/// Parses one line; returns the reject reason on failure.
inline std::optional<std::string> parse_line(std::string_view line, InputFormat format,
                                             CheckinRecord& out) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto cols = detail::split_tabs(line);
  const std::size_t expected = format == InputFormat::Foursquare8 ? 8 : 3;
  if (cols.size() != expected)
    return "expected " + std::to_string(expected) + " columns, found " +
           std::to_string(cols.size());
  const std::string_view user = cols[0];
  const std::string_view category = format == InputFormat::Foursquare8 ? cols[3] : cols[1];
  const std::string_view time = format == InputFormat::Foursquare8 ? cols[7] : cols[2];
  if (user.empty()) return "empty user id";
  if (category.empty()) return "empty category name";
  const auto ts = format == InputFormat::Foursquare8 ? parse_foursquare_time(time)
                                                     : parse_iso8601_utc(time);
  if (!ts) return "unparseable timestamp '" + std::string(time) + "'";
  out.user_id = std::string(user);
  out.category_name = to_utf8_permissive(category);
  out.timestamp = *ts;
  return std::nullopt;
}

/// Tolerates up to 1% malformed lines; more than that is a hard error.
inline IngestResult ingest(std::istream& in, InputFormat format) {
  IngestResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    ++result.lines_read;
    CheckinRecord rec;
    if (auto why = parse_line(line, format, rec))
      result.rejects.push_back({lineno, std::move(*why)});
    else
      result.records.push_back(std::move(rec));
  }
  if (result.rejects.size() * 100 > result.lines_read) {
    std::ostringstream msg;
    msg << "ingest: " << result.rejects.size() << " of " << result.lines_read
        << " lines rejected (limit 1%); first at line " << result.rejects.front().line << ": "
        << result.rejects.front().reason;
    throw DataError(msg.str());
  }
  return result;
}

inline IngestResult ingest(const std::string& path, InputFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open input file '" + path + "'");
  return ingest(in, format);
}

}  // namespace catfill::data
