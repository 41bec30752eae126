#pragma once

// Shared vocabulary for the netcare headers: identifiers, calendar helpers,
// the error hierarchy, a tiny logger, and delimited-text utilities.

#include <algorithm>
#include <charconv>
#include <exception>
#include <mutex>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <vector>

namespace netcare {

// ---------------------------------------------------------------------------
// Identifiers
// ---------------------------------------------------------------------------

/// Opaque participant (or outsider) identifier. Compared by exact string value.
struct PersonId {
  std::string value;

  PersonId() = default;
  explicit PersonId(std::string v) : value(std::move(v)) {}

  bool empty() const noexcept { return value.empty(); }
  const std::string& str() const noexcept { return value; }

  friend auto operator<=>(const PersonId&, const PersonId&) = default;
  friend bool operator==(const PersonId&, const PersonId&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const PersonId& id) { return os << id.value; }

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Failure classes. The CLI maps each one to its own exit code.
enum class ErrorKind { config, io, data, budget, artifact };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Input does not match its declared schema. Carries the first offending line (1-based).
struct SchemaError : DataError {
  SchemaError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct BudgetError : Error {
  explicit BudgetError(const std::string& what) : Error(ErrorKind::budget, what) {}
};

/// An upstream stage artifact is missing or was produced under a different config.
struct ArtifactError : Error {
  ArtifactError(std::string stage, const std::string& what)
      : Error(ErrorKind::artifact, what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// ---------------------------------------------------------------------------
// Logging (verbosity from NETCARE_LOG: error | warn | info | debug)
// ---------------------------------------------------------------------------

namespace log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("NETCARE_LOG");
    if (env == nullptr) return Level::warn;
    const std::string_view v(env);
    if (v == "error") return Level::error;
    if (v == "info") return Level::info;
    if (v == "debug") return Level::debug;
    return Level::warn;
  }();
  return level;
}

inline void write(Level level, std::string_view msg) {
  static constexpr std::string_view tags[] = {"error", "warn", "info", "debug"};
  if (static_cast<int>(level) <= static_cast<int>(threshold())) {
    std::cerr << "[netcare " << tags[static_cast<int>(level)] << "] " << msg << '\n';
  }
}

inline void warn(std::string_view msg) { write(Level::warn, msg); }
inline void info(std::string_view msg) { write(Level::info, msg); }
inline void debug(std::string_view msg) { write(Level::debug, msg); }

}  // namespace log

/// Collects warnings raised by an operation so callers (and tests) can inspect them.
struct Diagnostics {
  std::vector<std::string> warnings;

  void warn(std::string msg) {
    log::warn(msg);
    warnings.push_back(std::move(msg));
  }
};

inline void warn_to(Diagnostics* diag, std::string msg) {
  if (diag != nullptr) {
    diag->warn(std::move(msg));
  } else {
    log::warn(msg);
  }
}

// ---------------------------------------------------------------------------
// Calendar (all times are UTC)
// ---------------------------------------------------------------------------

using Date = std::chrono::sys_days;
using Timestamp = std::int64_t;  // seconds since the Unix epoch

inline constexpr std::int64_t kSecondsPerDay = 86400;
inline constexpr std::int64_t kMinutesPerDay = 1440;

inline Timestamp to_timestamp(Date d) {
  return static_cast<Timestamp>(d.time_since_epoch().count()) * kSecondsPerDay;
}

namespace detail {

inline std::optional<int> parse_fixed_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

}  // namespace detail

/// Parses "YYYY-MM-DD".
inline std::optional<Date> try_parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto y = detail::parse_fixed_int(s.substr(0, 4));
  auto m = detail::parse_fixed_int(s.substr(5, 2));
  auto d = detail::parse_fixed_int(s.substr(8, 2));
  if (!y || !m || !d) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                                        std::chrono::day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

inline Date parse_date(std::string_view s) {
  auto d = try_parse_date(s);
  if (!d) throw ConfigError("invalid date '" + std::string(s) + "', expected YYYY-MM-DD");
  return *d;
}

inline std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

/// Parses "YYYY-MM-DDTHH:MM" with optional ":SS" and trailing 'Z'; a space may replace 'T'.
inline std::optional<Timestamp> try_parse_datetime(std::string_view s) {
  if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
  if (s.size() != 16 && s.size() != 19) return std::nullopt;
  if (s[10] != 'T' && s[10] != ' ') return std::nullopt;
  auto date = try_parse_date(s.substr(0, 10));
  if (!date || s[13] != ':') return std::nullopt;
  auto hh = detail::parse_fixed_int(s.substr(11, 2));
  auto mm = detail::parse_fixed_int(s.substr(14, 2));
  int ss = 0;
  if (s.size() == 19) {
    if (s[16] != ':') return std::nullopt;
    auto v = detail::parse_fixed_int(s.substr(17, 2));
    if (!v) return std::nullopt;
    ss = *v;
  }
  if (!hh || !mm || *hh > 23 || *mm > 59 || ss > 59) return std::nullopt;
  return to_timestamp(*date) + *hh * 3600 + *mm * 60 + ss;
}

/// Formats a timestamp as "YYYY-MM-DDTHH:MM" (seconds are dropped).
inline std::string format_minute(Timestamp t) {
  const std::int64_t days = (t >= 0 ? t : t - kSecondsPerDay + 1) / kSecondsPerDay;
  const std::int64_t rem = t - days * kSecondsPerDay;
  const Date d{std::chrono::days{days}};
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d:%02d", static_cast<int>(rem / 3600), static_cast<int>((rem % 3600) / 60));
  return format_date(d) + "T" + buf;
}

// ---------------------------------------------------------------------------
// Delimited text helpers
// ---------------------------------------------------------------------------

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Shortest representation that reads back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// 64-bit FNV-1a, used for config and artifact fingerprints.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// SplitMix64 step; used to derive independent, reproducible sub-seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  return mix_seed(mix_seed(mix_seed(seed ^ mix_seed(a)) ^ b) ^ mix_seed(c + 0x51ed27ULL));
}

/// Runs fn(k) for k in [0, count) on up to `threads` workers, each taking a strided share.
/// fn must only write to per-k state; callers reduce in index order afterwards.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1u), count);
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex guard;
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t k = t; k < count; k += workers) fn(k);
      } catch (...) {
        std::lock_guard lock(guard);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace netcare

template <>
struct std::hash<netcare::PersonId> {
  std::size_t operator()(const netcare::PersonId& id) const noexcept { return std::hash<std::string>{}(id.value); }
};
