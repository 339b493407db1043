#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rag {

/// Error categories carried by rag::Error. The service maps these onto
/// HTTP status codes; the CLI maps them onto exit codes.
enum class ErrorCode {
  invalid_argument,
  not_found,
  io,
  parse,
  transport,
  script_exhausted,
  budget_exceeded,
  empty_corpus,
  internal,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 14695981039346656037ull);
std::string to_hex(std::uint64_t value);

std::vector<std::string> split_whitespace(std::string_view text);
std::vector<std::string> split_lines(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string trim(std::string_view text);
std::string to_lower(std::string_view text);
bool starts_with_ci(std::string_view text, std::string_view prefix);

std::string read_file(const std::string& path);
/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view content);

/// Millisecond clock used for all latency accounting. Injected so scripted
/// runs produce byte-identical traces.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() const = 0;
};

class SteadyClock final : public Clock {
 public:
  std::int64_t now_ms() const override;
};

/// Logical clock that only moves when advanced. Scripted backends advance it
/// by the simulated latency of each reply.
class ManualClock final : public Clock {
 public:
  std::int64_t now_ms() const override { return now_.load(); }
  void advance(std::int64_t ms) { now_.fetch_add(ms); }

 private:
  std::atomic<std::int64_t> now_{0};
};

/// Runs fn(0..count-1) on at most `limit` threads. Exceptions from workers
/// are rethrown on the calling thread (the first one by index wins).
void parallel_for(std::size_t count, std::size_t limit,
                  const std::function<void(std::size_t)>& fn);

}  // namespace rag
