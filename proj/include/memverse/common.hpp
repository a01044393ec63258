#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace memverse {

enum class ErrorCode {
  kInvalidArgument,
  kDuplicateTurn,
  kEmptyContent,
  kNotFound,
  kTombstoned,
  kModalityMismatch,
  kCaptionerUnavailable,
  kEmptyCaption,
  kConfigInvalid,
  kInvalidCapacity,
  kBackendUnavailable,
  kSchemaViolation,
  kParseError,
  kDanglingChunk,
  kBudgetInfeasible,
  kIoError,
  kFormatVersionMismatch,
  kEmptyQuery,
  kEmptyQuestion,
  kNoTraces,
  kEndpointUnavailable,
  kStoreLocked,
  kBindError,
};

/// Stable wire name of an error code ("NotFound", "DuplicateTurn", ...).
std::string_view error_name(ErrorCode code);

/// All fallible memverse operations throw this; `code()` is the contract,
/// the message is diagnostic only.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

// ---------------------------------------------------------------------------
// Time

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

inline std::int64_t to_millis(Timestamp t) { return t.time_since_epoch().count(); }
inline Timestamp from_millis(std::int64_t ms) {
  return Timestamp{std::chrono::milliseconds{ms}};
}

/// Source of "now" for every operation that records time. Operations never
/// read the wall clock directly.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override {
    return std::chrono::time_point_cast<std::chrono::milliseconds>(
        std::chrono::system_clock::now());
  }
};

/// Manually driven clock for replay and tests.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Timestamp start = from_millis(0)) : now_(start) {}

  Timestamp now() const override {
    std::lock_guard lock(mu_);
    return now_;
  }
  void set(Timestamp t) {
    std::lock_guard lock(mu_);
    now_ = t;
  }
  void advance(std::chrono::milliseconds d) {
    std::lock_guard lock(mu_);
    now_ += d;
  }

 private:
  mutable std::mutex mu_;
  Timestamp now_;
};

// ---------------------------------------------------------------------------
// Memory kinds

enum class MemoryKind : std::uint8_t { kCore = 0, kEpisodic = 1, kSemantic = 2 };

std::string_view to_string(MemoryKind kind);
/// Throws kInvalidArgument for anything but "core", "episodic", "semantic".
MemoryKind parse_memory_kind(std::string_view text);
std::optional<MemoryKind> try_parse_memory_kind(std::string_view text);

/// Small set of MemoryKind values.
class KindSet {
 public:
  constexpr KindSet() = default;
  constexpr KindSet(std::initializer_list<MemoryKind> kinds) {
    for (auto k : kinds) insert(k);
  }

  static constexpr KindSet all() {
    return {MemoryKind::kCore, MemoryKind::kEpisodic, MemoryKind::kSemantic};
  }

  constexpr void insert(MemoryKind k) { bits_ |= bit(k); }
  constexpr void insert(KindSet other) { bits_ |= other.bits_; }
  constexpr bool contains(MemoryKind k) const { return (bits_ & bit(k)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool intersects(KindSet other) const { return (bits_ & other.bits_) != 0; }
  constexpr bool subset_of(KindSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr std::uint8_t bits() const { return bits_; }

  /// Highest-priority member for retrieval tiebreaks: core > semantic > episodic.
  std::optional<MemoryKind> top_priority() const;

  constexpr bool operator==(const KindSet&) const = default;

 private:
  static constexpr std::uint8_t bit(MemoryKind k) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(k));
  }
  std::uint8_t bits_ = 0;
};

/// Comma-separated kind names in fixed order core, episodic, semantic.
std::string to_string(KindSet kinds);
KindSet parse_kind_set(std::string_view text);

}  // namespace memverse
