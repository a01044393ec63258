#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "memverse/chunk_store.hpp"

namespace memverse {

inline constexpr std::size_t kDefaultStmCapacity = 10;

struct Turn {
  ChunkId chunk_id;
  std::string query_text;
  Timestamp timestamp{};

  bool operator==(const Turn&) const = default;
};

/// Sliding window over the most recent K user queries of one session.
class StmWindow {
 public:
  /// Throws kInvalidCapacity when capacity < 1.
  explicit StmWindow(std::size_t capacity = kDefaultStmCapacity);

  /// Appends `turn` as newest; returns the oldest turn if the window was full.
  std::optional<Turn> push(Turn turn);

  /// Shrinks or grows capacity; evicted turns are returned oldest first.
  std::vector<Turn> resize(std::size_t new_capacity);

  /// Drops the turn for `seq`, keeping the others in order.
  bool remove_chunk(ChunkSeq seq);

  /// Query texts oldest to newest, newline separated.
  std::string window_text() const;

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return turns_.size(); }
  bool empty() const { return turns_.empty(); }
  const std::deque<Turn>& turns() const { return turns_; }

 private:
  std::size_t capacity_;
  std::deque<Turn> turns_;
};

}  // namespace memverse
