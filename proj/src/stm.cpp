#include "memverse/stm.hpp"

namespace memverse {

StmWindow::StmWindow(std::size_t capacity) : capacity_(capacity) {
  if (capacity < 1) fail(ErrorCode::kInvalidCapacity, "STM capacity must be >= 1");
}

std::optional<Turn> StmWindow::push(Turn turn) {
  if (turn.query_text.empty()) fail(ErrorCode::kInvalidArgument, "turn query_text is empty");
  std::optional<Turn> evicted;
  if (turns_.size() == capacity_) {
    evicted = std::move(turns_.front());
    turns_.pop_front();
  }
  turns_.push_back(std::move(turn));
  return evicted;
}

std::vector<Turn> StmWindow::resize(std::size_t new_capacity) {
  if (new_capacity < 1) fail(ErrorCode::kInvalidCapacity, "STM capacity must be >= 1");
  std::vector<Turn> evicted;
  while (turns_.size() > new_capacity) {
    evicted.push_back(std::move(turns_.front()));
    turns_.pop_front();
  }
  capacity_ = new_capacity;
  return evicted;
}

bool StmWindow::remove_chunk(ChunkSeq seq) {
  for (auto it = turns_.begin(); it != turns_.end(); ++it) {
    if (it->chunk_id.sequence == seq) {
      turns_.erase(it);
      return true;
    }
  }
  return false;
}

std::string StmWindow::window_text() const {
  std::string out;
  for (const auto& t : turns_) {
    if (!out.empty()) out += '\n';
    out += t.query_text;
  }
  return out;
}

}  // namespace memverse
