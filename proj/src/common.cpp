#include "memverse/common.hpp"

#include "memverse/text.hpp"

namespace memverse {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDuplicateTurn: return "DuplicateTurn";
    case ErrorCode::kEmptyContent: return "EmptyContent";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kTombstoned: return "Tombstoned";
    case ErrorCode::kModalityMismatch: return "ModalityMismatch";
    case ErrorCode::kCaptionerUnavailable: return "CaptionerUnavailable";
    case ErrorCode::kEmptyCaption: return "EmptyCaption";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kInvalidCapacity: return "InvalidCapacity";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDanglingChunk: return "DanglingChunk";
    case ErrorCode::kBudgetInfeasible: return "BudgetInfeasible";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kFormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorCode::kEmptyQuery: return "EmptyQuery";
    case ErrorCode::kEmptyQuestion: return "EmptyQuestion";
    case ErrorCode::kNoTraces: return "NoTraces";
    case ErrorCode::kEndpointUnavailable: return "EndpointUnavailable";
    case ErrorCode::kStoreLocked: return "StoreLocked";
    case ErrorCode::kBindError: return "BindError";
  }
  return "Unknown";
}

std::string_view to_string(MemoryKind kind) {
  switch (kind) {
    case MemoryKind::kCore: return "core";
    case MemoryKind::kEpisodic: return "episodic";
    case MemoryKind::kSemantic: return "semantic";
  }
  return "episodic";
}

std::optional<MemoryKind> try_parse_memory_kind(std::string_view text) {
  if (text == "core") return MemoryKind::kCore;
  if (text == "episodic") return MemoryKind::kEpisodic;
  if (text == "semantic") return MemoryKind::kSemantic;
  return std::nullopt;
}

MemoryKind parse_memory_kind(std::string_view text) {
  if (auto k = try_parse_memory_kind(text)) return *k;
  fail(ErrorCode::kInvalidArgument, "unknown memory kind '" + std::string(text) + "'");
}

std::optional<MemoryKind> KindSet::top_priority() const {
  if (contains(MemoryKind::kCore)) return MemoryKind::kCore;
  if (contains(MemoryKind::kSemantic)) return MemoryKind::kSemantic;
  if (contains(MemoryKind::kEpisodic)) return MemoryKind::kEpisodic;
  return std::nullopt;
}

std::string to_string(KindSet kinds) {
  std::string out;
  for (auto k : {MemoryKind::kCore, MemoryKind::kEpisodic, MemoryKind::kSemantic}) {
    if (!kinds.contains(k)) continue;
    if (!out.empty()) out += ',';
    out += to_string(k);
  }
  return out;
}

KindSet parse_kind_set(std::string_view text) {
  KindSet out;
  for (const auto& part : text::split(text, ',')) {
    auto name = text::trim(part);
    if (name.empty()) continue;
    if (name == "all") {
      out.insert(KindSet::all());
      continue;
    }
    out.insert(parse_memory_kind(name));
  }
  return out;
}

}  // namespace memverse
