#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "memverse/common.hpp"
#include "memverse/json_io.hpp"
#include "memverse/retrieval.hpp"

namespace memverse {

using Choices = std::optional<std::vector<std::string>>;

/// One (question, retrieved context) training pair.
struct SupervisionPair {
  std::string question;
  Choices choices;
  /// Target: the assembled retrieval context at trace time.
  std::string retrieved;
  std::uint64_t round = 0;
  std::string trace_id;
  Timestamp created_at{};

  bool operator==(const SupervisionPair&) const = default;
};

struct ExportManifest {
  std::uint64_t round = 0;
  std::size_t pair_count = 0;
  std::string file_digest;
  std::string source_graph_snapshot;
  Timestamp created_at{};
  std::string domain_tag;

  bool operator==(const ExportManifest&) const = default;
};

/// One line of a training file.
struct TrainingRecord {
  std::string prompt;
  std::string target;
  std::string trace_id;
  std::uint64_t round = 0;

  bool operator==(const TrainingRecord&) const = default;
};

/// "Question: {q} Choices: {c1}, {c2}, ..., {cn}"; the " Choices: ..."
/// segment is left out when there are no choices. Throws kEmptyQuestion.
std::string format_prompt(std::string_view question, const Choices& choices = std::nullopt);

/// Strict reader for training files; throws kParseError naming the line.
std::vector<TrainingRecord> load_training_file(const std::filesystem::path& path);
std::vector<TrainingRecord> parse_training_text(std::string_view text);

std::filesystem::path manifest_path_for(const std::filesystem::path& training_file);
std::string format_manifest(const ExportManifest& m);
ExportManifest parse_manifest(std::string_view text);
ExportManifest load_manifest(const std::filesystem::path& path);

/// Collects retrieval traces and writes them out once per round.
///
/// Rounds start at 1. Each export writes every trace recorded since the
/// previous export and advances the round, so each trace id lands in
/// exactly one training file.
class DistillExporter {
 public:
  explicit DistillExporter(const Clock& clock, std::string domain_tag = "general");

  /// Returns the trace id, or nullopt when the result has no context (the
  /// trace is skipped and counted).
  std::optional<std::string> record_trace(std::string_view query, const Choices& choices,
                                          const RetrievalResult& result);

  /// Writes `path` and `path.manifest`. Throws kNoTraces or kIoError; on
  /// error nothing is consumed.
  ExportManifest export_round(const std::filesystem::path& path, std::string_view graph_snapshot_digest = "");

  std::uint64_t current_round() const { return round_; }
  std::size_t pending_count() const { return pending_.size(); }
  std::size_t skipped_count() const { return skipped_; }
  const std::vector<SupervisionPair>& pending() const { return pending_; }
  const std::optional<ExportManifest>& latest_manifest() const { return latest_; }
  const std::string& domain_tag() const { return domain_tag_; }
  void set_domain_tag(std::string tag) { domain_tag_ = std::move(tag); }

  Json state() const;
  void load_state(const Json& j);

 private:
  const Clock& clock_;
  std::string domain_tag_;
  std::uint64_t round_ = 1;
  std::uint64_t next_trace_ = 1;
  std::size_t skipped_ = 0;
  std::vector<SupervisionPair> pending_;
  std::optional<ExportManifest> latest_;
};

}  // namespace memverse
