#pragma once

#include <cstddef>
#include <memory>
#include <semaphore>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "memverse/chunk_store.hpp"
#include "memverse/http_client.hpp"

namespace memverse {

inline constexpr std::size_t kDefaultCompressionBudget = 512;

struct ExtractedEntity {
  /// Canonical (case-folded) identity key.
  std::string name;
  std::string display_name;
  std::string etype = "unknown";
  MemoryKind kind = MemoryKind::kEpisodic;
  std::set<ChunkSeq> source_chunks;

  bool operator==(const ExtractedEntity&) const = default;
};

struct ExtractedRelation {
  std::string src_name;
  std::string dst_name;
  std::string label;
  MemoryKind kind = MemoryKind::kEpisodic;
  std::set<ChunkSeq> source_chunks;

  bool operator==(const ExtractedRelation&) const = default;
};

struct ExtractionResult {
  std::string description;
  std::vector<ExtractedEntity> entities;
  std::vector<ExtractedRelation> relations;

  bool empty() const { return entities.empty() && relations.empty(); }
  bool operator==(const ExtractionResult&) const = default;
};

/// Throws kSchemaViolation unless relation endpoints are among the entities,
/// every source set is non-empty and within `input_chunks`, and names are
/// canonical.
void check_extraction(const ExtractionResult& result, const std::set<ChunkSeq>& input_chunks);

/// Produces memory descriptions and graph elements from chunks.
class ExtractionBackend {
 public:
  virtual ~ExtractionBackend() = default;
  virtual std::string_view name() const = 0;
  virtual ExtractionResult extract(std::span<const Chunk> chunks) = 0;
  virtual std::string compress(std::span<const Chunk> chunks) = 0;
};

/// Deterministic extractor.
///
/// Sentences split on [.!?]. Inside a sentence, maximal runs of capitalized
/// tokens (excluding a fixed list of capitalized function words such as
/// "The", "My", "Yesterday") are entity candidates. The run of other tokens
/// between two consecutive candidates becomes the relation label. Subjects
/// of relations are typed "person", all other entities "unknown". The
/// description is the triple sentences, or the raw text when no triple was
/// found, cut to the compression budget.
class RuleExtractor final : public ExtractionBackend {
 public:
  explicit RuleExtractor(std::size_t compression_budget = kDefaultCompressionBudget)
      : budget_(compression_budget) {}

  std::string_view name() const override { return "rule"; }
  ExtractionResult extract(std::span<const Chunk> chunks) override;
  std::string compress(std::span<const Chunk> chunks) override;

 private:
  std::size_t budget_;
};

/// Display names of the entity candidates in one piece of text, in order.
std::vector<std::string> entity_candidates(std::string_view text);

/// True for capitalized words the rule grammar never treats as entities.
bool is_capitalized_function_word(std::string_view canonical_token);

struct RemoteExtractorConfig {
  /// Chat-completion endpoint URL.
  std::string endpoint;
  std::string model_name;
  /// Prompt with `{chunks}` and `{budget}` placeholders.
  std::string prompt_template;
  std::string template_version = "extract-v1";
  std::uint32_t timeout_ms = 60000;
  std::uint32_t max_retries = 2;
  std::uint32_t retry_backoff_ms = 500;
  std::size_t max_in_flight = 4;
  std::size_t compression_budget = kDefaultCompressionBudget;
  std::string api_key;
};

/// Built-in extraction prompt (version "extract-v1").
std::string default_extraction_template();

/// LLM-backed extractor. The model must answer with an extraction document;
/// anything else is surfaced as kParseError or kSchemaViolation, never
/// repaired.
class RemoteExtractor final : public ExtractionBackend {
 public:
  explicit RemoteExtractor(RemoteExtractorConfig config,
                           std::shared_ptr<HttpTransport> transport = default_transport());

  std::string_view name() const override { return "remote"; }
  ExtractionResult extract(std::span<const Chunk> chunks) override;
  std::string compress(std::span<const Chunk> chunks) override;

  std::string render_prompt(std::span<const Chunk> chunks) const;

 private:
  RemoteExtractorConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  std::counting_semaphore<> in_flight_;
};

/// Parses an extraction document:
///   {"description": str,
///    "entities":  [{"name", "etype", "kind", "chunks": [seq...]}],
///    "relations": [{"src", "dst", "label", "kind", "chunks": [seq...]}]}
/// Duplicate canonical entity names (and duplicate relations) are merged
/// with their chunk sets unioned. When `allowed_chunks` is given, every
/// chunk reference must be in it.
ExtractionResult validate_remote_output(std::string_view raw,
                                        const std::set<ChunkSeq>* allowed_chunks = nullptr);

/// Extract with precondition and invariant checks around the backend.
ExtractionResult extract(std::span<const Chunk> chunks, ExtractionBackend& backend);
std::string compress(std::span<const Chunk> chunks, ExtractionBackend& backend);

}  // namespace memverse
