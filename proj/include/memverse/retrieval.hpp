#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "memverse/chunk_store.hpp"
#include "memverse/ltm_graph.hpp"

namespace memverse {

inline constexpr std::size_t kDefaultEmbeddingDim = 64;
inline constexpr std::string_view kContextSeparator = "\n---\n";
inline constexpr std::string_view kRewriteSeparator = "Context:";

struct EmbeddingVector {
  std::vector<double> values;
  double norm = 0.0;

  bool operator==(const EmbeddingVector&) const = default;
};

/// Cosine similarity; 0 when either vector has zero norm.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
};

/// Signed feature hashing of canonical tokens into `dim` buckets, L2
/// normalized. Empty text maps to the zero vector.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dim = kDefaultEmbeddingDim) : dim_(dim) {}
  std::size_t dimension() const override { return dim_; }
  EmbeddingVector embed(std::string_view text) const override;

 private:
  std::size_t dim_;
};

struct RetrievalParams {
  std::size_t top_m = 5;
  std::size_t hop_limit = 2;
  std::size_t context_budget = 2048;
  KindSet kinds = KindSet::all();
  double alpha = 0.5;
  double beta = 0.5;
  /// Fused scores below this do not seed retrieval.
  double min_match_score = 0.2;
  /// Added per seed entity when scoring chunks, by the entity's
  /// highest-priority kind; indexed by MemoryKind.
  std::array<double, kKindCount> kind_bonus{0.1, 0.0, 0.05};
};

struct ScoredEntity {
  EntityId id;
  std::string name;
  double score = 0.0;
  double lexical = 0.0;
  double cosine = 0.0;
};

struct ScoredChunk {
  ChunkId id;
  double score = 0.0;
};

struct RetrievalResult {
  std::string query;
  std::vector<ScoredEntity> matched_entities;
  Subgraph subgraph;
  /// Score descending, newer chunk first on ties.
  std::vector<ScoredChunk> chunks;
  std::vector<MediaRef> media;
  std::string context;
  /// Chunk reads performed.
  std::size_t accesses = 0;
};

/// Joins texts with kContextSeparator, keeping the longest prefix of whole
/// texts that fits in `budget` bytes.
std::string assemble_context(const std::vector<std::string>& ranked_texts, std::size_t budget);

/// Query-time pipeline over the knowledge graph: entity matching, multi-hop
/// expansion, provenance activation, chunk ranking and context assembly.
class Retriever {
 public:
  Retriever(KnowledgeGraph& graph, const ChunkStore& store,
            std::shared_ptr<const Embedder> embedder = std::make_shared<HashEmbedder>());

  /// Re-embeds every entity name. Runs under an exclusive lock.
  void rebuild_index();
  bool index_stale() const;

  /// score = alpha * lexical_overlap + beta * cosine. Throws kEmptyQuery.
  std::vector<ScoredEntity> match_entities(std::string_view query, const RetrievalParams& params = {});

  RetrievalResult retrieve(std::string_view query, const RetrievalParams& params = {});

  /// query + " Context: " + context, or the query unchanged when nothing
  /// was retrieved.
  std::string rewrite_query(std::string_view query, const RetrievalParams& params = {});

  const Embedder& embedder() const { return *embedder_; }

 private:
  struct IndexEntry {
    EntityId id;
    std::string name;
    std::vector<std::string> tokens;  // sorted, unique
    EmbeddingVector embedding;
    KindSet kinds;
  };

  void ensure_fresh();
  std::vector<ScoredEntity> match_locked(std::string_view query, const RetrievalParams& params) const;

  KnowledgeGraph& graph_;
  const ChunkStore& store_;
  std::shared_ptr<const Embedder> embedder_;

  mutable std::shared_mutex mu_;
  std::vector<IndexEntry> index_;
  std::uint64_t indexed_revision_ = 0;
  bool built_ = false;
};

}  // namespace memverse
