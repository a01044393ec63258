#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "memverse/chunk_store.hpp"
#include "memverse/extractor.hpp"

namespace memverse {

struct EntityId {
  std::uint64_t value = 0;
  auto operator<=>(const EntityId&) const = default;
};

struct RelationId {
  std::uint64_t value = 0;
  auto operator<=>(const RelationId&) const = default;
};

using ElementId = std::variant<EntityId, RelationId>;

/// Set of supporting chunks of a graph element.
using Provenance = std::set<ChunkSeq>;

struct Entity {
  EntityId id;
  std::string canonical_name;
  std::string display_name;
  std::string etype;
  KindSet kinds;
  Provenance provenance;
  double salience = 0.0;
  Timestamp last_activated{};
  Timestamp created_at{};

  bool operator==(const Entity&) const = default;
};

struct Relation {
  RelationId id;
  EntityId src;
  EntityId dst;
  std::string label;
  KindSet kinds;
  Provenance provenance;
  double salience = 0.0;
  Timestamp last_activated{};

  bool operator==(const Relation&) const = default;
};

struct Activation {
  ElementId seed;
  /// Supporting chunks ordered by sequence.
  std::vector<Chunk> chunks;
  /// Union of the chunks' media, first-seen order.
  std::vector<MediaRef> media;
  /// Provenance entries whose chunk is gone; left for provenance repair.
  std::vector<ChunkSeq> repair;
};

struct GraphDelta {
  std::size_t entities_added = 0;
  std::size_t entities_updated = 0;
  std::size_t relations_added = 0;
  std::size_t relations_updated = 0;

  bool operator==(const GraphDelta&) const = default;
};

struct Subgraph {
  /// Ordered by (hop distance, id); hops[i] belongs to entities[i].
  std::vector<Entity> entities;
  std::vector<std::size_t> hops;
  /// Ordered by id.
  std::vector<Relation> relations;
};

struct PruneBudget {
  std::size_t max_entities = 10000;
  std::size_t max_relations = 50000;
  /// Removable elements scoring below this are dropped even under budget.
  double min_salience = 0.0;
  KindSet protected_kinds{MemoryKind::kCore};
  double lambda_per_day = 1.0 / 30.0;
};

struct PruneReport {
  std::vector<EntityId> removed_entities;
  std::vector<RelationId> removed_relations;

  bool empty() const { return removed_entities.empty() && removed_relations.empty(); }
};

struct RepairReport {
  std::size_t dropped_entries = 0;
  std::vector<EntityId> removed_entities;
  std::vector<RelationId> removed_relations;
};

inline constexpr std::size_t kKindCount = 3;

struct GraphStats {
  std::size_t entity_total = 0;
  std::size_t relation_total = 0;
  /// Indexed by MemoryKind.
  std::array<std::size_t, kKindCount> entity_count{};
  std::array<std::size_t, kKindCount> relation_count{};
  /// Distinct chunks referenced by elements of each kind.
  std::array<std::size_t, kKindCount> chunk_ref_count{};
  std::size_t total_bytes_estimate = 0;

  bool operator==(const GraphStats&) const = default;
};

inline constexpr std::string_view kGraphSnapshotFormat = "memverse-graph/1";

/// salience * exp(-lambda_per_day * days since last activation).
double retention_score(double salience, Timestamp last_activated, Timestamp now, double lambda_per_day);

/// Long-term memory graph: one entity namespace shared by the core, episodic
/// and semantic subgraphs. Each element records the kinds it belongs to and
/// the chunks that support it.
///
/// Every element keeps non-empty provenance. merge, prune, activate and
/// repair take the write lock; queries take a shared lock.
class KnowledgeGraph {
 public:
  struct Options {
    double activation_bonus = 1.0;
  };

  KnowledgeGraph(const ChunkStore& store, const Clock& clock);
  KnowledgeGraph(const ChunkStore& store, const Clock& clock, Options options);

  KnowledgeGraph(const KnowledgeGraph&) = delete;
  KnowledgeGraph& operator=(const KnowledgeGraph&) = delete;

  /// Upserts entities by canonical name and relations by (src, dst, label).
  /// Rejected atomically with kDanglingChunk if any cited chunk is missing
  /// or tombstoned.
  GraphDelta merge_extraction(const ExtractionResult& result);

  Activation activate(ElementId seed);

  /// Activation bookkeeping for many elements at once (salience bonus and
  /// timestamp); returns the union of their live provenance, ascending.
  /// Unknown ids are ignored.
  std::vector<ChunkSeq> activate_all(const std::vector<ElementId>& elements);

  Subgraph neighbors(EntityId seed, std::size_t hop_limit, KindSet kinds = KindSet::all()) const;

  PruneReport prune(const PruneBudget& budget);

  /// Drops `seq` from every provenance set; elements left without support
  /// are removed together with their incident relations.
  RepairReport repair(ChunkSeq seq);

  /// Removes an entity and its incident relations. Throws kNotFound.
  std::size_t remove_entity(EntityId id);

  GraphStats stats() const;

  /// Number of provenance entries (entities + relations) citing `seq`.
  std::size_t reference_count(ChunkSeq seq) const;

  std::optional<Entity> entity(EntityId id) const;
  std::optional<Relation> relation(RelationId id) const;
  std::optional<EntityId> find_entity(std::string_view name) const;
  std::vector<Entity> entities() const;
  std::vector<Relation> relations() const;

  /// Entities of one memory kind. Episodic views are ordered by the
  /// creation time of the earliest supporting chunk, the others by id.
  std::vector<EntityId> view(MemoryKind kind) const;

  /// Exhaustive provenance-closure scan: one message per element with empty
  /// provenance, a non-live supporting chunk, or a missing endpoint.
  std::vector<std::string> integrity_violations() const;

  /// Bumped on every structural change (not on activation bookkeeping);
  /// retrieval indexes compare against it.
  std::uint64_t revision() const;

  std::string snapshot_text() const;
  void snapshot(const std::filesystem::path& path) const;
  /// Replaces the whole graph from a snapshot. On any error the graph is
  /// left untouched (kIoError or kFormatVersionMismatch).
  void restore(const std::filesystem::path& path);
  void restore_text(std::string_view text);

  bool operator==(const KnowledgeGraph& other) const;

 private:
  struct State {
    std::map<std::uint64_t, Entity> entities;
    std::map<std::uint64_t, Relation> relations;
    std::uint64_t next_entity = 0;
    std::uint64_t next_relation = 0;

    std::unordered_map<std::string, std::uint64_t> by_name;
    std::map<std::tuple<std::uint64_t, std::uint64_t, std::string>, std::uint64_t> by_key;
    std::unordered_map<std::uint64_t, std::set<std::uint64_t>> incident;
    std::unordered_map<ChunkSeq, std::pair<std::set<std::uint64_t>, std::set<std::uint64_t>>> by_chunk;

    void reindex();
  };

  void erase_relation(State& s, std::uint64_t rid);
  void erase_entity(State& s, std::uint64_t eid, std::vector<RelationId>* removed_relations);

  const ChunkStore& store_;
  const Clock& clock_;
  Options options_;

  mutable std::shared_mutex mu_;
  State state_;
  std::uint64_t revision_ = 0;
};

}  // namespace memverse
