#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "memverse/chunk_store.hpp"
#include "memverse/config.hpp"
#include "memverse/distill_export.hpp"
#include "memverse/extractor.hpp"
#include "memverse/json_io.hpp"
#include "memverse/ltm_graph.hpp"
#include "memverse/retrieval.hpp"
#include "memverse/stm.hpp"

namespace memverse {

enum class RoutePath { kStmHit, kLtmRetrieval, kParametric };

std::string_view to_string(RoutePath path);
std::optional<RoutePath> try_parse_route_path(std::string_view s);

struct RoutingDecision {
  RoutePath path = RoutePath::kLtmRetrieval;
  std::string reason;
  /// Session whose window answered an stm_hit.
  std::optional<std::string> session;
};

enum class Role { kUser, kAssistant };

struct AddOp {
  std::string content;
  std::string session_id;
  /// Next turn of the session when unset.
  std::optional<std::uint64_t> turn_index;
  std::vector<MediaRef> media;
  std::optional<MemoryKind> kind_hint;
  /// Assistant turns are stored but never enter the STM window.
  Role role = Role::kUser;
};

struct UpdateOp {
  ChunkSeq target = 0;
  std::string correction;
};

struct DeleteOp {
  std::variant<ChunkSeq, EntityId> target;
};

struct RetrieveOp {
  std::string query;
  std::optional<RetrievalParams> params;
  std::optional<RoutePath> path_hint;
  std::optional<std::string> session_id;
  Choices choices;
  /// Compared with the latest export's domain tag for parametric routing.
  std::optional<std::string> domain;
};

using MemoryOp = std::variant<AddOp, UpdateOp, DeleteOp, RetrieveOp>;

struct ParametricAnswer {
  std::string text;
  std::uint64_t trained_round = 0;
  std::int64_t staleness_rounds = 0;
};

struct OpResult {
  std::optional<ChunkId> chunk;
  std::optional<ChunkId> superseded;
  std::optional<RoutingDecision> routing;
  std::optional<RetrievalResult> retrieval;
  std::optional<ParametricAnswer> parametric;
  std::optional<std::string> trace_id;
  RepairReport repair;
  std::size_t accesses = 0;
};

/// Text-in/text-out model endpoint consulted on the parametric path.
class ParametricBackend {
 public:
  virtual ~ParametricBackend() = default;
  /// Returns (text, trained_round). Throws kEndpointUnavailable.
  virtual std::pair<std::string, std::uint64_t> generate(const std::string& prompt) = 0;
};

enum class ActionKind { kConsolidate, kPrune, kDistillExport };
std::string_view to_string(ActionKind kind);

struct ActionOutcome {
  ActionKind kind;
  bool ok = true;
  std::string message;
};

struct ConsolidationReport {
  std::size_t chunks = 0;
  std::size_t batches = 0;
  GraphDelta delta;
};

struct SchedulerState {
  std::vector<ChunkSeq> pending_queue;
  Timestamp last_consolidation{};
  Timestamp last_prune{};
  Timestamp last_distill{};

  std::size_t new_chunks_since_consolidation() const { return pending_queue.size(); }
};

/// Rule cascade: core lexicon phrase -> core; "X is/are a/an/the Y" without
/// first/second person or deictic time words -> semantic; else episodic.
MemoryKind classify_text(std::string_view content, const std::vector<std::string>& core_lexicon);

/// Unified add/update/delete/retrieve interface over one store.
///
/// All public operations are serialized on one mutex; a failing operation
/// leaves no partial change behind.
class Orchestrator {
 public:
  Orchestrator(ChunkStore& store, const Clock& clock, MemverseConfig config,
               std::shared_ptr<ExtractionBackend> backend = nullptr,
               std::shared_ptr<const Embedder> embedder = nullptr);

  OpResult handle(const MemoryOp& op);

  MemoryKind classify(const Chunk& chunk) const;

  /// Rule order: STM containment, parametric domain gate, LTM retrieval.
  RoutingDecision route(std::string_view query, std::optional<RoutePath> hint = std::nullopt,
                        const std::optional<std::string>& session_id = std::nullopt,
                        const std::optional<std::string>& domain = std::nullopt) const;

  std::vector<ActionKind> plan(Timestamp now) const;
  std::vector<ActionOutcome> tick(Timestamp now);

  /// Forced actions, independent of the schedule.
  ConsolidationReport consolidate();
  PruneReport prune();
  ExportManifest export_round(const std::optional<std::filesystem::path>& out = std::nullopt);

  void set_parametric(std::shared_ptr<ParametricBackend> backend);

  /// Live chunks neither processed nor pending.
  std::vector<ChunkSeq> unaccounted_chunks() const;

  Json state() const;
  void load_state(const Json& j);

  const MemverseConfig& config() const { return config_; }
  ChunkStore& store() { return store_; }
  KnowledgeGraph& graph() { return graph_; }
  const KnowledgeGraph& graph() const { return graph_; }
  Retriever& retriever() { return retriever_; }
  DistillExporter& exporter() { return exporter_; }
  const DistillExporter& exporter() const { return exporter_; }
  const SchedulerState& scheduler() const { return scheduler_; }
  const std::set<ChunkSeq>& processed() const { return processed_; }
  const StmWindow* stm(const std::string& session_id) const;

 private:
  OpResult do_add(const AddOp& op);
  OpResult do_update(const UpdateOp& op);
  OpResult do_delete(const DeleteOp& op);
  OpResult do_retrieve(const RetrieveOp& op);
  RoutingDecision route_locked(std::string_view query, std::optional<RoutePath> hint,
                               const std::optional<std::string>& session_id,
                               const std::optional<std::string>& domain) const;
  ConsolidationReport consolidate_locked();
  PruneReport prune_locked();
  ExportManifest export_locked(const std::optional<std::filesystem::path>& out);
  void enqueue(ChunkSeq seq);
  void dequeue(ChunkSeq seq);
  StmWindow& window(const std::string& session_id);

  mutable std::recursive_mutex mu_;
  ChunkStore& store_;
  const Clock& clock_;
  MemverseConfig config_;
  std::shared_ptr<ExtractionBackend> backend_;
  KnowledgeGraph graph_;
  Retriever retriever_;
  DistillExporter exporter_;
  std::shared_ptr<ParametricBackend> parametric_;
  std::map<std::string, StmWindow> stm_;
  SchedulerState scheduler_;
  std::set<ChunkSeq> processed_;
};

Json op_to_json(const MemoryOp& op);
/// Throws kInvalidArgument on unknown op kinds or malformed payloads.
MemoryOp op_from_json(const Json& j);
Json result_to_json(const OpResult& r);
Json retrieval_to_json(const RetrievalResult& r);

}  // namespace memverse
