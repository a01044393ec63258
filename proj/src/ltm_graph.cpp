#include "memverse/ltm_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <mutex>
#include <sstream>

#include "memverse/json_io.hpp"
#include "memverse/text.hpp"

namespace memverse {
namespace fs = std::filesystem;

namespace {

constexpr double kMillisPerDay = 86'400'000.0;

std::size_t kind_index(MemoryKind k) { return static_cast<std::size_t>(k); }

constexpr std::array<MemoryKind, kKindCount> kAllKinds = {MemoryKind::kCore, MemoryKind::kEpisodic,
                                                          MemoryKind::kSemantic};

Json kinds_json(KindSet kinds) {
  Json out = Json::array();
  for (auto k : kAllKinds) {
    if (kinds.contains(k)) out.push_back(std::string(to_string(k)));
  }
  return out;
}

KindSet kinds_from_json(const Json& j) {
  KindSet out;
  for (const auto& k : j) out.insert(parse_memory_kind(k.get<std::string>()));
  return out;
}

}  // namespace

double retention_score(double salience, Timestamp last_activated, Timestamp now, double lambda_per_day) {
  const auto age_ms = std::max<std::int64_t>(0, to_millis(now) - to_millis(last_activated));
  return salience * std::exp(-lambda_per_day * static_cast<double>(age_ms) / kMillisPerDay);
}

void KnowledgeGraph::State::reindex() {
  by_name.clear();
  by_key.clear();
  incident.clear();
  by_chunk.clear();
  for (const auto& [id, e] : entities) {
    by_name[e.canonical_name] = id;
    incident[id];
    for (auto c : e.provenance) by_chunk[c].first.insert(id);
  }
  for (const auto& [id, r] : relations) {
    by_key[{r.src.value, r.dst.value, r.label}] = id;
    incident[r.src.value].insert(id);
    incident[r.dst.value].insert(id);
    for (auto c : r.provenance) by_chunk[c].second.insert(id);
  }
}

KnowledgeGraph::KnowledgeGraph(const ChunkStore& store, const Clock& clock)
    : KnowledgeGraph(store, clock, Options{}) {}

KnowledgeGraph::KnowledgeGraph(const ChunkStore& store, const Clock& clock, Options options)
    : store_(store), clock_(clock), options_(options) {}

GraphDelta KnowledgeGraph::merge_extraction(const ExtractionResult& result) {
  std::set<ChunkSeq> cited;
  for (const auto& e : result.entities) cited.insert(e.source_chunks.begin(), e.source_chunks.end());
  for (const auto& r : result.relations) cited.insert(r.source_chunks.begin(), r.source_chunks.end());
  for (auto seq : cited) {
    if (!store_.is_live(seq)) {
      fail(ErrorCode::kDanglingChunk, "chunk " + std::to_string(seq) + " is missing or tombstoned");
    }
  }

  std::unordered_map<std::string, const ExtractedEntity*> named;
  for (const auto& e : result.entities) named[e.name] = &e;
  for (const auto& r : result.relations) {
    if (!named.contains(r.src_name) || !named.contains(r.dst_name)) {
      fail(ErrorCode::kSchemaViolation, "relation endpoint missing from extraction result");
    }
  }

  const auto now = clock_.now();
  GraphDelta delta;
  std::unique_lock lock(mu_);
  auto& s = state_;

  for (const auto& x : result.entities) {
    auto it = s.by_name.find(x.name);
    if (it == s.by_name.end()) {
      Entity e;
      e.id = EntityId{s.next_entity++};
      e.canonical_name = x.name;
      e.display_name = x.display_name.empty() ? x.name : x.display_name;
      e.etype = x.etype.empty() ? "unknown" : x.etype;
      e.kinds.insert(x.kind);
      e.provenance = x.source_chunks;
      e.salience = static_cast<double>(x.source_chunks.size());
      e.created_at = now;
      e.last_activated = now;
      const auto id = e.id.value;
      for (auto c : e.provenance) s.by_chunk[c].first.insert(id);
      s.by_name[x.name] = id;
      s.incident[id];
      s.entities.emplace(id, std::move(e));
      ++delta.entities_added;
      continue;
    }
    auto& e = s.entities.at(it->second);
    bool changed = false;
    for (auto c : x.source_chunks) {
      if (e.provenance.insert(c).second) {
        e.salience += 1.0;
        s.by_chunk[c].first.insert(e.id.value);
        changed = true;
      }
    }
    if (!e.kinds.contains(x.kind)) {
      e.kinds.insert(x.kind);
      changed = true;
    }
    if (e.etype == "unknown" && !x.etype.empty() && x.etype != "unknown") {
      e.etype = x.etype;
      changed = true;
    }
    if (changed) ++delta.entities_updated;
  }

  for (const auto& x : result.relations) {
    const auto src = s.by_name.at(x.src_name);
    const auto dst = s.by_name.at(x.dst_name);
    auto key = std::make_tuple(src, dst, x.label);
    auto it = s.by_key.find(key);
    if (it == s.by_key.end()) {
      Relation r;
      r.id = RelationId{s.next_relation++};
      r.src = EntityId{src};
      r.dst = EntityId{dst};
      r.label = x.label;
      r.kinds.insert(x.kind);
      r.provenance = x.source_chunks;
      r.salience = static_cast<double>(x.source_chunks.size());
      r.last_activated = now;
      const auto id = r.id.value;
      for (auto c : r.provenance) s.by_chunk[c].second.insert(id);
      s.by_key.emplace(std::move(key), id);
      s.incident[src].insert(id);
      s.incident[dst].insert(id);
      s.relations.emplace(id, std::move(r));
      ++delta.relations_added;
      continue;
    }
    auto& r = s.relations.at(it->second);
    bool changed = false;
    for (auto c : x.source_chunks) {
      if (r.provenance.insert(c).second) {
        r.salience += 1.0;
        s.by_chunk[c].second.insert(r.id.value);
        changed = true;
      }
    }
    if (!r.kinds.contains(x.kind)) {
      r.kinds.insert(x.kind);
      changed = true;
    }
    if (changed) ++delta.relations_updated;
  }

  if (delta != GraphDelta{}) ++revision_;
  return delta;
}

Activation KnowledgeGraph::activate(ElementId seed) {
  Provenance provenance;
  {
    std::unique_lock lock(mu_);
    const auto now = clock_.now();
    if (const auto* eid = std::get_if<EntityId>(&seed)) {
      auto it = state_.entities.find(eid->value);
      if (it == state_.entities.end()) fail(ErrorCode::kNotFound, "entity " + std::to_string(eid->value) + " not found");
      it->second.salience += options_.activation_bonus;
      it->second.last_activated = now;
      provenance = it->second.provenance;
    } else {
      const auto rid = std::get<RelationId>(seed).value;
      auto it = state_.relations.find(rid);
      if (it == state_.relations.end()) fail(ErrorCode::kNotFound, "relation " + std::to_string(rid) + " not found");
      it->second.salience += options_.activation_bonus;
      it->second.last_activated = now;
      provenance = it->second.provenance;
    }
  }

  Activation out;
  out.seed = seed;
  for (auto seq : provenance) {
    try {
      out.chunks.push_back(store_.get(seq));
    } catch (const Error&) {
      out.repair.push_back(seq);
      continue;
    }
    for (const auto& m : out.chunks.back().media) {
      if (std::find(out.media.begin(), out.media.end(), m) == out.media.end()) out.media.push_back(m);
    }
  }
  return out;
}

std::vector<ChunkSeq> KnowledgeGraph::activate_all(const std::vector<ElementId>& elements) {
  std::set<ChunkSeq> chunks;
  {
    std::unique_lock lock(mu_);
    const auto now = clock_.now();
    for (const auto& el : elements) {
      if (const auto* eid = std::get_if<EntityId>(&el)) {
        auto it = state_.entities.find(eid->value);
        if (it == state_.entities.end()) continue;
        it->second.salience += options_.activation_bonus;
        it->second.last_activated = now;
        chunks.insert(it->second.provenance.begin(), it->second.provenance.end());
      } else {
        auto it = state_.relations.find(std::get<RelationId>(el).value);
        if (it == state_.relations.end()) continue;
        it->second.salience += options_.activation_bonus;
        it->second.last_activated = now;
        chunks.insert(it->second.provenance.begin(), it->second.provenance.end());
      }
    }
  }
  std::vector<ChunkSeq> out;
  out.reserve(chunks.size());
  for (auto c : chunks) {
    if (store_.is_live(c)) out.push_back(c);
  }
  return out;
}

Subgraph KnowledgeGraph::neighbors(EntityId seed, std::size_t hop_limit, KindSet kinds) const {
  if (hop_limit < 1) fail(ErrorCode::kInvalidArgument, "hop_limit must be >= 1");
  std::shared_lock lock(mu_);
  const auto& s = state_;
  if (!s.entities.contains(seed.value)) {
    fail(ErrorCode::kNotFound, "entity " + std::to_string(seed.value) + " not found");
  }

  std::map<std::uint64_t, std::size_t> hop_of{{seed.value, 0}};
  std::deque<std::uint64_t> frontier{seed.value};
  while (!frontier.empty()) {
    const auto current = frontier.front();
    frontier.pop_front();
    const auto hop = hop_of.at(current);
    if (hop >= hop_limit) continue;
    auto inc = s.incident.find(current);
    if (inc == s.incident.end()) continue;
    for (auto rid : inc->second) {
      const auto& r = s.relations.at(rid);
      if (!r.kinds.intersects(kinds)) continue;
      const auto other = r.src.value == current ? r.dst.value : r.src.value;
      if (hop_of.try_emplace(other, hop + 1).second) frontier.push_back(other);
    }
  }

  std::vector<std::pair<std::size_t, std::uint64_t>> order;
  order.reserve(hop_of.size());
  for (const auto& [id, hop] : hop_of) order.emplace_back(hop, id);
  std::sort(order.begin(), order.end());

  Subgraph out;
  for (const auto& [hop, id] : order) {
    out.entities.push_back(s.entities.at(id));
    out.hops.push_back(hop);
  }
  std::set<std::uint64_t> rels;
  for (const auto& [id, hop] : hop_of) {
    if (hop >= hop_limit) continue;
    auto inc = s.incident.find(id);
    if (inc == s.incident.end()) continue;
    for (auto rid : inc->second) {
      const auto& r = s.relations.at(rid);
      if (r.kinds.intersects(kinds) && hop_of.contains(r.src.value) && hop_of.contains(r.dst.value)) {
        rels.insert(rid);
      }
    }
  }
  for (auto rid : rels) out.relations.push_back(s.relations.at(rid));
  return out;
}

void KnowledgeGraph::erase_relation(State& s, std::uint64_t rid) {
  auto it = s.relations.find(rid);
  if (it == s.relations.end()) return;
  const auto& r = it->second;
  s.by_key.erase({r.src.value, r.dst.value, r.label});
  s.incident[r.src.value].erase(rid);
  s.incident[r.dst.value].erase(rid);
  for (auto c : r.provenance) {
    auto bc = s.by_chunk.find(c);
    if (bc == s.by_chunk.end()) continue;
    bc->second.second.erase(rid);
    if (bc->second.first.empty() && bc->second.second.empty()) s.by_chunk.erase(bc);
  }
  s.relations.erase(it);
}

void KnowledgeGraph::erase_entity(State& s, std::uint64_t eid, std::vector<RelationId>* removed_relations) {
  auto it = s.entities.find(eid);
  if (it == s.entities.end()) return;
  if (auto inc = s.incident.find(eid); inc != s.incident.end()) {
    auto rels = inc->second;
    for (auto rid : rels) {
      erase_relation(s, rid);
      if (removed_relations != nullptr) removed_relations->push_back(RelationId{rid});
    }
    s.incident.erase(eid);
  }
  for (auto c : it->second.provenance) {
    auto bc = s.by_chunk.find(c);
    if (bc == s.by_chunk.end()) continue;
    bc->second.first.erase(eid);
    if (bc->second.first.empty() && bc->second.second.empty()) s.by_chunk.erase(bc);
  }
  s.by_name.erase(it->second.canonical_name);
  s.entities.erase(it);
}

PruneReport KnowledgeGraph::prune(const PruneBudget& budget) {
  if (budget.max_entities < 1 || budget.max_relations < 1) {
    fail(ErrorCode::kInvalidArgument, "prune budgets must be positive");
  }
  std::unique_lock lock(mu_);
  auto& s = state_;
  const auto now = clock_.now();

  std::set<std::uint64_t> protected_entities;
  std::size_t protected_relations = 0;
  for (const auto& [id, r] : s.relations) {
    if (r.kinds.intersects(budget.protected_kinds)) {
      ++protected_relations;
      protected_entities.insert(r.src.value);
      protected_entities.insert(r.dst.value);
    }
  }
  for (const auto& [id, e] : s.entities) {
    if (e.kinds.intersects(budget.protected_kinds)) protected_entities.insert(id);
  }
  if (protected_entities.size() > budget.max_entities) {
    fail(ErrorCode::kBudgetInfeasible, std::to_string(protected_entities.size()) +
                                           " protected entities exceed max_entities=" +
                                           std::to_string(budget.max_entities));
  }
  if (protected_relations > budget.max_relations) {
    fail(ErrorCode::kBudgetInfeasible, std::to_string(protected_relations) +
                                           " protected relations exceed max_relations=" +
                                           std::to_string(budget.max_relations));
  }

  PruneReport report;
  auto score_of = [&](double salience, Timestamp last) {
    return retention_score(salience, last, now, budget.lambda_per_day);
  };

  // Candidates ordered by ascending retention score, then id.
  std::vector<std::pair<double, std::uint64_t>> entity_order;
  for (const auto& [id, e] : s.entities) {
    if (!protected_entities.contains(id)) entity_order.emplace_back(score_of(e.salience, e.last_activated), id);
  }
  std::sort(entity_order.begin(), entity_order.end());

  for (const auto& [score, id] : entity_order) {
    const bool over = s.entities.size() > budget.max_entities;
    if (!over && score >= budget.min_salience) break;
    erase_entity(s, id, &report.removed_relations);
    report.removed_entities.push_back(EntityId{id});
  }

  std::vector<std::pair<double, std::uint64_t>> relation_order;
  for (const auto& [id, r] : s.relations) {
    if (!r.kinds.intersects(budget.protected_kinds)) {
      relation_order.emplace_back(score_of(r.salience, r.last_activated), id);
    }
  }
  std::sort(relation_order.begin(), relation_order.end());
  for (const auto& [score, id] : relation_order) {
    const bool over = s.relations.size() > budget.max_relations;
    if (!over && score >= budget.min_salience) break;
    erase_relation(s, id);
    report.removed_relations.push_back(RelationId{id});
  }

  std::sort(report.removed_entities.begin(), report.removed_entities.end());
  std::sort(report.removed_relations.begin(), report.removed_relations.end());
  if (!report.empty()) ++revision_;
  return report;
}

RepairReport KnowledgeGraph::repair(ChunkSeq seq) {
  std::unique_lock lock(mu_);
  auto& s = state_;
  RepairReport report;
  auto bc = s.by_chunk.find(seq);
  if (bc == s.by_chunk.end()) return report;
  auto [entity_ids, relation_ids] = bc->second;
  s.by_chunk.erase(bc);

  for (auto rid : relation_ids) {
    auto& r = s.relations.at(rid);
    r.provenance.erase(seq);
    ++report.dropped_entries;
  }
  for (auto eid : entity_ids) {
    auto& e = s.entities.at(eid);
    e.provenance.erase(seq);
    ++report.dropped_entries;
  }
  for (auto rid : relation_ids) {
    auto it = s.relations.find(rid);
    if (it != s.relations.end() && it->second.provenance.empty()) {
      erase_relation(s, rid);
      report.removed_relations.push_back(RelationId{rid});
    }
  }
  for (auto eid : entity_ids) {
    auto it = s.entities.find(eid);
    if (it != s.entities.end() && it->second.provenance.empty()) {
      erase_entity(s, eid, &report.removed_relations);
      report.removed_entities.push_back(EntityId{eid});
    }
  }
  std::sort(report.removed_entities.begin(), report.removed_entities.end());
  std::sort(report.removed_relations.begin(), report.removed_relations.end());
  ++revision_;
  return report;
}

std::size_t KnowledgeGraph::remove_entity(EntityId id) {
  std::unique_lock lock(mu_);
  if (!state_.entities.contains(id.value)) {
    fail(ErrorCode::kNotFound, "entity " + std::to_string(id.value) + " not found");
  }
  std::vector<RelationId> removed;
  erase_entity(state_, id.value, &removed);
  ++revision_;
  return removed.size();
}

GraphStats KnowledgeGraph::stats() const {
  std::shared_lock lock(mu_);
  GraphStats out;
  std::array<std::set<ChunkSeq>, kKindCount> chunks_by_kind;
  out.entity_total = state_.entities.size();
  out.relation_total = state_.relations.size();
  for (const auto& [id, e] : state_.entities) {
    for (auto k : kAllKinds) {
      if (!e.kinds.contains(k)) continue;
      ++out.entity_count[kind_index(k)];
      chunks_by_kind[kind_index(k)].insert(e.provenance.begin(), e.provenance.end());
    }
    out.total_bytes_estimate += sizeof(Entity) + e.canonical_name.size() + e.display_name.size() +
                                e.etype.size() + e.provenance.size() * sizeof(ChunkSeq);
  }
  for (const auto& [id, r] : state_.relations) {
    for (auto k : kAllKinds) {
      if (!r.kinds.contains(k)) continue;
      ++out.relation_count[kind_index(k)];
      chunks_by_kind[kind_index(k)].insert(r.provenance.begin(), r.provenance.end());
    }
    out.total_bytes_estimate += sizeof(Relation) + r.label.size() + r.provenance.size() * sizeof(ChunkSeq);
  }
  for (auto k : kAllKinds) out.chunk_ref_count[kind_index(k)] = chunks_by_kind[kind_index(k)].size();
  return out;
}

std::size_t KnowledgeGraph::reference_count(ChunkSeq seq) const {
  std::shared_lock lock(mu_);
  auto it = state_.by_chunk.find(seq);
  if (it == state_.by_chunk.end()) return 0;
  return it->second.first.size() + it->second.second.size();
}

std::optional<Entity> KnowledgeGraph::entity(EntityId id) const {
  std::shared_lock lock(mu_);
  auto it = state_.entities.find(id.value);
  if (it == state_.entities.end()) return std::nullopt;
  return it->second;
}

std::optional<Relation> KnowledgeGraph::relation(RelationId id) const {
  std::shared_lock lock(mu_);
  auto it = state_.relations.find(id.value);
  if (it == state_.relations.end()) return std::nullopt;
  return it->second;
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view name) const {
  const auto key = text::canonicalize(name);
  std::shared_lock lock(mu_);
  auto it = state_.by_name.find(key);
  if (it == state_.by_name.end()) return std::nullopt;
  return EntityId{it->second};
}

std::vector<Entity> KnowledgeGraph::entities() const {
  std::shared_lock lock(mu_);
  std::vector<Entity> out;
  out.reserve(state_.entities.size());
  for (const auto& [id, e] : state_.entities) out.push_back(e);
  return out;
}

std::vector<Relation> KnowledgeGraph::relations() const {
  std::shared_lock lock(mu_);
  std::vector<Relation> out;
  out.reserve(state_.relations.size());
  for (const auto& [id, r] : state_.relations) out.push_back(r);
  return out;
}

std::vector<EntityId> KnowledgeGraph::view(MemoryKind kind) const {
  std::shared_lock lock(mu_);
  std::vector<std::tuple<std::int64_t, ChunkSeq, std::uint64_t>> keyed;
  for (const auto& [id, e] : state_.entities) {
    if (!e.kinds.contains(kind)) continue;
    std::int64_t t = 0;
    ChunkSeq first = e.provenance.empty() ? 0 : *e.provenance.begin();
    if (kind == MemoryKind::kEpisodic) {
      t = std::numeric_limits<std::int64_t>::max();
      for (auto c : e.provenance) {
        if (auto rec = store_.inspect(c)) {
          const auto ms = to_millis(rec->chunk.created_at);
          if (ms < t || (ms == t && c < first)) {
            t = ms;
            first = c;
          }
        }
      }
    } else {
      first = 0;
    }
    keyed.emplace_back(t, first, id);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<EntityId> out;
  out.reserve(keyed.size());
  for (const auto& [t, c, id] : keyed) out.push_back(EntityId{id});
  return out;
}

std::vector<std::string> KnowledgeGraph::integrity_violations() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  auto check = [&](const Provenance& p, const std::string& what) {
    if (p.empty()) out.push_back(what + ": empty provenance");
    for (auto c : p) {
      if (!store_.is_live(c)) out.push_back(what + ": chunk " + std::to_string(c) + " is not live");
    }
  };
  for (const auto& [id, e] : state_.entities) {
    check(e.provenance, "entity " + std::to_string(id));
    if (e.kinds.empty()) out.push_back("entity " + std::to_string(id) + ": no kinds");
  }
  for (const auto& [id, r] : state_.relations) {
    check(r.provenance, "relation " + std::to_string(id));
    if (!state_.entities.contains(r.src.value) || !state_.entities.contains(r.dst.value)) {
      out.push_back("relation " + std::to_string(id) + ": dangling endpoint");
    }
    if (r.kinds.empty()) out.push_back("relation " + std::to_string(id) + ": no kinds");
  }
  return out;
}

std::uint64_t KnowledgeGraph::revision() const {
  std::shared_lock lock(mu_);
  return revision_;
}

std::string KnowledgeGraph::snapshot_text() const {
  std::shared_lock lock(mu_);
  Json entities = Json::array();
  for (const auto& [id, e] : state_.entities) {
    entities.push_back({{"id", id},
                        {"canonical_name", e.canonical_name},
                        {"display_name", e.display_name},
                        {"etype", e.etype},
                        {"kinds", kinds_json(e.kinds)},
                        {"provenance", e.provenance},
                        {"salience", e.salience},
                        {"last_activated", to_millis(e.last_activated)},
                        {"created_at", to_millis(e.created_at)}});
  }
  Json relations = Json::array();
  for (const auto& [id, r] : state_.relations) {
    relations.push_back({{"id", id},
                         {"src", r.src.value},
                         {"dst", r.dst.value},
                         {"label", r.label},
                         {"kinds", kinds_json(r.kinds)},
                         {"provenance", r.provenance},
                         {"salience", r.salience},
                         {"last_activated", to_millis(r.last_activated)}});
  }
  Json doc{{"format", std::string(kGraphSnapshotFormat)},
           {"next_entity_id", state_.next_entity},
           {"next_relation_id", state_.next_relation},
           {"entities", std::move(entities)},
           {"relations", std::move(relations)}};
  return doc.dump() + "\n";
}

void KnowledgeGraph::snapshot(const fs::path& path) const {
  const auto text = snapshot_text();
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out) fail(ErrorCode::kIoError, "cannot write snapshot " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot move snapshot into place: " + ec.message());
}

void KnowledgeGraph::restore(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot read snapshot " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  restore_text(text);
}

void KnowledgeGraph::restore_text(std::string_view text) {
  Json doc = Json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) fail(ErrorCode::kIoError, "graph snapshot is corrupted");
  if (!doc.contains("format") || !doc["format"].is_string() ||
      doc["format"].get<std::string>() != kGraphSnapshotFormat) {
    fail(ErrorCode::kFormatVersionMismatch, "graph snapshot is not " + std::string(kGraphSnapshotFormat));
  }

  State next;
  try {
    next.next_entity = doc.at("next_entity_id").get<std::uint64_t>();
    next.next_relation = doc.at("next_relation_id").get<std::uint64_t>();
    for (const auto& j : doc.at("entities")) {
      Entity e;
      e.id = EntityId{j.at("id").get<std::uint64_t>()};
      e.canonical_name = j.at("canonical_name").get<std::string>();
      e.display_name = j.at("display_name").get<std::string>();
      e.etype = j.at("etype").get<std::string>();
      e.kinds = kinds_from_json(j.at("kinds"));
      e.provenance = j.at("provenance").get<Provenance>();
      e.salience = j.at("salience").get<double>();
      e.last_activated = from_millis(j.at("last_activated").get<std::int64_t>());
      e.created_at = from_millis(j.at("created_at").get<std::int64_t>());
      if (e.provenance.empty() || e.kinds.empty() || e.id.value >= next.next_entity) {
        fail(ErrorCode::kIoError, "snapshot entity " + std::to_string(e.id.value) + " is invalid");
      }
      next.entities.emplace(e.id.value, std::move(e));
    }
    for (const auto& j : doc.at("relations")) {
      Relation r;
      r.id = RelationId{j.at("id").get<std::uint64_t>()};
      r.src = EntityId{j.at("src").get<std::uint64_t>()};
      r.dst = EntityId{j.at("dst").get<std::uint64_t>()};
      r.label = j.at("label").get<std::string>();
      r.kinds = kinds_from_json(j.at("kinds"));
      r.provenance = j.at("provenance").get<Provenance>();
      r.salience = j.at("salience").get<double>();
      r.last_activated = from_millis(j.at("last_activated").get<std::int64_t>());
      if (r.provenance.empty() || r.kinds.empty() || !next.entities.contains(r.src.value) ||
          !next.entities.contains(r.dst.value) || r.id.value >= next.next_relation) {
        fail(ErrorCode::kIoError, "snapshot relation " + std::to_string(r.id.value) + " is invalid");
      }
      next.relations.emplace(r.id.value, std::move(r));
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::kIoError, std::string("graph snapshot is corrupted: ") + e.what());
  }
  next.reindex();

  std::unique_lock lock(mu_);
  state_ = std::move(next);
  ++revision_;
}

bool KnowledgeGraph::operator==(const KnowledgeGraph& other) const {
  if (this == &other) return true;
  std::shared_lock a(mu_, std::defer_lock);
  std::shared_lock b(other.mu_, std::defer_lock);
  std::lock(a, b);
  return state_.entities == other.state_.entities && state_.relations == other.state_.relations &&
         state_.next_entity == other.state_.next_entity && state_.next_relation == other.state_.next_relation;
}

}  // namespace memverse
