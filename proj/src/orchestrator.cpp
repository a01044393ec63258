#include "memverse/orchestrator.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_set>

#include "memverse/text.hpp"

namespace memverse {

namespace {

// Words that tie a statement to the conversation rather than to the world.
const std::unordered_set<std::string>& anchored_words() {
  static const std::unordered_set<std::string> words{
      "i",     "me",       "my",      "mine",    "we",  "us",   "our",       "ours",
      "you",   "your",     "yours",   "today",   "yesterday", "tomorrow",  "tonight",
      "now",   "ago",      "recently", "earlier", "later", "this", "currently"};
  return words;
}

const std::unordered_set<std::string>& query_stopwords() {
  static const std::unordered_set<std::string> words{
      "a",    "an",    "the",  "is",   "are",  "was",  "were", "do",    "does", "did",  "what",
      "who",  "whom",  "whose", "which", "when", "where", "why", "how",  "of",   "to",   "in",
      "on",   "at",    "for",  "with", "about", "and", "or",   "it",    "that", "this", "i",
      "me",   "my",    "you",  "your", "we",   "our",  "tell", "remind", "can", "could", "please",
      "again", "be",   "has",  "have", "had",  "any",  "there", "s"};
  return words;
}

bool contains_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > tokens.size()) return false;
  for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
    if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) return true;
  }
  return false;
}

// Lexicon entries may carry apostrophes ("i'm"); compare on whitespace tokens.
std::vector<std::string> phrase_tokens(std::string_view s) {
  std::vector<std::string> out;
  for (const auto& w : text::split(text::canonicalize(s), ' ')) {
    std::string t;
    for (char c : w) {
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'' || static_cast<unsigned char>(c) >= 0x80) t += c;
    }
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

std::string round_file_name(std::uint64_t round) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "round-%04llu.jsonl", static_cast<unsigned long long>(round));
  return buf;
}

}  // namespace

std::string_view to_string(RoutePath path) {
  switch (path) {
    case RoutePath::kStmHit:
      return "stm_hit";
    case RoutePath::kLtmRetrieval:
      return "ltm_retrieval";
    case RoutePath::kParametric:
      return "parametric";
  }
  return "ltm_retrieval";
}

std::optional<RoutePath> try_parse_route_path(std::string_view s) {
  if (s == "stm_hit" || s == "stm") return RoutePath::kStmHit;
  if (s == "ltm_retrieval" || s == "ltm") return RoutePath::kLtmRetrieval;
  if (s == "parametric") return RoutePath::kParametric;
  return std::nullopt;
}

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::kConsolidate:
      return "consolidate";
    case ActionKind::kPrune:
      return "prune";
    case ActionKind::kDistillExport:
      return "distill_export";
  }
  return "consolidate";
}

MemoryKind classify_text(std::string_view content, const std::vector<std::string>& core_lexicon) {
  const auto words = phrase_tokens(content);
  for (const auto& entry : core_lexicon) {
    if (contains_phrase(words, phrase_tokens(entry))) return MemoryKind::kCore;
  }
  const auto tokens = text::tokenize(content);
  bool anchored = false;
  for (const auto& t : tokens) {
    if (anchored_words().contains(t)) {
      anchored = true;
      break;
    }
  }
  if (!anchored) {
    for (std::size_t i = 1; i + 1 < tokens.size(); ++i) {
      if ((tokens[i] == "is" || tokens[i] == "are") &&
          (tokens[i + 1] == "a" || tokens[i + 1] == "an" || tokens[i + 1] == "the")) {
        return MemoryKind::kSemantic;
      }
    }
  }
  return MemoryKind::kEpisodic;
}

Orchestrator::Orchestrator(ChunkStore& store, const Clock& clock, MemverseConfig config,
                           std::shared_ptr<ExtractionBackend> backend, std::shared_ptr<const Embedder> embedder)
    : store_(store),
      clock_(clock),
      config_(std::move(config)),
      backend_(backend ? std::move(backend) : std::make_shared<RuleExtractor>(config_.compression_budget)),
      graph_(store, clock),
      retriever_(graph_, store, embedder ? std::move(embedder) : std::make_shared<HashEmbedder>()),
      exporter_(clock, config_.distill_domain_tag) {
  if (config_.stm_capacity < 1) fail(ErrorCode::kInvalidCapacity, "STM capacity must be >= 1");
  const auto now = clock_.now();
  scheduler_.last_consolidation = now;
  scheduler_.last_prune = now;
  scheduler_.last_distill = now;
  store_.set_reference_probe([this](ChunkSeq seq) { return graph_.reference_count(seq); });
  for (auto seq : store_.live_sequences()) enqueue(seq);
}

const StmWindow* Orchestrator::stm(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  auto it = stm_.find(session_id);
  return it == stm_.end() ? nullptr : &it->second;
}

StmWindow& Orchestrator::window(const std::string& session_id) {
  auto it = stm_.find(session_id);
  if (it == stm_.end()) it = stm_.emplace(session_id, StmWindow(config_.stm_capacity)).first;
  return it->second;
}

void Orchestrator::enqueue(ChunkSeq seq) {
  if (processed_.contains(seq)) return;
  auto& q = scheduler_.pending_queue;
  if (std::find(q.begin(), q.end(), seq) == q.end()) q.push_back(seq);
}

void Orchestrator::dequeue(ChunkSeq seq) {
  auto& q = scheduler_.pending_queue;
  q.erase(std::remove(q.begin(), q.end(), seq), q.end());
}

void Orchestrator::set_parametric(std::shared_ptr<ParametricBackend> backend) {
  std::lock_guard lock(mu_);
  parametric_ = std::move(backend);
}

MemoryKind Orchestrator::classify(const Chunk& chunk) const {
  if (chunk.kind_hint) return *chunk.kind_hint;
  return classify_text(chunk.content, config_.core_lexicon);
}

OpResult Orchestrator::handle(const MemoryOp& op) {
  std::lock_guard lock(mu_);
  return std::visit(
      [this](const auto& payload) -> OpResult {
        using T = std::decay_t<decltype(payload)>;
        if constexpr (std::is_same_v<T, AddOp>) {
          return do_add(payload);
        } else if constexpr (std::is_same_v<T, UpdateOp>) {
          return do_update(payload);
        } else if constexpr (std::is_same_v<T, DeleteOp>) {
          return do_delete(payload);
        } else {
          return do_retrieve(payload);
        }
      },
      op);
}

OpResult Orchestrator::do_add(const AddOp& op) {
  if (text::is_blank(op.content)) fail(ErrorCode::kEmptyContent, "content is empty");
  std::uint64_t turn = 0;
  if (op.turn_index) {
    turn = *op.turn_index;
  } else if (auto last = store_.max_turn(op.session_id)) {
    turn = *last + 1;
  }
  OpResult out;
  out.chunk = store_.put_chunk(op.content, op.session_id, turn, op.media, op.kind_hint);
  enqueue(out.chunk->sequence);
  if (op.role == Role::kUser) {
    // The chunk is already queued, so an evicted turn needs no further action.
    window(op.session_id).push(Turn{*out.chunk, op.content, clock_.now()});
  }
  return out;
}

OpResult Orchestrator::do_update(const UpdateOp& op) {
  if (text::is_blank(op.correction)) fail(ErrorCode::kEmptyContent, "correction is empty");
  const Chunk old = store_.get(op.target);
  const auto turn = store_.max_turn(old.session_id).value_or(0) + 1;
  OpResult out;
  out.chunk = store_.put_chunk(op.correction, old.session_id, turn, old.media, old.kind_hint, old.id.sequence);
  out.superseded = old.id;
  store_.tombstone(old.id, out.chunk->sequence);
  out.repair = graph_.repair(old.id.sequence);
  dequeue(old.id.sequence);
  processed_.erase(old.id.sequence);
  enqueue(out.chunk->sequence);
  for (auto& [session, win] : stm_) {
    if (win.remove_chunk(old.id.sequence)) win.push(Turn{*out.chunk, op.correction, clock_.now()});
  }
  return out;
}

OpResult Orchestrator::do_delete(const DeleteOp& op) {
  OpResult out;
  if (const auto* seq = std::get_if<ChunkSeq>(&op.target)) {
    auto id = store_.id_of(*seq);
    if (!id) fail(ErrorCode::kNotFound, "chunk " + std::to_string(*seq) + " does not exist");
    store_.tombstone(*id);
    out.chunk = *id;
    out.repair = graph_.repair(*seq);
    dequeue(*seq);
    processed_.erase(*seq);
    for (auto& [session, win] : stm_) win.remove_chunk(*seq);
  } else {
    const auto eid = std::get<EntityId>(op.target);
    if (!graph_.entity(eid)) fail(ErrorCode::kNotFound, "entity " + std::to_string(eid.value) + " does not exist");
    graph_.remove_entity(eid);
    out.repair.removed_entities.push_back(eid);
  }
  return out;
}

OpResult Orchestrator::do_retrieve(const RetrieveOp& op) {
  if (text::is_blank(op.query)) fail(ErrorCode::kEmptyQuery, "query is empty");
  OpResult out;
  out.routing = route_locked(op.query, op.path_hint, op.session_id, op.domain);
  switch (out.routing->path) {
    case RoutePath::kStmHit: {
      RetrievalResult r;
      r.query = op.query;
      const auto& session = out.routing->session ? *out.routing->session : op.session_id.value_or("");
      if (auto it = stm_.find(session); it != stm_.end()) r.context = it->second.window_text();
      out.retrieval = std::move(r);
      break;
    }
    case RoutePath::kLtmRetrieval: {
      out.retrieval = retriever_.retrieve(op.query, op.params.value_or(config_.retrieval));
      out.accesses = out.retrieval->accesses;
      out.trace_id = exporter_.record_trace(op.query, op.choices, *out.retrieval);
      break;
    }
    case RoutePath::kParametric: {
      if (!parametric_) fail(ErrorCode::kEndpointUnavailable, "no parametric endpoint registered");
      auto [answer, trained] = parametric_->generate(format_prompt(op.query, op.choices));
      ParametricAnswer p;
      p.text = std::move(answer);
      p.trained_round = trained;
      const std::uint64_t current = exporter_.latest_manifest() ? exporter_.latest_manifest()->round : 0;
      p.staleness_rounds = static_cast<std::int64_t>(current) - static_cast<std::int64_t>(trained);
      out.parametric = std::move(p);
      break;
    }
  }
  return out;
}

RoutingDecision Orchestrator::route(std::string_view query, std::optional<RoutePath> hint,
                                    const std::optional<std::string>& session_id,
                                    const std::optional<std::string>& domain) const {
  std::lock_guard lock(mu_);
  return route_locked(query, hint, session_id, domain);
}

RoutingDecision Orchestrator::route_locked(std::string_view query, std::optional<RoutePath> hint,
                                           const std::optional<std::string>& session_id,
                                           const std::optional<std::string>& domain) const {
  if (hint) return {*hint, "hint override", session_id};

  // Focal entity: the first entity candidate, else the query's content words.
  std::vector<std::string> focal;
  std::string focal_label;
  auto candidates = entity_candidates(query);
  if (!candidates.empty()) {
    focal = text::tokenize(candidates.front());
    focal_label = candidates.front();
  } else {
    for (auto& t : text::tokenize(query)) {
      if (!query_stopwords().contains(t)) focal.push_back(std::move(t));
    }
    for (const auto& t : focal) focal_label += (focal_label.empty() ? "" : " ") + t;
  }
  if (!focal.empty()) {
    for (const auto& [session, win] : stm_) {
      if (session_id && session != *session_id) continue;
      if (win.empty()) continue;
      auto window_tokens = text::tokenize(win.window_text());
      std::unordered_set<std::string> have(window_tokens.begin(), window_tokens.end());
      if (std::all_of(focal.begin(), focal.end(), [&](const std::string& t) { return have.contains(t); })) {
        return {RoutePath::kStmHit, "focal entity '" + focal_label + "' is in the STM window of session '" + session + "'",
                session};
      }
    }
  }

  const auto& latest = exporter_.latest_manifest();
  if (parametric_ && latest && domain && *domain == latest->domain_tag) {
    return {RoutePath::kParametric,
            "domain '" + *domain + "' matches export round " + std::to_string(latest->round), std::nullopt};
  }
  return {RoutePath::kLtmRetrieval, "default: no STM hit and no parametric domain match", std::nullopt};
}

std::vector<ActionKind> Orchestrator::plan(Timestamp now) const {
  std::lock_guard lock(mu_);
  std::vector<ActionKind> out;
  const auto& s = scheduler_;
  if (!s.pending_queue.empty() && (s.new_chunks_since_consolidation() >= config_.consolidation_threshold ||
                                   now - s.last_consolidation >= config_.consolidation_period)) {
    out.push_back(ActionKind::kConsolidate);
  }
  if (now - s.last_prune >= config_.prune_period) out.push_back(ActionKind::kPrune);
  if (now - s.last_distill >= config_.distill_period && exporter_.pending_count() >= config_.distill_min_pairs &&
      exporter_.pending_count() > 0) {
    out.push_back(ActionKind::kDistillExport);
  }
  return out;
}

std::vector<ActionOutcome> Orchestrator::tick(Timestamp now) {
  std::lock_guard lock(mu_);
  std::vector<ActionOutcome> out;
  for (auto action : plan(now)) {
    ActionOutcome outcome{action, true, {}};
    try {
      switch (action) {
        case ActionKind::kConsolidate: {
          auto r = consolidate_locked();
          scheduler_.last_consolidation = now;
          outcome.message = std::to_string(r.chunks) + " chunks consolidated";
          break;
        }
        case ActionKind::kPrune: {
          auto r = prune_locked();
          scheduler_.last_prune = now;
          outcome.message = std::to_string(r.removed_entities.size()) + " entities and " +
                            std::to_string(r.removed_relations.size()) + " relations pruned";
          break;
        }
        case ActionKind::kDistillExport: {
          auto m = export_locked(std::nullopt);
          scheduler_.last_distill = now;
          outcome.message = "round " + std::to_string(m.round) + " exported with " + std::to_string(m.pair_count) + " pairs";
          break;
        }
      }
    } catch (const Error& e) {
      outcome.ok = false;
      outcome.message = std::string(error_name(e.code())) + ": " + e.what();
    }
    out.push_back(std::move(outcome));
  }
  return out;
}

ConsolidationReport Orchestrator::consolidate() {
  std::lock_guard lock(mu_);
  auto r = consolidate_locked();
  scheduler_.last_consolidation = clock_.now();
  return r;
}

ConsolidationReport Orchestrator::consolidate_locked() {
  ConsolidationReport report;
  const auto queue = scheduler_.pending_queue;
  std::vector<Chunk> live;
  std::vector<ChunkSeq> gone;
  for (auto seq : queue) {
    if (store_.is_live(seq)) {
      live.push_back(store_.get(seq));
    } else {
      gone.push_back(seq);
    }
  }

  const std::size_t batch = std::max<std::size_t>(1, config_.consolidation_batch);
  for (std::size_t start = 0; start < live.size(); start += batch) {
    const auto end = std::min(live.size(), start + batch);
    std::map<MemoryKind, std::vector<Chunk>> groups;
    for (std::size_t i = start; i < end; ++i) groups[classify(live[i])].push_back(live[i]);
    for (auto& [kind, chunks] : groups) {
      auto result = extract(chunks, *backend_);
      for (auto& e : result.entities) {
        if (e.kind == MemoryKind::kEpisodic) e.kind = kind;
      }
      for (auto& r : result.relations) {
        if (r.kind == MemoryKind::kEpisodic) r.kind = kind;
      }
      const auto d = graph_.merge_extraction(result);
      report.delta.entities_added += d.entities_added;
      report.delta.entities_updated += d.entities_updated;
      report.delta.relations_added += d.relations_added;
      report.delta.relations_updated += d.relations_updated;
    }
    ++report.batches;
  }

  for (const auto& c : live) processed_.insert(c.id.sequence);
  auto& q = scheduler_.pending_queue;
  q.erase(std::remove_if(q.begin(), q.end(),
                         [&](ChunkSeq s) {
                           return processed_.contains(s) || std::find(gone.begin(), gone.end(), s) != gone.end();
                         }),
          q.end());
  report.chunks = live.size();
  retriever_.rebuild_index();
  return report;
}

PruneReport Orchestrator::prune() {
  std::lock_guard lock(mu_);
  auto r = prune_locked();
  scheduler_.last_prune = clock_.now();
  return r;
}

PruneReport Orchestrator::prune_locked() {
  auto r = graph_.prune(config_.prune);
  if (!r.empty()) retriever_.rebuild_index();
  return r;
}

ExportManifest Orchestrator::export_round(const std::optional<std::filesystem::path>& out) {
  std::lock_guard lock(mu_);
  auto m = export_locked(out);
  scheduler_.last_distill = clock_.now();
  return m;
}

ExportManifest Orchestrator::export_locked(const std::optional<std::filesystem::path>& out) {
  auto path = out.value_or(config_.export_dir / round_file_name(exporter_.current_round()));
  return exporter_.export_round(path, text::sha256_hex(graph_.snapshot_text()));
}

std::vector<ChunkSeq> Orchestrator::unaccounted_chunks() const {
  std::lock_guard lock(mu_);
  std::vector<ChunkSeq> out;
  const auto& q = scheduler_.pending_queue;
  for (auto seq : store_.live_sequences()) {
    if (processed_.contains(seq)) continue;
    if (std::find(q.begin(), q.end(), seq) != q.end()) continue;
    out.push_back(seq);
  }
  return out;
}

Json Orchestrator::state() const {
  std::lock_guard lock(mu_);
  Json stm = Json::object();
  for (const auto& [session, win] : stm_) {
    Json turns = Json::array();
    for (const auto& t : win.turns()) {
      turns.push_back({{"seq", t.chunk_id.sequence},
                       {"digest", t.chunk_id.digest},
                       {"text", t.query_text},
                       {"ts", to_millis(t.timestamp)}});
    }
    stm[session] = {{"capacity", win.capacity()}, {"turns", std::move(turns)}};
  }
  return {{"scheduler",
           {{"pending", scheduler_.pending_queue},
            {"last_consolidation", to_millis(scheduler_.last_consolidation)},
            {"last_prune", to_millis(scheduler_.last_prune)},
            {"last_distill", to_millis(scheduler_.last_distill)}}},
          {"processed", processed_},
          {"stm", std::move(stm)},
          {"exporter", exporter_.state()}};
}

void Orchestrator::load_state(const Json& j) {
  std::lock_guard lock(mu_);
  try {
    SchedulerState s;
    const auto& sj = j.at("scheduler");
    s.pending_queue = sj.at("pending").get<std::vector<ChunkSeq>>();
    s.last_consolidation = from_millis(sj.at("last_consolidation").get<std::int64_t>());
    s.last_prune = from_millis(sj.at("last_prune").get<std::int64_t>());
    s.last_distill = from_millis(sj.at("last_distill").get<std::int64_t>());
    auto processed = j.at("processed").get<std::set<ChunkSeq>>();
    std::map<std::string, StmWindow> windows;
    for (const auto& [session, wj] : j.at("stm").items()) {
      StmWindow win(wj.at("capacity").get<std::size_t>());
      for (const auto& t : wj.at("turns")) {
        win.push(Turn{{t.at("seq").get<ChunkSeq>(), t.at("digest").get<std::string>()},
                      t.at("text").get<std::string>(),
                      from_millis(t.at("ts").get<std::int64_t>())});
      }
      windows.emplace(session, std::move(win));
    }
    DistillExporter probe(clock_, config_.distill_domain_tag);
    probe.load_state(j.at("exporter"));

    scheduler_ = std::move(s);
    processed_ = std::move(processed);
    stm_ = std::move(windows);
    exporter_.load_state(j.at("exporter"));
  } catch (const Json::exception& e) {
    fail(ErrorCode::kParseError, std::string("orchestrator state: ") + e.what());
  }
  // Chunks written after the state was saved are still owed a consolidation.
  for (auto seq : store_.live_sequences()) enqueue(seq);
  retriever_.rebuild_index();
}

Json op_to_json(const MemoryOp& op) {
  return std::visit(
      [](const auto& p) -> Json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, AddOp>) {
          Json j{{"op", "add"}, {"content", p.content}, {"session", p.session_id},
                 {"role", p.role == Role::kUser ? "user" : "assistant"}};
          if (p.turn_index) j["turn"] = *p.turn_index;
          if (!p.media.empty()) j["media"] = p.media;
          if (p.kind_hint) j["kind_hint"] = std::string(to_string(*p.kind_hint));
          return j;
        } else if constexpr (std::is_same_v<T, UpdateOp>) {
          return {{"op", "update"}, {"chunk", p.target}, {"correction", p.correction}};
        } else if constexpr (std::is_same_v<T, DeleteOp>) {
          if (const auto* seq = std::get_if<ChunkSeq>(&p.target)) return {{"op", "delete"}, {"chunk", *seq}};
          return {{"op", "delete"}, {"entity", std::get<EntityId>(p.target).value}};
        } else {
          Json j{{"op", "retrieve"}, {"query", p.query}};
          if (p.path_hint) j["path"] = std::string(to_string(*p.path_hint));
          if (p.session_id) j["session"] = *p.session_id;
          if (p.choices) j["choices"] = *p.choices;
          if (p.domain) j["domain"] = *p.domain;
          if (p.params) {
            j["hops"] = p.params->hop_limit;
            j["budget"] = p.params->context_budget;
            j["top_m"] = p.params->top_m;
            j["kinds"] = to_string(p.params->kinds);
          }
          return j;
        }
      },
      op);
}

MemoryOp op_from_json(const Json& j) {
  try {
    const auto kind = j.at("op").get<std::string>();
    if (kind == "add") {
      AddOp op;
      op.content = j.at("content").get<std::string>();
      op.session_id = j.value("session", std::string("default"));
      if (j.contains("turn")) op.turn_index = j.at("turn").get<std::uint64_t>();
      if (j.contains("media")) op.media = j.at("media").get<std::vector<MediaRef>>();
      if (j.contains("kind_hint")) op.kind_hint = parse_memory_kind(j.at("kind_hint").get<std::string>());
      const auto role = j.value("role", std::string("user"));
      if (role != "user" && role != "assistant") fail(ErrorCode::kInvalidArgument, "role must be user or assistant");
      op.role = role == "user" ? Role::kUser : Role::kAssistant;
      return op;
    }
    if (kind == "update") return UpdateOp{j.at("chunk").get<ChunkSeq>(), j.at("correction").get<std::string>()};
    if (kind == "delete") {
      if (j.contains("entity")) return DeleteOp{EntityId{j.at("entity").get<std::uint64_t>()}};
      return DeleteOp{j.at("chunk").get<ChunkSeq>()};
    }
    if (kind == "retrieve") {
      RetrieveOp op;
      op.query = j.at("query").get<std::string>();
      if (j.contains("path")) {
        op.path_hint = try_parse_route_path(j.at("path").get<std::string>());
        if (!op.path_hint) fail(ErrorCode::kInvalidArgument, "unknown path hint");
      }
      if (j.contains("session")) op.session_id = j.at("session").get<std::string>();
      if (j.contains("choices")) op.choices = j.at("choices").get<std::vector<std::string>>();
      if (j.contains("domain")) op.domain = j.at("domain").get<std::string>();
      if (j.contains("hops") || j.contains("budget") || j.contains("top_m") || j.contains("kinds")) {
        RetrievalParams p;
        if (j.contains("hops")) p.hop_limit = j.at("hops").get<std::size_t>();
        if (j.contains("budget")) p.context_budget = j.at("budget").get<std::size_t>();
        if (j.contains("top_m")) p.top_m = j.at("top_m").get<std::size_t>();
        if (j.contains("kinds")) p.kinds = parse_kind_set(j.at("kinds").get<std::string>());
        op.params = p;
      }
      return op;
    }
    fail(ErrorCode::kInvalidArgument, "unknown op '" + kind + "'");
  } catch (const Json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("malformed op: ") + e.what());
  }
}

Json retrieval_to_json(const RetrievalResult& r) {
  Json matched = Json::array();
  for (const auto& m : r.matched_entities) {
    matched.push_back({{"entity", m.id.value}, {"name", m.name}, {"score", m.score}});
  }
  Json chunks = Json::array();
  for (const auto& c : r.chunks) {
    chunks.push_back({{"seq", c.id.sequence}, {"digest", c.id.digest}, {"score", c.score}});
  }
  Json entities = Json::array();
  for (std::size_t i = 0; i < r.subgraph.entities.size(); ++i) {
    entities.push_back({{"id", r.subgraph.entities[i].id.value},
                        {"name", r.subgraph.entities[i].display_name},
                        {"hop", r.subgraph.hops[i]}});
  }
  Json relations = Json::array();
  for (const auto& rel : r.subgraph.relations) {
    relations.push_back({{"id", rel.id.value}, {"src", rel.src.value}, {"dst", rel.dst.value}, {"label", rel.label}});
  }
  return {{"query", r.query},
          {"matched", std::move(matched)},
          {"chunks", std::move(chunks)},
          {"subgraph", {{"entities", std::move(entities)}, {"relations", std::move(relations)}}},
          {"media", r.media},
          {"context", r.context},
          {"accesses", r.accesses}};
}

Json result_to_json(const OpResult& r) {
  Json j = Json::object();
  if (r.chunk) j["chunk"] = {{"seq", r.chunk->sequence}, {"digest", r.chunk->digest}};
  if (r.superseded) j["superseded"] = {{"seq", r.superseded->sequence}, {"digest", r.superseded->digest}};
  if (r.routing) {
    j["path"] = std::string(to_string(r.routing->path));
    j["reason"] = r.routing->reason;
  }
  if (r.retrieval) j["retrieval"] = retrieval_to_json(*r.retrieval);
  if (r.parametric) {
    j["answer"] = {{"text", r.parametric->text},
                   {"trained_round", r.parametric->trained_round},
                   {"staleness_rounds", r.parametric->staleness_rounds}};
  }
  if (r.trace_id) j["trace_id"] = *r.trace_id;
  if (r.repair.dropped_entries > 0 || !r.repair.removed_entities.empty() || !r.repair.removed_relations.empty()) {
    Json ents = Json::array();
    for (auto e : r.repair.removed_entities) ents.push_back(e.value);
    Json rels = Json::array();
    for (auto rel : r.repair.removed_relations) rels.push_back(rel.value);
    j["repair"] = {{"dropped_entries", r.repair.dropped_entries},
                   {"removed_entities", std::move(ents)},
                   {"removed_relations", std::move(rels)}};
  }
  j["accesses"] = r.accesses;
  return j;
}

}  // namespace memverse
