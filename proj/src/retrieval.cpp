#include "memverse/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "memverse/text.hpp"

namespace memverse {

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.norm == 0.0 || b.norm == 0.0 || a.values.size() != b.values.size()) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
  return dot / (a.norm * b.norm);
}

EmbeddingVector HashEmbedder::embed(std::string_view text) const {
  EmbeddingVector out;
  out.values.assign(dim_, 0.0);
  for (const auto& tok : text::tokenize(text)) {
    const auto h = text::fnv1a64(tok);
    const auto bucket = static_cast<std::size_t>(h % dim_);
    out.values[bucket] += ((h >> 40) & 1U) != 0 ? -1.0 : 1.0;
  }
  double sq = 0.0;
  for (double v : out.values) sq += v * v;
  if (sq > 0.0) {
    const double n = std::sqrt(sq);
    for (double& v : out.values) v /= n;
    sq = 0.0;
    for (double v : out.values) sq += v * v;
  }
  out.norm = std::sqrt(sq);
  return out;
}

std::string assemble_context(const std::vector<std::string>& ranked_texts, std::size_t budget) {
  std::string out;
  for (const auto& t : ranked_texts) {
    const std::size_t extra = (out.empty() ? 0 : kContextSeparator.size()) + t.size();
    if (out.size() + extra > budget) break;
    if (!out.empty()) out += kContextSeparator;
    out += t;
  }
  return out;
}

Retriever::Retriever(KnowledgeGraph& graph, const ChunkStore& store, std::shared_ptr<const Embedder> embedder)
    : graph_(graph), store_(store), embedder_(std::move(embedder)) {}

void Retriever::rebuild_index() {
  const auto revision = graph_.revision();
  auto entities = graph_.entities();
  std::vector<IndexEntry> next;
  next.reserve(entities.size());
  for (const auto& e : entities) {
    IndexEntry entry;
    entry.id = e.id;
    entry.name = e.display_name;
    entry.tokens = text::tokenize(e.canonical_name);
    std::sort(entry.tokens.begin(), entry.tokens.end());
    entry.tokens.erase(std::unique(entry.tokens.begin(), entry.tokens.end()), entry.tokens.end());
    entry.embedding = embedder_->embed(e.canonical_name);
    entry.kinds = e.kinds;
    next.push_back(std::move(entry));
  }
  std::unique_lock lock(mu_);
  index_ = std::move(next);
  indexed_revision_ = revision;
  built_ = true;
}

bool Retriever::index_stale() const {
  std::shared_lock lock(mu_);
  return !built_ || indexed_revision_ != graph_.revision();
}

void Retriever::ensure_fresh() {
  if (index_stale()) rebuild_index();
}

std::vector<ScoredEntity> Retriever::match_locked(std::string_view query, const RetrievalParams& params) const {
  auto query_tokens = text::tokenize(query);
  std::sort(query_tokens.begin(), query_tokens.end());
  query_tokens.erase(std::unique(query_tokens.begin(), query_tokens.end()), query_tokens.end());
  const auto query_vec = embedder_->embed(query);

  std::vector<ScoredEntity> scored;
  for (const auto& entry : index_) {
    if (!entry.kinds.intersects(params.kinds)) continue;
    std::size_t common = 0;
    for (const auto& t : entry.tokens) {
      if (std::binary_search(query_tokens.begin(), query_tokens.end(), t)) ++common;
    }
    const double lexical =
        entry.tokens.empty() ? 0.0 : static_cast<double>(common) / static_cast<double>(entry.tokens.size());
    const double cos = std::max(0.0, cosine(query_vec, entry.embedding));
    const double score = params.alpha * lexical + params.beta * cos;
    if (score <= 0.0 || score < params.min_match_score) continue;
    scored.push_back({entry.id, entry.name, score, lexical, cos});
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredEntity& a, const ScoredEntity& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (scored.size() > params.top_m) scored.resize(params.top_m);
  return scored;
}

std::vector<ScoredEntity> Retriever::match_entities(std::string_view query, const RetrievalParams& params) {
  if (text::is_blank(query)) fail(ErrorCode::kEmptyQuery, "query is empty");
  if (params.top_m < 1) fail(ErrorCode::kInvalidArgument, "top_m must be >= 1");
  ensure_fresh();
  std::shared_lock lock(mu_);
  return match_locked(query, params);
}

RetrievalResult Retriever::retrieve(std::string_view query, const RetrievalParams& params) {
  if (params.hop_limit < 1) fail(ErrorCode::kInvalidArgument, "hop_limit must be >= 1");
  RetrievalResult out;
  out.query = std::string(query);
  out.matched_entities = match_entities(query, params);
  if (out.matched_entities.empty()) return out;

  // Union of the seeds' neighborhoods.
  std::map<std::uint64_t, std::pair<std::size_t, Entity>> entities;
  std::map<std::uint64_t, Relation> relations;
  std::map<ChunkSeq, double> chunk_scores;
  for (const auto& seed : out.matched_entities) {
    Subgraph sub;
    try {
      sub = graph_.neighbors(seed.id, params.hop_limit, params.kinds);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kNotFound) continue;  // removed since the index was built
      throw;
    }
    for (std::size_t i = 0; i < sub.entities.size(); ++i) {
      auto [it, inserted] = entities.try_emplace(sub.entities[i].id.value, sub.hops[i], sub.entities[i]);
      if (!inserted) it->second.first = std::min(it->second.first, sub.hops[i]);
    }
    for (auto& r : sub.relations) relations.try_emplace(r.id.value, std::move(r));

    const auto& seed_entity = sub.entities.front();
    double contribution = seed.score;
    if (auto top = seed_entity.kinds.top_priority()) {
      contribution += params.kind_bonus[static_cast<std::size_t>(*top)];
    }
    for (auto c : seed_entity.provenance) chunk_scores[c] += contribution;
  }

  std::vector<std::pair<std::size_t, std::uint64_t>> order;
  for (const auto& [id, hop_entity] : entities) order.emplace_back(hop_entity.first, id);
  std::sort(order.begin(), order.end());
  for (const auto& [hop, id] : order) {
    out.subgraph.entities.push_back(entities.at(id).second);
    out.subgraph.hops.push_back(hop);
  }
  for (auto& [id, r] : relations) out.subgraph.relations.push_back(std::move(r));

  std::vector<ElementId> elements;
  elements.reserve(out.subgraph.entities.size() + out.subgraph.relations.size());
  for (const auto& e : out.subgraph.entities) elements.emplace_back(e.id);
  for (const auto& r : out.subgraph.relations) elements.emplace_back(r.id);
  const auto provenance = graph_.activate_all(elements);

  struct Fetched {
    Chunk chunk;
    double score;
  };
  std::vector<Fetched> fetched;
  fetched.reserve(provenance.size());
  for (auto seq : provenance) {
    Chunk chunk;
    try {
      chunk = store_.get(seq);
    } catch (const Error&) {
      continue;  // tombstoned after activation; provenance repair will drop it
    }
    ++out.accesses;
    auto it = chunk_scores.find(seq);
    fetched.push_back({std::move(chunk), it == chunk_scores.end() ? 0.0 : it->second});
  }
  std::sort(fetched.begin(), fetched.end(), [](const Fetched& a, const Fetched& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.chunk.id.sequence > b.chunk.id.sequence;
  });

  std::vector<std::string> texts;
  texts.reserve(fetched.size());
  for (const auto& f : fetched) {
    out.chunks.push_back({f.chunk.id, f.score});
    texts.push_back(f.chunk.content);
    for (const auto& m : f.chunk.media) {
      if (std::find(out.media.begin(), out.media.end(), m) == out.media.end()) out.media.push_back(m);
    }
  }
  out.context = assemble_context(texts, params.context_budget);
  return out;
}

std::string Retriever::rewrite_query(std::string_view query, const RetrievalParams& params) {
  auto result = retrieve(query, params);
  if (result.context.empty()) return std::string(query);
  std::string out(query);
  out += ' ';
  out += kRewriteSeparator;
  out += ' ';
  out += result.context;
  return out;
}

}  // namespace memverse
