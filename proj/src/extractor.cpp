#include "memverse/extractor.hpp"

#include <algorithm>
#include <map>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "memverse/json_io.hpp"
#include "memverse/text.hpp"

namespace memverse {
namespace {

const std::unordered_set<std::string>& function_words() {
  static const std::unordered_set<std::string> words = {
      "a",     "an",     "the",   "i",      "it",     "he",    "she",    "we",     "they",
      "you",   "my",     "our",   "your",   "his",    "her",   "their",  "its",    "me",
      "us",    "them",   "this",  "that",   "these",  "those", "there",  "here",   "what",
      "when",  "where",  "who",   "whom",   "why",    "how",   "which",  "yesterday",
      "today", "tomorrow", "tonight", "then", "and",   "but",   "or",     "if",     "so",
      "in",    "on",     "at",    "of",     "for",    "to",    "from",   "with",   "by",
      "after", "before", "also",  "do",     "does",   "did",   "is",     "are",    "was",
      "were",  "be",     "not",   "no",     "yes",    "please", "hi",    "hello",  "last",
      "next",  "every",  "some",  "any",    "all",    "can",   "could",  "will",   "would",
      "should", "may",   "might", "have",   "has",    "had",   "tell",   "remind", "let",
      "now",   "recently", "later", "once", "maybe",  "still", "just",   "as",     "since"};
  return words;
}

bool is_sentence_end(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_core_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) != 0;
}

struct RawToken {
  std::string text;
  bool capitalized = false;
  bool break_after = false;
};

std::vector<RawToken> sentence_tokens(std::string_view sentence) {
  std::vector<RawToken> out;
  std::size_t i = 0;
  while (i < sentence.size()) {
    while (i < sentence.size() && std::isspace(static_cast<unsigned char>(sentence[i]))) ++i;
    std::size_t start = i;
    while (i < sentence.size() && !std::isspace(static_cast<unsigned char>(sentence[i]))) ++i;
    std::string_view raw = sentence.substr(start, i - start);
    if (raw.empty()) continue;

    std::size_t b = 0;
    std::size_t e = raw.size();
    while (b < e && !is_core_byte(raw[b])) ++b;
    while (e > b && !is_core_byte(raw[e - 1])) --e;
    if (b == e) {
      if (!out.empty()) out.back().break_after = true;
      continue;
    }
    RawToken tok;
    tok.text = std::string(raw.substr(b, e - b));
    tok.break_after = e < raw.size() && raw.find_first_of(",;:()\"", e) != std::string_view::npos;
    const auto first = static_cast<unsigned char>(tok.text.front());
    tok.capitalized = std::isupper(first) != 0 && !is_capitalized_function_word(text::canonicalize(tok.text));
    out.push_back(std::move(tok));
  }
  return out;
}

struct Span {
  std::string display;
  std::string canonical;
};

struct SentenceParse {
  std::vector<Span> entities;
  // Relations between consecutive entities: (src index, dst index, label).
  std::vector<std::tuple<std::size_t, std::size_t, std::string>> relations;
};

SentenceParse parse_sentence(std::string_view sentence) {
  SentenceParse out;
  auto tokens = sentence_tokens(sentence);
  std::vector<std::string> gap;
  bool have_prev = false;
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (!tokens[i].capitalized) {
      gap.push_back(text::canonicalize(tokens[i].text));
      ++i;
      continue;
    }
    std::string display = tokens[i].text;
    bool stop = tokens[i].break_after;
    ++i;
    while (!stop && i < tokens.size() && tokens[i].capitalized) {
      display += ' ';
      display += tokens[i].text;
      stop = tokens[i].break_after;
      ++i;
    }
    out.entities.push_back({display, text::canonicalize(display)});
    if (have_prev && !gap.empty()) {
      std::string label;
      for (const auto& g : gap) {
        if (!label.empty()) label += ' ';
        label += g;
      }
      out.relations.emplace_back(out.entities.size() - 2, out.entities.size() - 1, std::move(label));
    }
    have_prev = true;
    gap.clear();
  }
  return out;
}

std::vector<std::string_view> sentences_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || is_sentence_end(text[i])) {
      auto s = text::trim(text.substr(start, i - start));
      if (!s.empty()) out.push_back(s);
      start = i + 1;
    }
  }
  return out;
}

std::set<ChunkSeq> ids_of(std::span<const Chunk> chunks) {
  std::set<ChunkSeq> out;
  for (const auto& c : chunks) out.insert(c.id.sequence);
  return out;
}

std::string raw_text(std::span<const Chunk> chunks) {
  std::string out;
  for (const auto& c : chunks) {
    if (!out.empty()) out += '\n';
    out += c.content;
  }
  return out;
}

}  // namespace

bool is_capitalized_function_word(std::string_view canonical_token) {
  return function_words().contains(std::string(canonical_token));
}

std::vector<std::string> entity_candidates(std::string_view text) {
  std::vector<std::string> out;
  for (auto sentence : sentences_of(text)) {
    for (auto& span : parse_sentence(sentence).entities) out.push_back(std::move(span.display));
  }
  return out;
}

void check_extraction(const ExtractionResult& result, const std::set<ChunkSeq>& input_chunks) {
  std::unordered_set<std::string> names;
  auto check_sources = [&](const std::set<ChunkSeq>& sources, const std::string& what) {
    if (sources.empty()) fail(ErrorCode::kSchemaViolation, what + " has no source chunks");
    for (auto s : sources) {
      if (!input_chunks.contains(s)) {
        fail(ErrorCode::kSchemaViolation, what + " cites chunk " + std::to_string(s) + " outside the input");
      }
    }
  };
  for (const auto& e : result.entities) {
    if (e.name.empty() || e.name != text::canonicalize(e.name)) {
      fail(ErrorCode::kSchemaViolation, "entity name '" + e.name + "' is not canonical");
    }
    if (!names.insert(e.name).second) fail(ErrorCode::kSchemaViolation, "duplicate entity '" + e.name + "'");
    check_sources(e.source_chunks, "entity '" + e.name + "'");
  }
  for (const auto& r : result.relations) {
    if (!names.contains(r.src_name) || !names.contains(r.dst_name)) {
      fail(ErrorCode::kSchemaViolation,
           "relation '" + r.label + "' endpoint not among entities: " + r.src_name + " -> " + r.dst_name);
    }
    if (r.label.empty()) fail(ErrorCode::kSchemaViolation, "relation with empty label");
    check_sources(r.source_chunks, "relation '" + r.label + "'");
  }
}

// --- rule backend --------------------------------------------------------

ExtractionResult RuleExtractor::extract(std::span<const Chunk> chunks) {
  ExtractionResult out;
  std::unordered_map<std::string, std::size_t> entity_index;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> relation_index;
  std::vector<std::string> triple_sentences;
  std::unordered_set<std::string> seen_sentences;

  for (const auto& chunk : chunks) {
    for (auto sentence : sentences_of(chunk.content)) {
      auto parsed = parse_sentence(sentence);
      for (const auto& span : parsed.entities) {
        auto [it, inserted] = entity_index.try_emplace(span.canonical, out.entities.size());
        if (inserted) {
          ExtractedEntity e;
          e.name = span.canonical;
          e.display_name = span.display;
          out.entities.push_back(std::move(e));
        }
        out.entities[it->second].source_chunks.insert(chunk.id.sequence);
      }
      for (const auto& [src, dst, label] : parsed.relations) {
        const auto& s = parsed.entities[src];
        const auto& d = parsed.entities[dst];
        auto key = std::make_tuple(s.canonical, d.canonical, label);
        auto [it, inserted] = relation_index.try_emplace(key, out.relations.size());
        if (inserted) {
          out.relations.push_back({s.canonical, d.canonical, label, MemoryKind::kEpisodic, {}});
        }
        out.relations[it->second].source_chunks.insert(chunk.id.sequence);
        out.entities[entity_index[s.canonical]].etype = "person";

        auto triple = out.entities[entity_index[s.canonical]].display_name + " " + label + " " +
                      out.entities[entity_index[d.canonical]].display_name + ".";
        if (seen_sentences.insert(triple).second) triple_sentences.push_back(std::move(triple));
      }
    }
  }

  std::string description;
  if (triple_sentences.empty()) {
    description = raw_text(chunks);
  } else {
    for (const auto& t : triple_sentences) {
      if (!description.empty()) description += ' ';
      description += t;
    }
  }
  out.description = std::string(text::utf8_prefix(description, budget_));
  return out;
}

std::string RuleExtractor::compress(std::span<const Chunk> chunks) {
  return extract(chunks).description;
}

// --- remote backend ------------------------------------------------------

std::string default_extraction_template() {
  return R"(You maintain the long-term memory of an assistant. Read the numbered dialogue chunks below.
1. Write a "description": the essential facts in at most {budget} characters.
2. List the entities mentioned (people, places, objects, concepts) and the typed relations between them.
Every entity and relation must cite the ids of the chunks that support it.
Classify each item as "core" (durable user facts and preferences), "episodic" (time-ordered events) or "semantic" (general knowledge).
Answer with one JSON object and nothing else:
{"description": "...", "entities": [{"name": "...", "etype": "...", "kind": "episodic", "chunks": [0]}], "relations": [{"src": "...", "dst": "...", "label": "...", "kind": "episodic", "chunks": [0]}]}
Every relation's src and dst must appear in entities.

Chunks:
{chunks})";
}

RemoteExtractor::RemoteExtractor(RemoteExtractorConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, config_.max_in_flight))) {
  if (config_.prompt_template.empty()) config_.prompt_template = default_extraction_template();
}

std::string RemoteExtractor::render_prompt(std::span<const Chunk> chunks) const {
  Json listing = Json::array();
  for (const auto& c : chunks) listing.push_back({{"id", c.id.sequence}, {"text", c.content}});
  std::string prompt = config_.prompt_template;
  auto replace_all = [&](std::string_view key, const std::string& value) {
    for (auto pos = prompt.find(key); pos != std::string::npos; pos = prompt.find(key, pos + value.size())) {
      prompt.replace(pos, key.size(), value);
    }
  };
  replace_all("{budget}", std::to_string(config_.compression_budget));
  replace_all("{chunks}", listing.dump(2));
  return prompt;
}

ExtractionResult RemoteExtractor::extract(std::span<const Chunk> chunks) {
  Json request{{"model", config_.model_name},
               {"temperature", 0},
               {"messages", Json::array({Json{{"role", "user"}, {"content", render_prompt(chunks)}}})},
               {"metadata", {{"template_version", config_.template_version}}}};
  HttpHeaders headers{{"Content-Type", "application/json"}};
  if (!config_.api_key.empty()) headers["Authorization"] = "Bearer " + config_.api_key;

  std::string content;
  std::string last_error;
  bool got = false;
  {
    in_flight_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{in_flight_};
    const auto body = request.dump();
    for (std::uint32_t attempt = 0; attempt <= config_.max_retries && !got; ++attempt) {
      if (attempt > 0 && config_.retry_backoff_ms > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(config_.retry_backoff_ms));
      }
      auto res = transport_->post(config_.endpoint, body, headers,
                                  std::chrono::milliseconds(config_.timeout_ms));
      if (!res.ok()) {
        last_error = res.status == 0 ? res.error : "HTTP " + std::to_string(res.status);
        continue;
      }
      Json parsed = Json::parse(res.body, nullptr, false);
      if (parsed.is_discarded()) fail(ErrorCode::kParseError, "chat completion response is not JSON");
      try {
        content = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const Json::exception& e) {
        fail(ErrorCode::kSchemaViolation, std::string("chat completion response shape: ") + e.what());
      }
      got = true;
    }
  }
  if (!got) {
    fail(ErrorCode::kBackendUnavailable, "extraction endpoint " + config_.endpoint + ": " + last_error);
  }
  const auto allowed = ids_of(chunks);
  auto result = validate_remote_output(content, &allowed);
  result.description = std::string(text::utf8_prefix(result.description, config_.compression_budget));
  return result;
}

std::string RemoteExtractor::compress(std::span<const Chunk> chunks) {
  return extract(chunks).description;
}

// --- validation ------------------------------------------------------------

namespace {

void require_keys(const Json& obj, std::initializer_list<std::string_view> keys, const std::string& what) {
  if (!obj.is_object()) fail(ErrorCode::kSchemaViolation, what + " is not an object");
  if (obj.size() != keys.size()) fail(ErrorCode::kSchemaViolation, what + " has unexpected fields");
  for (auto k : keys) {
    if (!obj.contains(std::string(k))) fail(ErrorCode::kSchemaViolation, what + " lacks '" + std::string(k) + "'");
  }
}

std::string require_string(const Json& v, const std::string& what, bool allow_blank = false) {
  if (!v.is_string()) fail(ErrorCode::kSchemaViolation, what + " must be a string");
  auto s = v.get<std::string>();
  if (!allow_blank && text::is_blank(s)) fail(ErrorCode::kSchemaViolation, what + " is empty");
  return s;
}

MemoryKind require_kind(const Json& v, const std::string& what) {
  auto kind = try_parse_memory_kind(require_string(v, what));
  if (!kind) fail(ErrorCode::kSchemaViolation, what + " is not core/episodic/semantic");
  return *kind;
}

std::set<ChunkSeq> require_chunks(const Json& v, const std::string& what, const std::set<ChunkSeq>* allowed) {
  if (!v.is_array() || v.empty()) fail(ErrorCode::kSchemaViolation, what + " must be a non-empty array");
  std::set<ChunkSeq> out;
  for (const auto& x : v) {
    if (!x.is_number_unsigned()) fail(ErrorCode::kSchemaViolation, what + " holds a non-id value");
    auto seq = x.get<ChunkSeq>();
    if (allowed != nullptr && !allowed->contains(seq)) {
      fail(ErrorCode::kSchemaViolation, what + " cites chunk " + std::to_string(seq) + " outside the input");
    }
    out.insert(seq);
  }
  return out;
}

}  // namespace

ExtractionResult validate_remote_output(std::string_view raw, const std::set<ChunkSeq>* allowed_chunks) {
  Json doc = Json::parse(raw, nullptr, false);
  if (doc.is_discarded()) fail(ErrorCode::kParseError, "extraction document is not valid JSON");
  require_keys(doc, {"description", "entities", "relations"}, "extraction document");
  if (!doc["entities"].is_array()) fail(ErrorCode::kSchemaViolation, "entities must be an array");
  if (!doc["relations"].is_array()) fail(ErrorCode::kSchemaViolation, "relations must be an array");

  ExtractionResult out;
  out.description = require_string(doc["description"], "description", true);

  std::unordered_map<std::string, std::size_t> entity_index;
  for (std::size_t i = 0; i < doc["entities"].size(); ++i) {
    const auto& e = doc["entities"][i];
    const auto what = "entities[" + std::to_string(i) + "]";
    require_keys(e, {"name", "etype", "kind", "chunks"}, what);
    const auto display = text::normalize_display(require_string(e["name"], what + ".name"));
    const auto canonical = text::canonicalize(display);
    const auto etype = require_string(e["etype"], what + ".etype", true);
    const auto kind = require_kind(e["kind"], what + ".kind");
    auto chunks = require_chunks(e["chunks"], what + ".chunks", allowed_chunks);

    auto [it, inserted] = entity_index.try_emplace(canonical, out.entities.size());
    if (inserted) {
      out.entities.push_back({canonical, display, etype.empty() ? "unknown" : etype, kind, std::move(chunks)});
    } else {
      auto& existing = out.entities[it->second];
      existing.source_chunks.insert(chunks.begin(), chunks.end());
      if (existing.etype == "unknown" && !etype.empty()) existing.etype = etype;
    }
  }

  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> relation_index;
  for (std::size_t i = 0; i < doc["relations"].size(); ++i) {
    const auto& r = doc["relations"][i];
    const auto what = "relations[" + std::to_string(i) + "]";
    require_keys(r, {"src", "dst", "label", "kind", "chunks"}, what);
    const auto src = text::canonicalize(require_string(r["src"], what + ".src"));
    const auto dst = text::canonicalize(require_string(r["dst"], what + ".dst"));
    const auto label = text::canonicalize(require_string(r["label"], what + ".label"));
    const auto kind = require_kind(r["kind"], what + ".kind");
    auto chunks = require_chunks(r["chunks"], what + ".chunks", allowed_chunks);
    if (!entity_index.contains(src) || !entity_index.contains(dst)) {
      fail(ErrorCode::kSchemaViolation, what + " endpoint is not a listed entity");
    }
    auto [it, inserted] = relation_index.try_emplace({src, dst, label}, out.relations.size());
    if (inserted) {
      out.relations.push_back({src, dst, label, kind, std::move(chunks)});
    } else {
      out.relations[it->second].source_chunks.insert(chunks.begin(), chunks.end());
    }
  }
  return out;
}

ExtractionResult extract(std::span<const Chunk> chunks, ExtractionBackend& backend) {
  if (chunks.empty()) fail(ErrorCode::kInvalidArgument, "extract needs at least one chunk");
  auto result = backend.extract(chunks);
  check_extraction(result, ids_of(chunks));
  return result;
}

std::string compress(std::span<const Chunk> chunks, ExtractionBackend& backend) {
  if (chunks.empty()) fail(ErrorCode::kInvalidArgument, "compress needs at least one chunk");
  return backend.compress(chunks);
}

}  // namespace memverse
