#include "memverse/distill_export.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "memverse/text.hpp"

namespace memverse {
namespace fs = std::filesystem;

std::string format_prompt(std::string_view question, const Choices& choices) {
  if (text::is_blank(question)) fail(ErrorCode::kEmptyQuestion, "question is empty");
  std::string out = "Question: ";
  out += question;
  if (choices && !choices->empty()) {
    out += " Choices: ";
    for (std::size_t i = 0; i < choices->size(); ++i) {
      if (i > 0) out += ", ";
      out += (*choices)[i];
    }
  }
  return out;
}

std::vector<TrainingRecord> parse_training_text(std::string_view text) {
  std::vector<TrainingRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    ++line_no;
    auto bad = [&](const std::string& why) {
      fail(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": " + why);
    };
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) bad("not a JSON object");
    if (j.size() != 4) bad("expected exactly prompt, target, trace_id, round");
    for (const char* key : {"prompt", "target", "trace_id"}) {
      if (!j.contains(key) || !j[key].is_string()) bad(std::string("missing string field ") + key);
    }
    if (!j.contains("round") || !j["round"].is_number_unsigned()) bad("missing integer field round");
    out.push_back({j["prompt"].get<std::string>(), j["target"].get<std::string>(),
                   j["trace_id"].get<std::string>(), j["round"].get<std::uint64_t>()});
  }
  return out;
}

std::vector<TrainingRecord> load_training_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot read " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_training_text(text);
}

fs::path manifest_path_for(const fs::path& training_file) {
  auto p = training_file;
  p += ".manifest";
  return p;
}

std::string format_manifest(const ExportManifest& m) {
  std::ostringstream out;
  out << "round: " << m.round << '\n'
      << "pair_count: " << m.pair_count << '\n'
      << "file_digest: " << m.file_digest << '\n'
      << "source_graph_snapshot: " << m.source_graph_snapshot << '\n'
      << "created_at: " << to_millis(m.created_at) << '\n'
      << "domain_tag: " << m.domain_tag << '\n';
  return out.str();
}

ExportManifest parse_manifest(std::string_view text) {
  ExportManifest m;
  std::size_t seen = 0;
  for (const auto& raw : text::split(text, '\n')) {
    auto line = text::trim(raw);
    if (line.empty()) continue;
    auto colon = line.find(':');
    if (colon == std::string_view::npos) fail(ErrorCode::kParseError, "manifest line without ':'");
    auto key = text::trim(line.substr(0, colon));
    auto value = std::string(text::trim(line.substr(colon + 1)));
    try {
      if (key == "round") {
        m.round = std::stoull(value);
      } else if (key == "pair_count") {
        m.pair_count = std::stoull(value);
      } else if (key == "file_digest") {
        m.file_digest = value;
      } else if (key == "source_graph_snapshot") {
        m.source_graph_snapshot = value;
      } else if (key == "created_at") {
        m.created_at = from_millis(std::stoll(value));
      } else if (key == "domain_tag") {
        m.domain_tag = value;
      } else {
        continue;
      }
    } catch (const std::logic_error&) {
      fail(ErrorCode::kParseError, "manifest field " + std::string(key) + " is malformed");
    }
    ++seen;
  }
  if (seen < 5) fail(ErrorCode::kParseError, "manifest is missing fields");
  return m;
}

ExportManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot read " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_manifest(text);
}

DistillExporter::DistillExporter(const Clock& clock, std::string domain_tag)
    : clock_(clock), domain_tag_(std::move(domain_tag)) {}

std::optional<std::string> DistillExporter::record_trace(std::string_view query, const Choices& choices,
                                                         const RetrievalResult& result) {
  if (result.context.empty() || text::is_blank(query)) {
    ++skipped_;
    return std::nullopt;
  }
  char id[32];
  std::snprintf(id, sizeof(id), "trace-%06llu", static_cast<unsigned long long>(next_trace_++));
  SupervisionPair pair;
  pair.question = std::string(query);
  pair.choices = choices;
  pair.retrieved = result.context;
  pair.round = round_;
  pair.trace_id = id;
  pair.created_at = clock_.now();
  pending_.push_back(std::move(pair));
  return pending_.back().trace_id;
}

ExportManifest DistillExporter::export_round(const fs::path& path, std::string_view graph_snapshot_digest) {
  if (pending_.empty()) fail(ErrorCode::kNoTraces, "no traces recorded in round " + std::to_string(round_));

  std::string body;
  for (const auto& p : pending_) {
    Json rec{{"prompt", format_prompt(p.question, p.choices)},
             {"target", p.retrieved},
             {"trace_id", p.trace_id},
             {"round", round_}};
    body += rec.dump();
    body += '\n';
  }

  ExportManifest m;
  m.round = round_;
  m.pair_count = pending_.size();
  m.file_digest = text::sha256_hex(body);
  m.source_graph_snapshot = std::string(graph_snapshot_digest);
  m.created_at = clock_.now();
  m.domain_tag = domain_tag_;

  auto write_atomic = [](const fs::path& target, const std::string& content) {
    std::error_code ec;
    if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);
    auto tmp = target;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << content;
      out.flush();
      if (!out) fail(ErrorCode::kIoError, "cannot write " + tmp.string());
    }
    fs::rename(tmp, target, ec);
    if (ec) fail(ErrorCode::kIoError, "cannot move " + tmp.string() + " into place: " + ec.message());
  };
  write_atomic(path, body);
  write_atomic(manifest_path_for(path), format_manifest(m));

  pending_.clear();
  ++round_;
  latest_ = m;
  return m;
}

Json DistillExporter::state() const {
  Json pending = Json::array();
  for (const auto& p : pending_) {
    Json j{{"question", p.question},
           {"retrieved", p.retrieved},
           {"round", p.round},
           {"trace_id", p.trace_id},
           {"created_at", to_millis(p.created_at)}};
    if (p.choices) j["choices"] = *p.choices;
    pending.push_back(std::move(j));
  }
  Json out{{"domain_tag", domain_tag_},
           {"round", round_},
           {"next_trace", next_trace_},
           {"skipped", skipped_},
           {"pending", std::move(pending)}};
  if (latest_) out["latest_manifest"] = format_manifest(*latest_);
  return out;
}

void DistillExporter::load_state(const Json& j) {
  domain_tag_ = j.at("domain_tag").get<std::string>();
  round_ = j.at("round").get<std::uint64_t>();
  next_trace_ = j.at("next_trace").get<std::uint64_t>();
  skipped_ = j.at("skipped").get<std::size_t>();
  pending_.clear();
  for (const auto& p : j.at("pending")) {
    SupervisionPair pair;
    pair.question = p.at("question").get<std::string>();
    pair.retrieved = p.at("retrieved").get<std::string>();
    pair.round = p.at("round").get<std::uint64_t>();
    pair.trace_id = p.at("trace_id").get<std::string>();
    pair.created_at = from_millis(p.at("created_at").get<std::int64_t>());
    if (p.contains("choices")) pair.choices = p.at("choices").get<std::vector<std::string>>();
    pending_.push_back(std::move(pair));
  }
  latest_.reset();
  if (j.contains("latest_manifest")) latest_ = parse_manifest(j.at("latest_manifest").get<std::string>());
}

}  // namespace memverse
