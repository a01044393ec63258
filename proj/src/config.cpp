#include "memverse/config.hpp"

#include <charconv>
#include <fstream>

#include "memverse/text.hpp"

namespace memverse {
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kConfigInvalid, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t as_size(std::string_view key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    fail(ErrorCode::kConfigInvalid, std::string(key) + " expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double as_double(std::string_view key, const std::string& v) {
  try {
    std::size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::logic_error&) {
    fail(ErrorCode::kConfigInvalid, std::string(key) + " expects a number, got '" + v + "'");
  }
}

fs::path resolve(const fs::path& base, const std::string& v) {
  fs::path p(v);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

MemverseConfig::CaptionerEntry& captioner(MemverseConfig& c, const std::string& modality) {
  for (auto& e : c.captioners) {
    if (e.modality == modality) return e;
  }
  c.captioners.push_back({modality});
  return c.captioners.back();
}

}  // namespace

std::vector<std::string> MemverseConfig::default_core_lexicon() {
  return {"my name is",   "i prefer",       "i live in",    "i like",     "i love",
          "i hate",       "i am allergic",  "i'm allergic", "my favorite", "my favourite",
          "i work as",    "i work at",      "my birthday",  "call me",    "i am vegetarian",
          "i'm vegetarian", "my wife",      "my husband",   "my partner", "i was born"};
}

MemverseConfig parse_config(std::string_view content, const fs::path& base_dir) {
  MemverseConfig c;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(content, '\n')) {
    ++line_no;
    auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kConfigInvalid, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(text::trim(line.substr(0, eq)));
    const std::string v(text::trim(line.substr(eq + 1)));

    if (key == "stm.capacity") {
      c.stm_capacity = as_size(key, v);
      if (c.stm_capacity < 1) fail(ErrorCode::kConfigInvalid, "stm.capacity must be >= 1");
    } else if (key == "orchestrator.consolidation_threshold") {
      c.consolidation_threshold = as_size(key, v);
      if (c.consolidation_threshold < 1) fail(ErrorCode::kConfigInvalid, "consolidation_threshold must be >= 1");
    } else if (key == "orchestrator.consolidation_period_s") {
      c.consolidation_period = std::chrono::seconds(as_size(key, v));
    } else if (key == "orchestrator.consolidation_batch") {
      c.consolidation_batch = std::max<std::size_t>(1, as_size(key, v));
    } else if (key == "orchestrator.prune_period_s") {
      c.prune_period = std::chrono::seconds(as_size(key, v));
    } else if (key == "orchestrator.distill_period_s") {
      c.distill_period = std::chrono::seconds(as_size(key, v));
    } else if (key == "retrieval.top_m") {
      c.retrieval.top_m = as_size(key, v);
    } else if (key == "retrieval.hops") {
      c.retrieval.hop_limit = as_size(key, v);
    } else if (key == "retrieval.context_budget") {
      c.retrieval.context_budget = as_size(key, v);
    } else if (key == "retrieval.alpha") {
      c.retrieval.alpha = as_double(key, v);
    } else if (key == "retrieval.beta") {
      c.retrieval.beta = as_double(key, v);
    } else if (key == "retrieval.min_score") {
      c.retrieval.min_match_score = as_double(key, v);
    } else if (key == "retrieval.kinds") {
      c.retrieval.kinds = parse_kind_set(v);
    } else if (key == "prune.max_entities") {
      c.prune.max_entities = as_size(key, v);
    } else if (key == "prune.max_relations") {
      c.prune.max_relations = as_size(key, v);
    } else if (key == "prune.lambda_per_day") {
      c.prune.lambda_per_day = as_double(key, v);
    } else if (key == "prune.min_salience") {
      c.prune.min_salience = as_double(key, v);
    } else if (key == "prune.protected_kinds") {
      c.prune.protected_kinds = parse_kind_set(v);
    } else if (key == "classify.core_lexicon") {
      c.core_lexicon.clear();
      for (const auto& phrase : text::split(read_file(resolve(base_dir, v)), '\n')) {
        auto p = text::canonicalize(phrase);
        if (!p.empty() && p.front() != '#') c.core_lexicon.push_back(std::move(p));
      }
    } else if (key == "extractor.backend") {
      if (v != "rule" && v != "remote") fail(ErrorCode::kConfigInvalid, "extractor.backend must be rule or remote");
      c.extractor_backend = v;
    } else if (key == "extractor.endpoint") {
      c.extractor_endpoint = v;
    } else if (key == "extractor.model") {
      c.extractor_model = v;
    } else if (key == "extractor.prompt_template") {
      c.extractor_prompt_template = read_file(resolve(base_dir, v));
    } else if (key == "extractor.template_version") {
      c.extractor_template_version = v;
    } else if (key == "extractor.compression_budget") {
      c.compression_budget = as_size(key, v);
    } else if (key == "extractor.max_in_flight") {
      c.extractor_max_in_flight = std::max<std::size_t>(1, as_size(key, v));
    } else if (key == "distill.min_pairs") {
      c.distill_min_pairs = as_size(key, v);
    } else if (key == "distill.domain_tag") {
      c.distill_domain_tag = v;
    } else if (key == "distill.export_dir") {
      c.export_dir = resolve(base_dir, v);
    } else if (key.starts_with("captioner.")) {
      auto parts = text::split(key, '.');
      if (parts.size() != 3 || !try_parse_modality(parts[1])) {
        fail(ErrorCode::kConfigInvalid, "unknown key '" + key + "'");
      }
      auto& entry = captioner(c, parts[1]);
      if (parts[2] == "endpoint") {
        entry.endpoint = v;
      } else if (parts[2] == "model") {
        entry.model = v;
      } else if (parts[2] == "frames") {
        entry.frames = static_cast<std::uint32_t>(as_size(key, v));
      } else {
        fail(ErrorCode::kConfigInvalid, "unknown key '" + key + "'");
      }
    } else if (key == "parametric.endpoint") {
      if (!v.empty()) c.parametric_endpoint = v;
    } else {
      fail(ErrorCode::kConfigInvalid, "unknown key '" + key + "'");
    }
  }
  if (c.retrieval.top_m < 1 || c.retrieval.hop_limit < 1) {
    fail(ErrorCode::kConfigInvalid, "retrieval.top_m and retrieval.hops must be >= 1");
  }
  if (c.prune.max_entities < 1 || c.prune.max_relations < 1) {
    fail(ErrorCode::kConfigInvalid, "prune budgets must be >= 1");
  }
  return c;
}

MemverseConfig load_config(const fs::path& path) {
  return parse_config(read_file(path), path.parent_path());
}

}  // namespace memverse
