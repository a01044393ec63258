// memverse command line: one subcommand per service endpoint.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "memverse/service.hpp"
#include "memverse/text.hpp"

namespace fs = std::filesystem;
using namespace memverse;

namespace {

std::string env_or(std::string_view name, std::string fallback) {
  const char* v = std::getenv(std::string(name).c_str());
  return v && *v ? std::string(v) : std::move(fallback);
}

std::optional<Modality> guess_modality(const std::string& target) {
  auto ext = fs::path(text::split(target, '?').front()).extension().string();
  ext = text::canonicalize(ext);
  for (const char* e : {".jpg", ".jpeg", ".png", ".gif", ".webp", ".bmp"}) {
    if (ext == e) return Modality::kImage;
  }
  for (const char* e : {".wav", ".mp3", ".flac", ".ogg", ".m4a"}) {
    if (ext == e) return Modality::kAudio;
  }
  for (const char* e : {".mp4", ".mov", ".mkv", ".webm", ".avi"}) {
    if (ext == e) return Modality::kVideo;
  }
  for (const char* e : {".txt", ".md", ".text"}) {
    if (ext == e) return Modality::kText;
  }
  return std::nullopt;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Output {
  bool records = false;

  void emit(const Json& doc, const std::string& human) const {
    if (records) {
      std::cout << doc.dump() << '\n';
    } else {
      std::cout << human << '\n';
    }
  }
};

std::string describe_add(const Json& r) {
  std::string out = "added chunk " + std::to_string(r["chunk"]["seq"].get<std::uint64_t>());
  if (r.contains("actions")) {
    for (const auto& a : r["actions"]) {
      out += "\n" + a["action"].get<std::string>() + ": " + a["message"].get<std::string>();
    }
  }
  return out;
}

std::string describe_query(const Json& r) {
  std::string out = "path: " + r.value("path", std::string("ltm_retrieval")) + "\n";
  out += "reason: " + r.value("reason", std::string()) + "\n";
  out += "accesses: " + std::to_string(r.value("accesses", std::size_t{0}));
  if (r.contains("answer")) {
    out += "\nanswer: " + r["answer"]["text"].get<std::string>();
    out += "\nstaleness_rounds: " + std::to_string(r["answer"]["staleness_rounds"].get<std::int64_t>());
  }
  if (r.contains("retrieval")) {
    const auto& ret = r["retrieval"];
    for (const auto& m : ret["matched"]) {
      out += "\nmatched: " + m["name"].get<std::string>();
    }
    const auto context = ret["context"].get<std::string>();
    out += context.empty() ? "\n(no memory found)" : "\ncontext:\n" + context;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memverse agent memory engine"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string store_dir = env_or(kStoreDirEnv, "memverse-store");
  std::string config_path = env_or(kConfigEnv, "");
  std::string format = "text";
  app.add_option("--store", store_dir, "Store directory (env MEMVERSE_STORE_DIR)");
  app.add_option("--config", config_path, "Config file (env MEMVERSE_CONFIG)");
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "records"}));

  std::string ingest_target;
  std::string ingest_modality;
  std::string session = "default";
  std::optional<std::uint64_t> turn;
  auto* ingest = app.add_subcommand("ingest", "Store a text file or caption a media item");
  ingest->add_option("target", ingest_target, "File path or URI")->required();
  ingest->add_option("--modality", ingest_modality, "image | audio | video | text")
      ->check(CLI::IsMember({"image", "audio", "video", "text"}));
  ingest->add_option("--session", session, "Session id");
  ingest->add_option("--turn", turn, "Turn index (default: next)");

  std::string question;
  std::string path_hint;
  std::string choices;
  std::optional<std::size_t> hops;
  std::optional<std::size_t> budget;
  std::optional<std::string> ask_session;
  std::optional<std::string> domain;
  auto* ask = app.add_subcommand("ask", "Query memory");
  ask->add_option("question", question, "Question")->required();
  ask->add_option("--path", path_hint, "Route hint: stm_hit (stm), ltm_retrieval (ltm), parametric")
      ->check(CLI::Validator(
          [](std::string& v) {
            return memverse::try_parse_route_path(v) ? std::string() : "unknown route '" + v + "'";
          },
          "ROUTE"));
  ask->add_option("--choices", choices, "Comma separated answer choices");
  ask->add_option("--hops", hops, "Hop limit");
  ask->add_option("--budget", budget, "Context budget in bytes");
  ask->add_option("--session", ask_session, "Restrict STM routing to one session");
  ask->add_option("--domain", domain, "Domain tag for parametric routing");

  std::string transcript;
  auto* replay = app.add_subcommand("replay", "Add every line of a transcript (session<TAB>turn<TAB>text)");
  replay->add_option("transcript", transcript, "Transcript file")->required();

  std::uint64_t update_chunk = 0;
  std::string correction;
  auto* update = app.add_subcommand("update", "Supersede a chunk with corrected text");
  update->add_option("chunk", update_chunk, "Chunk sequence")->required();
  update->add_option("correction", correction, "Corrected text")->required();

  std::optional<std::uint64_t> delete_chunk;
  std::optional<std::uint64_t> delete_entity;
  auto* del = app.add_subcommand("delete", "Delete a chunk or an entity");
  auto* del_chunk_opt = del->add_option("--chunk", delete_chunk, "Chunk sequence");
  auto* del_entity_opt = del->add_option("--entity", delete_entity, "Entity id");
  del_chunk_opt->excludes(del_entity_opt);

  auto* consolidate = app.add_subcommand("consolidate", "Consolidate pending chunks into the graph");
  auto* prune = app.add_subcommand("prune", "Prune the graph to its budget");

  std::string export_out;
  auto* exp = app.add_subcommand("export", "Write the current distillation round");
  exp->add_option("--out", export_out, "Training file path");

  auto* stats = app.add_subcommand("stats", "Print store statistics");
  auto* tick = app.add_subcommand("tick", "Run any scheduled actions that are due");

  std::string listen = "127.0.0.1:8080";
  std::uint64_t tick_ms = 1000;
  std::string parametric;
  std::string log_level = "info";
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--listen", listen, "host:port");
  serve_cmd->add_option("--tick-ms", tick_ms, "Scheduler interval in ms (0 disables)");
  serve_cmd->add_option("--parametric", parametric, "Parametric endpoint base URL");
  serve_cmd->add_option("--log-level", log_level, "Log level")->check(CLI::IsMember({"debug", "info", "warn", "error"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const Output out{format == "records"};
  try {
    if (del->parsed() && !delete_chunk && !delete_entity) {
      std::cerr << "delete needs --chunk or --entity\n";
      return 2;
    }
    MemverseConfig config = config_path.empty() ? MemverseConfig{} : load_config(config_path);
    if (!parametric.empty()) config.parametric_endpoint = parametric;
    SystemClock clock;
    Engine engine(store_dir, std::move(config), clock);

    if (ingest->parsed()) {
      auto modality = ingest_modality.empty() ? guess_modality(ingest_target) : try_parse_modality(ingest_modality);
      if (!modality) {
        std::cerr << "cannot tell the modality of " << ingest_target << "; pass --modality\n";
        return 2;
      }
      const bool is_uri = ingest_target.find("://") != std::string::npos;
      const std::string uri = is_uri ? ingest_target : "file://" + fs::absolute(ingest_target).string();
      Json body{{"session", session}, {"media", Json{{"uri", uri}, {"modality", std::string(to_string(*modality))}}}};
      if (turn) body["turn"] = *turn;
      if (*modality == Modality::kText && !is_uri) body["content"] = read_file(ingest_target);
      const auto r = engine.add(body);
      out.emit(r, describe_add(r));
    } else if (ask->parsed()) {
      RetrieveOp op;
      op.query = question;
      if (!path_hint.empty()) op.path_hint = try_parse_route_path(path_hint);
      if (!choices.empty()) {
        std::vector<std::string> list;
        for (const auto& c : text::split(choices, ',')) list.emplace_back(text::trim(c));
        op.choices = std::move(list);
      }
      if (hops || budget) {
        auto p = engine.orchestrator().config().retrieval;
        if (hops) p.hop_limit = *hops;
        if (budget) p.context_budget = *budget;
        op.params = p;
      }
      op.session_id = ask_session;
      op.domain = domain;
      const auto r = engine.query(op);
      out.emit(r, describe_query(r));
      engine.save();
    } else if (replay->parsed()) {
      const auto content = read_file(transcript);
      std::size_t line_no = 0;
      std::size_t added = 0;
      for (const auto& raw : text::split(content, '\n')) {
        ++line_no;
        if (text::is_blank(raw)) continue;
        auto fields = text::split(raw, '\t');
        if (fields.size() < 3) {
          fail(ErrorCode::kParseError, transcript + " line " + std::to_string(line_no) + ": expected session<TAB>turn<TAB>text");
        }
        std::string body_text = fields[2];
        for (std::size_t i = 3; i < fields.size(); ++i) body_text += "\t" + fields[i];
        std::uint64_t t = 0;
        try {
          std::size_t used = 0;
          t = std::stoull(fields[1], &used);
          if (used != fields[1].size()) throw std::invalid_argument("trailing");
        } catch (const std::logic_error&) {
          fail(ErrorCode::kParseError, transcript + " line " + std::to_string(line_no) + ": turn is not an integer");
        }
        const auto r = engine.add(Json{{"session", fields[0]}, {"turn", t}, {"content", body_text}});
        if (out.records) std::cout << r.dump() << '\n';
        ++added;
      }
      if (!out.records) std::cout << "replayed " << added << " turns\n";
    } else if (update->parsed()) {
      const auto r = engine.update(update_chunk, correction);
      out.emit(r, "chunk " + std::to_string(update_chunk) + " superseded by " +
                      std::to_string(r["chunk"]["seq"].get<std::uint64_t>()));
    } else if (del->parsed()) {
      const auto r = delete_chunk ? engine.remove_chunk(*delete_chunk) : engine.remove_entity(*delete_entity);
      out.emit(r, "deleted");
    } else if (consolidate->parsed()) {
      const auto r = engine.consolidate();
      out.emit(r, "consolidated " + std::to_string(r["chunks"].get<std::size_t>()) + " chunks: " +
                      std::to_string(r["entities_added"].get<std::size_t>()) + " entities added, " +
                      std::to_string(r["relations_added"].get<std::size_t>()) + " relations added");
    } else if (prune->parsed()) {
      const auto r = engine.prune();
      out.emit(r, "pruned " + std::to_string(r["removed_entities"].size()) + " entities and " +
                      std::to_string(r["removed_relations"].size()) + " relations");
    } else if (exp->parsed()) {
      std::optional<fs::path> target;
      if (!export_out.empty()) target = export_out;
      const auto r = engine.export_round(target);
      out.emit(r, "exported round " + std::to_string(r["round"].get<std::uint64_t>()) + " with " +
                      std::to_string(r["pair_count"].get<std::size_t>()) + " pairs");
    } else if (stats->parsed()) {
      const auto r = engine.stats();
      out.emit(r, "chunks: " + std::to_string(r["chunks"]["live"].get<std::size_t>()) + " live, " +
                      std::to_string(r["chunks"]["issued"].get<std::size_t>()) + " issued\n" +
                      "entities: " + std::to_string(r["entities"].get<std::size_t>()) + "\n" +
                      "relations: " + std::to_string(r["relations"].get<std::size_t>()) + "\n" +
                      "pending: " + std::to_string(r["pending"].get<std::size_t>()) + "\n" +
                      "round: " + std::to_string(r["round"].get<std::uint64_t>()));
    } else if (tick->parsed()) {
      const auto r = engine.tick();
      std::string human;
      for (const auto& a : r["actions"]) {
        human += a["action"].get<std::string>() + ": " + a["message"].get<std::string>() + "\n";
      }
      out.emit(r, human.empty() ? "nothing due" : human.substr(0, human.size() - 1));
    } else if (serve_cmd->parsed()) {
      serve(engine, listen, std::chrono::milliseconds(tick_ms));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << error_name(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
