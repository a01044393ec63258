#include "memverse/service.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <atomic>
#include <csignal>
#include <condition_variable>
#include <fstream>
#include <iostream>
#include <thread>

#include <httplib.h>

#include "memverse/text.hpp"

namespace memverse {
namespace fs = std::filesystem;

HttpParametricClient::HttpParametricClient(std::string endpoint, std::shared_ptr<HttpTransport> transport,
                                           std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)), timeout_(timeout) {
  while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
}

std::pair<std::string, std::uint64_t> HttpParametricClient::generate(const std::string& prompt) {
  const Json body{{"prompt", prompt}};
  auto res = transport_->post(endpoint_ + "/generate", body.dump(), {{"Content-Type", "application/json"}}, timeout_);
  if (!res.ok()) {
    fail(ErrorCode::kEndpointUnavailable,
         "parametric endpoint " + endpoint_ + ": " + (res.status == 0 ? res.error : "status " + std::to_string(res.status)));
  }
  Json j = Json::parse(res.body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("text") || !j["text"].is_string() ||
      !j.contains("trained_round") || !j["trained_round"].is_number_unsigned()) {
    fail(ErrorCode::kEndpointUnavailable, "parametric endpoint returned a malformed document");
  }
  return {j["text"].get<std::string>(), j["trained_round"].get<std::uint64_t>()};
}

StoreLock::StoreLock(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const auto path = dir / "LOCK";
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) fail(ErrorCode::kIoError, "cannot open " + path.string());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    fail(ErrorCode::kStoreLocked, "store " + dir.string() + " is in use by another process");
  }
}

StoreLock::~StoreLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

namespace {

void write_atomic(const fs::path& target, const std::string& content) {
  auto tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) fail(ErrorCode::kIoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot move " + tmp.string() + " into place: " + ec.message());
}

}  // namespace

Engine::Engine(const fs::path& store_dir, MemverseConfig config, const Clock& clock,
               std::shared_ptr<HttpTransport> transport)
    : Engine(store_dir, std::move(config), clock, std::move(transport), Options{}) {}

Engine::Engine(const fs::path& store_dir, MemverseConfig config, const Clock& clock,
               std::shared_ptr<HttpTransport> transport, Options options)
    : dir_(store_dir), clock_(clock), options_(options) {
  lock_ = std::make_unique<StoreLock>(dir_);
  if (config.export_dir.is_relative()) config.export_dir = dir_ / config.export_dir;

  std::shared_ptr<ExtractionBackend> backend;
  if (config.extractor_backend == "remote") {
    RemoteExtractorConfig rc;
    rc.endpoint = config.extractor_endpoint;
    rc.model_name = config.extractor_model;
    if (!config.extractor_prompt_template.empty()) rc.prompt_template = config.extractor_prompt_template;
    rc.template_version = config.extractor_template_version;
    rc.compression_budget = config.compression_budget;
    rc.max_in_flight = config.extractor_max_in_flight;
    backend = std::make_shared<RemoteExtractor>(rc, transport);
  }

  ChunkStore::Options store_options;
  store_options.sync_writes = options_.sync_writes;
  store_ = std::make_unique<ChunkStore>(dir_ / "chunks", clock_, store_options);
  ingestor_ = std::make_unique<Ingestor>(*store_, clock_, transport);
  for (auto m : {Modality::kImage, Modality::kAudio, Modality::kVideo, Modality::kText}) {
    CaptionerConfig c;
    c.modality = m;
    ingestor_->register_captioner(c);
  }
  for (const auto& entry : config.captioners) {
    CaptionerConfig c;
    c.modality = *try_parse_modality(entry.modality);
    c.endpoint = entry.endpoint;
    c.model_name = entry.model;
    c.frame_sample_count = entry.frames;
    ingestor_->register_captioner(c);
  }

  const auto parametric = config.parametric_endpoint;
  orchestrator_ = std::make_unique<Orchestrator>(*store_, clock_, std::move(config), backend);
  if (parametric) orchestrator_->set_parametric(std::make_shared<HttpParametricClient>(*parametric, transport));

  if (fs::exists(dir_ / "graph.snapshot")) orchestrator_->graph().restore(dir_ / "graph.snapshot");
  if (fs::exists(dir_ / "state.json")) {
    std::ifstream in(dir_ / "state.json", std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Json j = Json::parse(content, nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::kIoError, "state.json is corrupt");
    orchestrator_->load_state(j);
  }
}

Engine::~Engine() = default;

void Engine::save() {
  std::lock_guard lock(mu_);
  orchestrator_->graph().snapshot(dir_ / "graph.snapshot");
  write_atomic(dir_ / "state.json", orchestrator_->state().dump() + "\n");
}

void Engine::set_parametric(std::shared_ptr<ParametricBackend> backend) {
  std::lock_guard lock(mu_);
  orchestrator_->set_parametric(std::move(backend));
}

Json Engine::add(const Json& body) {
  std::lock_guard lock(mu_);
  if (!body.is_object()) fail(ErrorCode::kInvalidArgument, "request body must be a JSON object");
  AddOp op;
  std::string content;
  try {
    content = body.value("content", std::string());
    op.session_id = body.value("session", std::string("default"));
    if (body.contains("turn")) op.turn_index = body.at("turn").get<std::uint64_t>();
    if (body.contains("media")) {
      const auto& m = body.at("media");
      if (m.is_array()) {
        op.media = m.get<std::vector<MediaRef>>();
      } else {
        op.media.push_back(m.get<MediaRef>());
      }
    }
    if (body.contains("kind_hint")) op.kind_hint = parse_memory_kind(body.at("kind_hint").get<std::string>());
    const auto role = body.value("role", std::string("user"));
    if (role != "user" && role != "assistant") fail(ErrorCode::kInvalidArgument, "role must be user or assistant");
    op.role = role == "user" ? Role::kUser : Role::kAssistant;
  } catch (const Json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("malformed memory document: ") + e.what());
  }

  if (text::is_blank(content)) {
    if (op.media.size() != 1) fail(ErrorCode::kEmptyContent, "content is empty and there is no single media item to caption");
    auto captioner = ingestor_->captioner_for(op.media.front().modality);
    if (!captioner) fail(ErrorCode::kCaptionerUnavailable, "no captioner for the media modality");
    content = ingestor_->describe(op.media.front(), *captioner).text;
    op.role = Role::kAssistant;  // captions are not user queries
  }
  op.content = std::move(content);

  auto result = orchestrator_->handle(op);
  Json out = result_to_json(result);
  if (options_.tick_after_add) {
    Json actions = Json::array();
    for (const auto& a : orchestrator_->tick(clock_.now())) {
      actions.push_back({{"action", std::string(to_string(a.kind))}, {"ok", a.ok}, {"message", a.message}});
    }
    if (!actions.empty()) {
      out["actions"] = std::move(actions);
      save();
      return out;
    }
  }
  write_atomic(dir_ / "state.json", orchestrator_->state().dump() + "\n");
  return out;
}

Json Engine::update(ChunkSeq chunk, const std::string& correction) {
  std::lock_guard lock(mu_);
  auto out = result_to_json(orchestrator_->handle(UpdateOp{chunk, correction}));
  save();
  return out;
}

Json Engine::remove_chunk(ChunkSeq chunk) {
  std::lock_guard lock(mu_);
  auto out = result_to_json(orchestrator_->handle(DeleteOp{chunk}));
  save();
  return out;
}

Json Engine::remove_entity(std::uint64_t entity) {
  std::lock_guard lock(mu_);
  auto out = result_to_json(orchestrator_->handle(DeleteOp{EntityId{entity}}));
  save();
  return out;
}

Json Engine::query(const RetrieveOp& op) {
  std::lock_guard lock(mu_);
  return result_to_json(orchestrator_->handle(op));
}

Json Engine::consolidate() {
  std::lock_guard lock(mu_);
  auto r = orchestrator_->consolidate();
  save();
  return {{"chunks", r.chunks},
          {"batches", r.batches},
          {"entities_added", r.delta.entities_added},
          {"entities_updated", r.delta.entities_updated},
          {"relations_added", r.delta.relations_added},
          {"relations_updated", r.delta.relations_updated}};
}

Json Engine::prune() {
  std::lock_guard lock(mu_);
  auto r = orchestrator_->prune();
  save();
  Json ents = Json::array();
  for (auto e : r.removed_entities) ents.push_back(e.value);
  Json rels = Json::array();
  for (auto rel : r.removed_relations) rels.push_back(rel.value);
  return {{"removed_entities", std::move(ents)}, {"removed_relations", std::move(rels)}};
}

Json Engine::export_round(const std::optional<fs::path>& out) {
  std::lock_guard lock(mu_);
  auto m = orchestrator_->export_round(out);
  save();
  return {{"round", m.round},
          {"pair_count", m.pair_count},
          {"file_digest", m.file_digest},
          {"source_graph_snapshot", m.source_graph_snapshot},
          {"created_at", to_millis(m.created_at)},
          {"domain_tag", m.domain_tag}};
}

Json Engine::tick() {
  std::lock_guard lock(mu_);
  Json actions = Json::array();
  for (const auto& a : orchestrator_->tick(clock_.now())) {
    actions.push_back({{"action", std::string(to_string(a.kind))}, {"ok", a.ok}, {"message", a.message}});
  }
  if (!actions.empty()) save();
  return {{"actions", std::move(actions)}};
}

Json Engine::stats() const {
  std::lock_guard lock(mu_);
  const auto g = orchestrator_->graph().stats();
  Json kinds = Json::object();
  for (auto k : {MemoryKind::kCore, MemoryKind::kEpisodic, MemoryKind::kSemantic}) {
    const auto i = static_cast<std::size_t>(k);
    kinds[std::string(to_string(k))] = {{"entities", g.entity_count[i]},
                                        {"relations", g.relation_count[i]},
                                        {"chunk_refs", g.chunk_ref_count[i]}};
  }
  const auto& ex = orchestrator_->exporter();
  return {{"chunks", {{"issued", store_->issued_count()}, {"live", store_->live_count()}}},
          {"entities", g.entity_total},
          {"relations", g.relation_total},
          {"kinds", std::move(kinds)},
          {"bytes_estimate", g.total_bytes_estimate},
          {"pending", orchestrator_->scheduler().new_chunks_since_consolidation()},
          {"processed", orchestrator_->processed().size()},
          {"round", ex.current_round()},
          {"pending_traces", ex.pending_count()},
          {"skipped_traces", ex.skipped_count()}};
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kTombstoned:
      return 410;
    case ErrorCode::kDuplicateTurn:
    case ErrorCode::kNoTraces:
    case ErrorCode::kStoreLocked:
      return 409;
    case ErrorCode::kBudgetInfeasible:
    case ErrorCode::kDanglingChunk:
    case ErrorCode::kSchemaViolation:
      return 422;
    case ErrorCode::kEndpointUnavailable:
    case ErrorCode::kBackendUnavailable:
    case ErrorCode::kCaptionerUnavailable:
      return 503;
    case ErrorCode::kIoError:
    case ErrorCode::kFormatVersionMismatch:
    case ErrorCode::kBindError:
      return 500;
    default:
      return 400;
  }
}

Json error_json(ErrorCode code, std::string_view message) {
  return {{"code", std::string(error_name(code))}, {"message", std::string(message)}};
}

namespace {

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump() + "\n", "application/json");
}

template <typename Fn>
httplib::Server::Handler guarded(int ok_status, Fn fn) {
  return [ok_status, fn](const httplib::Request& req, httplib::Response& res) {
    try {
      reply(res, ok_status, fn(req));
    } catch (const Error& e) {
      reply(res, http_status(e.code()), error_json(e.code(), e.what()));
    } catch (const std::exception& e) {
      reply(res, 500, error_json(ErrorCode::kIoError, e.what()));
    }
  };
}

Json parse_body(const httplib::Request& req) {
  if (text::is_blank(req.body)) return Json::object();
  Json j = Json::parse(req.body, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::kInvalidArgument, "request body is not JSON");
  return j;
}

std::uint64_t parse_u64(const std::string& s, std::string_view what) {
  try {
    std::size_t used = 0;
    auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::logic_error&) {
    fail(ErrorCode::kInvalidArgument, std::string(what) + " must be a non-negative integer");
  }
}

}  // namespace

void install_routes(httplib::Server& server, Engine& engine) {
  server.Post("/v1/memory", guarded(201, [&engine](const httplib::Request& req) { return engine.add(parse_body(req)); }));
  server.Patch(R"(/v1/memory/(\d+))", guarded(200, [&engine](const httplib::Request& req) {
                 auto body = parse_body(req);
                 if (!body.contains("correction") || !body["correction"].is_string()) {
                   fail(ErrorCode::kInvalidArgument, "body needs a string field 'correction'");
                 }
                 return engine.update(parse_u64(req.matches[1], "chunk"), body["correction"].get<std::string>());
               }));
  server.Delete(R"(/v1/memory/(\d+))", guarded(200, [&engine](const httplib::Request& req) {
                  return engine.remove_chunk(parse_u64(req.matches[1], "chunk"));
                }));
  server.Delete(R"(/v1/entities/(\d+))", guarded(200, [&engine](const httplib::Request& req) {
                  return engine.remove_entity(parse_u64(req.matches[1], "entity"));
                }));
  server.Get("/v1/query", guarded(200, [&engine](const httplib::Request& req) {
               RetrieveOp op;
               op.query = req.get_param_value("q");
               if (req.has_param("hops") || req.has_param("budget") || req.has_param("top_m") || req.has_param("kinds")) {
                 auto p = engine.orchestrator().config().retrieval;
                 if (req.has_param("hops")) p.hop_limit = parse_u64(req.get_param_value("hops"), "hops");
                 if (req.has_param("budget")) p.context_budget = parse_u64(req.get_param_value("budget"), "budget");
                 if (req.has_param("top_m")) p.top_m = parse_u64(req.get_param_value("top_m"), "top_m");
                 if (req.has_param("kinds")) p.kinds = parse_kind_set(req.get_param_value("kinds"));
                 op.params = p;
               }
               if (req.has_param("path")) {
                 op.path_hint = try_parse_route_path(req.get_param_value("path"));
                 if (!op.path_hint) fail(ErrorCode::kInvalidArgument, "unknown path hint");
               }
               if (req.has_param("session")) op.session_id = req.get_param_value("session");
               if (req.has_param("domain")) op.domain = req.get_param_value("domain");
               if (req.has_param("choices")) {
                 std::vector<std::string> choices;
                 for (const auto& c : text::split(req.get_param_value("choices"), ',')) choices.emplace_back(text::trim(c));
                 op.choices = std::move(choices);
               }
               return engine.query(op);
             }));
  server.Post("/v1/consolidate", guarded(200, [&engine](const httplib::Request&) { return engine.consolidate(); }));
  server.Post("/v1/prune", guarded(200, [&engine](const httplib::Request&) { return engine.prune(); }));
  server.Post("/v1/export", guarded(200, [&engine](const httplib::Request& req) {
                auto body = parse_body(req);
                std::optional<fs::path> out;
                if (body.contains("out")) out = body["out"].get<std::string>();
                return engine.export_round(out);
              }));
  server.Post("/v1/tick", guarded(200, [&engine](const httplib::Request&) { return engine.tick(); }));
  server.Get("/v1/stats", guarded(200, [&engine](const httplib::Request&) { return engine.stats(); }));
  server.Get("/v1/healthz", guarded(200, [](const httplib::Request&) { return Json{{"status", "ok"}}; }));
}

std::pair<std::string, int> parse_listen_addr(std::string_view addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    fail(ErrorCode::kInvalidArgument, "listen address must be host:port");
  }
  const std::string port_text(addr.substr(colon + 1));
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    if (used != port_text.size()) throw std::invalid_argument("trailing");
  } catch (const std::logic_error&) {
    fail(ErrorCode::kInvalidArgument, "listen port is not a number");
  }
  if (port < 0 || port > 65535) fail(ErrorCode::kInvalidArgument, "listen port out of range");
  return {std::string(addr.substr(0, colon)), port};
}

void serve(Engine& engine, const std::string& listen_addr, std::chrono::milliseconds tick_interval) {
  const auto [host, port] = parse_listen_addr(listen_addr);
  httplib::Server server;
  install_routes(server, engine);
  if (!server.bind_to_port(host, port)) fail(ErrorCode::kBindError, "cannot bind " + listen_addr);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::thread listener([&server] { server.listen_after_bind(); });

  std::mutex mu;
  std::condition_variable cv;
  bool stopping = false;
  std::thread ticker;
  if (tick_interval.count() > 0) {
    ticker = std::thread([&] {
      std::unique_lock lock(mu);
      while (!cv.wait_for(lock, tick_interval, [&] { return stopping; })) {
        lock.unlock();
        try {
          engine.tick();
        } catch (const std::exception& e) {
          std::cerr << "tick failed: " << e.what() << '\n';
        }
        lock.lock();
      }
    });
  }

  std::cerr << "memverse listening on " << host << ':' << port << '\n';
  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "shutting down\n";
  server.stop();
  listener.join();
  {
    std::lock_guard lock(mu);
    stopping = true;
  }
  cv.notify_all();
  if (ticker.joinable()) ticker.join();
  engine.save();
}

}  // namespace memverse
