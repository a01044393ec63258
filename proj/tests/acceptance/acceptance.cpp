// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "memverse/service.hpp"
#include "support/corpus.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace memverse;
using namespace std::chrono_literals;
using testing_support::TempDir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::set<ChunkSeq> dead_provenance(const KnowledgeGraph& g, const ChunkStore& store) {
  std::set<ChunkSeq> out;
  auto scan = [&](const Provenance& p) {
    for (auto s : p) {
      if (!store.is_live(s)) out.insert(s);
    }
  };
  for (const auto& e : g.entities()) scan(e.provenance);
  for (const auto& r : g.relations()) scan(r.provenance);
  return out;
}

Outcome provenance_closure() {
  ManualClock clock(from_millis(0));
  ChunkStore store(clock);
  MemverseConfig cfg;
  cfg.consolidation_threshold = 1'000'000;
  Orchestrator orch(store, clock, cfg);
  std::mt19937 rng(101);
  auto facts = corpus::svo_facts(1000, 31);
  std::vector<ChunkSeq> live;
  std::size_t updates = 0, deletes = 0, empty_sets = 0;
  for (std::size_t turn = 0; turn < 1000; ++turn) {
    const auto& text = facts[turn].sentence;
    const auto pick = rng() % 10;
    if (pick < 7 || live.size() < 5) {
      live.push_back(orch.handle(AddOp{text, "s" + std::to_string(turn % 5), std::nullopt, {}, std::nullopt,
                                       Role::kUser})
                         .chunk->sequence);
    } else if (pick < 9) {
      auto idx = rng() % live.size();
      live[idx] = orch.handle(UpdateOp{live[idx], text}).chunk->sequence;
      ++updates;
    } else {
      auto idx = rng() % live.size();
      orch.handle(DeleteOp{live[idx]});
      live.erase(live.begin() + static_cast<std::ptrdiff_t>(idx));
      ++deletes;
    }
    clock.advance(1s);
    if (turn % 25 == 24) orch.consolidate();
  }
  orch.consolidate();
  const auto violations = orch.graph().integrity_violations();
  for (const auto& e : orch.graph().entities()) empty_sets += e.provenance.empty();
  for (const auto& r : orch.graph().relations()) empty_sets += r.provenance.empty();
  const auto dead = dead_provenance(orch.graph(), store);
  Outcome o;
  o.pass = violations.empty() && dead.empty() && empty_sets == 0 && orch.unaccounted_chunks().empty();
  o.detail = "violations=" + std::to_string(violations.size()) + " dead_refs=" + std::to_string(dead.size()) +
             " entities=" + std::to_string(orch.graph().entities().size()) +
             " relations=" + std::to_string(orch.graph().relations().size()) + " updates=" + std::to_string(updates) +
             " deletes=" + std::to_string(deletes);
  return o;
}

struct RecallRun {
  std::size_t queries = 0;
  std::size_t rank1 = 0;
  std::size_t oracle_defined = 0;
  double mean_graph_accesses = 0;
  double mean_scan_accesses = 0;
  std::size_t fewer = 0;
};

RecallRun recall_run() {
  ManualClock clock(from_millis(0));
  ChunkStore store(clock);
  Orchestrator orch(store, clock, MemverseConfig{});
  auto facts = corpus::svo_facts(500);
  std::vector<std::pair<std::uint64_t, std::string>> chunks;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    auto id = orch.handle(AddOp{facts[i].sentence, "corpus", i, {}, std::nullopt, Role::kAssistant}).chunk;
    chunks.emplace_back(id->sequence, facts[i].sentence);
  }
  orch.consolidate();
  RecallRun run;
  double graph_total = 0, scan_total = 0;
  for (const auto& f : facts) {
    const auto q = corpus::subject_question(f);
    std::size_t scan = 0;
    auto want = oracle::best_chunk(q, chunks, &scan);
    RetrieveOp op;
    op.query = q;
    op.path_hint = RoutePath::kLtmRetrieval;
    auto res = orch.handle(op);
    ++run.queries;
    if (want) {
      ++run.oracle_defined;
      if (!res.retrieval->chunks.empty() && res.retrieval->chunks.front().id.sequence == *want) ++run.rank1;
    }
    graph_total += static_cast<double>(res.accesses);
    scan_total += static_cast<double>(scan);
    if (res.accesses < scan) ++run.fewer;
  }
  run.mean_graph_accesses = graph_total / static_cast<double>(run.queries);
  run.mean_scan_accesses = scan_total / static_cast<double>(run.queries);
  return run;
}

Outcome stm_semantics() {
  std::mt19937 rng(4242);
  std::size_t cap = 1 + rng() % 10;
  StmWindow w(cap);
  oracle::StmModel model(cap);
  std::size_t evictions = 0, mismatches = 0;
  for (int i = 0; i < 10'000; ++i) {
    if (rng() % 7 == 0) {
      cap = 1 + rng() % 12;
      auto got = w.resize(cap);
      auto want = model.resize(cap);
      std::vector<std::string> got_text;
      for (const auto& t : got) got_text.push_back(t.query_text);
      if (got_text != want) ++mismatches;
      evictions += got.size();
    } else {
      const auto text = "turn-" + std::to_string(i);
      auto got = w.push(Turn{{static_cast<ChunkSeq>(i), "d"}, text, from_millis(i)});
      auto want = model.push(text);
      if (got.has_value() != want.has_value() || (got && got->query_text != *want)) ++mismatches;
      evictions += got.has_value();
    }
    std::vector<std::string> items;
    for (const auto& t : w.turns()) items.push_back(t.query_text);
    if (items != model.items() || w.size() > w.capacity()) ++mismatches;
  }
  return {mismatches == 0, "ops=10000 mismatches=" + std::to_string(mismatches) +
                               " evictions=" + std::to_string(evictions)};
}

Outcome bounded_growth() {
  ManualClock clock(from_millis(0));
  ChunkStore store(clock);
  MemverseConfig cfg;
  cfg.consolidation_threshold = 1'000'000;
  cfg.prune.max_entities = 200;
  Orchestrator orch(store, clock, cfg);
  auto facts = corpus::svo_facts(1960, 77);
  std::size_t next_core = 0, prunes = 0, max_seen = 0, core_lost = 0, over = 0;
  std::set<EntityId> core_ids;
  std::size_t fact = 0;
  for (std::size_t i = 0; i < 2000; ++i) {
    std::string text;
    if (i % 50 == 25) {
      text = "My favorite city is " + corpus::name(100'000 + next_core++) + ".";
    } else {
      text = facts[fact++].sentence;
    }
    orch.handle(AddOp{text, "stream", i, {}, std::nullopt, Role::kAssistant});
    clock.advance(1min);
    if (i % 50 == 49) {
      orch.consolidate();
      for (auto id : orch.graph().view(MemoryKind::kCore)) core_ids.insert(id);
      orch.prune();
      ++prunes;
      const auto n = orch.graph().entities().size();
      max_seen = std::max(max_seen, n);
      if (n > 200) ++over;
      for (auto id : core_ids) core_lost += !orch.graph().entity(id);
    }
  }
  return {over == 0 && core_lost == 0 && core_ids.size() == next_core,
          "prunes=" + std::to_string(prunes) + " max_entities_after_prune=" + std::to_string(max_seen) +
              " core_entities=" + std::to_string(core_ids.size()) + " core_removed=" + std::to_string(core_lost)};
}

struct Request {
  std::string method;
  std::string path;
  std::string body;
};

std::vector<Request> op_log() {
  std::vector<Request> log;
  auto facts = corpus::svo_facts(60, 5);
  for (std::size_t i = 0; i < facts.size(); ++i) {
    Json body{{"content", facts[i].sentence}, {"session", "s" + std::to_string(i % 3)}};
    log.push_back({"POST", "/v1/memory", body.dump()});
    if (i % 10 == 9) {
      log.push_back({"GET", "/v1/query?q=" + httplib::detail::encode_url(corpus::subject_question(facts[i - 5])) +
                                "&path=ltm",
                     ""});
      log.push_back({"GET", "/v1/query?q=" + httplib::detail::encode_url(corpus::subject_question(facts[i])), ""});
    }
  }
  log.push_back({"POST", "/v1/memory", R"({"media":{"uri":"file:///trip/harbor.mp4","modality":"video"}})"});
  log.push_back({"POST", "/v1/consolidate", ""});
  log.push_back({"PATCH", "/v1/memory/3", R"({"correction":"Qualoneri admires Vesh."})"});
  log.push_back({"DELETE", "/v1/memory/7", ""});
  log.push_back({"DELETE", "/v1/memory/7", ""});
  log.push_back({"POST", "/v1/export", "{}"});
  for (std::size_t i = 0; i < 10; ++i) {
    log.push_back({"GET", "/v1/query?q=" + httplib::detail::encode_url(corpus::subject_question(facts[i * 5])) +
                              "&path=ltm&hops=1",
                   ""});
  }
  log.push_back({"POST", "/v1/prune", ""});
  log.push_back({"POST", "/v1/export", "{}"});
  log.push_back({"POST", "/v1/tick", ""});
  log.push_back({"GET", "/v1/stats", ""});
  return log;
}

struct ReplayCapture {
  std::vector<std::string> responses;
  std::string snapshot;
  std::string state;
  std::map<std::string, std::string> exports;
};

ReplayCapture replay_once(const std::vector<Request>& log) {
  TempDir dir("memverse-replay");
  ManualClock clock(from_millis(1'700'000'000'000));
  Engine::Options opts;
  opts.sync_writes = false;
  ReplayCapture cap;
  {
    Engine engine(dir.path(), {}, clock, default_transport(), opts);
    httplib::Server server;
    install_routes(server, engine);
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client cli("127.0.0.1", port);
    for (const auto& r : log) {
      httplib::Result res;
      if (r.method == "GET") {
        res = cli.Get(r.path);
      } else if (r.method == "POST") {
        res = cli.Post(r.path, r.body, "application/json");
      } else if (r.method == "PATCH") {
        res = cli.Patch(r.path, r.body, "application/json");
      } else {
        res = cli.Delete(r.path);
      }
      cap.responses.push_back(res ? std::to_string(res->status) + " " + res->body : "transport error");
      clock.advance(7s);
    }
    server.stop();
    th.join();
    engine.save();
  }
  cap.snapshot = slurp(dir / "graph.snapshot");
  cap.state = slurp(dir / "state.json");
  for (const auto& entry : std::filesystem::directory_iterator(dir / "exports")) {
    cap.exports[entry.path().filename().string()] = slurp(entry.path());
  }
  return cap;
}

Outcome determinism() {
  const auto log = op_log();
  auto a = replay_once(log);
  auto b = replay_once(log);
  std::size_t differing = 0;
  for (std::size_t i = 0; i < std::min(a.responses.size(), b.responses.size()); ++i) {
    differing += a.responses[i] != b.responses[i];
  }
  std::size_t transport_errors = 0;
  std::map<std::string, std::size_t> statuses;
  for (const auto& r : a.responses) {
    transport_errors += r == "transport error";
    ++statuses[r.substr(0, 3)];
  }
  std::string mix;
  for (const auto& [code, n] : statuses) mix += (mix.empty() ? "" : ",") + code + "x" + std::to_string(n);
  const bool pass = a.responses.size() == b.responses.size() && differing == 0 && transport_errors == 0 &&
                    a.snapshot == b.snapshot && !a.snapshot.empty() && a.state == b.state &&
                    a.exports == b.exports && a.exports.size() == 4;
  return {pass, "requests=" + std::to_string(log.size()) + " statuses=" + mix + " differing_responses=" + std::to_string(differing) +
                    " snapshot_equal=" + (a.snapshot == b.snapshot ? "yes" : "no") +
                    " export_files=" + std::to_string(a.exports.size()) +
                    " exports_equal=" + (a.exports == b.exports ? "yes" : "no")};
}

Outcome export_exactly_once() {
  TempDir dir("memverse-export");
  ManualClock clock(from_millis(0));
  ChunkStore store(clock);
  MemverseConfig cfg;
  cfg.export_dir = dir.path();
  Orchestrator orch(store, clock, cfg);
  auto facts = corpus::svo_facts(100, 9);
  for (std::size_t i = 0; i < facts.size(); ++i) {
    orch.handle(AddOp{facts[i].sentence, "corpus", i, {}, std::nullopt, Role::kAssistant});
  }
  orch.consolidate();
  std::map<std::string, int> seen;
  std::vector<std::uint64_t> rounds;
  std::size_t roundtrip_ok = 0, digest_ok = 0;
  for (int round = 0; round < 3; ++round) {
    for (const auto& f : facts) {
      RetrieveOp op;
      op.query = corpus::subject_question(f);
      op.path_hint = RoutePath::kLtmRetrieval;
      op.choices = std::vector<std::string>{f.object, "none"};
      orch.handle(op);
      clock.advance(1s);
    }
    auto m = orch.export_round();
    char name[32];
    std::snprintf(name, sizeof(name), "round-%04llu.jsonl", static_cast<unsigned long long>(m.round));
    const auto path = dir / name;
    const auto body = slurp(path);
    std::string rebuilt;
    for (const auto& r : load_training_file(path)) {
      ++seen[r.trace_id];
      rebuilt += Json{{"prompt", r.prompt}, {"target", r.target}, {"trace_id", r.trace_id}, {"round", r.round}}.dump();
      rebuilt += '\n';
    }
    roundtrip_ok += rebuilt == body;
    const auto manifest = load_manifest(manifest_path_for(path));
    digest_ok += manifest.file_digest == oracle::sha256_hex(body) && manifest.pair_count == 100 && manifest == m;
    rounds.push_back(manifest.round);
  }
  std::size_t duplicates = 0;
  for (const auto& [id, n] : seen) duplicates += n != 1;
  const bool pass = seen.size() == 300 && duplicates == 0 && roundtrip_ok == 3 && digest_ok == 3 &&
                    rounds == std::vector<std::uint64_t>{1, 2, 3} && orch.exporter().skipped_count() == 0;
  return {pass, "trace_ids=" + std::to_string(seen.size()) + " duplicates=" + std::to_string(duplicates) +
                    " roundtrip_files=" + std::to_string(roundtrip_ok) + "/3 rounds=" + std::to_string(rounds[0]) +
                    "," + std::to_string(rounds[1]) + "," + std::to_string(rounds[2])};
}

Outcome prompt_goldens() {
  struct Golden {
    std::string question;
    Choices choices;
    std::string want;
  };
  const std::vector<Golden> goldens{
      {"Which is a mammal?", std::vector<std::string>{"cat", "rock"}, "Question: Which is a mammal? Choices: cat, rock"},
      {"When did we meet?", std::nullopt, "Question: When did we meet?"},
      {"Pick", std::vector<std::string>{"a", "b", "c", "d"}, "Question: Pick Choices: a, b, c, d"},
      {"One?", std::vector<std::string>{"only"}, "Question: One? Choices: only"},
      {"None?", std::vector<std::string>{}, "Question: None?"},
      {"Spaces kept ", std::vector<std::string>{" x", "y "}, "Question: Spaces kept  Choices:  x, y "},
  };
  std::size_t ok = 0;
  for (const auto& g : goldens) ok += format_prompt(g.question, g.choices) == g.want;
  bool empty_rejected = false;
  try {
    format_prompt("", std::vector<std::string>{"a"});
  } catch (const Error& e) {
    empty_rejected = e.code() == ErrorCode::kEmptyQuestion;
  }
  return {ok == goldens.size() && empty_rejected,
          "goldens=" + std::to_string(ok) + "/" + std::to_string(goldens.size()) +
              " empty_question_rejected=" + (empty_rejected ? "yes" : "no")};
}

bool report(int id, const std::string& name, double limit_s, const std::function<Outcome()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = limit_s <= 0 || secs < limit_s;
  const bool pass = o.pass && in_time;
  char timing[64];
  if (limit_s > 0) {
    std::snprintf(timing, sizeof(timing), "time=%.2fs limit=%.0fs", secs, limit_s);
  } else {
    std::snprintf(timing, sizeof(timing), "time=%.2fs", secs);
  }
  std::printf("criterion %d %-22s %s %s %s\n", id, name.c_str(), pass ? "PASS" : "FAIL", o.detail.c_str(), timing);
  std::fflush(stdout);
  return pass;
}

}  // namespace

int main() {
  bool ok = true;
  ok &= report(1, "provenance-closure", 30, provenance_closure);

  RecallRun recall;
  ok &= report(2, "oracle-recall", 60, [&] {
    recall = recall_run();
    const bool pass = recall.oracle_defined == recall.queries && recall.rank1 == recall.queries;
    return Outcome{pass, "queries=" + std::to_string(recall.queries) + " rank1_match=" + std::to_string(recall.rank1) +
                             " (100% required)"};
  });
  ok &= report(3, "efficiency", 0, [&] {
    const double ratio = recall.mean_graph_accesses / recall.mean_scan_accesses;
    const double fewer = static_cast<double>(recall.fewer) / static_cast<double>(recall.queries);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "mean_graph=%.2f mean_scan=%.1f ratio=%.4f (<=0.20) fewer_share=%.4f (>=0.99)",
                  recall.mean_graph_accesses, recall.mean_scan_accesses, ratio, fewer);
    return Outcome{recall.queries > 0 && ratio <= 0.20 && fewer >= 0.99, buf};
  });
  ok &= report(4, "stm-semantics", 0, stm_semantics);
  ok &= report(5, "bounded-growth", 0, bounded_growth);
  ok &= report(6, "replay-determinism", 0, determinism);
  ok &= report(7, "export-exactly-once", 0, export_exactly_once);
  ok &= report(8, "prompt-format", 0, prompt_goldens);
  return ok ? 0 : 1;
}
