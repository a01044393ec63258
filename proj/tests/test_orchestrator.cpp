#include <doctest.h>

#include <random>

#include "memverse/orchestrator.hpp"
#include "support/corpus.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

using namespace memverse;
using namespace std::chrono_literals;

namespace {

struct Rig {
  ManualClock clock{from_millis(0)};
  ChunkStore store{clock};
  Orchestrator orch;

  explicit Rig(MemverseConfig config = {}) : orch(store, clock, std::move(config)) {}

  ChunkId add(const std::string& text, const std::string& session = "s") {
    return *orch.handle(AddOp{text, session, std::nullopt, {}, std::nullopt, Role::kUser}).chunk;
  }
  OpResult ask(const std::string& q, std::optional<RoutePath> hint = std::nullopt) {
    RetrieveOp op;
    op.query = q;
    op.path_hint = hint;
    return orch.handle(op);
  }
};

class FixedParametric final : public ParametricBackend {
 public:
  explicit FixedParametric(std::uint64_t round) : round_(round) {}
  std::pair<std::string, std::uint64_t> generate(const std::string& prompt) override {
    prompts.push_back(prompt);
    return {"echo: " + prompt, round_};
  }
  std::vector<std::string> prompts;

 private:
  std::uint64_t round_;
};

std::set<ChunkSeq> all_provenance(const KnowledgeGraph& g) {
  std::set<ChunkSeq> out;
  for (const auto& e : g.entities()) out.insert(e.provenance.begin(), e.provenance.end());
  for (const auto& r : g.relations()) out.insert(r.provenance.begin(), r.provenance.end());
  return out;
}

}  // namespace

TEST_CASE("classification follows the pattern oracle") {
  const auto lex = MemverseConfig::default_core_lexicon();
  CHECK(classify_text("My name is Alice", lex) == MemoryKind::kCore);
  CHECK(classify_text("A cat is a mammal", lex) == MemoryKind::kSemantic);
  CHECK(classify_text("Yesterday we visited the museum", lex) == MemoryKind::kEpisodic);
  const char* samples[] = {
      "I live in Lisbon.",        "Paris is the capital of France.", "We are the champions today.",
      "Milo chased Rex.",         "Whales are a kind of mammal.",    "I love green tea.",
      "This is a test.",          "The Nile is a river.",            "Bob went home.",
      "I prefer window seats.",   "Call me Ishmael.",                "Cats are the best.",
      "You are a star.",          "I'm allergic to peanuts.",        "Iron is a metal.",
      "My favorite color is red.", "Dogs bark at night.",            "Tokyo is a big city now.",
  };
  for (const char* s : samples) {
    INFO(s);
    CHECK(std::string(to_string(classify_text(s, lex))) == oracle::classify(s));
  }
}

TEST_CASE("add stores and pushes to STM") {
  Rig rig;
  auto a = rig.add("Alice adopted Milo.");
  auto b = rig.add("Milo chased Rex.");
  CHECK(rig.store.get(a.sequence).turn_index == 0);
  CHECK(rig.store.get(b.sequence).turn_index == 1);
  REQUIRE(rig.orch.stm("s"));
  CHECK(rig.orch.stm("s")->window_text() == "Alice adopted Milo.\nMilo chased Rex.");
  CHECK(rig.orch.scheduler().pending_queue.size() == 2);

  rig.orch.handle(AddOp{"Assistant says hi.", "s", std::nullopt, {}, std::nullopt, Role::kAssistant});
  CHECK(rig.orch.stm("s")->size() == 2);
  CHECK_THROWS_AS(rig.add("   "), Error);
}

TEST_CASE("routing rules") {
  Rig rig;
  rig.add("Alice adopted Milo.");
  auto r = rig.orch.route("What about Milo?");
  CHECK(r.path == RoutePath::kStmHit);
  CHECK(r.session == "s");
  CHECK(r.reason.find("Milo") != std::string::npos);

  CHECK(rig.orch.route("Who is Zed?").path == RoutePath::kLtmRetrieval);
  CHECK(rig.orch.route("What about Milo?", RoutePath::kLtmRetrieval).path == RoutePath::kLtmRetrieval);
  CHECK(rig.orch.route("What about Milo?", std::nullopt, std::string("other")).path == RoutePath::kLtmRetrieval);

  auto hit = rig.ask("What about Milo?");
  CHECK(hit.routing->path == RoutePath::kStmHit);
  CHECK(hit.retrieval->context == "Alice adopted Milo.");
  CHECK_THROWS_AS(rig.ask(" "), Error);
}

TEST_CASE("ltm retrieval after consolidation records a trace") {
  Rig rig;
  rig.add("Alice adopted Milo.");
  rig.add("Zoe painted Quill.");
  auto rep = rig.orch.consolidate();
  CHECK(rep.chunks == 2);
  CHECK(rig.orch.scheduler().pending_queue.empty());
  auto res = rig.ask("Who adopted Milo?", RoutePath::kLtmRetrieval);
  REQUIRE(res.retrieval);
  CHECK(res.retrieval->context.find("Alice adopted Milo.") == 0);
  CHECK(res.trace_id);
  CHECK(rig.orch.exporter().pending_count() == 1);
}

TEST_CASE("parametric path reports staleness") {
  testing_support::TempDir dir;
  MemverseConfig cfg;
  cfg.export_dir = dir.path();
  Rig rig(cfg);
  CHECK_THROWS_AS(rig.ask("anything", RoutePath::kParametric), Error);

  rig.add("Alice adopted Milo.");
  rig.orch.consolidate();
  for (int round = 0; round < 5; ++round) {
    rig.ask("Who adopted Milo?", RoutePath::kLtmRetrieval);
    rig.orch.export_round();
  }
  REQUIRE(rig.orch.exporter().latest_manifest()->round == 5);

  auto backend = std::make_shared<FixedParametric>(3);
  rig.orch.set_parametric(backend);
  RetrieveOp op;
  op.query = "Who adopted Milo?";
  op.domain = "general";
  CHECK(rig.orch.route(op.query, std::nullopt, std::nullopt, op.domain).path == RoutePath::kStmHit);
  op.query = "Who painted Quill?";
  op.choices = std::vector<std::string>{"Alice", "Zoe"};
  CHECK(rig.orch.route(op.query, std::nullopt, std::nullopt, op.domain).path == RoutePath::kParametric);
  auto res = rig.orch.handle(op);
  REQUIRE(res.parametric);
  CHECK(res.parametric->trained_round == 3);
  CHECK(res.parametric->staleness_rounds == 2);
  CHECK(backend->prompts.back() == "Question: Who painted Quill? Choices: Alice, Zoe");
  CHECK(rig.orch.route(op.query, std::nullopt, std::nullopt, std::string("medical")).path ==
        RoutePath::kLtmRetrieval);
}

TEST_CASE("tick boundaries") {
  MemverseConfig cfg;
  cfg.consolidation_threshold = 3;
  cfg.consolidation_period = 600s;
  cfg.prune_period = 3600s;
  cfg.distill_period = 7200s;
  Rig rig(cfg);
  const auto t0 = rig.clock.now();
  CHECK(rig.orch.plan(t0).empty());
  rig.add("Alice adopted Milo.");
  rig.add("Bob met Carl.");
  CHECK(rig.orch.plan(t0).empty());
  CHECK(rig.orch.plan(t0 + 599s).empty());
  CHECK(rig.orch.plan(t0 + 600s) == std::vector<ActionKind>{ActionKind::kConsolidate});
  rig.add("Zoe painted Quill.");
  CHECK(rig.orch.plan(t0) == std::vector<ActionKind>{ActionKind::kConsolidate});

  auto out = rig.orch.tick(t0 + 1s);
  REQUIRE(out.size() == 1);
  CHECK(out[0].ok);
  CHECK(rig.orch.scheduler().pending_queue.empty());
  CHECK(rig.orch.plan(t0 + 3599s).empty());
  CHECK(rig.orch.plan(t0 + 3600s) == std::vector<ActionKind>{ActionKind::kPrune});
  CHECK(rig.orch.plan(t0 + 7200s) == std::vector<ActionKind>{ActionKind::kPrune});
  rig.ask("Who adopted Milo?", RoutePath::kLtmRetrieval);
  CHECK(rig.orch.plan(t0 + 7200s) == std::vector<ActionKind>{ActionKind::kPrune, ActionKind::kDistillExport});
}

TEST_CASE("update supersedes and repairs provenance") {
  Rig rig;
  auto a = rig.add("Alice adopted Milo.");
  rig.orch.consolidate();
  CHECK(rig.orch.graph().find_entity("milo"));
  auto res = rig.orch.handle(UpdateOp{a.sequence, "Alice adopted Rex."});
  REQUIRE(res.chunk);
  CHECK(res.superseded->sequence == a.sequence);
  CHECK(rig.store.get(res.chunk->sequence).supersedes == a.sequence);
  CHECK_FALSE(rig.store.is_live(a.sequence));
  CHECK_FALSE(rig.orch.graph().find_entity("milo"));
  CHECK(rig.orch.stm("s")->window_text() == "Alice adopted Rex.");
  rig.orch.consolidate();
  CHECK(rig.orch.graph().find_entity("rex"));
  CHECK(rig.orch.graph().integrity_violations().empty());
  CHECK_THROWS_AS(rig.orch.handle(UpdateOp{a.sequence, "again"}), Error);
}

TEST_CASE("delete by chunk and by entity") {
  Rig rig;
  auto a = rig.add("Alice adopted Milo.");
  auto b = rig.add("Bob met Carl.");
  rig.orch.consolidate();
  auto res = rig.orch.handle(DeleteOp{a.sequence});
  CHECK(res.repair.dropped_entries == 3);
  CHECK_FALSE(rig.orch.graph().find_entity("alice"));
  CHECK(rig.orch.stm("s")->window_text() == "Bob met Carl.");
  rig.orch.handle(DeleteOp{*rig.orch.graph().find_entity("carl")});
  CHECK_FALSE(rig.orch.graph().find_entity("carl"));
  CHECK(rig.store.is_live(b.sequence));
  try {
    rig.orch.handle(DeleteOp{EntityId{12345}});
    FAIL("missing entity deleted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNotFound);
  }
}

TEST_CASE("random op streams keep provenance closed and chunks accounted") {
  std::mt19937 rng(23);
  MemverseConfig cfg;
  cfg.consolidation_threshold = 7;
  Rig rig(cfg);
  auto facts = corpus::svo_facts(150);
  std::vector<ChunkSeq> live;
  std::set<ChunkSeq> deleted;
  std::vector<std::pair<std::uint64_t, std::optional<std::uint64_t>>> writes;
  for (std::size_t i = 0; i < facts.size(); ++i) {
    const auto pick = rng() % 10;
    if (pick < 6 || live.empty()) {
      auto id = rig.add(facts[i].sentence, "s" + std::to_string(i % 4));
      live.push_back(id.sequence);
      writes.emplace_back(id.sequence, std::nullopt);
    } else if (pick < 8) {
      auto idx = rng() % live.size();
      auto res = rig.orch.handle(UpdateOp{live[idx], facts[i].sentence});
      writes.emplace_back(res.chunk->sequence, live[idx]);
      live[idx] = res.chunk->sequence;
    } else {
      auto idx = rng() % live.size();
      rig.orch.handle(DeleteOp{live[idx]});
      deleted.insert(live[idx]);
      live.erase(live.begin() + idx);
    }
    rig.clock.advance(1s);
    rig.orch.tick(rig.clock.now());
    REQUIRE(rig.orch.graph().integrity_violations().empty());
    REQUIRE(rig.orch.unaccounted_chunks().empty());
    for (auto seq : all_provenance(rig.orch.graph())) REQUIRE(rig.store.is_live(seq));
  }
  auto want = oracle::visible_after_replay(writes, deleted);
  auto seqs = rig.store.live_sequences();
  CHECK(std::set<std::uint64_t>(seqs.begin(), seqs.end()) == want);
}

TEST_CASE("op JSON round trip") {
  std::vector<MemoryOp> ops;
  ops.push_back(AddOp{"hello", "s", 4, {{"file:///a.png", Modality::kImage, std::nullopt, {}}}, MemoryKind::kCore,
                      Role::kAssistant});
  ops.push_back(UpdateOp{3, "fixed"});
  ops.push_back(DeleteOp{ChunkSeq{2}});
  ops.push_back(DeleteOp{EntityId{7}});
  RetrieveOp q;
  q.query = "who";
  q.path_hint = RoutePath::kParametric;
  q.choices = std::vector<std::string>{"a", "b"};
  q.domain = "general";
  ops.push_back(q);
  for (const auto& op : ops) {
    auto j = op_to_json(op);
    CHECK(op_to_json(op_from_json(j)) == j);
  }
  CHECK_THROWS_AS(op_from_json(Json{{"op", "explode"}}), Error);
  CHECK_THROWS_AS(op_from_json(Json::array()), Error);
}

TEST_CASE("state round trip") {
  Rig rig;
  rig.add("Alice adopted Milo.");
  rig.add("Bob met Carl.", "t");
  rig.orch.consolidate();
  rig.add("Zoe painted Quill.");
  rig.ask("Who adopted Milo?", RoutePath::kLtmRetrieval);
  const auto state = rig.orch.state();

  Orchestrator copy(rig.store, rig.clock, MemverseConfig{});
  copy.graph().restore_text(rig.orch.graph().snapshot_text());
  copy.load_state(state);
  CHECK(copy.state() == state);
  CHECK(copy.stm("t")->window_text() == "Bob met Carl.");
  CHECK(copy.exporter().pending_count() == 1);
  CHECK_THROWS_AS(copy.load_state(Json{{"scheduler", 1}}), Error);
}
