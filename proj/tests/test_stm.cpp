#include <doctest.h>

#include <random>

#include "memverse/stm.hpp"
#include "support/oracles.hpp"

using namespace memverse;

namespace {

Turn turn(ChunkSeq seq, std::string text) { return Turn{{seq, "d"}, std::move(text), from_millis(0)}; }

std::vector<std::string> texts(const StmWindow& w) {
  std::vector<std::string> out;
  for (const auto& t : w.turns()) out.push_back(t.query_text);
  return out;
}

}  // namespace

TEST_CASE("capacity must be positive") {
  CHECK_THROWS_AS(StmWindow(0), Error);
  StmWindow w(2);
  CHECK_THROWS_AS(w.resize(0), Error);
}

TEST_CASE("push evicts the oldest") {
  StmWindow w(2);
  CHECK_FALSE(w.push(turn(0, "a")));
  CHECK_FALSE(w.push(turn(1, "b")));
  auto ev = w.push(turn(2, "c"));
  REQUIRE(ev);
  CHECK(ev->query_text == "a");
  CHECK(w.window_text() == "b\nc");
}

TEST_CASE("empty turn text is rejected") {
  StmWindow w(2);
  CHECK_THROWS_AS(w.push(turn(0, "")), Error);
  CHECK(w.empty());
}

TEST_CASE("resize evicts oldest first") {
  StmWindow w(5);
  for (int i = 0; i < 5; ++i) w.push(turn(i, std::to_string(i)));
  auto ev = w.resize(2);
  REQUIRE(ev.size() == 3);
  CHECK(ev[0].query_text == "0");
  CHECK(ev[2].query_text == "2");
  CHECK(w.window_text() == "3\n4");
  CHECK(w.resize(10).empty());
  CHECK(w.capacity() == 10);
}

TEST_CASE("remove_chunk keeps order") {
  StmWindow w(3);
  w.push(turn(1, "a"));
  w.push(turn(2, "b"));
  w.push(turn(3, "c"));
  CHECK(w.remove_chunk(2));
  CHECK_FALSE(w.remove_chunk(2));
  CHECK(w.window_text() == "a\nc");
}

TEST_CASE("randomized sequences match the slicing model") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t cap = 1 + rng() % 6;
    StmWindow w(cap);
    oracle::StmModel model(cap);
    for (int i = 0; i < 300; ++i) {
      if (rng() % 5 == 0) {
        cap = 1 + rng() % 8;
        auto got = w.resize(cap);
        auto want = model.resize(cap);
        std::vector<std::string> got_text;
        for (const auto& t : got) got_text.push_back(t.query_text);
        REQUIRE(got_text == want);
      } else {
        const auto text = "q" + std::to_string(i);
        auto got = w.push(turn(i, text));
        auto want = model.push(text);
        REQUIRE(got.has_value() == want.has_value());
        if (got) REQUIRE(got->query_text == *want);
      }
      REQUIRE(texts(w) == model.items());
      REQUIRE(w.size() <= w.capacity());
    }
  }
}
