#include <doctest.h>

#include "memverse/common.hpp"
#include "memverse/text.hpp"
#include "support/oracles.hpp"

using namespace memverse;

TEST_CASE("error names are stable") {
  CHECK(error_name(ErrorCode::kNotFound) == "NotFound");
  CHECK(error_name(ErrorCode::kStoreLocked) == "StoreLocked");
  try {
    fail(ErrorCode::kEmptyQuery, "boom");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyQuery);
    CHECK(std::string(e.what()) == "boom");
  }
}

TEST_CASE("manual clock") {
  ManualClock clock(from_millis(1000));
  CHECK(to_millis(clock.now()) == 1000);
  clock.advance(std::chrono::seconds(2));
  CHECK(to_millis(clock.now()) == 3000);
  clock.set(from_millis(5));
  CHECK(to_millis(clock.now()) == 5);
}

TEST_CASE("memory kinds parse and print") {
  for (auto k : {MemoryKind::kCore, MemoryKind::kEpisodic, MemoryKind::kSemantic}) {
    CHECK(parse_memory_kind(to_string(k)) == k);
  }
  CHECK_FALSE(try_parse_memory_kind("procedural"));
  CHECK_THROWS_AS(parse_memory_kind("procedural"), Error);
}

TEST_CASE("kind sets") {
  KindSet s{MemoryKind::kEpisodic};
  CHECK(s.contains(MemoryKind::kEpisodic));
  CHECK_FALSE(s.contains(MemoryKind::kCore));
  s.insert(MemoryKind::kCore);
  CHECK(s.top_priority() == MemoryKind::kCore);
  CHECK(s.subset_of(KindSet::all()));
  CHECK(parse_kind_set("core,semantic").contains(MemoryKind::kSemantic));
  CHECK(parse_kind_set("all") == KindSet::all());
  CHECK(parse_kind_set(to_string(s)) == s);
  CHECK(KindSet{MemoryKind::kSemantic}.top_priority() == MemoryKind::kSemantic);
  KindSet se{MemoryKind::kSemantic};
  se.insert(MemoryKind::kEpisodic);
  CHECK(se.top_priority() == MemoryKind::kSemantic);
}

TEST_CASE("whitespace and normalization") {
  CHECK(text::trim("  a b \n") == "a b");
  CHECK(text::is_blank(" \t\n"));
  CHECK_FALSE(text::is_blank(" x "));
  CHECK(text::collapse_whitespace("  a \t\n b  ") == "a b");
  // "e" + combining acute composes to U+00E9.
  CHECK(text::normalize_display("Cafe\xCC\x81") == "Caf\xC3\xA9");
  CHECK(text::canonicalize("  MILO  the Cat ") == "milo the cat");
  CHECK(text::canonicalize("\xC3\x89LODIE") == "\xC3\xA9lodie");
  CHECK(text::canonicalize("Stra\xC3\x9F" "e") == "strasse");
}

TEST_CASE("tokenize agrees with the word oracle on ASCII") {
  const char* samples[] = {"What does X7 like?", "Milo, the cat; ate -- fish!", "  ", "a1b2 C3"};
  for (const char* s : samples) CHECK(text::tokenize(s) == oracle::words(s));
}

TEST_CASE("utf8 prefix never splits a sequence") {
  const std::string s = "ab\xC3\xA9" "cd";
  CHECK(text::utf8_prefix(s, 3) == "ab");
  CHECK(text::utf8_prefix(s, 4) == "ab\xC3\xA9");
  CHECK(text::utf8_prefix(s, 100) == s);
}

TEST_CASE("hashes match reference values") {
  CHECK(text::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(text::sha256_hex("abc") == oracle::sha256_hex("abc"));
  const std::string check = "123456789";
  CHECK(text::crc32({reinterpret_cast<const std::uint8_t*>(check.data()), check.size()}) == 0xCBF43926u);
  CHECK(text::fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(text::fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(text::base64_encode("foobar") == "Zm9vYmFy");
  CHECK(text::base64_encode("fo") == "Zm8=");
}

TEST_CASE("split keeps empty fields") {
  auto parts = text::split("a\t\tb", '\t');
  REQUIRE(parts.size() == 3);
  CHECK(parts[1].empty());
}
