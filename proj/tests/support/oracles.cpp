#include "oracles.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <regex>

namespace oracle {

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::size_t overlap(std::string_view query, std::string_view text) {
  auto q = words(query);
  auto t = words(text);
  std::set<std::string> qs(q.begin(), q.end());
  std::set<std::string> ts(t.begin(), t.end());
  std::size_t n = 0;
  for (const auto& w : qs) n += ts.count(w);
  return n;
}

std::optional<std::uint64_t> best_chunk(std::string_view query,
                                        const std::vector<std::pair<std::uint64_t, std::string>>& chunks,
                                        std::size_t* accesses) {
  std::size_t best = 0;
  std::optional<std::uint64_t> best_seq;
  bool tie = false;
  std::size_t reads = 0;
  for (const auto& [seq, text] : chunks) {
    ++reads;
    auto s = overlap(query, text);
    if (s > best) {
      best = s;
      best_seq = seq;
      tie = false;
    } else if (s == best && s > 0) {
      tie = true;
    }
  }
  if (accesses) *accesses = reads;
  if (tie) return std::nullopt;
  return best_seq;
}

std::optional<std::string> StmModel::push(std::string item) {
  items_.push_back(std::move(item));
  if (items_.size() <= capacity_) return std::nullopt;
  std::string evicted = items_.front();
  items_ = std::vector<std::string>(items_.end() - static_cast<std::ptrdiff_t>(capacity_), items_.end());
  return evicted;
}

std::vector<std::string> StmModel::resize(std::size_t capacity) {
  capacity_ = capacity;
  if (items_.size() <= capacity) return {};
  const auto cut = items_.size() - capacity;
  std::vector<std::string> evicted(items_.begin(), items_.begin() + static_cast<std::ptrdiff_t>(cut));
  items_ = std::vector<std::string>(items_.begin() + static_cast<std::ptrdiff_t>(cut), items_.end());
  return evicted;
}

std::map<std::uint64_t, std::size_t> bfs(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& edges,
                                         std::uint64_t seed, std::size_t limit) {
  std::map<std::uint64_t, std::size_t> dist{{seed, 0}};
  std::vector<std::uint64_t> frontier{seed};
  for (std::size_t hop = 1; hop <= limit && !frontier.empty(); ++hop) {
    std::vector<std::uint64_t> next;
    for (auto node : frontier) {
      for (const auto& [a, b] : edges) {
        std::uint64_t other;
        if (a == node) {
          other = b;
        } else if (b == node) {
          other = a;
        } else {
          continue;
        }
        if (!dist.count(other)) {
          dist[other] = hop;
          next.push_back(other);
        }
      }
    }
    frontier = std::move(next);
  }
  return dist;
}

std::string classify(std::string_view text) {
  const std::string s(text);
  static const std::regex core(
      R"(\b(my name is|i prefer|i live in|i like|i love|i hate|i am allergic|i'm allergic|my favou?rite|i work (as|at)|my birthday|call me|i am vegetarian|i'm vegetarian|my wife|my husband|my partner|i was born)\b)",
      std::regex::icase);
  static const std::regex anchored(
      R"(\b(i|me|my|mine|we|us|our|ours|you|your|yours|today|yesterday|tomorrow|tonight|now|ago|recently|earlier|later|this|currently)\b)",
      std::regex::icase);
  static const std::regex copular(R"(\w+\W+(is|are)\s+(a|an|the)\b)", std::regex::icase);
  if (std::regex_search(s, core)) return "core";
  if (!std::regex_search(s, anchored) && std::regex_search(s, copular)) return "semantic";
  return "episodic";
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), md);
  std::string out;
  char buf[3];
  for (unsigned char b : md) {
    std::snprintf(buf, sizeof(buf), "%02x", b);
    out += buf;
  }
  return out;
}

namespace {
void u64le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}
}  // namespace

std::string chunk_digest(std::string_view content, std::string_view session, std::vector<std::string> uris) {
  std::sort(uris.begin(), uris.end());
  std::string buf;
  u64le(buf, content.size());
  buf += content;
  u64le(buf, session.size());
  buf += session;
  u64le(buf, uris.size());
  for (const auto& u : uris) {
    u64le(buf, u.size());
    buf += u;
  }
  return sha256_hex(buf);
}

std::set<std::string> capitalized_words(const std::vector<std::string>& sentences) {
  std::set<std::string> out;
  for (const auto& s : sentences) {
    std::string cur;
    bool capital = false;
    auto flush = [&] {
      if (capital && !cur.empty()) {
        std::string lower;
        for (char c : cur) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        out.insert(lower);
      }
      cur.clear();
    };
    for (char c : s) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        if (cur.empty()) capital = std::isupper(static_cast<unsigned char>(c)) != 0;
        cur += c;
      } else {
        flush();
      }
    }
    flush();
  }
  return out;
}

std::set<std::uint64_t> visible_after_replay(
    const std::vector<std::pair<std::uint64_t, std::optional<std::uint64_t>>>& writes,
    const std::set<std::uint64_t>& deleted) {
  std::set<std::uint64_t> visible;
  for (const auto& [seq, supersedes] : writes) {
    visible.insert(seq);
    if (supersedes) visible.erase(*supersedes);
  }
  for (auto d : deleted) visible.erase(d);
  return visible;
}

}  // namespace oracle
