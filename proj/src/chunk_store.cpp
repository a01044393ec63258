#include "memverse/chunk_store.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <mutex>

#include "memverse/json_io.hpp"
#include "memverse/text.hpp"

namespace memverse {
namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kMaxRecordBytes = 64u << 20;

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint32_t payload_crc(std::string_view payload) {
  return text::crc32({reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()});
}

}  // namespace

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kImage: return "image";
    case Modality::kAudio: return "audio";
    case Modality::kVideo: return "video";
    case Modality::kText: return "text";
  }
  return "text";
}

std::optional<Modality> try_parse_modality(std::string_view text) {
  if (text == "image") return Modality::kImage;
  if (text == "audio") return Modality::kAudio;
  if (text == "video") return Modality::kVideo;
  if (text == "text") return Modality::kText;
  return std::nullopt;
}

// --- json ------------------------------------------------------------------

void to_json(Json& j, const MediaRef& m) {
  j = Json{{"uri", m.uri}, {"modality", std::string(to_string(m.modality))}, {"meta", m.meta}};
  if (m.byte_digest) j["byte_digest"] = *m.byte_digest;
}

void from_json(const Json& j, MediaRef& m) {
  m.uri = j.at("uri").get<std::string>();
  auto modality = try_parse_modality(j.at("modality").get<std::string>());
  if (!modality) fail(ErrorCode::kParseError, "unknown modality");
  m.modality = *modality;
  m.byte_digest.reset();
  if (j.contains("byte_digest")) m.byte_digest = j.at("byte_digest").get<std::string>();
  m.meta = j.value("meta", std::map<std::string, std::string>{});
}

void to_json(Json& j, const Chunk& c) {
  j = Json{{"seq", c.id.sequence},
           {"digest", c.id.digest},
           {"content", c.content},
           {"session", c.session_id},
           {"turn", c.turn_index},
           {"created_at", to_millis(c.created_at)},
           {"media", c.media}};
  if (c.kind_hint) j["kind_hint"] = std::string(to_string(*c.kind_hint));
  if (c.supersedes) j["supersedes"] = *c.supersedes;
}

void from_json(const Json& j, Chunk& c) {
  c.id.sequence = j.at("seq").get<ChunkSeq>();
  c.id.digest = j.at("digest").get<std::string>();
  c.content = j.at("content").get<std::string>();
  c.session_id = j.at("session").get<std::string>();
  c.turn_index = j.at("turn").get<std::uint64_t>();
  c.created_at = from_millis(j.at("created_at").get<std::int64_t>());
  c.media = j.at("media").get<std::vector<MediaRef>>();
  c.kind_hint.reset();
  if (j.contains("kind_hint")) c.kind_hint = parse_memory_kind(j.at("kind_hint").get<std::string>());
  c.supersedes.reset();
  if (j.contains("supersedes")) c.supersedes = j.at("supersedes").get<ChunkSeq>();
}

// --- store -----------------------------------------------------------------

ChunkStore::ChunkStore(const Clock& clock) : clock_(clock) {}

ChunkStore::ChunkStore(const fs::path& dir, const Clock& clock)
    : ChunkStore(dir, clock, Options{}) {}

ChunkStore::ChunkStore(const fs::path& dir, const Clock& clock, Options options)
    : clock_(clock), dir_(dir), options_(options) {
  open_log();
}

ChunkStore::~ChunkStore() {
  if (log_ != nullptr) std::fclose(log_);
}

std::string ChunkStore::compute_digest(std::string_view content, std::string_view session_id,
                                       const std::vector<MediaRef>& media) {
  std::vector<std::string> uris;
  uris.reserve(media.size());
  for (const auto& m : media) uris.push_back(m.uri);
  std::sort(uris.begin(), uris.end());

  std::string canonical;
  put_u64_le(canonical, content.size());
  canonical.append(content);
  put_u64_le(canonical, session_id.size());
  canonical.append(session_id);
  put_u64_le(canonical, uris.size());
  for (const auto& u : uris) {
    put_u64_le(canonical, u.size());
    canonical.append(u);
  }
  return text::sha256_hex(canonical);
}

void ChunkStore::open_log() {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot create store directory " + dir_.string() + ": " + ec.message());

  const auto manifest = dir_ / "MANIFEST";
  const auto log_path = dir_ / "chunks.log";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    std::getline(in, line);
    if (text::trim(line) != kChunkLogFormat) {
      fail(ErrorCode::kFormatVersionMismatch,
           "chunk log format '" + line + "' is not " + std::string(kChunkLogFormat));
    }
  } else {
    std::ofstream out(manifest, std::ios::trunc);
    out << kChunkLogFormat << '\n';
    if (!out) fail(ErrorCode::kIoError, "cannot write " + manifest.string());
  }

  if (fs::exists(log_path)) replay_log();

  log_ = std::fopen(log_path.c_str(), "ab");
  if (log_ == nullptr) fail(ErrorCode::kIoError, "cannot open " + log_path.string());
}

void ChunkStore::replay_log() {
  const auto log_path = dir_ / "chunks.log";
  std::ifstream in(log_path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  std::size_t good_end = 0;
  while (pos + 4 <= bytes.size()) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    const std::uint32_t len = get_u32_le(p);
    if (len > kMaxRecordBytes || pos + 8 + len > bytes.size()) break;
    std::string_view payload(bytes.data() + pos + 4, len);
    const std::uint32_t crc = get_u32_le(p + 4 + len);
    if (crc != payload_crc(payload)) break;

    Json record;
    try {
      record = Json::parse(payload);
      const auto type = record.at("type").get<std::string>();
      if (type == "put") {
        apply_put(record.at("chunk").get<Chunk>());
      } else if (type == "tombstone") {
        const auto seq = record.at("seq").get<ChunkSeq>();
        if (seq >= records_.size() || records_[seq].tombstoned) break;
        records_[seq].tombstoned = true;
        if (record.contains("superseded_by")) records_[seq].superseded_by = record.at("superseded_by").get<ChunkSeq>();
        --live_count_;
      } else {
        break;
      }
    } catch (const std::exception&) {
      break;
    }
    pos += 8 + len;
    good_end = pos;
  }

  if (good_end != bytes.size()) {
    // Torn or corrupt tail: everything after the last intact record was never acknowledged.
    fs::resize_file(log_path, good_end);
  }
}

void ChunkStore::apply_put(Chunk chunk) {
  const auto seq = chunk.id.sequence;
  if (seq != records_.size()) {
    fail(ErrorCode::kParseError, "non-contiguous chunk sequence");
  }
  sessions_[chunk.session_id][chunk.turn_index] = seq;
  records_.push_back(ChunkRecord{std::move(chunk), false, std::nullopt});
  ++live_count_;
}

void ChunkStore::append_record(const std::string& payload) {
  if (log_ == nullptr) return;
  std::string frame;
  frame.reserve(payload.size() + 8);
  put_u32_le(frame, static_cast<std::uint32_t>(payload.size()));
  frame.append(payload);
  put_u32_le(frame, payload_crc(payload));
  if (std::fwrite(frame.data(), 1, frame.size(), log_) != frame.size() || std::fflush(log_) != 0) {
    fail(ErrorCode::kIoError, "chunk log write failed");
  }
  if (options_.sync_writes) ::fsync(::fileno(log_));
}

ChunkId ChunkStore::put_chunk(std::string_view content, std::string_view session_id,
                              std::uint64_t turn_index, std::vector<MediaRef> media,
                              std::optional<MemoryKind> kind_hint,
                              std::optional<ChunkSeq> supersedes) {
  if (text::is_blank(content)) fail(ErrorCode::kEmptyContent, "chunk content is empty");
  for (const auto& m : media) {
    if (m.uri.empty()) fail(ErrorCode::kInvalidArgument, "media uri is empty");
  }

  std::unique_lock lock(mu_);
  if (auto it = sessions_.find(std::string(session_id));
      it != sessions_.end() && it->second.contains(turn_index)) {
    fail(ErrorCode::kDuplicateTurn, "session '" + std::string(session_id) + "' already has turn " +
                                        std::to_string(turn_index));
  }
  if (supersedes && *supersedes >= records_.size()) {
    fail(ErrorCode::kNotFound, "superseded chunk " + std::to_string(*supersedes) + " does not exist");
  }

  Chunk chunk;
  chunk.id.sequence = records_.size();
  chunk.id.digest = compute_digest(content, session_id, media);
  chunk.content = std::string(content);
  chunk.session_id = std::string(session_id);
  chunk.turn_index = turn_index;
  chunk.created_at = clock_.now();
  chunk.media = std::move(media);
  chunk.kind_hint = kind_hint;
  chunk.supersedes = supersedes;

  append_record(Json{{"type", "put"}, {"chunk", chunk}}.dump());
  ChunkId id = chunk.id;
  apply_put(std::move(chunk));
  return id;
}

Chunk ChunkStore::get(ChunkSeq seq) const {
  std::shared_lock lock(mu_);
  if (seq >= records_.size()) fail(ErrorCode::kNotFound, "chunk " + std::to_string(seq) + " not found");
  const auto& rec = records_[seq];
  if (rec.tombstoned) fail(ErrorCode::kTombstoned, "chunk " + std::to_string(seq) + " is tombstoned");
  return rec.chunk;
}

Chunk ChunkStore::get_chunk(const ChunkId& id) const {
  {
    std::shared_lock lock(mu_);
    if (id.sequence < records_.size() && !id.digest.empty() &&
        records_[id.sequence].chunk.id.digest != id.digest) {
      fail(ErrorCode::kNotFound, "chunk " + std::to_string(id.sequence) + " digest mismatch");
    }
  }
  return get(id.sequence);
}

std::size_t ChunkStore::tombstone(const ChunkId& id, std::optional<ChunkSeq> superseded_by) {
  {
    std::unique_lock lock(mu_);
    if (id.sequence >= records_.size() || records_[id.sequence].tombstoned ||
        (!id.digest.empty() && records_[id.sequence].chunk.id.digest != id.digest)) {
      fail(ErrorCode::kNotFound, "chunk " + std::to_string(id.sequence) + " not found");
    }
    Json record{{"type", "tombstone"}, {"seq", id.sequence}};
    if (superseded_by) record["superseded_by"] = *superseded_by;
    append_record(record.dump());
    auto& rec = records_[id.sequence];
    rec.tombstoned = true;
    rec.superseded_by = superseded_by;
    --live_count_;
  }
  std::lock_guard probe_lock(probe_mu_);
  return probe_ ? probe_(id.sequence) : 0;
}

std::vector<Chunk> ChunkStore::list_session(std::string_view session_id) const {
  std::shared_lock lock(mu_);
  std::vector<Chunk> out;
  auto it = sessions_.find(std::string(session_id));
  if (it == sessions_.end()) return out;
  for (const auto& [turn, seq] : it->second) {
    if (!records_[seq].tombstoned) out.push_back(records_[seq].chunk);
  }
  return out;
}

std::optional<ChunkRecord> ChunkStore::inspect(ChunkSeq seq) const {
  std::shared_lock lock(mu_);
  if (seq >= records_.size()) return std::nullopt;
  return records_[seq];
}

bool ChunkStore::is_live(ChunkSeq seq) const {
  std::shared_lock lock(mu_);
  return seq < records_.size() && !records_[seq].tombstoned;
}

std::optional<ChunkId> ChunkStore::id_of(ChunkSeq seq) const {
  std::shared_lock lock(mu_);
  if (seq >= records_.size()) return std::nullopt;
  return records_[seq].chunk.id;
}

std::vector<ChunkSeq> ChunkStore::live_sequences() const {
  std::shared_lock lock(mu_);
  std::vector<ChunkSeq> out;
  out.reserve(live_count_);
  for (const auto& rec : records_) {
    if (!rec.tombstoned) out.push_back(rec.chunk.id.sequence);
  }
  return out;
}

std::size_t ChunkStore::issued_count() const {
  std::shared_lock lock(mu_);
  return records_.size();
}

std::size_t ChunkStore::live_count() const {
  std::shared_lock lock(mu_);
  return live_count_;
}

std::optional<std::uint64_t> ChunkStore::max_turn(std::string_view session_id) const {
  std::shared_lock lock(mu_);
  auto it = sessions_.find(std::string(session_id));
  if (it == sessions_.end() || it->second.empty()) return std::nullopt;
  return it->second.rbegin()->first;
}

std::vector<std::string> ChunkStore::sessions() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto& [name, turns] : sessions_) out.push_back(name);
  std::sort(out.begin(), out.end());
  return out;
}

void ChunkStore::set_reference_probe(ReferenceProbe probe) {
  std::lock_guard lock(probe_mu_);
  probe_ = std::move(probe);
}

}  // namespace memverse
