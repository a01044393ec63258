#pragma once

#include <compare>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "memverse/common.hpp"

namespace memverse {

using ChunkSeq = std::uint64_t;

/// Identity of a stored chunk. Ordering is by sequence; the digest is a
/// SHA-256 over the chunk's canonical content bytes.
struct ChunkId {
  ChunkSeq sequence = 0;
  std::string digest;

  bool operator==(const ChunkId&) const = default;
  auto operator<=>(const ChunkId& other) const { return sequence <=> other.sequence; }
};

enum class Modality : std::uint8_t { kImage, kAudio, kVideo, kText };

std::string_view to_string(Modality m);
std::optional<Modality> try_parse_modality(std::string_view text);

struct MediaRef {
  std::string uri;
  Modality modality = Modality::kImage;
  std::optional<std::string> byte_digest;
  std::map<std::string, std::string> meta;

  bool operator==(const MediaRef&) const = default;
};

struct Chunk {
  ChunkId id;
  std::string content;
  std::string session_id;
  std::uint64_t turn_index = 0;
  Timestamp created_at{};
  std::vector<MediaRef> media;
  std::optional<MemoryKind> kind_hint;
  /// Set when this chunk is a correction of an earlier one.
  std::optional<ChunkSeq> supersedes;

  bool operator==(const Chunk&) const = default;
};

/// A chunk together with its deletion state, for audit and repair paths.
struct ChunkRecord {
  Chunk chunk;
  bool tombstoned = false;
  std::optional<ChunkSeq> superseded_by;
};

inline constexpr std::string_view kChunkLogFormat = "memverse-chunklog/1";

/// Append-only chunk store.
///
/// Persistent stores keep one record log (`chunks.log`) and a `MANIFEST`
/// per directory. Each log entry is a little-endian u32 payload length, the
/// canonical serialization of the record, and a little-endian u32 CRC-32 of
/// the payload. On open the log is replayed; a torn or corrupt tail is cut
/// off at the last intact record.
///
/// Single writer, many readers. The reference probe is invoked after the
/// write lock is released.
class ChunkStore {
 public:
  struct Options {
    /// fsync after every acknowledged write.
    bool sync_writes = true;
  };

  /// Counts graph provenance entries that reference a chunk.
  using ReferenceProbe = std::function<std::size_t(ChunkSeq)>;

  explicit ChunkStore(const Clock& clock);
  ChunkStore(const std::filesystem::path& dir, const Clock& clock);
  ChunkStore(const std::filesystem::path& dir, const Clock& clock, Options options);
  ~ChunkStore();

  ChunkStore(const ChunkStore&) = delete;
  ChunkStore& operator=(const ChunkStore&) = delete;

  ChunkId put_chunk(std::string_view content, std::string_view session_id,
                    std::uint64_t turn_index, std::vector<MediaRef> media = {},
                    std::optional<MemoryKind> kind_hint = std::nullopt,
                    std::optional<ChunkSeq> supersedes = std::nullopt);

  /// Throws kNotFound for unknown ids (or a digest mismatch) and kTombstoned
  /// for deleted chunks.
  Chunk get_chunk(const ChunkId& id) const;
  Chunk get(ChunkSeq seq) const;

  /// Marks a chunk deleted and returns how many graph provenance entries
  /// still point at it. A second tombstone of the same id is kNotFound.
  std::size_t tombstone(const ChunkId& id, std::optional<ChunkSeq> superseded_by = std::nullopt);

  std::vector<Chunk> list_session(std::string_view session_id) const;

  std::optional<ChunkRecord> inspect(ChunkSeq seq) const;
  bool is_live(ChunkSeq seq) const;
  std::optional<ChunkId> id_of(ChunkSeq seq) const;
  std::vector<ChunkSeq> live_sequences() const;
  std::size_t issued_count() const;
  std::size_t live_count() const;
  std::optional<std::uint64_t> max_turn(std::string_view session_id) const;
  std::vector<std::string> sessions() const;

  void set_reference_probe(ReferenceProbe probe);

  bool persistent() const { return log_ != nullptr; }
  const std::filesystem::path& directory() const { return dir_; }

  /// Digest over (content, session_id, sorted media uris), each field
  /// length-prefixed with a little-endian u64.
  static std::string compute_digest(std::string_view content, std::string_view session_id,
                                    const std::vector<MediaRef>& media);

 private:
  void open_log();
  void replay_log();
  void append_record(const std::string& payload);
  void apply_put(Chunk chunk);

  const Clock& clock_;
  std::filesystem::path dir_;
  Options options_;
  std::FILE* log_ = nullptr;

  mutable std::shared_mutex mu_;
  std::vector<ChunkRecord> records_;
  std::unordered_map<std::string, std::map<std::uint64_t, ChunkSeq>> sessions_;
  std::size_t live_count_ = 0;

  std::mutex probe_mu_;
  ReferenceProbe probe_;
};

}  // namespace memverse
