#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>

#include "memverse/chunk_store.hpp"
#include "memverse/http_client.hpp"

namespace memverse {

inline constexpr std::string_view kMockEndpoint = "mock";
inline constexpr std::string_view kCaptionerKeyEnv = "MEMVERSE_CAPTIONER_KEY";

struct CaptionerConfig {
  Modality modality = Modality::kImage;
  /// URL of a caption service, or the literal "mock".
  std::string endpoint{kMockEndpoint};
  std::string model_name = "mock-captioner";
  std::uint32_t timeout_ms = 30000;
  std::uint32_t max_retries = 2;
  /// Video only: frames sampled uniformly over the clip.
  std::uint32_t frame_sample_count = 1;
  std::uint32_t retry_backoff_ms = 250;
  std::string instruction = "Describe this media in one or two factual sentences.";

  bool is_mock() const { return endpoint == kMockEndpoint; }
};

/// Throws kConfigInvalid.
void validate(const CaptionerConfig& config);

struct Description {
  std::string text;
  MediaRef source;
  std::string captioner;
  Timestamp produced_at{};
};

/// Deterministic caption: "image: <stem>", "audio transcript: <stem>",
/// "video: <stem> [frames=<n>]", "document: <stem>".
std::string mock_caption(const MediaRef& media, const CaptionerConfig& config);

/// File name without directories, query, fragment or extension.
std::string uri_stem(std::string_view uri);

/// Turns media into text chunks through per-modality captioners.
class Ingestor {
 public:
  Ingestor(ChunkStore& store, const Clock& clock,
           std::shared_ptr<HttpTransport> transport = default_transport());

  /// Replaces any previous captioner for config.modality.
  void register_captioner(const CaptionerConfig& config);
  std::optional<CaptionerConfig> captioner_for(Modality modality) const;

  Description describe(const MediaRef& media, const CaptionerConfig& config) const;

  /// describe() with the registered captioner, then store the caption as a
  /// chunk whose media list is exactly {media}.
  ChunkId ingest_media(const MediaRef& media, std::string_view session_id, std::uint64_t turn_index);

 private:
  std::string remote_caption(const MediaRef& media, const CaptionerConfig& config,
                             const std::string& instruction) const;

  ChunkStore& store_;
  const Clock& clock_;
  std::shared_ptr<HttpTransport> transport_;

  mutable std::shared_mutex mu_;
  std::map<Modality, CaptionerConfig> captioners_;
};

}  // namespace memverse
