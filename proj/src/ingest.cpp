#include "memverse/ingest.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "memverse/json_io.hpp"
#include "memverse/text.hpp"

namespace memverse {

void validate(const CaptionerConfig& config) {
  if (config.endpoint.empty()) fail(ErrorCode::kConfigInvalid, "captioner endpoint is empty");
  if (config.model_name.empty()) fail(ErrorCode::kConfigInvalid, "captioner model_name is empty");
  if (config.timeout_ms < 1) fail(ErrorCode::kConfigInvalid, "timeout_ms must be >= 1");
  if (config.modality == Modality::kVideo && config.frame_sample_count < 1) {
    fail(ErrorCode::kConfigInvalid, "frame_sample_count must be >= 1 for video");
  }
}

std::string uri_stem(std::string_view uri) {
  auto cut = uri.find_first_of("?#");
  if (cut != std::string_view::npos) uri = uri.substr(0, cut);
  while (!uri.empty() && uri.back() == '/') uri.remove_suffix(1);
  auto slash = uri.find_last_of('/');
  if (slash != std::string_view::npos) uri = uri.substr(slash + 1);
  auto dot = uri.find_last_of('.');
  if (dot != std::string_view::npos && dot > 0) uri = uri.substr(0, dot);
  return std::string(uri);
}

std::string mock_caption(const MediaRef& media, const CaptionerConfig& config) {
  const auto stem = uri_stem(media.uri);
  switch (media.modality) {
    case Modality::kImage: return "image: " + stem;
    case Modality::kAudio: return "audio transcript: " + stem;
    case Modality::kVideo:
      return "video: " + stem + " [frames=" + std::to_string(config.frame_sample_count) + "]";
    case Modality::kText: return "document: " + stem;
  }
  return stem;
}

Ingestor::Ingestor(ChunkStore& store, const Clock& clock, std::shared_ptr<HttpTransport> transport)
    : store_(store), clock_(clock), transport_(std::move(transport)) {}

void Ingestor::register_captioner(const CaptionerConfig& config) {
  validate(config);
  std::unique_lock lock(mu_);
  captioners_[config.modality] = config;
}

std::optional<CaptionerConfig> Ingestor::captioner_for(Modality modality) const {
  std::shared_lock lock(mu_);
  auto it = captioners_.find(modality);
  if (it == captioners_.end()) return std::nullopt;
  return it->second;
}

std::string Ingestor::remote_caption(const MediaRef& media, const CaptionerConfig& config,
                                     const std::string& instruction) const {
  Json request{{"model", config.model_name},
               {"instruction", instruction},
               {"modality", std::string(to_string(media.modality))}};
  constexpr std::string_view kFileScheme = "file://";
  std::optional<std::string> payload;
  if (media.uri.starts_with(kFileScheme)) {
    std::ifstream in(media.uri.substr(kFileScheme.size()), std::ios::binary);
    if (in) payload.emplace(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  if (payload) {
    request["media_b64"] = text::base64_encode(*payload);
  } else {
    request["media_uri"] = media.uri;
  }

  HttpHeaders headers{{"Content-Type", "application/json"}};
  if (const char* key = std::getenv(std::string(kCaptionerKeyEnv).c_str()); key != nullptr) {
    headers["Authorization"] = std::string("Bearer ") + key;
  }

  const std::string body = request.dump();
  std::string last_error;
  for (std::uint32_t attempt = 0; attempt <= config.max_retries; ++attempt) {
    if (attempt > 0 && config.retry_backoff_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(config.retry_backoff_ms));
    }
    auto res = transport_->post(config.endpoint, body, headers,
                                std::chrono::milliseconds(config.timeout_ms));
    if (!res.ok()) {
      last_error = res.status == 0 ? res.error : "HTTP " + std::to_string(res.status);
      continue;
    }
    Json parsed = Json::parse(res.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("text") ||
        !parsed["text"].is_string()) {
      last_error = "response has no top-level text field";
      continue;
    }
    auto caption = parsed["text"].get<std::string>();
    if (text::is_blank(caption)) fail(ErrorCode::kEmptyCaption, "captioner returned empty text for " + media.uri);
    return caption;
  }
  fail(ErrorCode::kCaptionerUnavailable, "captioner " + config.endpoint + " failed after " +
                                             std::to_string(config.max_retries + 1) +
                                             " attempts: " + last_error);
}

Description Ingestor::describe(const MediaRef& media, const CaptionerConfig& config) const {
  if (config.modality != media.modality) {
    fail(ErrorCode::kModalityMismatch, "captioner for " + std::string(to_string(config.modality)) +
                                           " cannot describe " + std::string(to_string(media.modality)));
  }
  validate(config);

  Description out;
  out.source = media;
  out.captioner = config.model_name;
  if (config.is_mock()) {
    out.text = mock_caption(media, config);
  } else if (media.modality == Modality::kVideo) {
    double duration = 0.0;
    if (auto it = media.meta.find("duration_seconds"); it != media.meta.end()) {
      duration = std::strtod(it->second.c_str(), nullptr);
    }
    const auto n = config.frame_sample_count;
    std::string joined;
    for (std::uint32_t i = 0; i < n; ++i) {
      std::ostringstream instruction;
      instruction << config.instruction << " Frame " << (i + 1) << " of " << n;
      if (duration > 0.0) {
        const double t = (static_cast<double>(i) + 0.5) * duration / static_cast<double>(n);
        instruction << " at t=" << std::fixed << std::setprecision(2) << t << "s";
      }
      instruction << '.';
      if (i > 0) joined += " | ";
      joined += remote_caption(media, config, instruction.str());
    }
    out.text = std::move(joined);
  } else {
    out.text = remote_caption(media, config, config.instruction);
  }
  if (text::is_blank(out.text)) fail(ErrorCode::kEmptyCaption, "empty caption for " + media.uri);
  out.produced_at = clock_.now();
  return out;
}

ChunkId Ingestor::ingest_media(const MediaRef& media, std::string_view session_id,
                               std::uint64_t turn_index) {
  auto config = captioner_for(media.modality);
  if (!config) {
    fail(ErrorCode::kCaptionerUnavailable,
         "no captioner registered for " + std::string(to_string(media.modality)));
  }
  auto description = describe(media, *config);
  return store_.put_chunk(description.text, session_id, turn_index, {media});
}

}  // namespace memverse
