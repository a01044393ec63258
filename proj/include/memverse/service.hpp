#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "memverse/chunk_store.hpp"
#include "memverse/config.hpp"
#include "memverse/http_client.hpp"
#include "memverse/ingest.hpp"
#include "memverse/json_io.hpp"
#include "memverse/orchestrator.hpp"

namespace httplib {
class Server;
}

namespace memverse {

inline constexpr std::string_view kStoreDirEnv = "MEMVERSE_STORE_DIR";
inline constexpr std::string_view kConfigEnv = "MEMVERSE_CONFIG";

/// POST {endpoint}/generate {"prompt"} -> {"text", "trained_round"}.
class HttpParametricClient final : public ParametricBackend {
 public:
  explicit HttpParametricClient(std::string endpoint,
                                std::shared_ptr<HttpTransport> transport = default_transport(),
                                std::chrono::milliseconds timeout = std::chrono::seconds(30));

  std::pair<std::string, std::uint64_t> generate(const std::string& prompt) override;

 private:
  std::string endpoint_;
  std::shared_ptr<HttpTransport> transport_;
  std::chrono::milliseconds timeout_;
};

/// Advisory exclusive lock on `<dir>/LOCK`. Throws kStoreLocked.
class StoreLock {
 public:
  explicit StoreLock(const std::filesystem::path& dir);
  ~StoreLock();
  StoreLock(const StoreLock&) = delete;
  StoreLock& operator=(const StoreLock&) = delete;

 private:
  int fd_ = -1;
};

/// One opened store directory:
///
///   LOCK            advisory lock
///   chunks/         chunk log
///   graph.snapshot  knowledge graph
///   state.json      scheduler, STM windows, export state
///   exports/        training files (unless configured elsewhere)
///
/// Each public call is one command of the API shared by the CLI and the
/// HTTP service; both return the same documents.
class Engine {
 public:
  struct Options {
    /// Run the schedule after every add.
    bool tick_after_add = true;
    bool sync_writes = true;
  };

  Engine(const std::filesystem::path& store_dir, MemverseConfig config, const Clock& clock,
         std::shared_ptr<HttpTransport> transport = default_transport());
  Engine(const std::filesystem::path& store_dir, MemverseConfig config, const Clock& clock,
         std::shared_ptr<HttpTransport> transport, Options options);
  ~Engine();

  /// body: {content?, session?, turn?, media?: [MediaRef] | MediaRef, kind_hint?, role?}.
  /// Media without content is captioned.
  Json add(const Json& body);
  Json update(ChunkSeq chunk, const std::string& correction);
  Json remove_chunk(ChunkSeq chunk);
  Json remove_entity(std::uint64_t entity);
  Json query(const RetrieveOp& op);
  Json consolidate();
  Json prune();
  Json export_round(const std::optional<std::filesystem::path>& out);
  Json tick();
  Json stats() const;

  /// Writes graph.snapshot and state.json.
  void save();

  void set_parametric(std::shared_ptr<ParametricBackend> backend);

  Orchestrator& orchestrator() { return *orchestrator_; }
  ChunkStore& store() { return *store_; }
  const std::filesystem::path& directory() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::unique_ptr<StoreLock> lock_;
  const Clock& clock_;
  Options options_;
  std::unique_ptr<ChunkStore> store_;
  std::unique_ptr<Orchestrator> orchestrator_;
  std::unique_ptr<Ingestor> ingestor_;
  mutable std::recursive_mutex mu_;
};

/// HTTP status for an error code.
int http_status(ErrorCode code);
Json error_json(ErrorCode code, std::string_view message);

/// Installs the /v1 routes on `server`.
void install_routes(httplib::Server& server, Engine& engine);

/// Parses `host:port`; throws kInvalidArgument.
std::pair<std::string, int> parse_listen_addr(std::string_view addr);

/// Serves until SIGINT or SIGTERM, then saves the engine. Throws kBindError.
void serve(Engine& engine, const std::string& listen_addr, std::chrono::milliseconds tick_interval);

}  // namespace memverse
