#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "statuary/engine.hpp"
#include "statuary/manifest.hpp"
#include "statuary/pipeline.hpp"

namespace statuary {

struct ApiConfig {
  std::string host = "127.0.0.1";
  // 0 binds any free port.
  int port = 8080;
  std::filesystem::path archive_root;
  // Base URL of the embedding extractor, e.g. "http://127.0.0.1:9000".
  std::optional<std::string> extractor_url;
  std::size_t default_k = 10;
  // Allowed origins; "*" allows any.
  std::vector<std::string> cors_allow;

  /// Throws ParameterError on an invalid port or default_k.
  void validate() const;

  /// Keys: host, port, archive_root, extractor_url, default_k, cors_allow.
  /// A relative archive_root is resolved against `base_dir`.
  [[nodiscard]] static auto from_json(const Json& j, const std::filesystem::path& base_dir = {})
      -> ApiConfig;
  [[nodiscard]] static auto load(const std::filesystem::path& file) -> ApiConfig;

  /// STATUARY_PORT, STATUARY_ARCHIVE_ROOT, STATUARY_EXTRACTOR_URL.
  void apply_env(const std::function<const char*(const char*)>& getenv);
};

/// Largest page the API returns.
inline constexpr std::size_t kMaxPageSize = 200;

/// Relative search URL for a facet.
[[nodiscard]] auto facet_url(std::string_view field, std::string_view value, std::size_t k,
                             std::size_t offset) -> std::string;

[[nodiscard]] auto url_encode(std::string_view text) -> std::string;

/// HTTP JSON front end over immutable engine snapshots.
///
/// Reads run against whichever snapshot was current when they started.
/// Edits are serialized: each one is appended to the archive overlay, then a
/// new snapshot is built and swapped in before the response is sent.
class ArchiveService {
public:
  /// Loads the archive at config.archive_root.
  explicit ArchiveService(ApiConfig config);
  ArchiveService(ApiConfig config, LoadedArchive archive);
  ~ArchiveService();

  ArchiveService(const ArchiveService&) = delete;
  auto operator=(const ArchiveService&) -> ArchiveService& = delete;

  /// Binds the listening socket and returns the bound port.
  auto bind() -> int;
  /// Serves until stop(); call bind() first.
  void run();
  void stop();

  [[nodiscard]] auto version() const -> std::uint64_t;
  [[nodiscard]] auto engine() const -> std::shared_ptr<const SearchEngine>;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace statuary
