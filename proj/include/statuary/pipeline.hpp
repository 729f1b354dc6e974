#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "statuary/archive.hpp"
#include "statuary/curation.hpp"
#include "statuary/manifest.hpp"
#include "statuary/metadata.hpp"

namespace statuary {

/// Fixed file names inside an archive directory.
struct ArchiveLayout {
  std::filesystem::path root;

  [[nodiscard]] auto manifest() const { return root / "manifest.jsonl"; }
  [[nodiscard]] auto global_vectors() const { return root / "global.vecf"; }
  [[nodiscard]] auto face_vectors() const { return root / "face.vecf"; }
  [[nodiscard]] auto gazetteer() const { return root / "gazetteer.tsv"; }
  [[nodiscard]] auto overlay() const { return root / "overlay.jsonl"; }
  [[nodiscard]] auto curation_report() const { return root / "curation_report.jsonl"; }
  [[nodiscard]] auto ingest_report() const { return root / "ingest_report.json"; }
};

/// "img-" + FNV-1a 64 of the relative path bytes, in hex.
[[nodiscard]] auto image_id_for_path(std::string_view relative_path) -> std::string;

/// Scans a directory tree into a manifest, one image record per regular file,
/// ordered by relative path. Timestamps are file modification times. File
/// names that are not valid UTF-8 are stored lossily and flagged
/// "undecodable_name".
[[nodiscard]] auto ingest_tree(const std::filesystem::path& root, const Gazetteer& gazetteer) -> Manifest;

[[nodiscard]] auto coverage_to_json(const CoverageReport& coverage) -> Json;

struct CurateOptions {
  CurationThresholds thresholds;
  std::size_t min_pictures = 1;
};

struct CurationOutcome {
  Manifest manifest;
  VectorStore global;
  std::optional<VectorStore> face;
  DedupResult dedup;
  // JSON-lines stage events: {"stage", counts..., "warnings"}.
  std::vector<Json> events;
};

/// Runs dedup, chains, identity graph, components, overrides and the coverage
/// filter over the images that have a global vector. Rows that are not unit
/// length are normalized first.
[[nodiscard]] auto curate(Manifest manifest, const VectorStore& global, std::optional<VectorStore> face,
                          const OverrideScript* overrides, const CurateOptions& options) -> CurationOutcome;

/// Picture with the highest summed cosine to the other members, ties by id.
[[nodiscard]] auto medoid(std::span<const std::string> members, const VectorStore& store)
    -> std::string;

struct OverlayEdit {
  std::uint64_t seq = 0;
  std::string statue_id;
  // A metadata field name or "notes".
  std::string field;
  std::optional<std::string> value;
};

[[nodiscard]] auto read_overlay(const std::filesystem::path& file) -> std::vector<OverlayEdit>;
void append_overlay(const std::filesystem::path& file, const OverlayEdit& edit);
/// Edits naming unknown statues or fields are skipped and counted.
auto apply_overlay(Manifest& manifest, std::span<const OverlayEdit> edits) -> std::size_t;

struct LoadedArchive {
  Manifest manifest;
  std::optional<VectorStore> global;
  std::optional<VectorStore> face;
  std::optional<Gazetteer> gazetteer;
  std::size_t overlay_edits = 0;
};

/// Reads an archive directory and replays its edit overlay.
[[nodiscard]] auto load_archive(const std::filesystem::path& root) -> LoadedArchive;

}  // namespace statuary
