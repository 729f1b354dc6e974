#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "statuary/archive.hpp"

namespace statuary {

using Json = nlohmann::json;

/// Archive manifest: JSON-lines with one "image", "face" or "statue" record per line.
struct Manifest {
  std::vector<ArchiveImage> images;
  std::vector<StatueRecord> statues;
};

[[nodiscard]] auto metadata_to_json(const MetadataRecord& record) -> Json;
/// Unknown field names raise FieldError.
[[nodiscard]] auto metadata_from_json(const Json& j) -> MetadataRecord;

[[nodiscard]] auto image_to_json(const ArchiveImage& image) -> Json;
[[nodiscard]] auto face_to_json(const FaceRegion& face) -> Json;
[[nodiscard]] auto statue_to_json(const StatueRecord& statue) -> Json;

void write_manifest(const Manifest& manifest, std::ostream& out);
void write_manifest(const Manifest& manifest, const std::filesystem::path& file);

/// Throws ParseError naming the offending line.
[[nodiscard]] auto read_manifest(std::istream& in, const std::string& source = "manifest")
    -> Manifest;
[[nodiscard]] auto read_manifest(const std::filesystem::path& file) -> Manifest;

/// Appends one JSON object per line.
class JsonLinesWriter {
public:
  explicit JsonLinesWriter(std::ostream& out) : out_(out) {}
  void write(const Json& record);

private:
  std::ostream& out_;
};

}  // namespace statuary
