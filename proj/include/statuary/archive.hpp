#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace statuary {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXf;

/// Embedding namespaces. Values are the VECF namespace tags.
enum class Namespace : std::uint8_t { global = 0, face = 1 };

[[nodiscard]] auto to_string(Namespace ns) -> std::string_view;
/// Throws ParameterError on anything other than "global" or "face".
[[nodiscard]] auto parse_namespace(std::string_view text) -> Namespace;

/// A namespace of unit vectors with stable row -> entity id mapping.
///
/// Immutable once constructed. Rows are stored as 32-bit floats; the
/// constructor does not renormalize, use `from_vectors` for raw input.
class VectorStore {
public:
  VectorStore(Namespace ns, std::size_t dim);
  VectorStore(Namespace ns, RowMatrix matrix, std::vector<std::string> ids);

  /// Builds a store from arbitrary non-zero rows, normalizing each one.
  [[nodiscard]] static auto from_vectors(Namespace ns, const RowMatrix& raw,
                                         std::vector<std::string> ids) -> VectorStore;

  [[nodiscard]] auto ns() const noexcept -> Namespace { return ns_; }
  [[nodiscard]] auto dim() const noexcept -> std::size_t { return dim_; }
  [[nodiscard]] auto count() const noexcept -> std::size_t { return ids_.size(); }
  [[nodiscard]] auto empty() const noexcept -> bool { return ids_.empty(); }
  [[nodiscard]] auto matrix() const noexcept -> const RowMatrix& { return matrix_; }
  [[nodiscard]] auto row(std::size_t i) const { return matrix_.row(static_cast<Eigen::Index>(i)); }
  [[nodiscard]] auto id(std::size_t i) const -> const std::string& { return ids_[i]; }
  [[nodiscard]] auto ids() const noexcept -> const std::vector<std::string>& { return ids_; }
  [[nodiscard]] auto find(std::string_view id) const -> std::optional<std::size_t>;

  /// Sub-store holding the given rows in the given order.
  [[nodiscard]] auto select(std::span<const std::size_t> rows) const -> VectorStore;

  friend auto operator==(const VectorStore& a, const VectorStore& b) -> bool;

private:
  Namespace ns_;
  std::size_t dim_;
  RowMatrix matrix_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class MetadataField : std::uint8_t {
  statue_type,
  era,
  temple,
  country_taken,
  region_taken,
  city_taken,
  country_origin,
  region_origin,
  city_origin,
};

inline constexpr std::size_t kMetadataFieldCount = 9;

inline constexpr std::array<MetadataField, kMetadataFieldCount> kAllMetadataFields = {
    MetadataField::statue_type,    MetadataField::era,           MetadataField::temple,
    MetadataField::country_taken,  MetadataField::region_taken,  MetadataField::city_taken,
    MetadataField::country_origin, MetadataField::region_origin, MetadataField::city_origin,
};

[[nodiscard]] auto to_string(MetadataField field) -> std::string_view;
[[nodiscard]] auto parse_metadata_field(std::string_view name) -> std::optional<MetadataField>;

/// Optional canonical values, one slot per field.
class MetadataRecord {
public:
  [[nodiscard]] auto get(MetadataField f) const -> const std::optional<std::string>& {
    return values_[static_cast<std::size_t>(f)];
  }
  void set(MetadataField f, std::optional<std::string> value) {
    values_[static_cast<std::size_t>(f)] = std::move(value);
  }
  [[nodiscard]] auto has(MetadataField f) const -> bool { return get(f).has_value(); }
  [[nodiscard]] auto empty() const -> bool;
  [[nodiscard]] auto populated_count() const -> std::size_t;

  friend auto operator==(const MetadataRecord&, const MetadataRecord&) -> bool = default;

private:
  std::array<std::optional<std::string>, kMetadataFieldCount> values_{};
};

enum class SourceKind : std::uint8_t { museum, onsite, treasure, field, scan };

[[nodiscard]] auto to_string(SourceKind kind) -> std::string_view;
[[nodiscard]] auto parse_source_kind(std::string_view text) -> std::optional<SourceKind>;

struct BoundingBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  friend auto operator==(const BoundingBox&, const BoundingBox&) -> bool = default;
};

struct FaceRegion {
  std::string face_id;
  std::string image_id;
  BoundingBox bbox;
  std::optional<std::size_t> face_row;

  friend auto operator==(const FaceRegion&, const FaceRegion&) -> bool = default;
};

struct ArchiveImage {
  std::string id;
  std::string path;
  std::string folder_id;
  std::optional<std::int64_t> timestamp;
  std::optional<std::size_t> global_row;
  std::vector<FaceRegion> face_regions;
  std::optional<std::string> statue_id;
  std::optional<SourceKind> source_kind;
  // Pixel dimensions, when the ingesting side knows them.
  std::optional<std::uint32_t> width;
  std::optional<std::uint32_t> height;
  // Metadata mined from this image's own path.
  MetadataRecord metadata;
  // Set when curation folded this picture into a near-duplicate survivor.
  std::optional<std::string> duplicate_of;
  std::vector<std::string> flags;

  friend auto operator==(const ArchiveImage&, const ArchiveImage&) -> bool = default;
};

struct StatueRecord {
  std::string id;
  std::vector<std::string> image_ids;
  MetadataRecord metadata;
  std::string canonical_image;
  std::string notes;

  friend auto operator==(const StatueRecord&, const StatueRecord&) -> bool = default;
};

struct Violation {
  std::string kind;
  std::string subject;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  [[nodiscard]] auto ok() const -> bool { return violations.empty(); }
  [[nodiscard]] auto count(std::string_view kind) const -> std::size_t;
};

/// Non-owning view over the optional stores of an archive.
struct StoreRefs {
  const VectorStore* global = nullptr;
  const VectorStore* face = nullptr;
};

/// Reports every broken archive invariant; an empty report means consistent.
///
/// Violation kinds: duplicate-image-id, duplicate-face-id, duplicate-statue-id,
/// dangling-global-row, dangling-face-row, face-image-mismatch, invalid-bbox,
/// unknown-statue, statue-unknown-image, partition, statue-mismatch,
/// empty-statue, bad-canonical-image, store-namespace, non-unit-row.
[[nodiscard]] auto validate_archive(std::span<const ArchiveImage> images,
                                    std::span<const StatueRecord> statues, StoreRefs stores)
    -> ValidationReport;

}  // namespace statuary
