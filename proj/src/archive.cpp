#include "statuary/archive.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "statuary/errors.hpp"
#include "statuary/similarity.hpp"

namespace statuary {

namespace {

constexpr std::array<std::string_view, kMetadataFieldCount> kFieldNames = {
    "statue_type",    "era",           "temple",      "country_taken", "region_taken",
    "city_taken",     "country_origin", "region_origin", "city_origin",
};

constexpr std::array<std::string_view, 5> kSourceKindNames = {"museum", "onsite", "treasure",
                                                              "field", "scan"};

constexpr double kUnitTolerance = 1e-5;

}  // namespace

auto to_string(Namespace ns) -> std::string_view {
  return ns == Namespace::global ? "global" : "face";
}

auto parse_namespace(std::string_view text) -> Namespace {
  if (text == "global") {
    return Namespace::global;
  }
  if (text == "face") {
    return Namespace::face;
  }
  throw ParameterError("unknown namespace '" + std::string(text) + "'");
}

VectorStore::VectorStore(Namespace ns, std::size_t dim)
    : VectorStore(ns, RowMatrix(0, static_cast<Eigen::Index>(dim)), {}) {}

VectorStore::VectorStore(Namespace ns, RowMatrix matrix, std::vector<std::string> ids)
    : ns_(ns),
      dim_(static_cast<std::size_t>(matrix.cols())),
      matrix_(std::move(matrix)),
      ids_(std::move(ids)) {
  if (dim_ == 0) {
    throw ParameterError("vector store dimension must be positive");
  }
  if (static_cast<std::size_t>(matrix_.rows()) != ids_.size()) {
    throw ParameterError("vector store has " + std::to_string(matrix_.rows()) + " rows but " +
                         std::to_string(ids_.size()) + " ids");
  }
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) {
      throw ParameterError("duplicate row id '" + ids_[i] + "'");
    }
  }
}

auto VectorStore::from_vectors(Namespace ns, const RowMatrix& raw, std::vector<std::string> ids)
    -> VectorStore {
  RowMatrix unit(raw.rows(), raw.cols());
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    unit.row(r) = l2_normalize(raw.row(r).transpose()).transpose();
  }
  return {ns, std::move(unit), std::move(ids)};
}

auto VectorStore::find(std::string_view id) const -> std::optional<std::size_t> {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

auto VectorStore::select(std::span<const std::size_t> rows) const -> VectorStore {
  RowMatrix sub(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim_));
  std::vector<std::string> sub_ids;
  sub_ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sub.row(static_cast<Eigen::Index>(i)) = matrix_.row(static_cast<Eigen::Index>(rows[i]));
    sub_ids.push_back(ids_[rows[i]]);
  }
  return {ns_, std::move(sub), std::move(sub_ids)};
}

auto operator==(const VectorStore& a, const VectorStore& b) -> bool {
  if (a.ns_ != b.ns_ || a.dim_ != b.dim_ || a.ids_ != b.ids_) {
    return false;
  }
  // Bitwise so that NaN payloads and signed zeros compare exactly.
  return std::memcmp(a.matrix_.data(), b.matrix_.data(),
                     sizeof(float) * static_cast<std::size_t>(a.matrix_.size())) == 0;
}

auto to_string(MetadataField field) -> std::string_view {
  return kFieldNames[static_cast<std::size_t>(field)];
}

auto parse_metadata_field(std::string_view name) -> std::optional<MetadataField> {
  for (std::size_t i = 0; i < kFieldNames.size(); ++i) {
    if (kFieldNames[i] == name) {
      return static_cast<MetadataField>(i);
    }
  }
  return std::nullopt;
}

auto MetadataRecord::empty() const -> bool { return populated_count() == 0; }

auto MetadataRecord::populated_count() const -> std::size_t {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [](const auto& v) { return v.has_value(); }));
}

auto to_string(SourceKind kind) -> std::string_view {
  return kSourceKindNames[static_cast<std::size_t>(kind)];
}

auto parse_source_kind(std::string_view text) -> std::optional<SourceKind> {
  for (std::size_t i = 0; i < kSourceKindNames.size(); ++i) {
    if (kSourceKindNames[i] == text) {
      return static_cast<SourceKind>(i);
    }
  }
  return std::nullopt;
}

auto ValidationReport::count(std::string_view kind) const -> std::size_t {
  return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                [&](const Violation& v) { return v.kind == kind; }));
}

namespace {

void check_store(const VectorStore* store, Namespace expected, ValidationReport& report) {
  if (store == nullptr) {
    return;
  }
  if (store->ns() != expected) {
    report.violations.push_back({"store-namespace", std::string(to_string(expected)),
                                 "store tagged " + std::string(to_string(store->ns()))});
  }
  for (std::size_t r = 0; r < store->count(); ++r) {
    const double norm = l2_norm(store->row(r));
    if (!(std::abs(norm - 1.0) <= kUnitTolerance)) {
      report.violations.push_back({"non-unit-row", store->id(r),
                                   "row " + std::to_string(r) + " has norm " + std::to_string(norm)});
    }
  }
}

}  // namespace

auto validate_archive(std::span<const ArchiveImage> images, std::span<const StatueRecord> statues,
                      StoreRefs stores) -> ValidationReport {
  ValidationReport report;
  auto add = [&](std::string kind, std::string subject, std::string message) {
    report.violations.push_back({std::move(kind), std::move(subject), std::move(message)});
  };

  check_store(stores.global, Namespace::global, report);
  check_store(stores.face, Namespace::face, report);

  std::unordered_map<std::string, const ArchiveImage*> by_id;
  std::unordered_set<std::string> face_ids;
  for (const auto& image : images) {
    if (!by_id.emplace(image.id, &image).second) {
      add("duplicate-image-id", image.id, "image id appears more than once");
    }
    if (image.global_row) {
      const std::size_t count = stores.global ? stores.global->count() : 0;
      if (*image.global_row >= count) {
        add("dangling-global-row", image.id,
            "global_row " + std::to_string(*image.global_row) + " but global store has " +
                std::to_string(count) + " rows");
      }
    }
    for (const auto& face : image.face_regions) {
      if (!face_ids.insert(face.face_id).second) {
        add("duplicate-face-id", face.face_id, "face id appears more than once");
      }
      if (face.image_id != image.id) {
        add("face-image-mismatch", face.face_id,
            "face refers to image '" + face.image_id + "' but is attached to '" + image.id + "'");
      }
      const auto& b = face.bbox;
      bool bbox_ok = b.w > 0 && b.h > 0 && b.x >= 0 && b.y >= 0;
      if (bbox_ok && image.width && image.height) {
        bbox_ok = b.x + b.w <= *image.width && b.y + b.h <= *image.height;
      }
      if (!bbox_ok) {
        add("invalid-bbox", face.face_id, "bounding box empty or outside the image");
      }
      if (face.face_row) {
        const std::size_t count = stores.face ? stores.face->count() : 0;
        if (*face.face_row >= count) {
          add("dangling-face-row", face.face_id,
              "face_row " + std::to_string(*face.face_row) + " but face store has " +
                  std::to_string(count) + " rows");
        }
      }
    }
  }

  std::unordered_set<std::string> statue_ids;
  for (const auto& statue : statues) {
    if (!statue_ids.insert(statue.id).second) {
      add("duplicate-statue-id", statue.id, "statue id appears more than once");
    }
  }

  // image id -> statues listing it
  std::unordered_map<std::string, std::vector<std::string>> owners;
  for (const auto& statue : statues) {
    if (statue.image_ids.empty()) {
      add("empty-statue", statue.id, "statue has no images");
    }
    bool canonical_found = false;
    for (const auto& image_id : statue.image_ids) {
      canonical_found = canonical_found || image_id == statue.canonical_image;
      if (!by_id.contains(image_id)) {
        add("statue-unknown-image", statue.id, "lists unknown image '" + image_id + "'");
      }
      owners[image_id].push_back(statue.id);
    }
    if (!statue.image_ids.empty() && !canonical_found) {
      add("bad-canonical-image", statue.id,
          "canonical image '" + statue.canonical_image + "' is not a member");
    }
  }
  std::vector<std::string> shared;
  for (const auto& [image_id, holders] : owners) {
    if (holders.size() > 1) {
      shared.push_back(image_id);
    }
  }
  std::sort(shared.begin(), shared.end());
  for (const auto& image_id : shared) {
    std::string names;
    for (const auto& s : owners[image_id]) {
      names += (names.empty() ? "" : ", ") + s;
    }
    add("partition", image_id, "image listed by several statues: " + names);
  }

  for (const auto& image : images) {
    if (image.statue_id && !statue_ids.contains(*image.statue_id)) {
      add("unknown-statue", image.id, "statue '" + *image.statue_id + "' does not exist");
      continue;
    }
    const auto it = owners.find(image.id);
    const bool listed_once = it != owners.end() && it->second.size() == 1;
    if (image.statue_id && listed_once && it->second.front() != *image.statue_id) {
      add("statue-mismatch", image.id,
          "assigned to '" + *image.statue_id + "' but listed by '" + it->second.front() + "'");
    } else if (image.statue_id && it == owners.end()) {
      add("statue-mismatch", image.id,
          "assigned to '" + *image.statue_id + "' which does not list it");
    }
  }
  return report;
}

}  // namespace statuary
