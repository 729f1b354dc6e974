#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "statuary/archive.hpp"
#include "statuary/manifest.hpp"
#include "statuary/query.hpp"
#include "statuary/text_index.hpp"

namespace statuary {

/// Text field names a statue document exposes, besides the metadata fields.
inline constexpr std::string_view kPathField = "path";
inline constexpr std::string_view kNotesField = "notes";

struct HybridQuery {
  std::optional<std::string> text;
  // Restricts the text match to one field sub-index.
  std::optional<std::string> text_field;
  std::optional<Vector> vector;
  Namespace ns = Namespace::global;
  // Exact (case-insensitive) metadata equality filters.
  std::vector<std::pair<MetadataField, std::string>> filters;
  std::size_t k = 10;
  std::size_t offset = 0;
};

struct SearchPage {
  std::vector<QueryResult> results;
  // Statues matching before pagination.
  std::size_t total = 0;
};

struct LabelPrediction {
  std::string label;
  double confidence = 0.0;
  std::size_t votes = 0;
};

/// Majority label among the k_vote nearest labeled rows.
///
/// Rows are visited by (cosine desc, id asc); rows for which `label_of`
/// returns nullopt are skipped. confidence = votes / k_vote. On a tie the
/// label of the nearest neighbor carrying one of the tied labels wins.
/// Throws ParameterError on an empty store or k_vote = 0, NoLabelError when
/// no row carries a label.
[[nodiscard]] auto predict_labels(const VectorStore& store, const Vector& query, std::size_t k_vote,
                                  const std::function<std::optional<std::string>(std::size_t row)>& label_of)
    -> LabelPrediction;

/// Immutable, query-ready view of one archive version.
///
/// Statue documents index each metadata field, the member image paths
/// ("path") and free-text notes ("notes").
class SearchEngine {
public:
  SearchEngine(Manifest manifest, std::optional<VectorStore> global, std::optional<VectorStore> face);

  [[nodiscard]] auto statues() const -> const std::vector<StatueRecord>& { return manifest_.statues; }
  [[nodiscard]] auto images() const -> const std::vector<ArchiveImage>& { return manifest_.images; }
  [[nodiscard]] auto manifest() const -> const Manifest& { return manifest_; }
  [[nodiscard]] auto statue(std::string_view id) const -> const StatueRecord*;
  [[nodiscard]] auto image(std::string_view id) const -> const ArchiveImage*;
  [[nodiscard]] auto store(Namespace ns) const -> const VectorStore*;
  [[nodiscard]] auto text_index() const -> const TextIndex& { return text_; }

  /// Statue owning a store row, if any.
  [[nodiscard]] auto statue_of_row(Namespace ns, std::size_t row) const -> const StatueRecord*;
  /// Store rows belonging to a statue, ascending.
  [[nodiscard]] auto rows_of_statue(Namespace ns, std::string_view statue_id) const
      -> std::vector<std::size_t>;

  /// Candidate statues pass the text match (when given) and every filter;
  /// with a vector they are ranked by their best row's cosine in `ns`,
  /// otherwise by text score. Throws QueryError when neither is present.
  [[nodiscard]] auto hybrid_search(const HybridQuery& query) const -> SearchPage;

  /// Facet seeds for a statue: one per populated metadata field.
  [[nodiscard]] auto facets_of(const StatueRecord& statue) const -> std::vector<Facet>;

  /// Label for `field` voted by the nearest faces whose statue has it.
  [[nodiscard]] auto predict_field(const Vector& face_vector, MetadataField field, std::size_t k_vote,
                                   std::string_view exclude_statue = {}) const -> LabelPrediction;

  /// Nearest global-namespace images, excluding the image itself.
  [[nodiscard]] auto image_neighbors(std::string_view image_id, std::size_t k) const
      -> std::vector<QueryResult>;

private:
  [[nodiscard]] auto check_vector(Namespace ns, const Vector& v) const -> const VectorStore&;

  Manifest manifest_;
  std::optional<VectorStore> global_;
  std::optional<VectorStore> face_;
  TextIndex text_;
  std::unordered_map<std::string, std::size_t> statue_pos_;
  std::unordered_map<std::string, std::size_t> image_pos_;
  // row -> statue position, or npos
  std::vector<std::size_t> global_owner_;
  std::vector<std::size_t> face_owner_;
};

}  // namespace statuary
