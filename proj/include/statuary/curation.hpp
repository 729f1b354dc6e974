#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "statuary/archive.hpp"

namespace statuary {

/// Curation knobs. Thresholds are cosine similarities in (0, 1].
struct CurationThresholds {
  double duplicate = 0.97;
  double chain = 0.60;
  double link = 0.75;
  std::size_t k = 5;

  /// Throws ParameterError when a threshold is outside (0, 1] or k is 0.
  void validate() const;
};

/// Two near-identical pictures; image_a < image_b.
struct DuplicatePair {
  std::string image_a;
  std::string image_b;
  double similarity;

  friend auto operator==(const DuplicatePair&, const DuplicatePair&) -> bool = default;
};

/// All row pairs with cosine >= threshold, sorted by (image_a, image_b).
[[nodiscard]] auto pairwise_near_duplicates(const VectorStore& store, double threshold)
    -> std::vector<DuplicatePair>;

struct DedupResult {
  // Sorted ascending.
  std::vector<std::string> survivors;
  // Non-survivor -> survivor of its group.
  std::map<std::string, std::string> duplicate_of;
  // Survivor -> every member of its group, itself included, sorted.
  std::map<std::string, std::vector<std::string>> groups;
};

/// Keeps the smallest id of each connected group of duplicate pairs.
[[nodiscard]] auto dedup_select(std::span<const DuplicatePair> pairs,
                                std::span<const std::string> image_ids) -> DedupResult;

using Chain = std::vector<std::string>;

struct ChainResult {
  std::vector<Chain> chains;
  // Images ordered without a timestamp, sorted by id.
  std::vector<std::string> untimed;
};

/// Splits one folder into runs of consecutive similar pictures.
///
/// Pictures are ordered by (timestamp, id); pictures without a timestamp go
/// after the timestamped ones, ordered by id. A new chain starts whenever the
/// cosine between consecutive pictures drops below `threshold`.
/// Throws ParameterError if the images span folders or lack a global_row.
[[nodiscard]] auto build_chains(std::span<const ArchiveImage> folder_images,
                                const VectorStore& store, double threshold) -> ChainResult;

enum class EdgeKind : std::uint8_t { chain, knn };

struct IdentityEdge {
  std::string a;  // a < b
  std::string b;
  double weight;
  EdgeKind kind;
};

struct IdentityGraph {
  std::vector<std::string> nodes;  // sorted
  std::vector<IdentityEdge> edges;  // sorted by (a, b)
};

/// Chain edges between consecutive members plus edges from each picture to its
/// k exact nearest pictures whenever their cosine reaches `link_threshold`.
/// Store row ids must be the picture ids.
[[nodiscard]] auto build_identity_graph(std::span<const Chain> chains, const VectorStore& store,
                                        std::size_t k, double link_threshold) -> IdentityGraph;

struct StatueCluster {
  std::string id;
  std::vector<std::string> members;  // sorted

  friend auto operator==(const StatueCluster&, const StatueCluster&) -> bool = default;
};

[[nodiscard]] auto statue_id_for(const std::string& smallest_member) -> std::string;

/// Connected components, each named "statue:" + its smallest member; sorted by id.
[[nodiscard]] auto connected_components(const IdentityGraph& graph) -> std::vector<StatueCluster>;

struct MergeOp {
  std::string into;
  std::string from;
};
struct SplitOp {
  std::string statue;
  std::vector<std::vector<std::string>> parts;
};
struct ReassignOp {
  std::string image;
  std::string statue;
};

struct OverrideOp {
  std::variant<MergeOp, SplitOp, ReassignOp> op;
  std::size_t line = 0;
};

/// Manual corrections applied on top of the computed statue partition.
///
/// Text form, one command per line, '#' comments:
///   merge <s1> <s2>
///   split <s> <id,id|id,...>
///   reassign <image> <s>
struct OverrideScript {
  std::vector<OverrideOp> ops;

  [[nodiscard]] static auto parse(std::istream& in) -> OverrideScript;
  [[nodiscard]] static auto load(const std::filesystem::path& file) -> OverrideScript;
};

/// Applies the script in order. A split keeps the original id for its first
/// part; later parts are named after their smallest member. Throws
/// OverrideError naming the offending line.
[[nodiscard]] auto apply_overrides(std::vector<StatueCluster> clusters, const OverrideScript& script)
    -> std::vector<StatueCluster>;

struct FilteredRegistry {
  std::vector<StatueRecord> statues;
  std::size_t picture_count = 0;
};

/// Statues with at least `min_pictures` images.
[[nodiscard]] auto filter_statues(std::span<const StatueRecord> statues, std::size_t min_pictures)
    -> FilteredRegistry;

}  // namespace statuary
