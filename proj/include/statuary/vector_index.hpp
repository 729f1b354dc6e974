#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "statuary/archive.hpp"
#include "statuary/query.hpp"

namespace statuary {

/// Exact scan over a store. Holds a reference; the store must outlive it.
class FlatIndex {
public:
  explicit FlatIndex(const VectorStore& store) : store_(&store) {}

  [[nodiscard]] auto store() const -> const VectorStore& { return *store_; }

private:
  const VectorStore* store_;
};

/// The k rows with the highest cosine to `query`, ties by ascending id.
/// Throws DimensionError on a dimension mismatch, ParameterError when k is 0.
[[nodiscard]] auto knn_exact(const FlatIndex& flat, const Vector& query, std::size_t k)
    -> std::vector<QueryResult>;

/// knn_exact restricted to rows whose id satisfies `keep`.
[[nodiscard]] auto filtered_knn(const FlatIndex& flat, const Vector& query, std::size_t k,
                                const std::function<bool(const std::string&)>& keep)
    -> std::vector<QueryResult>;

struct ProximityGraphParams {
  std::size_t M = 16;
  std::size_t ef_construction = 200;
  std::size_t ef_search = 64;
  std::uint64_t seed = 42;
};

/// Layered navigable proximity graph for approximate cosine search.
///
/// Each node draws a top layer from a geometric distribution (factor 1/ln M).
/// Insertion descends greedily through the upper layers, then runs a beam
/// search of width ef_construction on each of its layers and keeps at most M
/// diverse neighbors (2M on the base layer). After construction every node is
/// made reachable from the entry point on the base layer.
///
/// Immutable after build; searches may run concurrently.
class ProximityGraphIndex {
public:
  [[nodiscard]] static auto build(std::shared_ptr<const VectorStore> store,
                                  const ProximityGraphParams& params = {}) -> ProximityGraphIndex;

  /// Throws ParameterError when ef_search < k, DimensionError on mismatch.
  [[nodiscard]] auto search(const Vector& query, std::size_t k, std::size_t ef_search) const
      -> std::vector<QueryResult>;
  [[nodiscard]] auto search(const Vector& query, std::size_t k) const -> std::vector<QueryResult> {
    return search(query, k, params_.ef_search);
  }

  [[nodiscard]] auto store() const -> const VectorStore& { return *store_; }
  [[nodiscard]] auto params() const -> const ProximityGraphParams& { return params_; }
  [[nodiscard]] auto size() const -> std::size_t { return levels_.size(); }
  [[nodiscard]] auto entry_point() const -> std::size_t { return entry_; }
  [[nodiscard]] auto max_level() const -> std::size_t { return max_level_; }
  [[nodiscard]] auto level_of(std::size_t node) const -> std::size_t { return levels_[node]; }
  [[nodiscard]] auto neighbors(std::size_t node, std::size_t level) const
      -> std::span<const std::uint32_t>;
  /// Nodes reachable from the entry point along base-layer links.
  [[nodiscard]] auto base_reachable_count() const -> std::size_t;

private:
  explicit ProximityGraphIndex(std::shared_ptr<const VectorStore> store, ProximityGraphParams params);

  struct Candidate {
    float distance;
    std::uint32_t node;
  };

  [[nodiscard]] auto distance(const float* query, std::uint32_t node) const -> float;
  [[nodiscard]] auto search_layer(const float* query, std::span<const std::uint32_t> entries,
                                  std::size_t ef, std::size_t level,
                                  std::vector<std::uint32_t>& visited, std::uint32_t& epoch) const
      -> std::vector<Candidate>;
  [[nodiscard]] auto select_diverse(std::vector<Candidate> candidates, std::size_t limit) const
      -> std::vector<std::uint32_t>;
  void insert(std::uint32_t node, std::size_t level, std::vector<std::uint32_t>& visited,
              std::uint32_t& epoch);
  void link_back(std::uint32_t from, std::uint32_t to, std::size_t level);
  void repair_reachability();
  [[nodiscard]] auto capacity(std::size_t level) const -> std::size_t;

  std::shared_ptr<const VectorStore> store_;
  ProximityGraphParams params_;
  std::vector<std::size_t> levels_;
  // links_[node][level] -> neighbor ids
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;
  std::size_t entry_ = 0;
  std::size_t max_level_ = 0;
};

[[nodiscard]] auto build_ann(std::shared_ptr<const VectorStore> store,
                             const ProximityGraphParams& params = {}) -> ProximityGraphIndex;
[[nodiscard]] auto knn_ann(const ProximityGraphIndex& index, const Vector& query, std::size_t k,
                           std::size_t ef_search) -> std::vector<QueryResult>;

}  // namespace statuary
