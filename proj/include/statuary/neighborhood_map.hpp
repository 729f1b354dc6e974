#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "statuary/archive.hpp"

namespace statuary {

struct MapParams {
  std::size_t k_neighbors = 15;
  std::size_t epochs = 200;
  std::size_t negative_samples = 5;
  double learning_rate = 1.0;
  std::uint64_t seed = 42;
};

using Point2 = std::array<double, 2>;

struct MapLayout {
  std::vector<std::string> ids;
  std::vector<Point2> coords;
  MapParams params;
  std::string init = "pca";
};

/// 2D neighbor-embedding of a set of unit vectors.
///
///  1. exact kNN graph (k_neighbors, clipped to n - 1)
///  2. w(u,v) = exp(-d(u,v)^2 / sigma_u^2), sigma_u the mean distance from u to
///     its neighbors; symmetrized as w_uv + w_vu - w_uv * w_vu
///  3. start from the projection on the top two principal components
///     (power iteration), scaled so the largest coordinate magnitude is 10
///  4. each epoch, every edge attracts its endpoints with probability w and
///     each attraction is followed by `negative_samples` repulsions from
///     random non-neighbors; the step decays linearly from learning_rate to 0
///
/// All randomness comes from a splitmix64 stream seeded with params.seed, so
/// identical inputs give bit-identical layouts. A single vector maps to (0, 0).
/// Throws EmptyInputError on an empty store, ParameterError on bad params.
[[nodiscard]] auto build_map(const VectorStore& vectors, const MapParams& params = {}) -> MapLayout;

/// Uniform random layout in [-10, 10)^2; a baseline for layout quality.
[[nodiscard]] auto random_layout(std::vector<std::string> ids, std::uint64_t seed) -> MapLayout;

/// Neighborhood preservation in [0, 1]:
/// T(k) = 1 - 2 / (n k (2n - 3k - 1)) * sum_i sum_{j in U_k(i)} (r(i,j) - k)
/// where U_k(i) holds the 2D k-neighbors of i that are not high-dimensional
/// k-neighbors and r(i,j) is the high-dimensional rank of j from i. Distances
/// are Euclidean, ties broken by row order.
/// Throws ParameterError unless 1 <= k and 2n - 3k - 1 > 0 (so also k < n).
[[nodiscard]] auto trustworthiness(const RowMatrix& high_d, std::span<const Point2> low_d, std::size_t k)
    -> double;
[[nodiscard]] auto trustworthiness(const VectorStore& high_d, const MapLayout& layout, std::size_t k)
    -> double;

/// JSON-lines of {"id", "x", "y"}.
void write_layout(const MapLayout& layout, std::ostream& out);
void write_layout(const MapLayout& layout, const std::filesystem::path& file);

}  // namespace statuary
