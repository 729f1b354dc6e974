#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "statuary/archive.hpp"

namespace statuary {

struct Neighbor {
  std::size_t row;
  double score;
};

/// Exact k nearest neighbors (by cosine) of every row among the other rows.
///
/// Candidates are screened with a blocked float product and then rescored
/// with `dot_accumulate`, so results equal a full double-precision scan.
/// Ties are broken by `less_id(row_a, row_b)`.
[[nodiscard]] auto all_pairs_knn(const RowMatrix& rows, std::size_t k,
                                 const std::function<bool(std::size_t, std::size_t)>& less_id)
    -> std::vector<std::vector<Neighbor>>;

/// Every unordered pair (i < j) whose exact cosine is at least `threshold`.
[[nodiscard]] auto pairs_above(const RowMatrix& rows, double threshold)
    -> std::vector<std::pair<std::size_t, std::size_t>>;

}  // namespace statuary
