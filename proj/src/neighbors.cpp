#include "statuary/neighbors.hpp"

#include <algorithm>
#include <cfloat>

#include "statuary/similarity.hpp"

namespace statuary {

namespace {

constexpr Eigen::Index kBlockRows = 256;

// Bound on |float product - double product| for vectors of norm <= 1.
auto screening_margin(Eigen::Index dim) -> double {
  return 1e-6 + 4.0 * static_cast<double>(dim) * FLT_EPSILON;
}

}  // namespace

auto all_pairs_knn(const RowMatrix& rows, std::size_t k,
                   const std::function<bool(std::size_t, std::size_t)>& less_id)
    -> std::vector<std::vector<Neighbor>> {
  const auto n = rows.rows();
  std::vector<std::vector<Neighbor>> out(static_cast<std::size_t>(n));
  if (n == 0 || k == 0) {
    return out;
  }
  const double margin = screening_margin(rows.cols());
  std::vector<float> scratch;
  for (Eigen::Index start = 0; start < n; start += kBlockRows) {
    const Eigen::Index len = std::min(kBlockRows, n - start);
    const Eigen::MatrixXf block = rows.middleRows(start, len) * rows.transpose();
    for (Eigen::Index bi = 0; bi < len; ++bi) {
      const Eigen::Index i = start + bi;
      std::vector<std::size_t> candidates;
      if (static_cast<std::size_t>(n - 1) <= k) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j != i) {
            candidates.push_back(static_cast<std::size_t>(j));
          }
        }
      } else {
        scratch.clear();
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j != i) {
            scratch.push_back(block(bi, j));
          }
        }
        std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1),
                         scratch.end(), std::greater<>());
        const double cutoff = static_cast<double>(scratch[k - 1]) - margin;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j != i && static_cast<double>(block(bi, j)) >= cutoff) {
            candidates.push_back(static_cast<std::size_t>(j));
          }
        }
      }
      auto& neighbors = out[static_cast<std::size_t>(i)];
      neighbors.reserve(candidates.size());
      for (const auto j : candidates) {
        neighbors.push_back({j, dot_accumulate(rows.row(i), rows.row(static_cast<Eigen::Index>(j)))});
      }
      std::sort(neighbors.begin(), neighbors.end(), [&](const Neighbor& a, const Neighbor& b) {
        return a.score != b.score ? a.score > b.score : less_id(a.row, b.row);
      });
      if (neighbors.size() > k) {
        neighbors.resize(k);
      }
    }
  }
  return out;
}

auto pairs_above(const RowMatrix& rows, double threshold)
    -> std::vector<std::pair<std::size_t, std::size_t>> {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const auto n = rows.rows();
  const double cutoff = threshold - screening_margin(rows.cols());
  for (Eigen::Index start = 0; start < n; start += kBlockRows) {
    const Eigen::Index len = std::min(kBlockRows, n - start);
    const Eigen::MatrixXf block = rows.middleRows(start, len) * rows.transpose();
    for (Eigen::Index bi = 0; bi < len; ++bi) {
      const Eigen::Index i = start + bi;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (static_cast<double>(block(bi, j)) >= cutoff &&
            dot_accumulate(rows.row(i), rows.row(j)) >= threshold) {
          out.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        }
      }
    }
  }
  return out;
}

}  // namespace statuary
