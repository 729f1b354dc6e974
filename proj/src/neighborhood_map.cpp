#include "statuary/neighborhood_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include <Eigen/Dense>

#include "statuary/errors.hpp"
#include "statuary/manifest.hpp"
#include "statuary/neighbors.hpp"
#include "statuary/rng.hpp"
#include "statuary/similarity.hpp"

namespace statuary {

namespace {

// Low-dimensional similarity curve 1 / (1 + a d^(2b)), fitted for a minimum
// distance of 0.1 at unit spread.
constexpr double kCurveA = 1.577;
constexpr double kCurveB = 0.8951;
constexpr double kClip = 4.0;
constexpr double kInitExtent = 10.0;
constexpr std::size_t kPowerIterations = 300;
constexpr std::size_t kNegativeRetries = 8;

struct Edge {
  std::size_t u;
  std::size_t v;
  double weight;
};

auto clip(double x) -> double { return std::clamp(x, -kClip, kClip); }

auto principal_axis(const Eigen::MatrixXd& x, const Eigen::VectorXd* orthogonal_to, SplitMix64& rng)
    -> Eigen::VectorXd {
  Eigen::VectorXd v(x.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v(i) = 2.0 * rng.uniform() - 1.0;
  }
  auto deflate = [&](Eigen::VectorXd& w) {
    if (orthogonal_to != nullptr) {
      w -= orthogonal_to->dot(w) * *orthogonal_to;
    }
  };
  deflate(v);
  if (v.norm() == 0.0) {
    return Eigen::VectorXd::Zero(x.cols());
  }
  v.normalize();
  for (std::size_t it = 0; it < kPowerIterations; ++it) {
    Eigen::VectorXd w = x.transpose() * (x * v);
    deflate(w);
    const double norm = w.norm();
    if (norm == 0.0 || !std::isfinite(norm)) {
      return Eigen::VectorXd::Zero(x.cols());
    }
    w /= norm;
    const double change = (w - v).norm();
    v = std::move(w);
    if (change < 1e-12) {
      break;
    }
  }
  // Fix the sign: largest-magnitude component positive.
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0) {
    v = -v;
  }
  return v;
}

auto pca_init(const RowMatrix& rows, SplitMix64& rng) -> std::vector<Point2> {
  const Eigen::MatrixXd x0 = rows.cast<double>();
  const Eigen::RowVectorXd mean = x0.colwise().mean();
  const Eigen::MatrixXd x = x0.rowwise() - mean;
  const Eigen::VectorXd first = principal_axis(x, nullptr, rng);
  const Eigen::VectorXd second = principal_axis(x, &first, rng);
  const Eigen::VectorXd p1 = x * first;
  const Eigen::VectorXd p2 = x * second;
  const double extent = std::max(p1.cwiseAbs().maxCoeff(), p2.cwiseAbs().maxCoeff());
  const double scale = extent > 0.0 ? kInitExtent / extent : 0.0;
  std::vector<Point2> coords(static_cast<std::size_t>(rows.rows()));
  for (std::size_t i = 0; i < coords.size(); ++i) {
    coords[i] = {p1(static_cast<Eigen::Index>(i)) * scale, p2(static_cast<Eigen::Index>(i)) * scale};
  }
  return coords;
}

auto neighbor_edges(const RowMatrix& rows, std::size_t k) -> std::vector<Edge> {
  const auto knn = all_pairs_knn(rows, k, [](std::size_t a, std::size_t b) { return a < b; });
  std::map<std::pair<std::size_t, std::size_t>, std::pair<double, double>> directed;
  for (std::size_t u = 0; u < knn.size(); ++u) {
    std::vector<double> dist;
    dist.reserve(knn[u].size());
    for (const auto& nb : knn[u]) {
      dist.push_back(std::sqrt(squared_distance(rows.row(static_cast<Eigen::Index>(u)),
                                                rows.row(static_cast<Eigen::Index>(nb.row)))));
    }
    const double sigma =
        dist.empty() ? 0.0 : std::accumulate(dist.begin(), dist.end(), 0.0) / static_cast<double>(dist.size());
    for (std::size_t i = 0; i < knn[u].size(); ++i) {
      const double w = sigma > 0.0 ? std::exp(-(dist[i] * dist[i]) / (sigma * sigma)) : 1.0;
      const auto v = knn[u][i].row;
      if (u < v) {
        directed[{u, v}].first = w;
      } else {
        directed[{v, u}].second = w;
      }
    }
  }
  std::vector<Edge> edges;
  edges.reserve(directed.size());
  for (const auto& [key, w] : directed) {
    edges.push_back({key.first, key.second, w.first + w.second - w.first * w.second});
  }
  return edges;
}

}  // namespace

auto build_map(const VectorStore& vectors, const MapParams& params) -> MapLayout {
  const std::size_t n = vectors.count();
  if (n == 0) {
    throw EmptyInputError("cannot build a map of zero vectors");
  }
  if (params.k_neighbors == 0) {
    throw ParameterError("k_neighbors must be at least 1");
  }
  if (!(params.learning_rate > 0.0) || !std::isfinite(params.learning_rate)) {
    throw ParameterError("learning_rate must be positive");
  }
  MapLayout layout{vectors.ids(), {}, params, "pca"};
  if (n == 1) {
    layout.coords = {{0.0, 0.0}};
    return layout;
  }

  SplitMix64 rng(params.seed);
  const std::size_t k = std::min(params.k_neighbors, n - 1);
  const auto edges = neighbor_edges(vectors.matrix(), k);
  std::vector<std::unordered_set<std::size_t>> adjacent(n);
  for (const auto& e : edges) {
    adjacent[e.u].insert(e.v);
    adjacent[e.v].insert(e.u);
  }

  auto& y = layout.coords;
  y = pca_init(vectors.matrix(), rng);

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    const double alpha =
        params.learning_rate * (1.0 - static_cast<double>(epoch) / static_cast<double>(params.epochs));
    for (const auto& e : edges) {
      if (rng.uniform() >= e.weight) {
        continue;
      }
      auto& yi = y[e.u];
      auto& yj = y[e.v];
      const double dx = yi[0] - yj[0];
      const double dy = yi[1] - yj[1];
      const double d2 = dx * dx + dy * dy;
      if (d2 > 0.0) {
        const double coeff = (-2.0 * kCurveA * kCurveB * std::pow(d2, kCurveB - 1.0)) /
                             (1.0 + kCurveA * std::pow(d2, kCurveB));
        const double gx = clip(coeff * dx);
        const double gy = clip(coeff * dy);
        yi[0] += alpha * gx;
        yi[1] += alpha * gy;
        yj[0] -= alpha * gx;
        yj[1] -= alpha * gy;
      }
      for (std::size_t s = 0; s < params.negative_samples; ++s) {
        std::size_t other = n;
        for (std::size_t attempt = 0; attempt < kNegativeRetries; ++attempt) {
          const auto pick = static_cast<std::size_t>(rng.below(n));
          if (pick != e.u && !adjacent[e.u].contains(pick)) {
            other = pick;
            break;
          }
        }
        if (other == n) {
          continue;
        }
        const auto& yk = y[other];
        const double rx = yi[0] - yk[0];
        const double ry = yi[1] - yk[1];
        const double r2 = rx * rx + ry * ry;
        if (r2 > 0.0) {
          const double coeff = (2.0 * kCurveB) / ((0.001 + r2) * (1.0 + kCurveA * std::pow(r2, kCurveB)));
          yi[0] += alpha * clip(coeff * rx);
          yi[1] += alpha * clip(coeff * ry);
        } else {
          yi[0] += alpha * kClip;
          yi[1] += alpha * kClip;
        }
      }
    }
  }
  return layout;
}

auto random_layout(std::vector<std::string> ids, std::uint64_t seed) -> MapLayout {
  SplitMix64 rng(seed);
  MapLayout layout;
  layout.coords.resize(ids.size());
  for (auto& p : layout.coords) {
    p = {20.0 * rng.uniform() - 10.0, 20.0 * rng.uniform() - 10.0};
  }
  layout.ids = std::move(ids);
  layout.params.seed = seed;
  layout.params.epochs = 0;
  layout.init = "random";
  return layout;
}

namespace {

// Neighbor order of every point, nearest first, ties by index; self excluded.
template <typename Dist>
auto rank_tables(std::size_t n, Dist dist) -> std::vector<std::vector<std::size_t>> {
  std::vector<std::vector<std::size_t>> order(n);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      d[j] = dist(i, j);
    }
    auto& o = order[i];
    o.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) {
        o.push_back(j);
      }
    }
    std::sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) {
      return d[a] != d[b] ? d[a] < d[b] : a < b;
    });
  }
  return order;
}

}  // namespace

auto trustworthiness(const RowMatrix& high_d, std::span<const Point2> low_d, std::size_t k) -> double {
  const std::size_t n = static_cast<std::size_t>(high_d.rows());
  if (low_d.size() != n) {
    throw ParameterError("layout has " + std::to_string(low_d.size()) + " points for " +
                         std::to_string(n) + " vectors");
  }
  if (k == 0 || k >= n) {
    throw ParameterError("trustworthiness needs 1 <= k < n");
  }
  const double norm_term = 2.0 * static_cast<double>(n) - 3.0 * static_cast<double>(k) - 1.0;
  if (norm_term <= 0.0) {
    throw ParameterError("trustworthiness needs 2n - 3k - 1 > 0");
  }
  const auto high = rank_tables(n, [&](std::size_t i, std::size_t j) {
    return squared_distance(high_d.row(static_cast<Eigen::Index>(i)), high_d.row(static_cast<Eigen::Index>(j)));
  });
  const auto low = rank_tables(n, [&](std::size_t i, std::size_t j) {
    const double dx = low_d[i][0] - low_d[j][0];
    const double dy = low_d[i][1] - low_d[j][1];
    return dx * dx + dy * dy;
  });
  double penalty = 0.0;
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < high[i].size(); ++r) {
      rank[high[i][r]] = r + 1;
    }
    for (std::size_t r = 0; r < k; ++r) {
      const auto j = low[i][r];
      if (rank[j] > k) {
        penalty += static_cast<double>(rank[j] - k);
      }
    }
  }
  return 1.0 - 2.0 / (static_cast<double>(n) * static_cast<double>(k) * norm_term) * penalty;
}

auto trustworthiness(const VectorStore& high_d, const MapLayout& layout, std::size_t k) -> double {
  if (high_d.ids() != layout.ids) {
    throw ParameterError("layout ids do not match the vectors");
  }
  return trustworthiness(high_d.matrix(), layout.coords, k);
}

void write_layout(const MapLayout& layout, std::ostream& out) {
  JsonLinesWriter writer(out);
  for (std::size_t i = 0; i < layout.ids.size(); ++i) {
    writer.write({{"id", layout.ids[i]}, {"x", layout.coords[i][0]}, {"y", layout.coords[i][1]}});
  }
}

void write_layout(const MapLayout& layout, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) {
    throw Error("cannot open '" + file.string() + "' for writing");
  }
  write_layout(layout, out);
}

}  // namespace statuary
