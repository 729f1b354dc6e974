#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>

#include "statuary/errors.hpp"
#include "statuary/rng.hpp"
#include "statuary/similarity.hpp"
#include "statuary/vector_index.hpp"

namespace statuary {

namespace {

struct Closer {
  template <typename C>
  auto operator()(const C& a, const C& b) const -> bool {
    return a.distance != b.distance ? a.distance > b.distance : a.node > b.node;
  }
};

struct Farther {
  template <typename C>
  auto operator()(const C& a, const C& b) const -> bool {
    return a.distance != b.distance ? a.distance < b.distance : a.node < b.node;
  }
};

}  // namespace

ProximityGraphIndex::ProximityGraphIndex(std::shared_ptr<const VectorStore> store,
                                         ProximityGraphParams params)
    : store_(std::move(store)), params_(params) {}

auto ProximityGraphIndex::capacity(std::size_t level) const -> std::size_t {
  return level == 0 ? 2 * params_.M : params_.M;
}

auto ProximityGraphIndex::distance(const float* query, std::uint32_t node) const -> float {
  const Eigen::Map<const Eigen::RowVectorXf> q(query, static_cast<Eigen::Index>(store_->dim()));
  return 1.0F - store_->matrix().row(node).dot(q);
}

auto ProximityGraphIndex::neighbors(std::size_t node, std::size_t level) const
    -> std::span<const std::uint32_t> {
  if (level > levels_[node]) {
    return {};
  }
  return links_[node][level];
}

auto ProximityGraphIndex::search_layer(const float* query, std::span<const std::uint32_t> entries,
                                       std::size_t ef, std::size_t level,
                                       std::vector<std::uint32_t>& visited,
                                       std::uint32_t& epoch) const -> std::vector<Candidate> {
  if (++epoch == 0) {
    std::fill(visited.begin(), visited.end(), 0);
    epoch = 1;
  }
  std::priority_queue<Candidate, std::vector<Candidate>, Closer> frontier;
  std::priority_queue<Candidate, std::vector<Candidate>, Farther> best;
  for (const auto e : entries) {
    if (visited[e] == epoch) {
      continue;
    }
    visited[e] = epoch;
    const Candidate c{distance(query, e), e};
    frontier.push(c);
    best.push(c);
    if (best.size() > ef) {
      best.pop();
    }
  }
  while (!frontier.empty()) {
    const auto current = frontier.top();
    if (best.size() >= ef && current.distance > best.top().distance) {
      break;
    }
    frontier.pop();
    for (const auto nb : links_[current.node][level]) {
      if (visited[nb] == epoch) {
        continue;
      }
      visited[nb] = epoch;
      const float d = distance(query, nb);
      if (best.size() < ef || d < best.top().distance) {
        frontier.push({d, nb});
        best.push({d, nb});
        if (best.size() > ef) {
          best.pop();
        }
      }
    }
  }
  std::vector<Candidate> out;
  out.reserve(best.size());
  while (!best.empty()) {
    out.push_back(best.top());
    best.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

auto ProximityGraphIndex::select_diverse(std::vector<Candidate> candidates, std::size_t limit) const
    -> std::vector<std::uint32_t> {
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.node < b.node;
  });
  std::vector<std::uint32_t> kept;
  kept.reserve(limit);
  for (const auto& c : candidates) {
    if (kept.size() >= limit) {
      break;
    }
    const float* row = store_->matrix().row(c.node).data();
    const bool diverse = std::all_of(kept.begin(), kept.end(), [&](std::uint32_t r) {
      return distance(row, r) >= c.distance;
    });
    if (diverse) {
      kept.push_back(c.node);
    }
  }
  return kept;
}

void ProximityGraphIndex::link_back(std::uint32_t from, std::uint32_t to, std::size_t level) {
  auto& list = links_[from][level];
  if (std::find(list.begin(), list.end(), to) != list.end()) {
    return;
  }
  if (list.size() < capacity(level)) {
    list.push_back(to);
    return;
  }
  const float* row = store_->matrix().row(from).data();
  std::vector<Candidate> candidates;
  candidates.reserve(list.size() + 1);
  for (const auto nb : list) {
    candidates.push_back({distance(row, nb), nb});
  }
  candidates.push_back({distance(row, to), to});
  list = select_diverse(std::move(candidates), capacity(level));
}

void ProximityGraphIndex::insert(std::uint32_t node, std::size_t level,
                                 std::vector<std::uint32_t>& visited, std::uint32_t& epoch) {
  links_[node].resize(level + 1);
  if (node == 0) {
    entry_ = 0;
    max_level_ = level;
    return;
  }
  const float* query = store_->matrix().row(node).data();
  auto ep = static_cast<std::uint32_t>(entry_);
  float ep_dist = distance(query, ep);
  for (std::size_t lc = max_level_; lc > level; --lc) {
    for (bool moved = true; moved;) {
      moved = false;
      for (const auto nb : links_[ep][lc]) {
        const float d = distance(query, nb);
        if (d < ep_dist || (d == ep_dist && nb < ep)) {
          ep = nb;
          ep_dist = d;
          moved = true;
        }
      }
    }
  }
  std::vector<std::uint32_t> entries{ep};
  for (std::size_t lc = std::min(level, max_level_) + 1; lc-- > 0;) {
    auto found = search_layer(query, entries, params_.ef_construction, lc, visited, epoch);
    entries.clear();
    for (const auto& c : found) {
      entries.push_back(c.node);
    }
    links_[node][lc] = select_diverse(std::move(found), params_.M);
    for (const auto nb : links_[node][lc]) {
      link_back(nb, node, lc);
    }
  }
  if (level > max_level_) {
    entry_ = node;
    max_level_ = level;
  }
}

void ProximityGraphIndex::repair_reachability() {
  const std::size_t n = levels_.size();
  std::vector<char> reached(n, 0);
  auto flood = [&](std::size_t start) {
    std::vector<std::size_t> stack{start};
    reached[start] = 1;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (const auto v : links_[u][0]) {
        if (!reached[v]) {
          reached[v] = 1;
          stack.push_back(v);
        }
      }
    }
  };
  flood(entry_);

  std::vector<std::uint32_t> visited(n, 0);
  std::uint32_t epoch = 0;
  for (std::size_t u = 0; u < n; ++u) {
    if (reached[u]) {
      continue;
    }
    const float* query = store_->matrix().row(u).data();
    const std::uint32_t entry = static_cast<std::uint32_t>(entry_);
    auto found = search_layer(query, std::span(&entry, 1), params_.ef_construction, 0, visited, epoch);
    std::optional<std::uint32_t> anchor;
    for (const auto& c : found) {
      if (links_[c.node][0].size() < capacity(0)) {
        anchor = c.node;
        break;
      }
    }
    if (!anchor) {
      // Every nearby node is full; take the closest reachable node with room.
      float best = std::numeric_limits<float>::infinity();
      for (std::size_t v = 0; v < n; ++v) {
        if (reached[v] && links_[v][0].size() < capacity(0)) {
          const float d = distance(query, static_cast<std::uint32_t>(v));
          if (d < best) {
            best = d;
            anchor = static_cast<std::uint32_t>(v);
          }
        }
      }
    }
    if (!anchor) {
      throw Error("proximity graph: no reachable node has spare base-layer capacity");
    }
    links_[*anchor][0].push_back(static_cast<std::uint32_t>(u));
    auto& own = links_[u][0];
    if (own.size() < capacity(0) && std::find(own.begin(), own.end(), *anchor) == own.end()) {
      own.push_back(*anchor);
    }
    flood(u);
  }
}

auto ProximityGraphIndex::base_reachable_count() const -> std::size_t {
  const std::size_t n = levels_.size();
  if (n == 0) {
    return 0;
  }
  std::vector<char> reached(n, 0);
  std::vector<std::size_t> stack{entry_};
  reached[entry_] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (const auto v : links_[u][0]) {
      if (!reached[v]) {
        reached[v] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count;
}

auto ProximityGraphIndex::build(std::shared_ptr<const VectorStore> store,
                                const ProximityGraphParams& params) -> ProximityGraphIndex {
  if (!store) {
    throw ParameterError("proximity graph needs a store");
  }
  if (params.M < 2) {
    throw ParameterError("M must be at least 2");
  }
  if (params.ef_construction < 1) {
    throw ParameterError("ef_construction must be at least 1");
  }
  if (store->count() > std::numeric_limits<std::uint32_t>::max()) {
    throw ParameterError("store too large for a proximity graph");
  }
  ProximityGraphIndex index(std::move(store), params);
  const std::size_t n = index.store_->count();
  SplitMix64 rng(params.seed);
  const double level_scale = 1.0 / std::log(static_cast<double>(params.M));
  index.levels_.resize(n);
  for (auto& level : index.levels_) {
    level = static_cast<std::size_t>(std::floor(-std::log(rng.uniform_open_closed()) * level_scale));
  }
  index.links_.resize(n);
  std::vector<std::uint32_t> visited(n, 0);
  std::uint32_t epoch = 0;
  for (std::size_t i = 0; i < n; ++i) {
    index.insert(static_cast<std::uint32_t>(i), index.levels_[i], visited, epoch);
  }
  if (n > 0) {
    index.repair_reachability();
  }
  return index;
}

auto ProximityGraphIndex::search(const Vector& query, std::size_t k, std::size_t ef_search) const
    -> std::vector<QueryResult> {
  if (static_cast<std::size_t>(query.size()) != store_->dim()) {
    throw DimensionError("query has dimension " + std::to_string(query.size()) + ", store has " +
                         std::to_string(store_->dim()));
  }
  if (k == 0) {
    throw ParameterError("k must be at least 1");
  }
  if (ef_search < k) {
    throw ParameterError("ef_search (" + std::to_string(ef_search) + ") must be at least k (" +
                         std::to_string(k) + ")");
  }
  const std::size_t n = levels_.size();
  if (n == 0) {
    return {};
  }
  const float* q = query.data();
  auto ep = static_cast<std::uint32_t>(entry_);
  float ep_dist = distance(q, ep);
  for (std::size_t lc = max_level_; lc > 0; --lc) {
    for (bool moved = true; moved;) {
      moved = false;
      for (const auto nb : links_[ep][lc]) {
        const float d = distance(q, nb);
        if (d < ep_dist || (d == ep_dist && nb < ep)) {
          ep = nb;
          ep_dist = d;
          moved = true;
        }
      }
    }
  }
  std::vector<std::uint32_t> visited(n, 0);
  std::uint32_t epoch = 0;
  const auto found = search_layer(q, std::span(&ep, 1), ef_search, 0, visited, epoch);
  std::vector<ScoredId> scored;
  scored.reserve(found.size());
  for (const auto& c : found) {
    scored.push_back({store_->id(c.node), dot_accumulate(store_->row(c.node), query)});
  }
  return rank_page(std::move(scored), k);
}

auto build_ann(std::shared_ptr<const VectorStore> store, const ProximityGraphParams& params)
    -> ProximityGraphIndex {
  return ProximityGraphIndex::build(std::move(store), params);
}

auto knn_ann(const ProximityGraphIndex& index, const Vector& query, std::size_t k,
             std::size_t ef_search) -> std::vector<QueryResult> {
  return index.search(query, k, ef_search);
}

}  // namespace statuary
