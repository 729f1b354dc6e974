#include "statuary/vector_index.hpp"

#include "statuary/errors.hpp"
#include "statuary/similarity.hpp"

namespace statuary {

namespace {

void check_query(const VectorStore& store, const Vector& query, std::size_t k) {
  if (static_cast<std::size_t>(query.size()) != store.dim()) {
    throw DimensionError("query has dimension " + std::to_string(query.size()) + ", store has " +
                         std::to_string(store.dim()));
  }
  if (k == 0) {
    throw ParameterError("k must be at least 1");
  }
}

}  // namespace

auto knn_exact(const FlatIndex& flat, const Vector& query, std::size_t k)
    -> std::vector<QueryResult> {
  return filtered_knn(flat, query, k, {});
}

auto filtered_knn(const FlatIndex& flat, const Vector& query, std::size_t k,
                  const std::function<bool(const std::string&)>& keep) -> std::vector<QueryResult> {
  const auto& store = flat.store();
  check_query(store, query, k);
  std::vector<ScoredId> scored;
  scored.reserve(store.count());
  for (std::size_t r = 0; r < store.count(); ++r) {
    if (keep && !keep(store.id(r))) {
      continue;
    }
    scored.push_back({store.id(r), dot_accumulate(store.row(r), query)});
  }
  return rank_page(std::move(scored), k);
}

}  // namespace statuary
