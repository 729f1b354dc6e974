#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace statuary {

/// (field, value) seed for a follow-up search.
struct Facet {
  std::string field;
  std::string value;

  friend auto operator==(const Facet&, const Facet&) -> bool = default;
};

/// One ranked hit. Ranks start at 1; scores never increase with rank and
/// equal scores are ordered by ascending id.
struct QueryResult {
  std::string id;
  double score = 0.0;
  std::size_t rank = 0;
  std::vector<Facet> facets;
};

struct ScoredId {
  std::string id;
  double score;
};

/// Orders by (score desc, id asc) and keeps ranks [offset, offset + k).
[[nodiscard]] auto rank_page(std::vector<ScoredId> scored, std::size_t k, std::size_t offset = 0)
    -> std::vector<QueryResult>;

}  // namespace statuary
