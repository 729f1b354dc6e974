#include "statuary/curation.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "statuary/errors.hpp"
#include "statuary/neighbors.hpp"
#include "statuary/similarity.hpp"

namespace statuary {

namespace {

class DisjointSets {
public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  auto find(std::size_t x) -> std::size_t {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  // Keeps the smaller index as root.
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) {
      parent_[std::max(a, b)] = std::min(a, b);
    }
  }

private:
  std::vector<std::size_t> parent_;
};

void check_threshold(double value, const char* name) {
  if (!(value > 0.0 && value <= 1.0)) {
    throw ParameterError(std::string(name) + " threshold must be in (0, 1], got " +
                         std::to_string(value));
  }
}

}  // namespace

void CurationThresholds::validate() const {
  check_threshold(duplicate, "duplicate");
  check_threshold(chain, "chain");
  check_threshold(link, "link");
  if (k == 0) {
    throw ParameterError("k must be at least 1");
  }
}

auto pairwise_near_duplicates(const VectorStore& store, double threshold)
    -> std::vector<DuplicatePair> {
  check_threshold(threshold, "duplicate");
  std::vector<DuplicatePair> out;
  for (const auto& [i, j] : pairs_above(store.matrix(), threshold)) {
    const double sim = dot_accumulate(store.row(i), store.row(j));
    const auto& a = store.id(i);
    const auto& b = store.id(j);
    out.push_back(a < b ? DuplicatePair{a, b, sim} : DuplicatePair{b, a, sim});
  }
  std::sort(out.begin(), out.end(), [](const DuplicatePair& x, const DuplicatePair& y) {
    return std::tie(x.image_a, x.image_b) < std::tie(y.image_a, y.image_b);
  });
  return out;
}

auto dedup_select(std::span<const DuplicatePair> pairs, std::span<const std::string> image_ids)
    -> DedupResult {
  std::set<std::string> all(image_ids.begin(), image_ids.end());
  for (const auto& p : pairs) {
    all.insert(p.image_a);
    all.insert(p.image_b);
  }
  // std::set order makes index order equal id order, so roots are group minima.
  const std::vector<std::string> ids(all.begin(), all.end());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    index.emplace(ids[i], i);
  }
  DisjointSets sets(ids.size());
  for (const auto& p : pairs) {
    sets.unite(index.at(p.image_a), index.at(p.image_b));
  }
  DedupResult out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto root = sets.find(i);
    out.groups[ids[root]].push_back(ids[i]);
    if (root == i) {
      out.survivors.push_back(ids[i]);
    } else {
      out.duplicate_of.emplace(ids[i], ids[root]);
    }
  }
  return out;
}

auto build_chains(std::span<const ArchiveImage> folder_images, const VectorStore& store,
                  double threshold) -> ChainResult {
  check_threshold(threshold, "chain");
  ChainResult out;
  if (folder_images.empty()) {
    return out;
  }
  std::vector<const ArchiveImage*> order;
  order.reserve(folder_images.size());
  for (const auto& image : folder_images) {
    if (image.folder_id != folder_images.front().folder_id) {
      throw ParameterError("build_chains given images from folders '" +
                           folder_images.front().folder_id + "' and '" + image.folder_id + "'");
    }
    if (!image.global_row || *image.global_row >= store.count()) {
      throw ParameterError("image '" + image.id + "' has no valid global_row");
    }
    order.push_back(&image);
  }
  std::sort(order.begin(), order.end(), [](const ArchiveImage* a, const ArchiveImage* b) {
    const bool a_untimed = !a->timestamp;
    const bool b_untimed = !b->timestamp;
    if (a_untimed != b_untimed) {
      return b_untimed;
    }
    if (!a_untimed && *a->timestamp != *b->timestamp) {
      return *a->timestamp < *b->timestamp;
    }
    return a->id < b->id;
  });

  out.chains.push_back({order.front()->id});
  for (std::size_t i = 1; i < order.size(); ++i) {
    const double sim =
        dot_accumulate(store.row(*order[i - 1]->global_row), store.row(*order[i]->global_row));
    if (sim < threshold) {
      out.chains.emplace_back();
    }
    out.chains.back().push_back(order[i]->id);
  }
  for (const auto* image : order) {
    if (!image->timestamp) {
      out.untimed.push_back(image->id);
    }
  }
  return out;
}

auto build_identity_graph(std::span<const Chain> chains, const VectorStore& store, std::size_t k,
                          double link_threshold) -> IdentityGraph {
  if (k == 0) {
    throw ParameterError("k must be at least 1");
  }
  check_threshold(link_threshold, "link");

  IdentityGraph graph;
  for (const auto& chain : chains) {
    graph.nodes.insert(graph.nodes.end(), chain.begin(), chain.end());
  }
  std::sort(graph.nodes.begin(), graph.nodes.end());
  if (std::adjacent_find(graph.nodes.begin(), graph.nodes.end()) != graph.nodes.end()) {
    throw ParameterError("a picture appears in more than one chain position");
  }
  std::vector<std::size_t> rows;
  rows.reserve(graph.nodes.size());
  for (const auto& id : graph.nodes) {
    const auto row = store.find(id);
    if (!row) {
      throw ParameterError("picture '" + id + "' has no row in the store");
    }
    rows.push_back(*row);
  }

  std::map<std::pair<std::string, std::string>, IdentityEdge> edges;
  auto add_edge = [&](const std::string& u, const std::string& v, double w, EdgeKind kind) {
    if (u == v) {
      return;
    }
    auto key = u < v ? std::pair{u, v} : std::pair{v, u};
    edges.try_emplace(key, IdentityEdge{key.first, key.second, w, kind});
  };

  for (const auto& chain : chains) {
    for (std::size_t i = 1; i < chain.size(); ++i) {
      const double w =
          dot_accumulate(store.row(*store.find(chain[i - 1])), store.row(*store.find(chain[i])));
      add_edge(chain[i - 1], chain[i], w, EdgeKind::chain);
    }
  }

  RowMatrix sub(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(store.dim()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sub.row(static_cast<Eigen::Index>(i)) = store.row(rows[i]);
  }
  // nodes are sorted, so index order is id order
  const auto knn = all_pairs_knn(sub, k, [](std::size_t a, std::size_t b) { return a < b; });
  for (std::size_t u = 0; u < knn.size(); ++u) {
    for (const auto& nb : knn[u]) {
      if (nb.score >= link_threshold) {
        add_edge(graph.nodes[u], graph.nodes[nb.row], nb.score, EdgeKind::knn);
      }
    }
  }
  graph.edges.reserve(edges.size());
  for (auto& [key, edge] : edges) {
    graph.edges.push_back(std::move(edge));
  }
  return graph;
}

auto statue_id_for(const std::string& smallest_member) -> std::string {
  return "statue:" + smallest_member;
}

auto connected_components(const IdentityGraph& graph) -> std::vector<StatueCluster> {
  std::vector<std::string> nodes = graph.nodes;
  for (const auto& e : graph.edges) {
    nodes.push_back(e.a);
    nodes.push_back(e.b);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    index.emplace(nodes[i], i);
  }
  DisjointSets sets(nodes.size());
  for (const auto& e : graph.edges) {
    sets.unite(index.at(e.a), index.at(e.b));
  }
  std::map<std::size_t, std::vector<std::string>> groups;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    groups[sets.find(i)].push_back(nodes[i]);
  }
  std::vector<StatueCluster> out;
  out.reserve(groups.size());
  for (auto& [root, members] : groups) {
    out.push_back({statue_id_for(members.front()), std::move(members)});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

namespace {

auto split_on(std::string_view text, char sep) -> std::vector<std::string> {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) {
      break;
    }
    start = pos + 1;
  }
  return out;
}

}  // namespace

auto OverrideScript::parse(std::istream& in) -> OverrideScript {
  OverrideScript script;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::istringstream words(line);
    std::vector<std::string> argv;
    for (std::string w; words >> w;) {
      argv.push_back(w);
    }
    if (argv.empty()) {
      continue;
    }
    const auto& cmd = argv[0];
    if (argv.size() != 3) {
      throw OverrideError(line_no, "'" + cmd + "' expects 2 arguments, got " +
                                       std::to_string(argv.size() - 1));
    }
    if (cmd == "merge") {
      script.ops.push_back({MergeOp{argv[1], argv[2]}, line_no});
    } else if (cmd == "reassign") {
      script.ops.push_back({ReassignOp{argv[1], argv[2]}, line_no});
    } else if (cmd == "split") {
      SplitOp op{argv[1], {}};
      for (const auto& group : split_on(argv[2], '|')) {
        auto ids = split_on(group, ',');
        if (std::any_of(ids.begin(), ids.end(), [](const auto& s) { return s.empty(); })) {
          throw OverrideError(line_no, "empty image id in split group '" + group + "'");
        }
        op.parts.push_back(std::move(ids));
      }
      script.ops.push_back({std::move(op), line_no});
    } else {
      throw OverrideError(line_no, "unknown command '" + cmd + "'");
    }
  }
  return script;
}

auto OverrideScript::load(const std::filesystem::path& file) -> OverrideScript {
  std::ifstream in(file);
  if (!in) {
    throw Error("cannot open override script '" + file.string() + "'");
  }
  return parse(in);
}

auto apply_overrides(std::vector<StatueCluster> clusters, const OverrideScript& script)
    -> std::vector<StatueCluster> {
  std::map<std::string, std::vector<std::string>> registry;
  std::unordered_map<std::string, std::string> owner;
  for (auto& c : clusters) {
    for (const auto& m : c.members) {
      owner[m] = c.id;
    }
    registry.emplace(c.id, std::move(c.members));
  }

  auto require_statue = [&](const std::string& id, std::size_t line) -> std::vector<std::string>& {
    const auto it = registry.find(id);
    if (it == registry.end()) {
      throw OverrideError(line, "unknown statue '" + id + "'");
    }
    return it->second;
  };

  for (const auto& op : script.ops) {
    const auto line = op.line;
    if (const auto* merge = std::get_if<MergeOp>(&op.op)) {
      if (merge->into == merge->from) {
        throw OverrideError(line, "cannot merge statue '" + merge->into + "' with itself");
      }
      auto& into = require_statue(merge->into, line);
      auto& from = require_statue(merge->from, line);
      for (const auto& m : from) {
        owner[m] = merge->into;
      }
      into.insert(into.end(), from.begin(), from.end());
      registry.erase(merge->from);
    } else if (const auto* split = std::get_if<SplitOp>(&op.op)) {
      const auto& members = require_statue(split->statue, line);
      std::vector<std::string> listed;
      for (const auto& part : split->parts) {
        listed.insert(listed.end(), part.begin(), part.end());
      }
      std::vector<std::string> expected = members;
      std::sort(expected.begin(), expected.end());
      std::sort(listed.begin(), listed.end());
      if (listed != expected) {
        throw OverrideError(line, "split of '" + split->statue +
                                      "' must list each of its images exactly once");
      }
      registry[split->statue] = split->parts.front();
      for (std::size_t p = 1; p < split->parts.size(); ++p) {
        const auto& part = split->parts[p];
        std::string id = statue_id_for(*std::min_element(part.begin(), part.end()));
        for (int suffix = 2; registry.contains(id); ++suffix) {
          id = statue_id_for(*std::min_element(part.begin(), part.end())) + "#" +
               std::to_string(suffix);
        }
        for (const auto& m : part) {
          owner[m] = id;
        }
        registry.emplace(id, part);
      }
    } else if (const auto* reassign = std::get_if<ReassignOp>(&op.op)) {
      auto& target = require_statue(reassign->statue, line);
      const auto it = owner.find(reassign->image);
      if (it == owner.end()) {
        throw OverrideError(line, "unknown image '" + reassign->image + "'");
      }
      if (it->second == reassign->statue) {
        continue;
      }
      auto& source = registry.at(it->second);
      source.erase(std::find(source.begin(), source.end(), reassign->image));
      if (source.empty()) {
        registry.erase(it->second);
      }
      target.push_back(reassign->image);
      it->second = reassign->statue;
    }
  }

  std::vector<StatueCluster> out;
  out.reserve(registry.size());
  for (auto& [id, members] : registry) {
    std::sort(members.begin(), members.end());
    out.push_back({id, std::move(members)});
  }
  return out;
}

auto filter_statues(std::span<const StatueRecord> statues, std::size_t min_pictures)
    -> FilteredRegistry {
  if (min_pictures == 0) {
    throw ParameterError("min_pictures must be at least 1");
  }
  FilteredRegistry out;
  for (const auto& statue : statues) {
    if (statue.image_ids.size() >= min_pictures) {
      out.picture_count += statue.image_ids.size();
      out.statues.push_back(statue);
    }
  }
  return out;
}

}  // namespace statuary
