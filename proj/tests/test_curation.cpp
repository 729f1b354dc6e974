#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "statuary/curation.hpp"
#include "statuary/errors.hpp"
#include "support.hpp"

namespace statuary {
namespace {

auto angle_store(const std::vector<std::pair<std::string, double>>& angles) -> VectorStore {
  RowMatrix m(static_cast<Eigen::Index>(angles.size()), 2);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double rad = angles[i].second * std::numbers::pi / 180.0;
    m(static_cast<Eigen::Index>(i), 0) = static_cast<float>(std::cos(rad));
    m(static_cast<Eigen::Index>(i), 1) = static_cast<float>(std::sin(rad));
    ids.push_back(angles[i].first);
  }
  return {Namespace::global, m, ids};
}

auto folder_images(const VectorStore& store, const std::vector<std::optional<std::int64_t>>& times)
    -> std::vector<ArchiveImage> {
  std::vector<ArchiveImage> images;
  for (std::size_t i = 0; i < store.count(); ++i) {
    ArchiveImage image;
    image.id = store.id(i);
    image.folder_id = "f";
    image.global_row = i;
    image.timestamp = times[i];
    images.push_back(image);
  }
  return images;
}

auto brute_force_pairs(const VectorStore& store, double threshold) -> std::set<std::pair<std::string, std::string>> {
  std::set<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < store.count(); ++i) {
    for (std::size_t j = i + 1; j < store.count(); ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < store.dim(); ++d) {
        s += static_cast<double>(store.row(i)(static_cast<Eigen::Index>(d))) *
             static_cast<double>(store.row(j)(static_cast<Eigen::Index>(d)));
      }
      if (s >= threshold) {
        out.insert(std::minmax(store.id(i), store.id(j)));
      }
    }
  }
  return out;
}

auto as_set(const std::vector<DuplicatePair>& pairs) {
  std::set<std::pair<std::string, std::string>> out;
  for (const auto& p : pairs) {
    EXPECT_LT(p.image_a, p.image_b);
    out.emplace(p.image_a, p.image_b);
  }
  return out;
}

TEST(NearDuplicates, IdenticalRows) {
  const auto store = angle_store({{"a", 30}, {"b", 30}});
  const auto pairs = pairwise_near_duplicates(store, 0.97);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].image_a, "a");
  EXPECT_NEAR(pairs[0].similarity, 1.0, 1e-7);
}

TEST(NearDuplicates, OrthogonalRows) {
  EXPECT_TRUE(pairwise_near_duplicates(angle_store({{"a", 0}, {"b", 90}}), 0.97).empty());
}

TEST(NearDuplicates, PlantedCopies) {
  std::mt19937_64 gen(99);
  const auto base = testing::random_unit_rows(100, 64, 5);
  RowMatrix all(110, 64);
  all.topRows(100) = base;
  std::set<std::pair<std::string, std::string>> planted;
  auto ids = testing::row_ids(100, "o");
  for (int c = 0; c < 10; ++c) {
    const Eigen::VectorXd src = base.row(c * 7).cast<double>().transpose();
    all.row(100 + c) = testing::perturb(src, 0.985, gen).cast<float>().transpose();
    ids.push_back("p" + std::to_string(c));
    planted.emplace(ids[static_cast<std::size_t>(c * 7)], ids.back());
  }
  const VectorStore store(Namespace::global, all, ids);
  const auto pairs = pairwise_near_duplicates(store, 0.97);
  EXPECT_EQ(as_set(pairs), planted);
  EXPECT_EQ(dedup_select(pairs, ids).survivors.size(), 100u);
}

TEST(NearDuplicates, MatchesPairwiseOracle) {
  for (const std::size_t n : {1u, 50u, 700u, 2000u}) {
    const auto store = testing::random_store(n, 24, n);
    for (const double threshold : {0.55, 0.7}) {
      EXPECT_EQ(as_set(pairwise_near_duplicates(store, threshold)), brute_force_pairs(store, threshold))
          << "n=" << n << " threshold=" << threshold;
    }
  }
}

TEST(NearDuplicates, RejectsBadThreshold) {
  const auto store = testing::random_store(3, 2, 1);
  EXPECT_THROW((void)pairwise_near_duplicates(store, 0.0), ParameterError);
  EXPECT_THROW((void)pairwise_near_duplicates(store, 1.5), ParameterError);
}

TEST(Dedup, SmallestIdSurvivesEachGroup) {
  const std::vector<DuplicatePair> pairs = {{"a", "b", 0.99}, {"b", "c", 0.98}};
  const std::vector<std::string> ids = {"c", "b", "a", "d"};
  const auto out = dedup_select(pairs, ids);
  EXPECT_EQ(out.survivors, (std::vector<std::string>{"a", "d"}));
  EXPECT_EQ(out.duplicate_of.at("b"), "a");
  EXPECT_EQ(out.duplicate_of.at("c"), "a");
  EXPECT_EQ(out.groups.at("a"), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Dedup, NoPairsAllSurvive) {
  const std::vector<std::string> ids = {"x", "y"};
  const auto out = dedup_select({}, ids);
  EXPECT_EQ(out.survivors, ids);
  EXPECT_TRUE(out.duplicate_of.empty());
}

TEST(Chains, ThresholdRuleExample) {
  // consecutive cosines 0.9, 0.3, 0.8
  const double a1 = std::acos(0.9) * 180.0 / std::numbers::pi;
  const double a2 = a1 + std::acos(0.3) * 180.0 / std::numbers::pi;
  const double a3 = a2 + std::acos(0.8) * 180.0 / std::numbers::pi;
  const auto store = angle_store({{"i1", 0}, {"i2", a1}, {"i3", a2}, {"i4", a3}});
  const auto images = folder_images(store, {1, 2, 3, 4});
  const auto out = build_chains(images, store, 0.5);
  EXPECT_EQ(out.chains, (std::vector<Chain>{{"i1", "i2"}, {"i3", "i4"}}));
}

TEST(Chains, SingleImage) {
  const auto store = angle_store({{"only", 0}});
  const auto out = build_chains(folder_images(store, {std::nullopt}), store, 0.6);
  EXPECT_EQ(out.chains, (std::vector<Chain>{{"only"}}));
  EXPECT_EQ(out.untimed, (std::vector<std::string>{"only"}));
}

TEST(Chains, HandTracedFixtures) {
  std::ifstream in(testing::fixture_path("chains.json"));
  const auto cases = nlohmann::json::parse(in);
  ASSERT_GE(cases.size(), 5u);
  for (const auto& c : cases) {
    std::vector<std::pair<std::string, double>> angles;
    std::vector<std::optional<std::int64_t>> times;
    for (const auto& img : c.at("images")) {
      angles.emplace_back(img.at("id").get<std::string>(), img.at("angle").get<double>());
      times.push_back(img.contains("timestamp") ? std::optional(img.at("timestamp").get<std::int64_t>())
                                                : std::nullopt);
    }
    const auto store = angle_store(angles);
    const auto out = build_chains(folder_images(store, times), store, c.at("threshold").get<double>());
    EXPECT_EQ(out.chains, c.at("chains").get<std::vector<Chain>>()) << c.at("name");
    EXPECT_EQ(out.untimed, c.at("untimed").get<std::vector<std::string>>()) << c.at("name");
  }
}

TEST(Chains, PartitionTheFolder) {
  const auto store = testing::random_store(60, 3, 17);
  std::vector<std::optional<std::int64_t>> times;
  for (int i = 0; i < 60; ++i) {
    times.emplace_back(i % 7 == 0 ? std::nullopt : std::optional<std::int64_t>((i * 37) % 11));
  }
  const auto images = folder_images(store, times);
  const auto out = build_chains(images, store, 0.3);
  std::vector<std::string> flat;
  for (const auto& chain : out.chains) {
    ASSERT_FALSE(chain.empty());
    flat.insert(flat.end(), chain.begin(), chain.end());
  }
  std::sort(flat.begin(), flat.end());
  EXPECT_EQ(flat, store.ids());
}

TEST(Chains, Errors) {
  const auto store = angle_store({{"a", 0}, {"b", 0}});
  auto images = folder_images(store, {1, 2});
  images[1].folder_id = "g";
  EXPECT_THROW((void)build_chains(images, store, 0.6), ParameterError);
  images[1].folder_id = "f";
  images[1].global_row.reset();
  EXPECT_THROW((void)build_chains(images, store, 0.6), ParameterError);
}

TEST(IdentityGraph, SingleChainNoCrossLinks) {
  const auto store = angle_store({{"a", 0}, {"b", 40}, {"c", 90}});
  const std::vector<Chain> chains = {{"a", "b"}, {"c"}};
  const auto g = build_identity_graph(chains, store, 5, 0.9);
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0].a, "a");
  EXPECT_EQ(g.edges[0].b, "b");
  EXPECT_EQ(g.edges[0].kind, EdgeKind::chain);
}

TEST(IdentityGraph, IdenticalVectorsLinkAcrossChains) {
  const auto store = angle_store({{"a", 10}, {"b", 10}, {"c", 80}});
  const std::vector<Chain> chains = {{"a"}, {"b"}, {"c"}};
  const auto g = build_identity_graph(chains, store, 1, 0.75);
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0].kind, EdgeKind::knn);
  EXPECT_NEAR(g.edges[0].weight, 1.0, 1e-7);
  for (const auto& e : g.edges) {
    EXPECT_NE(e.a, e.b);
  }
}

TEST(IdentityGraph, ThreeStatuesOverTwoFolders) {
  const auto centers = testing::orthonormal_centers(3, 32, 4);
  std::mt19937_64 gen(8);
  RowMatrix m(18, 32);
  std::vector<std::string> ids;
  std::vector<Chain> chains;
  for (int s = 0; s < 3; ++s) {
    for (int folder = 0; folder < 2; ++folder) {
      Chain chain;
      for (int i = 0; i < 3; ++i) {
        const auto row = s * 6 + folder * 3 + i;
        m.row(row) = testing::perturb(centers.row(s).transpose(), 0.95, gen).cast<float>().transpose();
        ids.push_back("s" + std::to_string(s) + "f" + std::to_string(folder) + "i" + std::to_string(i));
        chain.push_back(ids.back());
      }
      chains.push_back(chain);
    }
  }
  const VectorStore store(Namespace::global, m, ids);
  const auto components = connected_components(build_identity_graph(chains, store, 5, 0.75));
  ASSERT_EQ(components.size(), 3u);
  for (const auto& c : components) {
    EXPECT_EQ(c.members.size(), 6u);
    for (const auto& member : c.members) {
      EXPECT_EQ(member.substr(0, 2), c.members.front().substr(0, 2));
    }
  }
}

TEST(IdentityGraph, RaisingLinkThresholdNeverMergesComponents) {
  const auto store = testing::random_store(150, 8, 21);
  std::vector<Chain> chains;
  for (const auto& id : store.ids()) {
    chains.push_back({id});
  }
  std::size_t previous = 0;
  for (const double link : {0.3, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99}) {
    const auto count = connected_components(build_identity_graph(chains, store, 4, link)).size();
    EXPECT_GE(count, previous) << "link=" << link;
    previous = count;
  }
}

TEST(IdentityGraph, KnnEdgesMeetThreshold) {
  const auto store = testing::random_store(80, 6, 3);
  std::vector<Chain> chains;
  for (const auto& id : store.ids()) {
    chains.push_back({id});
  }
  for (const auto& e : build_identity_graph(chains, store, 5, 0.6).edges) {
    EXPECT_GE(e.weight, 0.6);
    EXPECT_LT(e.a, e.b);
  }
}

TEST(Components, Examples) {
  IdentityGraph g;
  g.nodes = {"a", "b", "c", "d"};
  g.edges = {{"a", "b", 1.0, EdgeKind::knn}, {"b", "c", 1.0, EdgeKind::chain}};
  const auto out = connected_components(g);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], (StatueCluster{"statue:a", {"a", "b", "c"}}));
  EXPECT_EQ(out[1], (StatueCluster{"statue:d", {"d"}}));
  g.edges.clear();
  EXPECT_EQ(connected_components(g).size(), 4u);
}

TEST(Components, MatchesBreadthFirstOracle) {
  std::mt19937_64 gen(77);
  std::uniform_int_distribution<int> node(0, 199);
  IdentityGraph g;
  g.nodes = testing::row_ids(200, "n");
  std::vector<std::vector<int>> adj(200);
  for (int e = 0; e < 150; ++e) {
    const int u = node(gen);
    const int v = node(gen);
    if (u == v) {
      continue;
    }
    adj[static_cast<std::size_t>(u)].push_back(v);
    adj[static_cast<std::size_t>(v)].push_back(u);
    g.edges.push_back({g.nodes[static_cast<std::size_t>(std::min(u, v))],
                       g.nodes[static_cast<std::size_t>(std::max(u, v))], 1.0, EdgeKind::knn});
  }
  std::set<std::vector<std::string>> oracle;
  std::vector<bool> seen(200, false);
  for (int s = 0; s < 200; ++s) {
    if (seen[static_cast<std::size_t>(s)]) {
      continue;
    }
    std::vector<std::string> members;
    std::queue<int> q;
    q.push(s);
    seen[static_cast<std::size_t>(s)] = true;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      members.push_back(g.nodes[static_cast<std::size_t>(u)]);
      for (const int v : adj[static_cast<std::size_t>(u)]) {
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = true;
          q.push(v);
        }
      }
    }
    std::sort(members.begin(), members.end());
    oracle.insert(members);
  }
  std::set<std::vector<std::string>> got;
  for (const auto& c : connected_components(g)) {
    EXPECT_EQ(c.id, "statue:" + c.members.front());
    got.insert(c.members);
  }
  EXPECT_EQ(got, oracle);
}

auto script(const std::string& text) {
  std::istringstream in(text);
  return OverrideScript::parse(in);
}

TEST(Overrides, MergeSplitReassign) {
  const std::vector<StatueCluster> base = {{"s1", {"a"}}, {"s2", {"b"}}};
  EXPECT_EQ(apply_overrides(base, script("merge s1 s2\n")), (std::vector<StatueCluster>{{"s1", {"a", "b"}}}));

  const std::vector<StatueCluster> pair = {{"s1", {"a", "b"}}};
  EXPECT_EQ(apply_overrides(pair, script("split s1 a|b\n")),
            (std::vector<StatueCluster>{{"s1", {"a"}}, {"statue:b", {"b"}}}));

  const std::vector<StatueCluster> three = {{"s1", {"a", "b"}}, {"s2", {"c"}}};
  EXPECT_EQ(apply_overrides(three, script("# move b\nreassign b s2\nreassign c s1\n")),
            (std::vector<StatueCluster>{{"s1", {"a", "c"}}, {"s2", {"b"}}}));
}

TEST(Overrides, ReassignEmptyingASourceRemovesIt) {
  const std::vector<StatueCluster> base = {{"s1", {"a"}}, {"s2", {"b"}}};
  EXPECT_EQ(apply_overrides(base, script("reassign a s2\n")), (std::vector<StatueCluster>{{"s2", {"a", "b"}}}));
}

TEST(Overrides, SplitNameCollisionGetsSuffix) {
  const std::vector<StatueCluster> base = {{"statue:b", {"z"}}, {"s1", {"a", "b"}}};
  const auto out = apply_overrides(base, script("split s1 a|b\n"));
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[2], (StatueCluster{"statue:b#2", {"b"}}));
}

TEST(Overrides, ErrorsNameTheLine) {
  const std::vector<StatueCluster> base = {{"s1", {"a", "b"}}};
  auto expect_line = [&](const std::string& text, std::size_t line) {
    try {
      (void)apply_overrides(base, script(text));
      FAIL() << "expected OverrideError for: " << text;
    } catch (const OverrideError& e) {
      EXPECT_EQ(e.line(), line) << text;
    }
  };
  expect_line("reassign a s9\n", 1);
  expect_line("\n# c\nmerge s1 s1\n", 3);
  expect_line("reassign x s1\n", 1);
  expect_line("split s1 a\n", 1);
  expect_line("split s1 a|a,b\n", 1);
  expect_line("merge s1 ghost\n", 1);
  EXPECT_THROW((void)script("frobnicate a b\n"), OverrideError);
  EXPECT_THROW((void)script("merge a\n"), OverrideError);
  EXPECT_THROW((void)script("split s1 a,|b\n"), OverrideError);
}

TEST(Overrides, ResultStaysAPartition) {
  const std::vector<StatueCluster> base = {{"s1", {"a", "b", "c"}}, {"s2", {"d"}}, {"s3", {"e", "f"}}};
  const auto out = apply_overrides(base, script("split s1 a|b,c\nmerge s2 s3\nreassign a s2\nreassign f statue:b\n"));
  std::vector<std::string> all;
  for (const auto& c : out) {
    all.insert(all.end(), c.members.begin(), c.members.end());
  }
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, (std::vector<std::string>{"a", "b", "c", "d", "e", "f"}));
}

TEST(Filter, MinPictures) {
  std::vector<StatueRecord> statues;
  for (const std::size_t n : {5u, 4u, 6u, 1u}) {
    StatueRecord s;
    s.id = "s" + std::to_string(n);
    s.image_ids = testing::row_ids(n, s.id);
    statues.push_back(s);
  }
  const auto five = filter_statues(statues, 5);
  EXPECT_EQ(five.statues.size(), 2u);
  EXPECT_EQ(five.picture_count, 11u);
  const auto all = filter_statues(statues, 1);
  EXPECT_EQ(all.statues, statues);
  EXPECT_EQ(all.picture_count, 16u);
  EXPECT_THROW((void)filter_statues(statues, 0), ParameterError);
}

TEST(Thresholds, Validate) {
  CurationThresholds t;
  EXPECT_NO_THROW(t.validate());
  t.k = 0;
  EXPECT_THROW(t.validate(), ParameterError);
  t = {};
  t.link = 0.0;
  EXPECT_THROW(t.validate(), ParameterError);
}

}  // namespace
}  // namespace statuary
