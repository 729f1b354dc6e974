#include <gtest/gtest.h>

#include <map>

#include "statuary/engine.hpp"
#include "statuary/errors.hpp"
#include "statuary/text_index.hpp"
#include "support.hpp"

namespace statuary {
namespace {

auto make_engine(std::size_t statues = 40, std::size_t per = 4, std::uint64_t seed = 3) -> SearchEngine {
  auto a = testing::synthetic_archive(statues, per, 16, seed);
  return {std::move(a.manifest), std::move(a.global), std::move(a.face)};
}

/// Scan every store row, keep the statues `keep` accepts, max-aggregate per statue.
auto statue_oracle(const SearchEngine& engine, Namespace ns, const Vector& q,
                   const std::function<bool(const StatueRecord&)>& keep) -> std::vector<std::pair<std::string, double>> {
  const auto& store = *engine.store(ns);
  std::map<std::string, double> best;
  for (std::size_t r = 0; r < store.count(); ++r) {
    const auto* owner = engine.statue_of_row(ns, r);
    if (owner == nullptr || !keep(*owner)) {
      continue;
    }
    double s = 0.0;
    for (std::size_t d = 0; d < store.dim(); ++d) {
      s += static_cast<double>(store.row(r)(static_cast<Eigen::Index>(d))) *
           static_cast<double>(q(static_cast<Eigen::Index>(d)));
    }
    const auto [it, fresh] = best.emplace(owner->id, s);
    if (!fresh) {
      it->second = std::max(it->second, s);
    }
  }
  std::vector<std::pair<std::string, double>> out(best.begin(), best.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

void expect_page(const SearchPage& page, const std::vector<std::pair<std::string, double>>& oracle, std::size_t k) {
  EXPECT_EQ(page.total, oracle.size());
  ASSERT_EQ(page.results.size(), std::min(k, oracle.size()));
  for (std::size_t i = 0; i < page.results.size(); ++i) {
    EXPECT_EQ(page.results[i].id, oracle[i].first) << "rank " << i + 1;
    EXPECT_NEAR(page.results[i].score, oracle[i].second, 1e-5);
  }
}

TEST(Hybrid, TextOnlyEqualsTextSearch) {
  const auto engine = make_engine();
  HybridQuery q;
  q.text = "heian";
  q.k = 100;
  const auto page = engine.hybrid_search(q);
  const auto direct = text_search(engine.text_index(), "heian", 100);
  ASSERT_EQ(page.results.size(), direct.size());
  EXPECT_EQ(page.total, 10u);
  for (std::size_t i = 0; i < direct.size(); ++i) {
    EXPECT_EQ(page.results[i].id, direct[i].id);
    EXPECT_DOUBLE_EQ(page.results[i].score, direct[i].score);
  }
}

TEST(Hybrid, VectorOnlyEqualsMaxAggregatedScan) {
  const auto engine = make_engine();
  const auto queries = testing::random_unit_rows(10, 16, 77);
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    HybridQuery q;
    q.vector = queries.row(i).transpose();
    q.k = 15;
    expect_page(engine.hybrid_search(q),
                statue_oracle(engine, Namespace::global, *q.vector, [](const StatueRecord&) { return true; }), 15);
  }
}

TEST(Hybrid, TextAndVectorComposeAsFilterThenScan) {
  const auto engine = make_engine();
  const auto& postings = engine.text_index().view(std::nullopt).postings("bronze");
  std::set<std::string> bronze;
  for (const auto& p : postings) {
    bronze.insert(engine.text_index().doc_id(p.doc));
  }
  EXPECT_EQ(bronze.size(), 8u);
  HybridQuery q;
  q.text = "bronze";
  q.vector = testing::random_unit_rows(1, 16, 5).row(0).transpose();
  q.k = 5;
  expect_page(engine.hybrid_search(q),
              statue_oracle(engine, Namespace::global, *q.vector,
                            [&](const StatueRecord& s) { return bronze.contains(s.id); }),
              5);
}

TEST(Hybrid, MetadataFiltersAndFaceNamespace) {
  const auto engine = make_engine();
  HybridQuery q;
  q.vector = testing::random_unit_rows(1, 16, 6).row(0).transpose();
  q.ns = Namespace::face;
  q.filters = {{MetadataField::era, "heian"}, {MetadataField::statue_type, "Amida"}};
  q.k = 50;
  const auto oracle = statue_oracle(engine, Namespace::face, *q.vector, [](const StatueRecord& s) {
    return s.metadata.get(MetadataField::era) == "Heian" && s.metadata.get(MetadataField::statue_type) == "Amida";
  });
  EXPECT_EQ(oracle.size(), 4u);
  expect_page(engine.hybrid_search(q), oracle, 50);
}

TEST(Hybrid, StoredVectorFindsItsStatueFirst) {
  const auto engine = make_engine();
  const auto& store = *engine.store(Namespace::global);
  HybridQuery q;
  q.vector = store.row(37).transpose();
  const auto page = engine.hybrid_search(q);
  EXPECT_EQ(page.results[0].id, engine.statue_of_row(Namespace::global, 37)->id);
  EXPECT_NEAR(page.results[0].score, 1.0, 1e-6);
  EXPECT_FALSE(page.results[0].facets.empty());
}

TEST(Hybrid, PagingSlicesTheFullRanking) {
  const auto engine = make_engine();
  HybridQuery q;
  q.text = "wood";
  q.k = 100;
  const auto all = engine.hybrid_search(q);
  q.k = 7;
  q.offset = 10;
  const auto page = engine.hybrid_search(q);
  EXPECT_EQ(page.total, all.total);
  ASSERT_EQ(page.results.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(page.results[i].id, all.results[10 + i].id);
    EXPECT_EQ(page.results[i].rank, 11 + i);
  }
}

TEST(Hybrid, Errors) {
  const auto engine = make_engine(5, 2);
  HybridQuery none;
  EXPECT_THROW((void)engine.hybrid_search(none), QueryError);
  none.text = "  ";
  EXPECT_THROW((void)engine.hybrid_search(none), QueryError);
  HybridQuery bad_dim;
  bad_dim.vector = testing::unit({1, 0});
  EXPECT_THROW((void)engine.hybrid_search(bad_dim), DimensionError);
  HybridQuery zero;
  zero.text = "wood";
  zero.k = 0;
  EXPECT_THROW((void)engine.hybrid_search(zero), ParameterError);
  HybridQuery field;
  field.text = "wood";
  field.text_field = "colour";
  EXPECT_THROW((void)engine.hybrid_search(field), FieldError);
}

TEST(PredictLabels, MajorityAndTieRule) {
  RowMatrix m(3, 2);
  m << 1.0f, 0.0f, 0.8f, 0.6f, 0.6f, 0.8f;
  const VectorStore store(Namespace::face, m, {"f1", "f2", "f3"});
  const std::vector<std::string> aab = {"A", "A", "B"};
  const auto p = predict_labels(store, testing::unit({1, 0}), 3, [&](std::size_t r) { return aab[r]; });
  EXPECT_EQ(p.label, "A");
  EXPECT_DOUBLE_EQ(p.confidence, 2.0 / 3.0);

  const std::vector<std::string> ba = {"B", "A", "Z"};
  const auto tie = predict_labels(store, testing::unit({1, 0}), 2, [&](std::size_t r) { return ba[r]; });
  EXPECT_EQ(tie.label, "B");
  EXPECT_DOUBLE_EQ(tie.confidence, 0.5);
}

TEST(PredictLabels, UnlabeledRowsSkippedAndErrors) {
  RowMatrix m(2, 2);
  m << 1.0f, 0.0f, 0.0f, 1.0f;
  const VectorStore store(Namespace::face, m, {"f1", "f2"});
  const auto p = predict_labels(store, testing::unit({1, 0}), 1, [](std::size_t r) -> std::optional<std::string> {
    return r == 1 ? std::optional<std::string>("far") : std::nullopt;
  });
  EXPECT_EQ(p.label, "far");
  EXPECT_THROW((void)predict_labels(store, testing::unit({1, 0}), 1, [](std::size_t) { return std::nullopt; }),
               NoLabelError);
  EXPECT_THROW((void)predict_labels(store, testing::unit({1, 0}), 0, [](std::size_t) { return "x"; }),
               ParameterError);
}

TEST(PredictField, HeldOutStatueGetsItsClusterLabel) {
  // Statues 0..59 share a face center with every other statue of the same era.
  auto a = testing::synthetic_archive(60, 3, 16, 9);
  const auto eras = testing::orthonormal_centers(4, 16, 10);
  std::mt19937_64 gen(11);
  RowMatrix face = a.face.matrix();
  for (std::size_t s = 0; s < 60; ++s) {
    for (std::size_t j = 0; j < 3; ++j) {
      face.row(static_cast<Eigen::Index>(s * 3 + j)) =
          testing::perturb(eras.row(static_cast<Eigen::Index>(s % 4)).transpose(), 0.97, gen).cast<float>().transpose();
    }
  }
  const SearchEngine engine(a.manifest, a.global, VectorStore(Namespace::face, face, a.face.ids()));
  std::size_t correct = 0;
  for (const auto& statue : engine.statues()) {
    const auto row = engine.rows_of_statue(Namespace::face, statue.id).front();
    const Vector v = engine.store(Namespace::face)->row(row).transpose();
    const auto p = engine.predict_field(v, MetadataField::era, 5, statue.id);
    correct += p.label == *statue.metadata.get(MetadataField::era) ? 1 : 0;
  }
  EXPECT_EQ(correct, 60u);
}

TEST(ImageNeighbors, ExcludesSelf) {
  const auto engine = make_engine(10, 4);
  const auto hits = engine.image_neighbors("img3_1", 3);
  ASSERT_EQ(hits.size(), 3u);
  for (const auto& h : hits) {
    EXPECT_NE(h.id, "img3_1");
    EXPECT_EQ(h.id.substr(0, 5), "img3_");
  }
  EXPECT_THROW((void)engine.image_neighbors("nope", 3), QueryError);
}

TEST(Engine, OwnershipAndFacets) {
  const auto engine = make_engine(6, 3);
  EXPECT_EQ(engine.rows_of_statue(Namespace::global, "statue:s000002"), (std::vector<std::size_t>{6, 7, 8}));
  EXPECT_TRUE(engine.rows_of_statue(Namespace::global, "ghost").empty());
  const auto facets = engine.facets_of(*engine.statue("statue:s000001"));
  EXPECT_EQ(facets, (std::vector<Facet>{{"statue_type", "Kannon"}, {"era", "Kamakura"}}));
}

}  // namespace
}  // namespace statuary
