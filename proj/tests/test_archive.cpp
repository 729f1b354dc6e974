#include <gtest/gtest.h>

#include <cstring>
#include <limits>

#include "statuary/archive.hpp"
#include "statuary/errors.hpp"
#include "statuary/similarity.hpp"
#include "statuary/vecf.hpp"
#include "support.hpp"

namespace statuary {
namespace {

using testing::random_store;
using testing::unit;

TEST(Normalize, ThreeFourFive) {
  Vector v(2);
  v << 3.0f, 4.0f;
  const Vector u = l2_normalize(v);
  EXPECT_FLOAT_EQ(u(0), 0.6f);
  EXPECT_FLOAT_EQ(u(1), 0.8f);
}

TEST(Normalize, UnitVectorUnchanged) {
  Vector v(2);
  v << 1.0f, 0.0f;
  const Vector u = l2_normalize(v);
  EXPECT_EQ(u(0), 1.0f);
  EXPECT_EQ(u(1), 0.0f);
}

TEST(Normalize, RejectsZeroEmptyAndNonFinite) {
  EXPECT_THROW((void)l2_normalize(Vector::Zero(2)), NormalizationError);
  EXPECT_THROW((void)l2_normalize(Vector(0)), NormalizationError);
  Vector v(2);
  v << std::numeric_limits<float>::quiet_NaN(), 1.0f;
  EXPECT_THROW((void)l2_normalize(v), NormalizationError);
}

TEST(Normalize, ResultIsUnitWithinTolerance) {
  const auto m = testing::random_unit_rows(200, 37, 3);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    EXPECT_NEAR(l2_norm(m.row(r)), 1.0, 1e-5);
  }
}

TEST(Cosine, Examples) {
  EXPECT_DOUBLE_EQ(cosine_similarity(unit({1, 0}), unit({1, 0})), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(unit({1, 0}), unit({0, 1})), 0.0);
  EXPECT_NEAR(cosine_similarity(unit({1, 0}), unit({1, 1})), 0.70711, 1e-5);
}

TEST(Cosine, DimensionMismatch) {
  EXPECT_THROW((void)cosine_similarity(unit({1, 0}), unit({1, 0, 0})), DimensionError);
}

TEST(Cosine, SymmetricAndBounded) {
  const auto m = testing::random_unit_rows(100, 16, 11);
  for (Eigen::Index i = 0; i + 1 < m.rows(); ++i) {
    const double ab = cosine_similarity(m.row(i), m.row(i + 1));
    EXPECT_EQ(ab, cosine_similarity(m.row(i + 1), m.row(i)));
    EXPECT_GE(ab, -1.0 - 1e-6);
    EXPECT_LE(ab, 1.0 + 1e-6);
  }
}

TEST(VectorStore, RejectsDuplicateIdsAndBadShapes) {
  RowMatrix m(2, 2);
  m << 1, 0, 0, 1;
  EXPECT_THROW(VectorStore(Namespace::global, m, {"a", "a"}), ParameterError);
  EXPECT_THROW(VectorStore(Namespace::global, m, {"a"}), ParameterError);
  EXPECT_THROW(VectorStore(Namespace::global, 0), ParameterError);
}

TEST(VectorStore, FindAndSelect) {
  const auto store = random_store(5, 3, 1);
  EXPECT_EQ(store.find("r000003"), 3u);
  EXPECT_FALSE(store.find("nope"));
  const std::vector<std::size_t> rows = {4, 1};
  const auto sub = store.select(rows);
  EXPECT_EQ(sub.ids(), (std::vector<std::string>{"r000004", "r000001"}));
  EXPECT_TRUE(sub.row(0).isApprox(store.row(4)));
}

TEST(Vecf, SingleRowRoundTrip) {
  RowMatrix m(1, 2);
  m << 1.0f, 0.0f;
  const VectorStore store(Namespace::global, m, {"img1"});
  EXPECT_EQ(decode_vector_store(encode_vector_store(store)), store);
}

TEST(Vecf, EmptyStoreRoundTrip) {
  const VectorStore store(Namespace::face, 7);
  const auto bytes = encode_vector_store(store);
  EXPECT_EQ(bytes.size(), 21u);
  const auto back = decode_vector_store(bytes);
  EXPECT_EQ(back, store);
  EXPECT_EQ(back.dim(), 7u);
  EXPECT_EQ(back.ns(), Namespace::face);
}

TEST(Vecf, HeaderLayoutIsLittleEndian) {
  RowMatrix m(1, 1);
  m << 1.0f;
  const auto bytes = encode_vector_store(VectorStore(Namespace::face, m, {"ab"}));
  const std::vector<std::uint8_t> expected = {'V', 'E', 'C', 'F', 1, 0, 0, 0, 1, 1, 0, 0, 0,
                                              1, 0, 0, 0, 0, 0, 0, 0, 0x00, 0x00, 0x80, 0x3F,
                                              2, 0, 'a', 'b'};
  EXPECT_EQ(bytes, expected);
}

TEST(Vecf, BadMagic) {
  auto bytes = encode_vector_store(random_store(2, 2, 1));
  std::memcpy(bytes.data(), "XXXX", 4);
  try {
    (void)decode_vector_store(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
}

TEST(Vecf, BadVersionReportsOffset) {
  auto bytes = encode_vector_store(random_store(2, 2, 1));
  bytes[4] = 2;
  try {
    (void)decode_vector_store(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
}

TEST(Vecf, UnknownNamespaceTag) {
  auto bytes = encode_vector_store(random_store(2, 2, 1));
  bytes[8] = 9;
  try {
    (void)decode_vector_store(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 8u);
  }
}

TEST(Vecf, EveryTruncationIsAFormatError) {
  const auto bytes = encode_vector_store(random_store(3, 4, 2));
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    const std::span<const std::uint8_t> prefix(bytes.data(), len);
    EXPECT_THROW((void)decode_vector_store(prefix), FormatError) << "length " << len;
  }
}

TEST(Vecf, TrailingBytesRejected) {
  auto bytes = encode_vector_store(random_store(2, 2, 1));
  bytes.push_back(0);
  EXPECT_THROW((void)decode_vector_store(bytes), FormatError);
}

TEST(Vecf, OversizedCountRejectedBeforeAllocation) {
  auto bytes = encode_vector_store(random_store(1, 2, 1));
  for (int i = 13; i < 21; ++i) {
    bytes[static_cast<std::size_t>(i)] = 0xFF;
  }
  try {
    (void)decode_vector_store(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 13u);
  }
}

TEST(Vecf, DuplicateIdsRejected) {
  RowMatrix m(2, 1);
  m << 1.0f, 1.0f;
  auto bytes = encode_vector_store(VectorStore(Namespace::global, m, {"a", "b"}));
  bytes.back() = 'a';
  EXPECT_THROW((void)decode_vector_store(bytes), FormatError);
}

TEST(Vecf, FileRoundTrip) {
  testing::TempDir dir;
  const auto store = random_store(10, 5, 7, Namespace::face);
  write_vector_store(store, dir / "f.vecf");
  EXPECT_TRUE(looks_like_vecf(dir / "f.vecf"));
  EXPECT_EQ(read_vector_store(dir / "f.vecf"), store);
}

TEST(Vecf, RoundTripPreservesNonFiniteBits) {
  RowMatrix m(1, 3);
  m << std::numeric_limits<float>::quiet_NaN(), -0.0f, std::numeric_limits<float>::denorm_min();
  const VectorStore store(Namespace::global, m, {"x"});
  const auto back = decode_vector_store(encode_vector_store(store));
  EXPECT_EQ(encode_vector_store(back), encode_vector_store(store));
}

auto consistent_archive() -> std::tuple<std::vector<ArchiveImage>, std::vector<StatueRecord>, VectorStore> {
  auto store = random_store(3, 4, 5);
  std::vector<ArchiveImage> images(3);
  for (std::size_t i = 0; i < 3; ++i) {
    images[i].id = store.id(i);
    images[i].path = "f/" + store.id(i) + ".jpg";
    images[i].folder_id = "f";
    images[i].global_row = i;
    images[i].statue_id = "s1";
  }
  images[0].width = 100;
  images[0].height = 100;
  images[0].face_regions.push_back({"face1", images[0].id, {10, 10, 20, 20}, std::nullopt});
  StatueRecord statue;
  statue.id = "s1";
  statue.image_ids = {images[0].id, images[1].id, images[2].id};
  statue.canonical_image = images[0].id;
  return {images, {statue}, store};
}

TEST(Validate, ConsistentArchiveIsClean) {
  auto [images, statues, store] = consistent_archive();
  EXPECT_TRUE(validate_archive(images, statues, {&store, nullptr}).ok());
}

TEST(Validate, DanglingGlobalRow) {
  auto [images, statues, store] = consistent_archive();
  images[1].global_row = 5;
  const auto report = validate_archive(images, statues, {&store, nullptr});
  EXPECT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.count("dangling-global-row"), 1u);
}

TEST(Validate, SharedImageBreaksPartition) {
  auto [images, statues, store] = consistent_archive();
  images[2].statue_id.reset();
  StatueRecord other;
  other.id = "s2";
  other.image_ids = {images[2].id};
  other.canonical_image = images[2].id;
  statues.push_back(other);
  const auto report = validate_archive(images, statues, {&store, nullptr});
  EXPECT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.count("partition"), 1u);
}

TEST(Validate, ReportsEachKindOfBreakage) {
  auto [images, statues, store] = consistent_archive();
  images[0].face_regions.push_back({"face1", images[0].id, {95, 95, 10, 10}, 3});
  images[1].statue_id = "ghost";
  statues[0].canonical_image = "elsewhere";
  const auto report = validate_archive(images, statues, {&store, nullptr});
  EXPECT_EQ(report.count("duplicate-face-id"), 1u);
  EXPECT_EQ(report.count("invalid-bbox"), 1u);
  EXPECT_EQ(report.count("dangling-face-row"), 1u);
  EXPECT_EQ(report.count("unknown-statue"), 1u);
  EXPECT_EQ(report.count("bad-canonical-image"), 1u);
}

TEST(Validate, NonUnitRowAndWrongNamespace) {
  auto [images, statues, store] = consistent_archive();
  RowMatrix m = store.matrix();
  m.row(0) *= 2.0f;
  const VectorStore scaled(Namespace::face, m, store.ids());
  const auto report = validate_archive(images, statues, {&scaled, nullptr});
  EXPECT_EQ(report.count("non-unit-row"), 1u);
  EXPECT_EQ(report.count("store-namespace"), 1u);
}

}  // namespace
}  // namespace statuary
