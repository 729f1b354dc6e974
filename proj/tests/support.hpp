#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/QR>

#include "statuary/archive.hpp"
#include "statuary/manifest.hpp"
#include "statuary/similarity.hpp"

namespace statuary::testing {

inline auto fixture_path(const std::string& name) -> std::filesystem::path {
  return std::filesystem::path(STATUARY_FIXTURE_DIR) / name;
}

class TempDir {
public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("statuary-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  auto operator=(const TempDir&) -> TempDir& = delete;

  [[nodiscard]] auto path() const -> const std::filesystem::path& { return path_; }
  [[nodiscard]] auto operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& file, const std::string& text) {
  std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  out << text;
}

inline auto read_text(const std::filesystem::path& file) -> std::string {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline auto row_ids(std::size_t n, const std::string& prefix = "r") -> std::vector<std::string> {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%06zu", prefix.c_str(), i);
    ids.emplace_back(buf);
  }
  return ids;
}

inline auto random_unit_rows(std::size_t n, std::size_t dim, std::uint64_t seed) -> RowMatrix {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  RowMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = normal(gen);
    }
    m.row(r) = l2_normalize(m.row(r).transpose()).transpose();
  }
  return m;
}

inline auto random_store(std::size_t n, std::size_t dim, std::uint64_t seed,
                         Namespace ns = Namespace::global, const std::string& prefix = "r") -> VectorStore {
  return {ns, random_unit_rows(n, dim, seed), row_ids(n, prefix)};
}

inline auto unit(std::initializer_list<float> values) -> Vector {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (const float x : values) {
    v(i++) = x;
  }
  return l2_normalize(v);
}

/// Full-scan reference: every row scored in double, sorted by (score desc, id asc).
inline auto brute_force_knn(const VectorStore& store, const Vector& q, std::size_t k)
    -> std::vector<std::pair<std::string, double>> {
  std::vector<std::pair<std::string, double>> all;
  for (std::size_t r = 0; r < store.count(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < store.dim(); ++c) {
      s += static_cast<double>(store.matrix()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))) *
           static_cast<double>(q(static_cast<Eigen::Index>(c)));
    }
    all.emplace_back(store.id(r), s);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

/// Orthonormal rows, one per statue center.
inline auto orthonormal_centers(std::size_t count, std::size_t dim, std::uint64_t seed) -> Eigen::MatrixXd {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    g.data()[i] = normal(gen);
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
  return q.transpose();
}

/// Vector at angle acos(cos_angle) from unit `center`, in a random direction.
inline auto perturb(const Eigen::VectorXd& center, double cos_angle, std::mt19937_64& gen) -> Eigen::VectorXd {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd u(center.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    u(i) = normal(gen);
  }
  u -= center.dot(u) * center;
  u.normalize();
  const double sin_angle = std::sqrt(std::max(0.0, 1.0 - cos_angle * cos_angle));
  return (cos_angle * center + sin_angle * u).normalized();
}

/// Gaussian clusters of unit vectors: centers are random unit vectors, members
/// are center + sigma * noise, renormalized. labels[i] is the cluster of row i.
inline auto gaussian_clusters(std::size_t clusters, std::size_t per_cluster, std::size_t dim, double sigma,
                              std::uint64_t seed, std::vector<std::size_t>& labels) -> RowMatrix {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = clusters * per_cluster;
  RowMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  labels.assign(n, 0);
  std::vector<Eigen::VectorXd> centers;
  for (std::size_t c = 0; c < clusters; ++c) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      v(i) = normal(gen);
    }
    centers.push_back(v.normalized());
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = i % clusters;
    labels[i] = c;
    Eigen::VectorXd v = centers[c];
    for (Eigen::Index d = 0; d < v.size(); ++d) {
      v(d) += sigma * normal(gen);
    }
    m.row(static_cast<Eigen::Index>(i)) = v.normalized().cast<float>().transpose();
  }
  return m;
}

/// Adjusted Rand index between two labelings of the same items.
template <typename A, typename B>
auto adjusted_rand_index(const std::vector<A>& x, const std::vector<B>& y) -> double {
  std::map<A, std::size_t> xi;
  std::map<B, std::size_t> yi;
  for (const auto& a : x) {
    xi.emplace(a, xi.size());
  }
  for (const auto& b : y) {
    yi.emplace(b, yi.size());
  }
  std::vector<std::vector<double>> table(xi.size(), std::vector<double>(yi.size(), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    table[xi[x[i]]][yi[y[i]]] += 1.0;
  }
  auto c2 = [](double v) { return v * (v - 1.0) / 2.0; };
  double index = 0.0;
  std::vector<double> rows(xi.size(), 0.0);
  std::vector<double> cols(yi.size(), 0.0);
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (std::size_t j = 0; j < table[i].size(); ++j) {
      index += c2(table[i][j]);
      rows[i] += table[i][j];
      cols[j] += table[i][j];
    }
  }
  double sum_rows = 0.0;
  double sum_cols = 0.0;
  for (const double r : rows) {
    sum_rows += c2(r);
  }
  for (const double c : cols) {
    sum_cols += c2(c);
  }
  const double expected = sum_rows * sum_cols / c2(static_cast<double>(x.size()));
  const double max_index = (sum_rows + sum_cols) / 2.0;
  if (max_index == expected) {
    return 1.0;
  }
  return (index - expected) / (max_index - expected);
}

struct SyntheticArchive {
  Manifest manifest;
  VectorStore global;
  VectorStore face;
};

inline const std::vector<std::string> kEras = {"Heian", "Kamakura", "Edo", "Nara"};
inline const std::vector<std::string> kTypes = {"Amida", "Kannon", "Shaka"};

/// `statues` statues of `per_statue` images, one face per image. Statue i has
/// era kEras[i % 4], type kTypes[i % 3], notes "bronze" when i % 5 == 0 (else
/// "wood"); its image and face vectors scatter around its own random center.
inline auto synthetic_archive(std::size_t statues, std::size_t per_statue, std::size_t dim, std::uint64_t seed,
                              double sigma = 0.05) -> SyntheticArchive {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = statues * per_statue;
  RowMatrix global(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  RowMatrix face(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  std::vector<std::string> image_ids;
  std::vector<std::string> face_ids;
  Manifest manifest;
  auto around = [&](const Eigen::VectorXd& c) {
    Eigen::VectorXd v = c;
    for (Eigen::Index d = 0; d < v.size(); ++d) {
      v(d) += sigma * normal(gen);
    }
    return v.normalized();
  };
  for (std::size_t s = 0; s < statues; ++s) {
    Eigen::VectorXd gc(static_cast<Eigen::Index>(dim));
    Eigen::VectorXd fc(static_cast<Eigen::Index>(dim));
    for (Eigen::Index d = 0; d < gc.size(); ++d) {
      gc(d) = normal(gen);
      fc(d) = normal(gen);
    }
    gc.normalize();
    fc.normalize();
    StatueRecord statue;
    statue.id = row_ids(statues, "statue:s")[s];
    statue.metadata.set(MetadataField::era, kEras[s % kEras.size()]);
    statue.metadata.set(MetadataField::statue_type, kTypes[s % kTypes.size()]);
    statue.notes = s % 5 == 0 ? "bronze" : "wood";
    for (std::size_t j = 0; j < per_statue; ++j) {
      const auto row = s * per_statue + j;
      ArchiveImage image;
      image.id = "img" + std::to_string(s) + "_" + std::to_string(j);
      image.path = "site" + std::to_string(s % 7) + "/s" + std::to_string(s) + "/p" + std::to_string(j) + ".jpg";
      image.folder_id = "site" + std::to_string(s % 7) + "/s" + std::to_string(s);
      image.global_row = row;
      image.statue_id = statue.id;
      image.width = 640;
      image.height = 480;
      image.face_regions.push_back({"face" + std::to_string(row), image.id, {100, 100, 50, 50}, row});
      global.row(static_cast<Eigen::Index>(row)) = around(gc).cast<float>().transpose();
      face.row(static_cast<Eigen::Index>(row)) = around(fc).cast<float>().transpose();
      image_ids.push_back(image.id);
      face_ids.push_back(image.face_regions.back().face_id);
      statue.image_ids.push_back(image.id);
      manifest.images.push_back(std::move(image));
    }
    std::sort(statue.image_ids.begin(), statue.image_ids.end());
    statue.canonical_image = statue.image_ids.front();
    manifest.statues.push_back(std::move(statue));
  }
  return {std::move(manifest), VectorStore(Namespace::global, global, image_ids),
          VectorStore(Namespace::face, face, face_ids)};
}

struct PlantedArchive {
  Manifest manifest;
  VectorStore global;
  // image id -> planted statue
  std::map<std::string, std::size_t> truth;
  // (original, copy); each copy id sorts after its original
  std::vector<std::pair<std::string, std::string>> copies;
};

/// Uncurated archive with known ground truth. Statue s has 2..6 pictures at
/// cos `center_cos` from its center, split over two folders ("site<s%10>" and
/// "site<(s+3)%10>") with consecutive timestamps. Centers are orthonormal
/// when dim >= statues, random otherwise. `copies` pictures are re-added as
/// near copies (cos 0.99) in the same folder. Every picture carries era
/// kEras[s % 4].
inline auto planted_statues(std::size_t statues, std::size_t copies, std::size_t dim, std::uint64_t seed,
                            double center_cos = 0.9) -> PlantedArchive {
  std::mt19937_64 gen(seed);
  const Eigen::MatrixXd basis = dim >= statues ? orthonormal_centers(statues, dim, seed ^ 0x5eedULL) : Eigen::MatrixXd();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> count(2, 6);
  PlantedArchive out{{}, VectorStore(Namespace::global, dim), {}, {}};
  std::vector<Eigen::VectorXd> rows;
  std::vector<std::string> ids;
  auto add = [&](ArchiveImage image, const Eigen::VectorXd& v, std::size_t s) {
    out.truth[image.id] = s;
    ids.push_back(image.id);
    rows.push_back(v);
    out.manifest.images.push_back(std::move(image));
  };
  for (std::size_t s = 0; s < statues; ++s) {
    Eigen::VectorXd center(static_cast<Eigen::Index>(dim));
    if (basis.size() > 0) {
      center = basis.row(static_cast<Eigen::Index>(s)).transpose();
    } else {
      for (Eigen::Index d = 0; d < center.size(); ++d) {
        center(d) = normal(gen);
      }
      center.normalize();
    }
    const auto n = static_cast<std::size_t>(count(gen));
    for (std::size_t j = 0; j < n; ++j) {
      ArchiveImage image;
      char buf[48];
      std::snprintf(buf, sizeof(buf), "p%04zu-%zu", s, j);
      image.id = buf;
      const auto folder = j < (n + 1) / 2 ? s % 10 : (s + 3) % 10;
      image.folder_id = "site" + std::to_string(folder);
      image.path = image.folder_id + "/" + image.id + ".jpg";
      image.timestamp = static_cast<std::int64_t>(s * 100 + j);
      image.metadata.set(MetadataField::era, kEras[s % kEras.size()]);
      add(std::move(image), perturb(center, center_cos, gen), s);
    }
  }
  std::vector<std::size_t> order(out.manifest.images.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  std::shuffle(order.begin(), order.end(), gen);
  for (std::size_t c = 0; c < copies && c < order.size(); ++c) {
    auto image = out.manifest.images[order[c]];
    const auto s = out.truth.at(image.id);
    const Eigen::VectorXd v = perturb(rows[order[c]], 0.99, gen);
    out.copies.emplace_back(image.id, image.id + "_copy");
    image.id += "_copy";
    image.path = image.folder_id + "/" + image.id + ".jpg";
    *image.timestamp += 50;
    add(std::move(image), v, s);
  }
  RowMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = rows[i].cast<float>().transpose();
  }
  out.global = VectorStore(Namespace::global, m, ids);
  return out;
}

}  // namespace statuary::testing
