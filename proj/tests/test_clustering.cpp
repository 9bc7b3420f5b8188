#include "fixtures.hpp"
#include "mvgen/clustering.hpp"
#include "mvgen/error.hpp"
#include "mvgen/rng.hpp"

#include <gtest/gtest.h>

#include <openssl/sha.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

using namespace mvgen;

namespace {

Eigen::MatrixXd histogram_rows(const std::vector<ColorHistogram768>& hs) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(hs.size()), 768);
  for (std::size_t i = 0; i < hs.size(); ++i)
    for (std::size_t j = 0; j < 768; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = hs[i].values[j];
  return x;
}

double normal(Rng& rng) {
  return std::sqrt(-2.0 * std::log(std::max(rng.uniform(), 1e-300))) * std::cos(2 * M_PI * rng.uniform());
}

// 3 blobs, sigma 0.001 around 3 random histograms
Eigen::MatrixXd blobs(std::uint64_t seed, int per_blob, std::vector<int>& truth) {
  Rng rng(seed);
  Eigen::MatrixXd x(3 * per_blob, 768);
  truth.clear();
  for (int b = 0; b < 3; ++b) {
    const auto center = fixtures::random_histogram(seed * 10 + static_cast<std::uint64_t>(b));
    for (int i = 0; i < per_blob; ++i) {
      const int row = b * per_blob + i;
      for (int j = 0; j < 768; ++j) x(row, j) = center.values[static_cast<std::size_t>(j)] + 0.001 * normal(rng);
      truth.push_back(b);
    }
  }
  return x;
}

std::string sha(const std::string& s) {
  unsigned char md[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(s.data()), s.size(), md);
  return std::string(reinterpret_cast<char*>(md), sizeof md);
}

SceneIndex tiny_index(int videos, int scenes_per_video, GenreCategory genre) {
  SceneIndex idx;
  std::uint64_t s = 0;
  for (int v = 0; v < videos; ++v) {
    VideoRecord r;
    r.source_id = "v" + std::to_string(v);
    r.genre = genre;
    std::int64_t at = 0;
    for (int k = 0; k < scenes_per_video; ++k) {
      IndexedScene sc;
      sc.scene = {r.source_id, at, at + 49, 25.0};
      sc.histogram = fixtures::random_histogram(++s);
      at += 50;
      r.scenes.push_back(sc);
    }
    idx.videos[r.source_id] = r;
  }
  return idx;
}

}  // namespace

TEST(KMeans, EachDistinctPointItsOwnCluster) {
  std::vector<ColorHistogram768> hs;
  for (int i = 0; i < 12; ++i) hs.push_back(fixtures::random_histogram(100 + i));
  const auto r = kmeans(histogram_rows(hs), 12, 4);
  EXPECT_EQ(r.inertia, 0.0);
  EXPECT_EQ(std::set<int>(r.labels.begin(), r.labels.end()).size(), 12u);
}

TEST(KMeans, ThreeBlobsRecoverMembership) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::vector<int> truth;
    const auto x = blobs(seed, 15, truth);
    const auto r = kmeans(x, 3, seed);
    // nearest-blob oracle: group labels by true blob, require a bijection
    std::map<int, std::set<int>> by_blob;
    for (std::size_t i = 0; i < truth.size(); ++i) by_blob[truth[i]].insert(r.labels[i]);
    std::set<int> used;
    for (const auto& [b, labels] : by_blob) {
      ASSERT_EQ(labels.size(), 1u) << "blob " << b << " split, seed " << seed;
      used.insert(*labels.begin());
    }
    EXPECT_EQ(used.size(), 3u);
  }
}

TEST(KMeans, InertiaNeverIncreases) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::vector<ColorHistogram768> hs;
    for (int i = 0; i < 60; ++i) hs.push_back(fixtures::random_histogram(seed * 1000 + i));
    const auto r = kmeans(histogram_rows(hs), 7, seed);
    ASSERT_FALSE(r.inertia_history.empty());
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i) {
      EXPECT_LE(r.inertia_history[i], r.inertia_history[i - 1] * (1 + 1e-12)) << seed;
    }
    EXPECT_TRUE(r.converged);
  }
}

TEST(KMeans, CentroidsAreMemberMeans) {
  std::vector<int> truth;
  const auto x = blobs(9, 10, truth);
  const auto r = kmeans(x, 5, 2);
  double inertia = 0.0;
  for (Eigen::Index c = 0; c < r.centroids.rows(); ++c) {
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(768);
    int n = 0;
    for (std::size_t i = 0; i < r.labels.size(); ++i)
      if (r.labels[i] == c) {
        sum += x.row(static_cast<Eigen::Index>(i));
        ++n;
      }
    ASSERT_GT(n, 0);
    EXPECT_LT((sum / n - r.centroids.row(c)).cwiseAbs().maxCoeff(), 1e-9);
  }
  for (std::size_t i = 0; i < r.labels.size(); ++i)
    inertia += (x.row(static_cast<Eigen::Index>(i)) - r.centroids.row(r.labels[i])).squaredNorm();
  EXPECT_NEAR(r.inertia, inertia, 1e-9);
}

TEST(KMeans, SingleClusterIsGlobalMean) {
  std::vector<ColorHistogram768> hs;
  for (int i = 0; i < 25; ++i) hs.push_back(fixtures::random_histogram(500 + i));
  const auto x = histogram_rows(hs);
  const auto r = kmeans(x, 1, 0);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  EXPECT_LT((r.centroids.row(0) - mean).cwiseAbs().maxCoeff(), 1e-12);
  // total variance x N
  double var_sum = 0.0;
  for (Eigen::Index j = 0; j < 768; ++j) var_sum += (x.col(j).array() - mean(j)).square().mean();
  EXPECT_NEAR(r.inertia, var_sum * 25, 1e-9);
}

TEST(KMeans, PermutationInvariant) {
  std::vector<ColorHistogram768> hs;
  for (int i = 0; i < 40; ++i) hs.push_back(fixtures::random_histogram(900 + i));
  const auto a = kmeans(histogram_rows(hs), 6, 3);
  Rng rng(1);
  rng.shuffle(std::span(hs));
  const auto b = kmeans(histogram_rows(hs), 6, 3);
  EXPECT_EQ(a.inertia, b.inertia);
  auto sizes = [](const KMeansResult& r) {
    std::vector<int> s(static_cast<std::size_t>(r.centroids.rows()), 0);
    for (int l : r.labels) ++s[static_cast<std::size_t>(l)];
    std::sort(s.begin(), s.end());
    return s;
  };
  EXPECT_EQ(sizes(a), sizes(b));
}

TEST(KMeans, KReducedToDistinctPoints) {
  std::vector<ColorHistogram768> hs;
  for (int i = 0; i < 9; ++i) hs.push_back(fixtures::random_histogram(i % 3));
  const auto r = kmeans(histogram_rows(hs), 8, 0);
  EXPECT_EQ(r.centroids.rows(), 3);
  EXPECT_EQ(r.requested_k, 8);
  // means of repeated identical rows may round in the last bit
  EXPECT_LT(r.inertia, 1e-20);
}

TEST(KMeans, PlusPlusInitAlsoConverges) {
  std::vector<int> truth;
  const auto x = blobs(3, 12, truth);
  KMeansOptions opts;
  opts.init = KMeansInit::PlusPlus;
  const auto r = kmeans(x, 3, 7, opts);
  EXPECT_TRUE(r.converged);
  std::map<int, std::set<int>> by_blob;
  for (std::size_t i = 0; i < truth.size(); ++i) by_blob[truth[i]].insert(r.labels[i]);
  for (const auto& [b, labels] : by_blob) EXPECT_EQ(labels.size(), 1u);
}

TEST(KMeans, RestartsKeepLowestInertia) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<int> truth;
    const auto x = blobs(seed + 40, 10, truth);
    KMeansOptions one;
    one.n_init = 1;
    const auto single = kmeans(x, 4, seed, one);
    const auto best = kmeans(x, 4, seed);
    EXPECT_LE(best.inertia, single.inertia);
  }
  KMeansOptions none;
  none.n_init = 0;
  EXPECT_THROW(kmeans(Eigen::MatrixXd::Ones(3, 2), 1, 0, none), Error);
}

TEST(KMeans, InvalidArguments) {
  EXPECT_THROW(kmeans(Eigen::MatrixXd(0, 768), 3, 0), Error);
  EXPECT_THROW(kmeans(Eigen::MatrixXd::Zero(4, 2), 0, 0), Error);
}

TEST(Catalog, SliceAndDeterminism) {
  auto idx = tiny_index(3, 10, GenreCategory::RockMetalAlternative);
  const auto a = cluster_index(idx, GenreCategory::RockMetalAlternative, 5, 11);
  const auto b = cluster_index(idx, GenreCategory::RockMetalAlternative, 5, 11);
  EXPECT_EQ(a.assignments.size(), 30u);
  EXPECT_EQ(sha(catalog_to_json(a)), sha(catalog_to_json(b)));
  EXPECT_EQ(a.genre, "rock");
  const auto whole = cluster_index(idx, GenreCategory::Unknown, 5, 11);
  EXPECT_EQ(whole.genre, "whole");
  EXPECT_EQ(whole.assignments, a.assignments);
  try {
    cluster_index(idx, GenreCategory::PopIndie, 5, 11);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptySlice);
  }
}

TEST(Catalog, JsonRoundTripAndMembers) {
  auto idx = tiny_index(2, 8, GenreCategory::PopIndie);
  const auto c = cluster_index(idx, GenreCategory::PopIndie, 4, 2);
  const auto back = catalog_from_json(catalog_to_json(c));
  EXPECT_EQ(catalog_to_json(back), catalog_to_json(c));
  std::size_t total = 0;
  for (int k = 0; k < c.K; ++k) {
    const auto m = c.members(k);
    EXPECT_TRUE(std::is_sorted(m.begin(), m.end()));
    total += m.size();
  }
  EXPECT_EQ(total, 16u);
  EXPECT_THROW(catalog_from_json("{\"genre\":\"pop\"}"), Error);
}

TEST(Catalog, PersistedAndReused) {
  fixtures::TempDir dir;
  auto idx = tiny_index(2, 6, GenreCategory::HipHopRapRnB);
  idx.root = dir.path();
  save_index(idx, dir.path());
  idx = load_index(dir.path());
  bool cached = true;
  const auto first = load_or_cluster(idx, GenreCategory::HipHopRapRnB, 3, 5, &cached);
  EXPECT_FALSE(cached);
  EXPECT_TRUE(std::filesystem::exists(catalog_path(dir.path(), GenreCategory::HipHopRapRnB, 3, 5)));
  const auto second = load_or_cluster(idx, GenreCategory::HipHopRapRnB, 3, 5, &cached);
  EXPECT_TRUE(cached);
  EXPECT_EQ(catalog_to_json(first), catalog_to_json(second));
}
