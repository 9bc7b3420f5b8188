#pragma once

#include "mvgen/genre.hpp"
#include "mvgen/scene_index.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mvgen {

inline constexpr int kDefaultClusterCount = 90;
inline constexpr int kDefaultMaxIter = 300;
inline constexpr int kDefaultInitRuns = 10;

enum class KMeansInit { RandomPoints, PlusPlus };

struct KMeansOptions {
  int max_iter = kDefaultMaxIter;
  KMeansInit init = KMeansInit::RandomPoints;
  /// Independently seeded runs; the one with the lowest final inertia wins.
  int n_init = kDefaultInitRuns;
};

struct KMeansResult {
  Eigen::MatrixXd centroids;         ///< K x dim
  std::vector<int> labels;           ///< one per input row
  double inertia = 0.0;
  std::vector<double> inertia_history;  ///< after every Lloyd iteration of the winning run
  int iterations = 0;
  bool converged = false;
  int requested_k = 0;  ///< K before reduction to the distinct-point count
};

/// Lloyd's algorithm on the rows of `points`. Rows are processed in
/// lexicographic order, so the result does not depend on input order.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, const KMeansOptions& opts = {});

struct ClusterCatalog {
  std::string genre;  ///< genre key, "whole" for the unfiltered index
  int K = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> centroids;
  std::map<std::string, int> assignments;  ///< "<source_id>:<start_frame>" -> cluster
  double inertia = 0.0;
  std::string index_digest;

  /// Scene refs of one cluster, sorted.
  std::vector<SceneRef> members(int cluster) const;
  std::vector<int> cluster_sizes() const;
};

std::string catalog_slice_key(GenreCategory genre);

std::string catalog_to_json(const ClusterCatalog& catalog);
ClusterCatalog catalog_from_json(std::string_view text);
void save_catalog(const ClusterCatalog& catalog, const std::filesystem::path& path);
ClusterCatalog load_catalog(const std::filesystem::path& path);

/// K-Means over the histograms of a scene list.
ClusterCatalog cluster_scenes(std::span<const IndexedScene* const> scenes, int k, std::uint64_t seed,
                              const KMeansOptions& opts = {});

/// <index>/catalogs/<genre>-k<K>-s<seed>.json
std::filesystem::path catalog_path(const std::filesystem::path& index_dir, GenreCategory genre, int k,
                                   std::uint64_t seed);

/// Clusters one genre slice (Unknown = whole index). Throws EmptySlice.
ClusterCatalog cluster_index(const SceneIndex& index, GenreCategory genre, int k, std::uint64_t seed,
                             const KMeansOptions& opts = {});

/// Reuses the persisted catalog when it matches the index digest, otherwise
/// computes and stores it. `cached` reports which happened.
ClusterCatalog load_or_cluster(const SceneIndex& index, GenreCategory genre, int k, std::uint64_t seed,
                               bool* cached = nullptr, const KMeansOptions& opts = {});

}  // namespace mvgen
