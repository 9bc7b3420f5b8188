#include "mvgen/clustering.hpp"

#include "mvgen/error.hpp"
#include "mvgen/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace mvgen {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool row_less(const Eigen::MatrixXd& m, Eigen::Index a, Eigen::Index b) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (m(a, j) != m(b, j)) return m(a, j) < m(b, j);
  }
  return false;
}

bool row_equal(const Eigen::MatrixXd& m, Eigen::Index a, Eigen::Index b) {
  return (m.row(a).array() == m.row(b).array()).all();
}

// Nearest centroid; ties keep `current` if it is among the best, else the lowest id.
int nearest(const Eigen::RowVectorXd& x, const Eigen::MatrixXd& centroids, int current, double* dist) {
  const Eigen::VectorXd d = (centroids.rowwise() - x).rowwise().squaredNorm();
  int best = 0;
  for (Eigen::Index c = 1; c < d.size(); ++c) {
    if (d(c) < d(best)) best = static_cast<int>(c);
  }
  if (current >= 0 && d(current) == d(best)) best = current;
  if (dist) *dist = d(best);
  return best;
}

Eigen::MatrixXd initial_centroids(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& distinct, int k,
                                  std::uint64_t seed, KMeansInit init) {
  Rng rng(seed);
  Eigen::MatrixXd c(k, x.cols());
  if (init == KMeansInit::RandomPoints) {
    std::vector<Eigen::Index> pick = distinct;
    // partial Fisher-Yates
    for (int i = 0; i < k; ++i) {
      const auto j = static_cast<std::size_t>(i) + static_cast<std::size_t>(rng.below(pick.size() - i));
      std::swap(pick[static_cast<std::size_t>(i)], pick[j]);
      c.row(i) = x.row(pick[static_cast<std::size_t>(i)]);
    }
    return c;
  }
  std::vector<double> d2(distinct.size(), std::numeric_limits<double>::infinity());
  std::size_t chosen = static_cast<std::size_t>(rng.below(distinct.size()));
  for (int i = 0; i < k; ++i) {
    c.row(i) = x.row(distinct[chosen]);
    double total = 0.0;
    for (std::size_t p = 0; p < distinct.size(); ++p) {
      d2[p] = std::min(d2[p], (x.row(distinct[p]) - c.row(i)).squaredNorm());
      total += d2[p];
    }
    if (i + 1 == k) break;
    double r = rng.uniform() * total;
    chosen = distinct.size() - 1;
    for (std::size_t p = 0; p < distinct.size(); ++p) {
      if (d2[p] <= 0.0) continue;
      if (r < d2[p]) {
        chosen = p;
        break;
      }
      r -= d2[p];
    }
    while (d2[chosen] <= 0.0) chosen = (chosen + distinct.size() - 1) % distinct.size();
  }
  return c;
}

// One Lloyd run on lexicographically sorted rows; labels stay in sorted order.
KMeansResult lloyd(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& distinct, int k, std::uint64_t seed,
                   const KMeansOptions& opts) {
  const Eigen::Index n = x.rows();
  KMeansResult out;
  Eigen::MatrixXd centroids = initial_centroids(x, distinct, k, seed, opts.init);
  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    std::size_t changes = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const int label = nearest(x.row(i), centroids, labels[u], &dist[u]);
      if (label != labels[u]) ++changes;
      labels[u] = label;
    }

    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      // move the farthest point into the empty cluster
      std::size_t far = 0;
      for (std::size_t i = 1; i < dist.size(); ++i) {
        if (dist[i] > dist[far]) far = i;
      }
      --counts[static_cast<std::size_t>(labels[far])];
      labels[far] = c;
      dist[far] = 0.0;
      counts[static_cast<std::size_t>(c)] = 1;
      ++changes;
    }

    if (changes == 0) {
      out.converged = true;
      break;
    }
    out.iterations = iter + 1;

    centroids.setZero();
    for (Eigen::Index i = 0; i < n; ++i) centroids.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
    for (int c = 0; c < k; ++c) centroids.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);

    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      inertia += (x.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
    }
    out.inertia_history.push_back(inertia);
  }
  out.centroids = centroids;
  out.inertia = out.inertia_history.empty() ? 0.0 : out.inertia_history.back();
  out.labels = std::move(labels);
  return out;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, const KMeansOptions& opts) {
  if (k < 1) throw Error(Errc::InvalidArgument, "K must be >= 1");
  if (points.rows() == 0) throw Error(Errc::EmptySlice, "no points to cluster");
  if (opts.max_iter < 1) throw Error(Errc::InvalidArgument, "max_iter must be >= 1");
  if (opts.n_init < 1) throw Error(Errc::InvalidArgument, "n_init must be >= 1");
  const Eigen::Index n = points.rows();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return row_less(points, a, b); });
  Eigen::MatrixXd x(n, points.cols());
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = points.row(order[static_cast<std::size_t>(i)]);

  std::vector<Eigen::Index> distinct{0};
  for (Eigen::Index i = 1; i < n; ++i) {
    if (!row_equal(x, i, i - 1)) distinct.push_back(i);
  }
  const int requested = k;
  k = std::min<int>(k, static_cast<int>(distinct.size()));

  KMeansResult best;
  for (int run = 0; run < opts.n_init; ++run) {
    KMeansResult r = lloyd(x, distinct, k, run == 0 ? seed : mix_seed(seed, static_cast<std::uint64_t>(run)), opts);
    if (run == 0 || r.inertia < best.inertia) best = std::move(r);
  }

  best.requested_k = requested;
  std::vector<int> sorted_labels = std::move(best.labels);
  best.labels.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    best.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = sorted_labels[static_cast<std::size_t>(i)];
  }
  return best;
}

std::vector<SceneRef> ClusterCatalog::members(int cluster) const {
  std::vector<SceneRef> out;
  for (const auto& [ref, c] : assignments) {
    if (c == cluster) out.push_back(SceneRef::parse(ref));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> ClusterCatalog::cluster_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(K), 0);
  for (const auto& [ref, c] : assignments) ++sizes[static_cast<std::size_t>(c)];
  return sizes;
}

std::string catalog_slice_key(GenreCategory genre) {
  return genre == GenreCategory::Unknown ? "whole" : std::string(genre_key(genre));
}

std::string catalog_to_json(const ClusterCatalog& catalog) {
  json doc;
  doc["genre"] = catalog.genre;
  doc["K"] = catalog.K;
  doc["seed"] = catalog.seed;
  doc["centroids"] = catalog.centroids;
  json assignments = json::object();
  for (const auto& [ref, c] : catalog.assignments) assignments[ref] = c;
  doc["assignments"] = std::move(assignments);
  doc["inertia"] = catalog.inertia;
  doc["index_digest"] = catalog.index_digest;
  return doc.dump(2) + "\n";
}

ClusterCatalog catalog_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    ClusterCatalog c;
    c.genre = doc.at("genre").get<std::string>();
    c.K = doc.at("K").get<int>();
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.centroids = doc.at("centroids").get<std::vector<std::vector<double>>>();
    c.assignments = doc.at("assignments").get<std::map<std::string, int>>();
    c.inertia = doc.at("inertia").get<double>();
    c.index_digest = doc.value("index_digest", std::string());
    if (c.K < 1 || static_cast<int>(c.centroids.size()) != c.K) {
      throw Error(Errc::CorruptIndex, "catalog centroid count does not match K");
    }
    for (const auto& [ref, id] : c.assignments) {
      if (id < 0 || id >= c.K) throw Error(Errc::CorruptIndex, "catalog assignment out of range: " + ref);
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptIndex, std::string("malformed catalog: ") + e.what());
  }
}

void save_catalog(const ClusterCatalog& catalog, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
    out << catalog_to_json(catalog);
    if (!out) throw Error(Errc::Io, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

ClusterCatalog load_catalog(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return catalog_from_json(ss.str());
}

ClusterCatalog cluster_scenes(std::span<const IndexedScene* const> scenes, int k, std::uint64_t seed,
                              const KMeansOptions& opts) {
  if (scenes.empty()) throw Error(Errc::EmptySlice, "no scenes to cluster");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(scenes.size()), static_cast<Eigen::Index>(kHistogramBins));
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    for (std::size_t j = 0; j < kHistogramBins; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = scenes[i]->histogram.values[j];
    }
  }
  const KMeansResult r = kmeans(x, k, seed, opts);
  ClusterCatalog c;
  c.K = static_cast<int>(r.centroids.rows());
  c.seed = seed;
  c.inertia = r.inertia;
  for (Eigen::Index i = 0; i < r.centroids.rows(); ++i) {
    c.centroids.emplace_back(r.centroids.row(i).data(), r.centroids.row(i).data() + r.centroids.cols());
  }
  for (std::size_t i = 0; i < scenes.size(); ++i) c.assignments[scenes[i]->ref().str()] = r.labels[i];
  return c;
}

fs::path catalog_path(const fs::path& index_dir, GenreCategory genre, int k, std::uint64_t seed) {
  return index_dir / "catalogs" /
         (catalog_slice_key(genre) + "-k" + std::to_string(k) + "-s" + std::to_string(seed) + ".json");
}

ClusterCatalog cluster_index(const SceneIndex& index, GenreCategory genre, int k, std::uint64_t seed,
                             const KMeansOptions& opts) {
  const auto scenes = index.slice(genre);
  if (scenes.empty()) {
    throw Error(Errc::EmptySlice, "index has no scenes for genre '" + catalog_slice_key(genre) + "'");
  }
  ClusterCatalog c = cluster_scenes(scenes, k, seed, opts);
  c.genre = catalog_slice_key(genre);
  c.index_digest = index_digest(index);
  return c;
}

ClusterCatalog load_or_cluster(const SceneIndex& index, GenreCategory genre, int k, std::uint64_t seed, bool* cached,
                               const KMeansOptions& opts) {
  const fs::path path = catalog_path(index.root, genre, k, seed);
  if (cached) *cached = false;
  if (fs::exists(path)) {
    try {
      ClusterCatalog c = load_catalog(path);
      if (c.index_digest == index_digest(index)) {
        if (cached) *cached = true;
        return c;
      }
    } catch (const Error&) {
      // stale or damaged: rebuild below
    }
  }
  ClusterCatalog c = cluster_index(index, genre, k, seed, opts);
  save_catalog(c, path);
  return c;
}

}  // namespace mvgen
