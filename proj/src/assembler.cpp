#include "mvgen/assembler.hpp"

#include "mvgen/error.hpp"
#include "mvgen/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace mvgen {

namespace {
constexpr double kEps = 1e-9;
constexpr double kFrame = 1.0 / 25.0;
}

void AssemblyConfig::validate() const {
  if (C < 1) throw Error(Errc::InvalidArgument, "C must be >= 1");
  if (!(end_offset >= 0)) throw Error(Errc::InvalidArgument, "end_offset must be >= 0");
  if (!(fade_duration >= 0)) throw Error(Errc::InvalidArgument, "fade duration must be >= 0");
  if (max_draws < 0) throw Error(Errc::InvalidArgument, "max_draws must be >= 0");
}

std::map<int, double> cluster_durations(const ClusterCatalog& catalog, const SceneIndex& index) {
  std::map<int, double> out;
  for (int c = 0; c < catalog.K; ++c) out[c] = 0.0;
  for (const auto& [ref, c] : catalog.assignments) {
    if (const auto* s = index.find(SceneRef::parse(ref))) out[c] += s->duration();
  }
  return out;
}

std::vector<int> select_clusters(const ClusterCatalog& catalog, const SceneIndex& index, double l_input,
                                 const AssemblyConfig& cfg) {
  cfg.validate();
  if (catalog.K < 1 || catalog.assignments.empty()) throw Error(Errc::EmptySlice, "cluster catalog is empty");
  const auto durations = cluster_durations(catalog, index);
  std::vector<int> ids;
  double total = 0.0;
  for (const auto& [c, d] : durations) {
    if (d > 0) ids.push_back(c);
    total += d;
  }
  if (!(total > l_input)) {
    std::ostringstream msg;
    msg << "catalog holds " << total << " s of footage, track needs more than " << l_input << " s";
    throw Error(Errc::InsufficientFootage, msg.str());
  }
  auto covered = [&](const std::vector<int>& set) {
    double sum = 0.0;
    for (int c : set) sum += durations.at(c);
    return sum > l_input;
  };

  Rng rng(mix_seed(cfg.seed, 0x5e1ec7));
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(cfg.C), ids.size());
  std::vector<int> draw;
  for (int attempt = 0; attempt < std::max(1, cfg.max_draws); ++attempt) {
    std::vector<int> pool = ids;
    for (std::size_t i = 0; i < take; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    draw.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    if (covered(draw)) return draw;
  }
  // greedy top-up with the largest remaining clusters
  std::vector<int> rest;
  for (int c : ids) {
    if (std::find(draw.begin(), draw.end(), c) == draw.end()) rest.push_back(c);
  }
  std::stable_sort(rest.begin(), rest.end(), [&](int a, int b) { return durations.at(a) > durations.at(b); });
  for (int c : rest) {
    draw.push_back(c);
    if (covered(draw)) break;
  }
  return draw;
}

std::vector<SceneRef> order_scenes(std::vector<SceneRef> members, std::uint64_t seed) {
  std::map<std::string, std::vector<SceneRef>> groups;
  for (auto& m : members) groups[m.source_id].push_back(std::move(m));
  std::vector<std::vector<SceneRef>*> order;
  for (auto& [id, g] : groups) {
    std::sort(g.begin(), g.end());
    order.push_back(&g);
  }
  Rng rng(seed);
  rng.shuffle(std::span(order));
  std::vector<SceneRef> out;
  for (auto* g : order) out.insert(out.end(), g->begin(), g->end());
  return out;
}

namespace {

struct Queue {
  int cluster = 0;
  std::vector<const IndexedScene*> scenes;
  std::size_t next = 0;
};

class Builder {
 public:
  Builder(const ClusterCatalog& catalog, const SceneIndex& index, const AssemblyConfig& cfg,
          const std::vector<int>& selected)
      : catalog_(catalog), index_(index), cfg_(cfg) {
    for (int c : selected) add_queue(c);
    // clusters held back for exhaustion, largest first
    const auto durations = cluster_durations(catalog, index);
    for (const auto& [c, d] : durations) {
      if (d > 0 && std::find(selected.begin(), selected.end(), c) == selected.end()) spare_.push_back(c);
    }
    std::stable_sort(spare_.begin(), spare_.end(),
                     [&](int a, int b) { return durations.at(a) > durations.at(b); });
  }

  double t() const { return t_; }
  const EditDecisionList& edl() const { return edl_; }
  EditDecisionList& edl() { return edl_; }

  void reserve(const IndexedScene* s) { used_.insert(s); }

  // Fills [t, limit) switching cluster at every boundary crossed. A gap of
  // under one output frame before a boundary (or before `limit` when
  // `stop_short`) is not filled; the switch happens at the scene end instead.
  void fill(double limit, const std::vector<double>& boundaries, bool stop_short = false) {
    while (t_ < limit - kEps) {
      while (next_boundary_ < boundaries.size() && boundaries[next_boundary_] <= t_ + kEps) ++next_boundary_;
      double span_end = limit;
      bool at_boundary = false;
      if (next_boundary_ < boundaries.size() && boundaries[next_boundary_] < limit + kEps) {
        span_end = boundaries[next_boundary_];
        at_boundary = true;
      }
      const IndexedScene* scene = take(avoid_);
      avoid_ = -1;
      const double len = std::min(scene->duration(), span_end - t_);
      push(scene, 0.0, len, queues_[cursor_].cluster);
      const bool short_gap = (at_boundary || stop_short) && span_end - t_ < kFrame;
      if (t_ >= span_end - kEps || short_gap) {
        if (t_ >= span_end - kEps) t_ = span_end;
        if (at_boundary) {
          ++next_boundary_;
          avoid_ = queues_[cursor_].cluster;
          cursor_ = (cursor_ + 1) % queues_.size();
        }
        if (span_end >= limit - kEps) break;
      }
    }
    if (t_ >= limit - kEps) t_ = std::max(t_, limit);
  }

  int last_cluster() const { return edl_.entries.empty() ? -1 : edl_.entries.back().cluster; }
  int pending_avoid() const { return avoid_; }

  // Unused scenes of the active clusters, pulling in spare clusters if none remain.
  std::vector<std::pair<const IndexedScene*, int>> unused(int avoid) {
    for (;;) {
      std::vector<std::pair<const IndexedScene*, int>> out;
      for (const auto& q : queues_) {
        if (q.cluster == avoid) continue;
        for (const auto* s : q.scenes) {
          if (!used_.count(s)) out.emplace_back(s, q.cluster);
        }
      }
      if (!out.empty() || !extend()) return out;
    }
  }

  void push(const IndexedScene* scene, double trim_in, double trim_out, int cluster) {
    EdlEntry e;
    e.scene = scene->ref().str();
    e.trim_in = trim_in;
    e.trim_out = trim_out;
    e.out_start = t_;
    e.cluster = cluster;
    edl_.entries.push_back(e);
    used_.insert(scene);
    t_ += trim_out - trim_in;
  }

 private:
  void add_queue(int cluster) {
    Queue q;
    q.cluster = cluster;
    for (const auto& ref : order_scenes(catalog_.members(cluster), mix_seed(cfg_.seed, static_cast<std::uint64_t>(cluster)))) {
      if (const auto* s = index_.find(ref)) q.scenes.push_back(s);
    }
    queues_.push_back(std::move(q));
  }

  bool extend() {
    if (spare_.empty()) return false;
    add_queue(spare_.front());
    spare_.erase(spare_.begin());
    return true;
  }

  bool has_scene(Queue& q) {
    while (q.next < q.scenes.size() && used_.count(q.scenes[q.next])) ++q.next;
    return q.next < q.scenes.size();
  }

  // Next scene from the cursor's cluster; on exhaustion the cursor moves on
  // cyclically, preferring a cluster other than `avoid`.
  const IndexedScene* take(int avoid) {
    for (;;) {
      for (std::size_t step = 0; step < queues_.size(); ++step) {
        const std::size_t i = (cursor_ + step) % queues_.size();
        if (queues_[i].cluster != avoid && has_scene(queues_[i])) {
          cursor_ = i;
          return queues_[i].scenes[queues_[i].next];
        }
      }
      if (!extend()) break;
    }
    for (std::size_t i = 0; i < queues_.size(); ++i) {
      if (has_scene(queues_[i])) {
        cursor_ = i;
        return queues_[i].scenes[queues_[i].next];
      }
    }
    throw Error(Errc::InsufficientFootage, "ran out of unused scenes while filling the track");
  }

  const ClusterCatalog& catalog_;
  const SceneIndex& index_;
  const AssemblyConfig& cfg_;
  std::vector<Queue> queues_;
  std::vector<int> spare_;
  std::set<const IndexedScene*> used_;
  std::size_t cursor_ = 0;
  std::size_t next_boundary_ = 0;
  int avoid_ = -1;
  double t_ = 0.0;
  EditDecisionList edl_;
};

}  // namespace

EditDecisionList assemble(const BoundarySet& boundaries, const std::vector<int>& clusters,
                          const ClusterCatalog& catalog, const SceneIndex& index, const AssemblyConfig& cfg) {
  cfg.validate();
  if (!boundaries.valid()) throw Error(Errc::InvalidArgument, "boundary set is not valid");
  if (clusters.empty()) throw Error(Errc::InsufficientFootage, "no clusters selected");
  const double D = boundaries.duration();
  const std::vector<double> internal(boundaries.times.begin() + 1, boundaries.times.end() - 1);

  Builder b(catalog, index, cfg, clusters);
  b.edl().audio_duration = D;

  const double tail_start = std::max({D - cfg.end_offset, internal.empty() ? 0.0 : internal.back(), 0.0});
  b.fill(tail_start, internal, true);

  // closing scene: smallest unused one that covers the rest, else the longest
  const double remaining = D - b.t();
  if (remaining > kEps) {
    const int avoid = b.pending_avoid();
    auto pool = b.unused(avoid);
    if (pool.empty()) pool = b.unused(-1);
    if (pool.empty()) throw Error(Errc::InsufficientFootage, "no scene left for the ending");
    const IndexedScene* best = nullptr;
    int best_cluster = -1;
    for (const auto& [s, c] : pool) {
      if (s->duration() + kEps >= remaining && (!best || s->duration() < best->duration())) {
        best = s;
        best_cluster = c;
      }
    }
    if (best) {
      b.push(best, 0.0, std::min(best->duration(), remaining), best_cluster);
    } else {
      for (const auto& [s, c] : pool) {
        if (!best || s->duration() > best->duration()) {
          best = s;
          best_cluster = c;
        }
      }
      b.reserve(best);
      b.fill(D - best->duration(), internal);
      b.push(best, 0.0, D - b.t(), best_cluster);
    }
  }
  auto& edl = b.edl();
  if (!edl.entries.empty()) {
    // absorb rounding so the last entry ends exactly at D
    auto& last = edl.entries.back();
    last.trim_out = std::max(last.trim_in, D - last.out_start);
  }
  const double fade = std::min(cfg.fade_duration, D);
  edl.fade_out = FadeOut{D - fade, fade};
  return edl;
}

}  // namespace mvgen
