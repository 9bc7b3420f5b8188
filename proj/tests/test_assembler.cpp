#include "fixtures.hpp"
#include "mvgen/assembler.hpp"
#include "mvgen/error.hpp"
#include "mvgen/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace mvgen;

namespace {

struct Fixture {
  SceneIndex index;
  ClusterCatalog catalog;
};

// `videos` sources with random 12..125-frame scenes, dealt into K clusters at random.
Fixture make_fixture(std::uint64_t seed, int videos, int scenes_per_video, int k) {
  Rng rng(seed);
  Fixture f;
  f.catalog.K = k;
  f.catalog.centroids.assign(static_cast<std::size_t>(k), std::vector<double>(768, 0.0));
  for (int v = 0; v < videos; ++v) {
    VideoRecord r;
    r.source_id = "mv" + std::to_string(v);
    std::int64_t at = 0;
    for (int s = 0; s < scenes_per_video; ++s) {
      const auto len = static_cast<std::int64_t>(12 + rng.below(114));
      IndexedScene sc;
      sc.scene = {r.source_id, at, at + len - 1, 25.0};
      sc.histogram = fixtures::random_histogram(rng.next());
      r.scenes.push_back(sc);
      f.catalog.assignments[sc.ref().str()] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
      at += len + static_cast<std::int64_t>(rng.below(5));
    }
    f.index.videos[r.source_id] = r;
  }
  return f;
}

BoundarySet random_boundaries(std::uint64_t seed, double duration) {
  Rng rng(seed);
  BoundarySet b;
  b.times.push_back(0.0);
  double t = 0.0;
  for (;;) {
    t += 8.0 + rng.uniform() * 30.0;
    if (t >= duration - 1.0) break;
    b.times.push_back(std::round(t * 1000) / 1000);
  }
  b.times.push_back(duration);
  return b;
}

// Walks the EDL as a player would and checks every structural property.
void simulate(const EditDecisionList& edl, const BoundarySet& b, const Fixture& f, bool single_cluster = false) {
  const double D = b.duration();
  const double frame = 1.0 / 25.0;
  ASSERT_FALSE(edl.entries.empty());
  EXPECT_NEAR(edl.entries.front().out_start, 0.0, 1e-9);
  double cursor = 0.0;
  std::set<std::string> seen;
  for (const auto& e : edl.entries) {
    EXPECT_LT(std::abs(e.out_start - cursor), frame) << e.scene;
    EXPECT_GE(e.trim_in, 0.0);
    EXPECT_GT(e.trim_out, e.trim_in);
    EXPECT_GE(e.length(), frame - 1e-9) << "sliver at " << e.out_start;
    const auto* s = f.index.find(SceneRef::parse(e.scene));
    ASSERT_NE(s, nullptr);
    EXPECT_LE(e.trim_out, s->duration() + 1e-9);
    EXPECT_TRUE(seen.insert(e.scene).second) << "repeat " << e.scene;
    EXPECT_EQ(f.catalog.assignments.at(e.scene), e.cluster);
    cursor = e.out_start + e.length();
  }
  EXPECT_LT(std::abs(cursor - D), frame);
  for (std::size_t k = 1; k + 1 < b.times.size(); ++k) {
    const double t = b.times[k];
    auto it = std::find_if(edl.entries.begin(), edl.entries.end(),
                           [&](const EdlEntry& e) { return std::abs(e.out_start - t) < frame; });
    ASSERT_NE(it, edl.entries.end()) << "no cut at boundary " << t;
    ASSERT_NE(it, edl.entries.begin());
    if (!single_cluster) EXPECT_NE(it->cluster, std::prev(it)->cluster) << "no switch at " << t;
  }
  ASSERT_TRUE(edl.fade_out.has_value());
  EXPECT_NEAR(edl.fade_out->start + edl.fade_out->duration, D, 1e-9);
  EXPECT_NEAR(edl.fade_out->duration, 1.0, 1e-12);
}

}  // namespace

TEST(Config, Defaults) {
  AssemblyConfig cfg;
  EXPECT_EQ(cfg.C, 5);
  EXPECT_EQ(cfg.end_offset, 10.0);
  EXPECT_EQ(cfg.fade_duration, 1.0);
  cfg.C = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(SelectClusters, CoverageHoldsAcrossSeeds) {
  const auto f = make_fixture(1, 8, 30, 10);
  const auto durations = cluster_durations(f.catalog, f.index);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    AssemblyConfig cfg;
    cfg.seed = seed;
    const double l_input = 60.0 + static_cast<double>(seed % 7) * 40.0;
    const auto chosen = select_clusters(f.catalog, f.index, l_input, cfg);
    double sum = 0.0;
    for (int c : chosen) sum += durations.at(c);
    EXPECT_GT(sum, l_input) << seed;
    EXPECT_GE(chosen.size(), std::min<std::size_t>(5, durations.size()));
    EXPECT_EQ(std::set<int>(chosen.begin(), chosen.end()).size(), chosen.size());
  }
}

TEST(SelectClusters, InsufficientFootage) {
  const auto f = make_fixture(2, 1, 5, 2);
  AssemblyConfig cfg;
  try {
    select_clusters(f.catalog, f.index, 400.0, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientFootage);
  }
}

TEST(SelectClusters, ForcedSingleCluster) {
  SceneIndex idx;
  ClusterCatalog cat;
  cat.K = 1;
  cat.centroids.assign(1, std::vector<double>(768, 0.0));
  VideoRecord r;
  r.source_id = "x";
  for (int s = 0; s < 40; ++s) {
    IndexedScene sc;
    sc.scene = {"x", s * 125, s * 125 + 124, 25.0};
    sc.histogram = fixtures::random_histogram(static_cast<std::uint64_t>(s));
    r.scenes.push_back(sc);
    cat.assignments[sc.ref().str()] = 0;
  }
  idx.videos["x"] = r;
  AssemblyConfig cfg;
  cfg.C = 1;
  EXPECT_EQ(select_clusters(cat, idx, 180.0, cfg), std::vector<int>{0});
}

TEST(SelectClusters, GreedyTopUpWhenDrawsFail) {
  const auto f = make_fixture(3, 6, 30, 10);
  const auto durations = cluster_durations(f.catalog, f.index);
  double total = 0.0;
  for (const auto& [c, d] : durations) total += d;
  AssemblyConfig cfg;
  cfg.C = 1;
  cfg.max_draws = 3;
  const auto chosen = select_clusters(f.catalog, f.index, total * 0.9, cfg);
  double sum = 0.0;
  for (int c : chosen) sum += durations.at(c);
  EXPECT_GT(sum, total * 0.9);
  EXPECT_GT(chosen.size(), 1u);
}

TEST(OrderScenes, SingleSourceKeepsOrder) {
  std::vector<SceneRef> refs = {{"a", 300}, {"a", 10}, {"a", 120}};
  const auto out = order_scenes(refs, 5);
  EXPECT_EQ(out, (std::vector<SceneRef>{{"a", 10}, {"a", 120}, {"a", 300}}));
}

TEST(OrderScenes, GroupsStayContiguousAndOrdered) {
  std::vector<SceneRef> refs;
  for (int g = 0; g < 5; ++g)
    for (int s = 0; s < 4; ++s) refs.push_back({"g" + std::to_string(g), (7 - s) * 10});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto out = order_scenes(refs, seed);
    ASSERT_EQ(out.size(), refs.size());
    std::set<std::string> closed;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (i > 0 && out[i].source_id != out[i - 1].source_id) {
        EXPECT_TRUE(closed.insert(out[i - 1].source_id).second);
        EXPECT_FALSE(closed.count(out[i].source_id));
      }
      if (i > 0 && out[i].source_id == out[i - 1].source_id) EXPECT_LT(out[i - 1].start_frame, out[i].start_frame);
    }
  }
}

TEST(OrderScenes, SeedsPermuteGroups) {
  // g = 5 groups: two seeds agree with probability 1/120
  std::vector<SceneRef> refs;
  for (int g = 0; g < 5; ++g) refs.push_back({"g" + std::to_string(g), 0});
  const auto base = order_scenes(refs, 0);
  int same = 0;
  std::set<std::vector<SceneRef>> distinct;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto out = order_scenes(refs, seed);
    same += out == base;
    distinct.insert(out);
  }
  EXPECT_LE(same, 5);
  EXPECT_GE(distinct.size(), 40u);
}

TEST(Assemble, NoInternalBoundary) {
  const auto f = make_fixture(4, 6, 40, 6);
  BoundarySet b{{0.0, 120.0}};
  AssemblyConfig cfg;
  cfg.seed = 1;
  const auto clusters = select_clusters(f.catalog, f.index, 120.0, cfg);
  const auto edl = assemble(b, clusters, f.catalog, f.index, cfg);
  simulate(edl, b, f);
  // clusters only change on exhaustion: each run of one cluster uses all of its scenes
  for (std::size_t i = 1; i + 1 < edl.entries.size(); ++i) {
    if (edl.entries[i].cluster == edl.entries[i - 1].cluster) continue;
    const int prev = edl.entries[i - 1].cluster;
    std::size_t used = 0;
    for (const auto& e : edl.entries) used += e.cluster == prev;
    EXPECT_EQ(used, f.catalog.members(prev).size());
  }
}

TEST(Assemble, SwitchesExactlyAtBoundaries) {
  const auto f = make_fixture(5, 6, 40, 8);
  BoundarySet b{{0.0, 10.0, 20.0, 150.0}};
  AssemblyConfig cfg;
  cfg.seed = 3;
  const auto clusters = select_clusters(f.catalog, f.index, 150.0, cfg);
  const auto edl = assemble(b, clusters, f.catalog, f.index, cfg);
  simulate(edl, b, f);
  std::vector<double> switches;
  for (std::size_t i = 1; i < edl.entries.size(); ++i)
    if (edl.entries[i].cluster != edl.entries[i - 1].cluster) switches.push_back(edl.entries[i].out_start);
  for (double t : {10.0, 20.0}) {
    EXPECT_TRUE(std::any_of(switches.begin(), switches.end(), [&](double s) { return std::abs(s - t) < 1.0 / 25; }));
  }
}

TEST(Assemble, PropertiesOverManySeeds) {
  const auto f = make_fixture(6, 10, 40, 12);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const double D = 60.0 + static_cast<double>(seed % 5) * 50.0;
    const auto b = random_boundaries(seed, D);
    AssemblyConfig cfg;
    cfg.seed = seed;
    const auto clusters = select_clusters(f.catalog, f.index, D, cfg);
    const auto edl = assemble(b, clusters, f.catalog, f.index, cfg);
    simulate(edl, b, f);
    EXPECT_EQ(edl_to_json(edl), edl_to_json(assemble(b, clusters, f.catalog, f.index, cfg)));
  }
}

TEST(Assemble, TailUsesCoveringSceneWhenAvailable) {
  const auto f = make_fixture(7, 6, 40, 5);
  BoundarySet b{{0.0, 30.0, 97.0}};
  AssemblyConfig cfg;
  cfg.end_offset = 2.0;
  cfg.seed = 2;
  const auto clusters = select_clusters(f.catalog, f.index, 97.0, cfg);
  const auto edl = assemble(b, clusters, f.catalog, f.index, cfg);
  simulate(edl, b, f);
  const auto& last = edl.entries.back();
  EXPECT_NEAR(last.out_start, 95.0, 1e-9);
  // smallest unused scene at least as long as the tail
  const auto* s = f.index.find(SceneRef::parse(last.scene));
  EXPECT_GE(s->duration() + 1e-9, 2.0);
  std::set<std::string> used;
  for (const auto& e : edl.entries) used.insert(e.scene);
  for (int c : clusters) {
    for (const auto& ref : f.catalog.members(c)) {
      const auto* other = f.index.find(ref);
      if (used.count(ref.str()) || other->duration() + 1e-9 < 2.0) continue;
      EXPECT_GE(other->duration(), s->duration());
    }
  }
}

TEST(Assemble, SingleClusterStillTiles) {
  auto f = make_fixture(8, 4, 40, 1);
  BoundarySet b{{0.0, 40.0, 90.0}};
  AssemblyConfig cfg;
  cfg.C = 1;
  const auto edl = assemble(b, {0}, f.catalog, f.index, cfg);
  simulate(edl, b, f, true);
}

TEST(Assemble, RunsOutOfFootage) {
  const auto f = make_fixture(9, 1, 10, 2);
  BoundarySet b{{0.0, 300.0}};
  AssemblyConfig cfg;
  try {
    assemble(b, {0, 1}, f.catalog, f.index, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientFootage);
  }
}
