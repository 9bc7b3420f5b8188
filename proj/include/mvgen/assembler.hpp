#pragma once

#include "mvgen/clustering.hpp"
#include "mvgen/edl.hpp"
#include "mvgen/music_structure.hpp"
#include "mvgen/scene_index.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace mvgen {

struct AssemblyConfig {
  int C = 5;
  double end_offset = 10.0;
  double fade_duration = 1.0;
  std::uint64_t seed = 0;
  int max_draws = 1000;  ///< random C-subset draws before the greedy top-up

  void validate() const;
};

/// Total scene duration per cluster id (scenes missing from the index count 0).
std::map<int, double> cluster_durations(const ClusterCatalog& catalog, const SceneIndex& index);

/// Cluster ids whose summed scene duration exceeds l_input.
std::vector<int> select_clusters(const ClusterCatalog& catalog, const SceneIndex& index, double l_input,
                                 const AssemblyConfig& cfg);

/// Groups by source video, shuffles the group order, keeps each group in
/// temporal order.
std::vector<SceneRef> order_scenes(std::vector<SceneRef> members, std::uint64_t seed);

EditDecisionList assemble(const BoundarySet& boundaries, const std::vector<int>& clusters,
                          const ClusterCatalog& catalog, const SceneIndex& index, const AssemblyConfig& cfg);

}  // namespace mvgen
