#pragma once

#include "mvgen/assembler.hpp"
#include "mvgen/clustering.hpp"
#include "mvgen/error.hpp"
#include "mvgen/music_structure.hpp"
#include "mvgen/render.hpp"
#include "mvgen/scene_index.hpp"
#include "mvgen/shot_detect.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace mvgen {

/// Stable process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitEmptyCorpus = 2,
  kExitInputLength = 3,
  kExitFootage = 4,
  kExitMedia = 5,
};

int exit_code_for(Errc code);

struct PipelineConfig {
  std::filesystem::path index_dir = "mvgen-index";
  std::string codec_tool_path = "ffmpeg";
  DetectorParams detector;
  int K = kDefaultClusterCount;
  std::uint64_t cluster_seed = 0;
  KMeansInit kmeans_init = KMeansInit::RandomPoints;
  AssemblyConfig assembly;
  AnalysisConfig analysis;
  std::string fingerprint_endpoint;
  std::string fingerprint_key;  ///< "access:secret"; falls back to MVGEN_FINGERPRINT_KEY
  std::string tags_endpoint = "https://ws.audioscrobbler.com";
  std::string tags_key;  ///< falls back to MVGEN_TAGS_KEY
  std::filesystem::path genre_cache;  ///< empty = <index_dir>/genre_cache.json
  std::string model = "identity";     ///< OLDA model file, or "identity"
  unsigned workers = 0;

  void validate() const;
  /// Missing keys keep their defaults; relative paths resolve against the
  /// config file's directory.
  static PipelineConfig from_json_file(const std::filesystem::path& path);
};

OldaModel load_model(const PipelineConfig& cfg);
SceneResolver index_resolver(const SceneIndex& index);

struct GenerateOptions {
  std::optional<GenreCategory> genre;  ///< nullopt = auto
  std::uint64_t seed = 0;
  std::filesystem::path out;  ///< empty = <audio stem>.mp4 in the working directory
  bool render = true;
};

struct GenerateReport {
  std::filesystem::path video;
  std::filesystem::path edl_path;
  EditDecisionList edl;
  BoundarySet boundaries;
  GenreLabel genre;
  double planning_seconds = 0.0;
  double render_seconds = 0.0;
};

/// EDL path for an output video: "<out without extension>.edl.json".
std::filesystem::path edl_path_for(const std::filesystem::path& video);

/// The full generation flow: boundaries, genre, clusters, assembly, render.
/// Stage progress goes to `log`.
GenerateReport generate(const std::filesystem::path& audio, const PipelineConfig& cfg, const GenerateOptions& opts,
                        std::ostream& log);

// Command entry points: machine-readable results on `out`, diagnostics on
// `err`, return value is the exit code.
int cmd_index_build(const std::filesystem::path& corpus, const PipelineConfig& cfg, std::ostream& out,
                    std::ostream& err);
int cmd_index_clean(const PipelineConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_cluster(const PipelineConfig& cfg, GenreCategory genre, int k, std::uint64_t seed, std::ostream& out,
                std::ostream& err);
int cmd_analyze(const std::filesystem::path& audio, const PipelineConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_generate(const std::filesystem::path& audio, const PipelineConfig& cfg, const GenerateOptions& opts,
                 std::ostream& out, std::ostream& err);

}  // namespace mvgen
