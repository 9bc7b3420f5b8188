#pragma once

#include "mvgen/edl.hpp"
#include "mvgen/genre.hpp"
#include "mvgen/media_io.hpp"
#include "mvgen/shot_detect.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mvgen {

inline constexpr std::size_t kHistogramBins = 768;
inline constexpr int kHistogramStride = 5;
inline constexpr std::int64_t kMinSceneFrames = 12;
inline constexpr std::int64_t kMaxSceneFrames = 125;
inline constexpr double kMaxSceneSeconds = 60.0;

/// Blue bins 0..255, green 256..511, red 512..767; each block sums to 1.
struct ColorHistogram768 {
  std::array<double, kHistogramBins> values{};

  std::span<const double, 256> channel(std::size_t block) const {
    return std::span<const double, 256>(values.data() + block * 256, 256);
  }
  /// True when all entries are >= 0 and each block sums to 1 within `tolerance`.
  bool valid(double tolerance = 1e-6) const;
  friend bool operator==(const ColorHistogram768&, const ColorHistogram768&) = default;
};

/// Accumulates raw B,G,R counts over frames; normalization happens once at
/// the end, so the result equals the histogram of the frames tiled into one
/// image.
class HistogramAccumulator {
 public:
  void add(const RawFrame& frame);
  std::uint64_t pixels() const { return pixels_; }
  ColorHistogram768 normalized() const;
  void reset();

 private:
  std::array<std::uint64_t, kHistogramBins> counts_{};
  std::uint64_t pixels_ = 0;
};

/// Histogram of a scene's sampled frames (the caller samples every 5th frame
/// from the scene start).
ColorHistogram768 scene_histogram(std::span<const RawFrame> sampled_frames);

bool accept_scene(const Scene& scene);
/// False iff any scene (accepted or not) lasts longer than 60 s.
bool accept_video(std::span<const Scene> scenes);

struct IndexedScene {
  Scene scene;
  ColorHistogram768 histogram;

  SceneRef ref() const { return {scene.source_id, scene.start_frame}; }
  double duration() const { return scene.duration(); }
};

struct VideoRecord {
  std::string source_id;
  GenreCategory genre = GenreCategory::Unknown;
  double fps = 25.0;
  std::vector<IndexedScene> scenes;
};

struct RejectedVideo {
  std::string source_id;
  std::string reason;
};

struct SceneIndex {
  std::filesystem::path root;  ///< directory the index lives in; not serialized
  std::map<std::string, VideoRecord> videos;
  std::vector<RejectedVideo> rejected;
  DetectorParams params;
  std::string created;

  std::size_t scene_count() const;
  const IndexedScene* find(const SceneRef& ref) const;
  /// Harmonized media for a source video: <root>/media/<source_id>.mp4
  std::filesystem::path media_path(const std::string& source_id) const;
  /// Scenes of one genre; Unknown selects the whole index. Sorted by ref.
  std::vector<const IndexedScene*> slice(GenreCategory genre) const;
};

std::string video_record_to_json(const VideoRecord& record);
/// Throws CorruptIndex on any schema violation.
VideoRecord video_record_from_json(std::string_view text);

/// Writes <dir>/manifest.json and <dir>/videos/<source_id>.json.
std::filesystem::path save_index(const SceneIndex& index, const std::filesystem::path& dir);
SceneIndex load_index(const std::filesystem::path& dir);

/// SHA-256 over manifest and per-video documents; identifies index content.
std::string index_digest(const SceneIndex& index);

using GenreResolver = std::function<GenreLabel(const std::filesystem::path& media, std::optional<GenreCategory>)>;
using ProgressFn = std::function<void(const std::string& line)>;

struct BuildOptions {
  DetectorParams params;
  std::filesystem::path index_dir;
  GenreResolver resolve_genre;  ///< may be empty: genre then comes only from overrides
  unsigned workers = 0;         ///< 0 = hardware concurrency
  ProgressFn progress;
};

struct VideoOutcome {
  std::optional<VideoRecord> record;
  std::optional<RejectedVideo> rejection;
};

/// Harmonizes, segments, filters and profiles one corpus video.
VideoOutcome index_video(const CodecTool& tool, const std::filesystem::path& video, const std::string& source_id,
                         const BuildOptions& options, std::optional<GenreCategory> genre_override);

/// Corpus videos (sorted) and their ids: file stem with characters outside
/// [A-Za-z0-9._-] replaced by '_', de-duplicated with a numeric suffix.
std::vector<std::pair<std::string, std::filesystem::path>> list_corpus(const std::filesystem::path& corpus_dir);

/// Manual genre assignments from <corpus>/genres.json: {"<file stem or id>": "rock", ...}.
std::map<std::string, GenreCategory> load_corpus_genres(const std::filesystem::path& corpus_dir);

SceneIndex build_index(const CodecTool& tool, const std::filesystem::path& corpus_dir, const BuildOptions& options);

/// Re-applies the filters to a loaded index: drops videos that fail
/// accept_video or carry an invalid scene, removing their files.
std::vector<RejectedVideo> clean_index(SceneIndex& index);

}  // namespace mvgen
