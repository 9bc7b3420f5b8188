#pragma once

#include "mvgen/media_io.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mvgen {

enum class DetectorMode { Content, Histogram };

struct DetectorParams {
  double pixel_threshold = 30.0;    ///< per-pixel intensity delta, [0, 255]
  double percent_threshold = 30.0;  ///< percentage of changed pixels, [0, 100]
  /// Summed per-channel L1 count distance; unset selects the frame-size default.
  std::optional<double> histogram_threshold;
  DetectorMode mode = DetectorMode::Content;

  void validate() const;
};

/// Default histogram threshold when none is configured: 30% of the maximal
/// possible distance 2 * M * N * 3 (matching the content mode default).
double default_histogram_threshold(std::size_t pixel_count);

struct ShotBoundary {
  std::int64_t frame_index = 0;  ///< first frame of the new shot
  double score = 0.0;
};

struct Scene {
  std::string source_id;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;  ///< inclusive
  double fps = 25.0;

  std::int64_t frame_count() const { return end_frame - start_frame + 1; }
  double duration() const { return static_cast<double>(frame_count()) / fps; }
};

/// Percentage of pixels whose mean-of-RGB intensity changes by more than t.
double pairwise_diff(const RawFrame& a, const RawFrame& b, double pixel_threshold);

using ChannelHistograms = std::array<std::array<std::uint32_t, 256>, 3>;  // R, G, B

ChannelHistograms frame_histograms(const RawFrame& frame);

/// Sum over channels of the L1 distance between raw 256-bin count histograms.
double histogram_distance(const ChannelHistograms& a, const ChannelHistograms& b);

/// Incremental detector: feed frames in order, get a boundary whenever the
/// selected metric between the previous and the current frame exceeds its
/// threshold.
class ShotDetector {
 public:
  explicit ShotDetector(DetectorParams params);

  std::optional<ShotBoundary> push(const RawFrame& frame);
  std::int64_t frames_seen() const { return seen_; }

 private:
  DetectorParams params_;
  std::optional<RawFrame> previous_;
  ChannelHistograms previous_hist_{};
  std::int64_t seen_ = 0;
};

std::vector<ShotBoundary> detect_content(std::span<const RawFrame> frames, const DetectorParams& params);
std::vector<ShotBoundary> detect_histogram(std::span<const RawFrame> frames, const DetectorParams& params);

/// Partitions [0, frame_count - 1] at the given boundaries.
std::vector<Scene> scenes_from_boundaries(const std::string& source_id, std::int64_t frame_count,
                                          std::span<const ShotBoundary> boundaries, double fps);

std::vector<Scene> segment(const std::string& source_id, std::span<const RawFrame> frames,
                           const DetectorParams& params, double fps = 25.0);

}  // namespace mvgen
