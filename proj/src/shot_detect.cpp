#include "mvgen/shot_detect.hpp"

#include "mvgen/error.hpp"

#include <cmath>
#include <cstdlib>

namespace mvgen {

void DetectorParams::validate() const {
  if (!(pixel_threshold >= 0.0 && pixel_threshold <= 255.0)) {
    throw Error(Errc::InvalidArgument, "pixel threshold must lie in [0, 255]");
  }
  if (!(percent_threshold >= 0.0 && percent_threshold <= 100.0)) {
    throw Error(Errc::InvalidArgument, "percent threshold must lie in [0, 100]");
  }
  if (histogram_threshold && !(*histogram_threshold >= 0.0)) throw Error(Errc::InvalidArgument, "histogram threshold must be >= 0");
}

double default_histogram_threshold(std::size_t pixel_count) {
  return 0.30 * 2.0 * static_cast<double>(pixel_count) * 3.0;
}

namespace {

void require_same_size(const RawFrame& a, const RawFrame& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(Errc::DimensionMismatch, "frames " + std::to_string(a.index) + " and " + std::to_string(b.index) +
                                             " differ in size");
  }
}

}  // namespace

double pairwise_diff(const RawFrame& a, const RawFrame& b, double pixel_threshold) {
  require_same_size(a, b);
  const std::size_t n = a.pixel_count();
  if (n == 0) return 0.0;
  // |mean_a - mean_b| > t  <=>  |sum_a - sum_b| > 3t, which keeps the loop in integers.
  const double scaled = 3.0 * pixel_threshold;
  std::size_t changed = 0;
  const auto* pa = a.pixels.data();
  const auto* pb = b.pixels.data();
  for (std::size_t i = 0; i < n; ++i, pa += 3, pb += 3) {
    const int sa = pa[0] + pa[1] + pa[2];
    const int sb = pb[0] + pb[1] + pb[2];
    if (std::abs(sa - sb) > scaled) ++changed;
  }
  return 100.0 * static_cast<double>(changed) / static_cast<double>(n);
}

ChannelHistograms frame_histograms(const RawFrame& frame) {
  ChannelHistograms h{};
  const auto* p = frame.pixels.data();
  for (std::size_t i = 0, n = frame.pixel_count(); i < n; ++i, p += 3) {
    ++h[0][p[0]];
    ++h[1][p[1]];
    ++h[2][p[2]];
  }
  return h;
}

double histogram_distance(const ChannelHistograms& a, const ChannelHistograms& b) {
  double sum = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t v = 0; v < 256; ++v) {
      sum += std::abs(static_cast<double>(a[c][v]) - static_cast<double>(b[c][v]));
    }
  }
  return sum;
}

ShotDetector::ShotDetector(DetectorParams params) : params_(params) { params_.validate(); }

std::optional<ShotBoundary> ShotDetector::push(const RawFrame& frame) {
  const std::int64_t position = seen_++;
  std::optional<ShotBoundary> boundary;
  if (params_.mode == DetectorMode::Content) {
    if (previous_) {
      const double score = pairwise_diff(*previous_, frame, params_.pixel_threshold);
      if (score > params_.percent_threshold) boundary = ShotBoundary{position, score};
    }
    previous_ = frame;
  } else {
    auto hist = frame_histograms(frame);
    if (previous_) {
      require_same_size(*previous_, frame);
      const double threshold = params_.histogram_threshold.value_or(default_histogram_threshold(frame.pixel_count()));
      const double score = histogram_distance(previous_hist_, hist);
      if (score > threshold) boundary = ShotBoundary{position, score};
    }
    // Only the dimensions of the previous frame are needed in this mode.
    if (!previous_) previous_ = RawFrame(frame.width, frame.height);
    previous_->width = frame.width;
    previous_->height = frame.height;
    previous_->index = frame.index;
    previous_hist_ = hist;
  }
  return boundary;
}

namespace {

std::vector<ShotBoundary> run_detector(std::span<const RawFrame> frames, DetectorParams params) {
  if (frames.size() < 2) throw Error(Errc::InsufficientFrames, "shot detection needs at least two frames");
  ShotDetector detector(params);
  std::vector<ShotBoundary> out;
  for (const auto& f : frames) {
    if (auto b = detector.push(f)) out.push_back(*b);
  }
  return out;
}

}  // namespace

std::vector<ShotBoundary> detect_content(std::span<const RawFrame> frames, const DetectorParams& params) {
  auto p = params;
  p.mode = DetectorMode::Content;
  return run_detector(frames, p);
}

std::vector<ShotBoundary> detect_histogram(std::span<const RawFrame> frames, const DetectorParams& params) {
  auto p = params;
  p.mode = DetectorMode::Histogram;
  return run_detector(frames, p);
}

std::vector<Scene> scenes_from_boundaries(const std::string& source_id, std::int64_t frame_count,
                                          std::span<const ShotBoundary> boundaries, double fps) {
  if (frame_count < 1) throw Error(Errc::InsufficientFrames, "cannot segment an empty video");
  std::vector<Scene> scenes;
  std::int64_t start = 0;
  for (const auto& b : boundaries) {
    if (b.frame_index <= start || b.frame_index >= frame_count) {
      throw Error(Errc::InvalidArgument, "boundaries must be strictly increasing inside the video");
    }
    scenes.push_back({source_id, start, b.frame_index - 1, fps});
    start = b.frame_index;
  }
  scenes.push_back({source_id, start, frame_count - 1, fps});
  return scenes;
}

std::vector<Scene> segment(const std::string& source_id, std::span<const RawFrame> frames,
                           const DetectorParams& params, double fps) {
  if (frames.empty()) throw Error(Errc::InsufficientFrames, "cannot segment an empty video");
  if (frames.size() == 1) return scenes_from_boundaries(source_id, 1, {}, fps);
  const auto boundaries =
      params.mode == DetectorMode::Content ? detect_content(frames, params) : detect_histogram(frames, params);
  return scenes_from_boundaries(source_id, static_cast<std::int64_t>(frames.size()), boundaries, fps);
}

}  // namespace mvgen
