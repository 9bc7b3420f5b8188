#include "fixtures.hpp"
#include "mvgen/error.hpp"
#include "mvgen/rng.hpp"
#include "mvgen/shot_detect.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mvgen;

namespace {

RawFrame noise_frame(std::uint64_t seed, int w, int h) {
  Rng rng(seed);
  RawFrame f(w, h);
  for (auto& p : f.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return f;
}

// intensity = mean of R, G, B in floating point
double diff_oracle(const RawFrame& a, const RawFrame& b, double t) {
  int changed = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      const auto* p = a.at(x, y);
      const auto* q = b.at(x, y);
      const int delta = (p[0] + p[1] + p[2]) - (q[0] + q[1] + q[2]);
      if (std::abs(delta) / 3.0 > t) ++changed;
    }
  return 100.0 * changed / (a.width * a.height);
}

}  // namespace

TEST(PairwiseDiff, MatchesPixelCountOracle) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto a = noise_frame(seed, 17, 11);
    const auto b = noise_frame(seed + 1000, 17, 11);
    for (double t : {0.0, 10.0, 30.0, 30.5, 100.0}) EXPECT_DOUBLE_EQ(pairwise_diff(a, b, t), diff_oracle(a, b, t));
  }
}

TEST(PairwiseDiff, IdenticalFramesScoreZero) {
  const auto a = noise_frame(3, 8, 8);
  EXPECT_EQ(pairwise_diff(a, a, 0.0), 0.0);
}

TEST(PairwiseDiff, SizeMismatch) {
  try {
    pairwise_diff(RawFrame(4, 4), RawFrame(4, 5), 30);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
}

TEST(Content, FindsEveryHardCutExactly) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto shots = fixtures::random_shots(seed, 8, 12, 60);
    const auto frames = fixtures::render_shots(shots, 48, 32);
    const auto cuts = detect_content(frames, {});
    std::vector<std::int64_t> got;
    for (const auto& c : cuts) got.push_back(c.frame_index);
    EXPECT_EQ(got, fixtures::cut_positions(shots));
  }
}

TEST(Content, StreamingMatchesBatch) {
  const auto frames = fixtures::render_shots(fixtures::random_shots(9, 5, 12, 30), 32, 24);
  ShotDetector det({});
  std::vector<std::int64_t> streamed;
  for (const auto& f : frames)
    if (auto b = det.push(f)) streamed.push_back(b->frame_index);
  std::vector<std::int64_t> batch;
  for (const auto& b : detect_content(frames, {})) batch.push_back(b.frame_index);
  EXPECT_EQ(streamed, batch);
  EXPECT_EQ(det.frames_seen(), static_cast<std::int64_t>(frames.size()));
}

TEST(Content, ThresholdIsStrict) {
  RawFrame a(10, 10), b(10, 10);
  a.fill(100, 100, 100);
  b.fill(100, 100, 100);
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 10; ++y) b.at(x, y)[0] = 255;  // 30% of pixels change by > 30
  std::vector<RawFrame> frames = {a, b};
  EXPECT_TRUE(detect_content(frames, {}).empty());
  b.at(3, 0)[0] = 255;
  frames = {a, b};
  EXPECT_EQ(detect_content(frames, {}).size(), 1u);
}

TEST(Content, TooFewFrames) {
  std::vector<RawFrame> one = {RawFrame(4, 4)};
  try {
    detect_content(one, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientFrames);
  }
  EXPECT_THROW(detect_histogram(one, {}), Error);
}

TEST(Histogram, DistanceIsSummedL1) {
  const auto a = noise_frame(1, 9, 7);
  const auto b = noise_frame(2, 9, 7);
  const auto ha = frame_histograms(a);
  const auto hb = frame_histograms(b);
  double want = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int v = 0; v < 256; ++v) want += std::abs(static_cast<double>(ha[c][v]) - hb[c][v]);
  EXPECT_EQ(histogram_distance(ha, hb), want);
  for (int c = 0; c < 3; ++c) {
    std::uint32_t total = 0;
    for (auto n : ha[c]) total += n;
    EXPECT_EQ(total, 63u);
  }
}

TEST(Histogram, FindsCutsOnColorChanges) {
  const auto shots = fixtures::random_shots(4, 6, 12, 40);
  const auto frames = fixtures::render_shots(shots, 40, 30);
  DetectorParams p;
  p.mode = DetectorMode::Histogram;
  std::vector<std::int64_t> got;
  for (const auto& c : detect_histogram(frames, p)) got.push_back(c.frame_index);
  EXPECT_EQ(got, fixtures::cut_positions(shots));
  EXPECT_DOUBLE_EQ(default_histogram_threshold(1200), 0.3 * 2 * 1200 * 3);
}

TEST(Scenes, PartitionFromBoundaries) {
  std::vector<ShotBoundary> b = {{10, 50.0}, {25, 60.0}};
  const auto scenes = scenes_from_boundaries("v", 40, b, 25.0);
  ASSERT_EQ(scenes.size(), 3u);
  EXPECT_EQ(scenes[0].start_frame, 0);
  EXPECT_EQ(scenes[0].end_frame, 9);
  EXPECT_EQ(scenes[1].frame_count(), 15);
  EXPECT_EQ(scenes[2].end_frame, 39);
  EXPECT_DOUBLE_EQ(scenes[2].duration(), 15 / 25.0);
}

TEST(Params, Validation) {
  DetectorParams p;
  EXPECT_NO_THROW(p.validate());
  p.percent_threshold = 101;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.pixel_threshold = -1;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.histogram_threshold = -5.0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Segment, EncodedVideoRoundTrip) {
  fixtures::TempDir dir;
  const auto shots = fixtures::random_shots(21, 6, 15, 40);
  fixtures::write_video(dir / "v.mp4", shots, 160, 96);
  const auto frames = decode_frames(fixtures::tool(), dir / "v.mp4", 1);
  int total = 0;
  for (const auto& s : shots) total += s.frames;
  ASSERT_EQ(static_cast<int>(frames.size()), total);
  const auto scenes = segment("v", frames, {});
  ASSERT_EQ(scenes.size(), shots.size());
  for (std::size_t i = 0; i < shots.size(); ++i) EXPECT_EQ(scenes[i].frame_count(), shots[i].frames);
}
