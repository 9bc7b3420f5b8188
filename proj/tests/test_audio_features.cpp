#include "fixtures.hpp"
#include "mvgen/audio_features.hpp"
#include "mvgen/error.hpp"
#include "mvgen/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

using namespace mvgen;

namespace {

PcmAudio noise(double seconds, std::uint64_t seed, int rate = 22050) {
  PcmAudio a;
  a.sample_rate = rate;
  Rng rng(seed);
  a.samples.resize(static_cast<std::size_t>(seconds * rate));
  for (auto& s : a.samples) s = static_cast<float>(rng.uniform() - 0.5);
  return a;
}

PcmAudio clicks(double seconds, double period, int rate = 22050) {
  PcmAudio a;
  a.sample_rate = rate;
  a.samples.assign(static_cast<std::size_t>(seconds * rate), 0.0f);
  Rng rng(3);
  for (double t = 0.25; t < seconds; t += period) {
    const auto at = static_cast<std::size_t>(t * rate);
    for (std::size_t i = 0; i < 400 && at + i < a.samples.size(); ++i) {
      a.samples[at + i] = static_cast<float>((rng.uniform() - 0.5) * std::exp(-static_cast<double>(i) / 80.0));
    }
  }
  return a;
}

}  // namespace

TEST(Stft, MatchesNaiveDft) {
  const auto a = noise(0.2, 11);
  FeatureConfig cfg;
  cfg.n_fft = 256;
  cfg.hop = 64;
  const auto spec = stft_power(a, cfg);
  const auto n = static_cast<long>(a.samples.size());
  ASSERT_EQ(spec.frames(), 1 + n / 64);
  ASSERT_EQ(spec.power.rows(), 129);
  for (long f : {0L, 3L, spec.frames() - 1}) {
    for (int b : {0, 1, 17, 64, 128}) {
      std::complex<double> acc = 0.0;
      for (int i = 0; i < 256; ++i) {
        const long s = f * 64 - 128 + i;
        const double x = (s >= 0 && s < n) ? a.samples[static_cast<std::size_t>(s)] : 0.0;
        const double w = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * i / 256.0);
        acc += x * w * std::polar(1.0, -2 * std::numbers::pi * b * i / 256.0);
      }
      EXPECT_NEAR(spec.power(b, f), std::norm(acc), 1e-9 * (1 + std::norm(acc))) << f << "," << b;
    }
  }
  EXPECT_NEAR(spec.frame_time(4), 4 * 64 / 22050.0, 1e-12);
}

TEST(Mel, FiltersHaveUnitArea) {
  const auto fb = mel_filterbank(40, 2048, 22050);
  const double df = 22050.0 / 2048;
  for (int m = 10; m < 40; ++m) EXPECT_NEAR(fb.row(m).sum() * df, 1.0, 0.05) << m;
  EXPECT_TRUE((fb.array() >= 0).all());
  // filters are ordered by centre frequency
  Eigen::Index prev = -1;
  for (int m = 0; m < 40; ++m) {
    Eigen::Index arg;
    fb.row(m).maxCoeff(&arg);
    EXPECT_GE(arg, prev);
    prev = arg;
  }
}

TEST(Mfcc, FullDctIsInvertible) {
  const auto a = noise(0.5, 5);
  FeatureConfig cfg;
  cfg.n_mfcc = cfg.n_mels;
  const auto spec = stft_power(a, cfg);
  const Eigen::MatrixXd lm = log_mel(spec, cfg);
  const Eigen::MatrixXd c = mfcc(spec, cfg);
  // orthonormal DCT-II: inverse is the transpose
  const int m = cfg.n_mels;
  Eigen::MatrixXd dct(m, m);
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < m; ++i)
      dct(k, i) = (k == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m)) * std::cos(std::numbers::pi * k * (i + 0.5) / m);
  EXPECT_LT((dct.transpose() * c - lm).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE(lm.maxCoeff() - lm.minCoeff(), 80.0 + 1e-9);
  EXPECT_EQ(mfcc(spec, FeatureConfig{}).rows(), 32);
}

TEST(Chroma, PitchClassRows) {
  FeatureConfig cfg;
  const auto a440 = chroma(stft_power(fixtures::tone(1.0, 440.0), cfg), cfg);
  const auto c523 = chroma(stft_power(fixtures::tone(1.0, 523.25), cfg), cfg);
  Eigen::Index r;
  a440.col(10).maxCoeff(&r);
  EXPECT_EQ(r, 9);
  c523.col(10).maxCoeff(&r);
  EXPECT_EQ(r, 0);
  EXPECT_DOUBLE_EQ(a440.col(10).maxCoeff(), 1.0);
  PcmAudio silent;
  silent.sample_rate = 22050;
  silent.samples.assign(4096, 0.0f);
  EXPECT_EQ(chroma(stft_power(silent, cfg), cfg).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Onset, PeaksAtClicks) {
  FeatureConfig cfg;
  const auto a = clicks(4.0, 0.5);
  const auto spec = stft_power(a, cfg);
  const auto onset = onset_strength(spec, cfg);
  EXPECT_EQ(onset(0), 0.0);
  EXPECT_TRUE((onset.array() >= 0).all());
  const double fr = 22050.0 / 512;
  const auto click_frame = static_cast<Eigen::Index>(std::llround(1.25 * fr));
  const auto quiet_frame = static_cast<Eigen::Index>(std::llround(1.5 * fr));
  EXPECT_GT(onset.segment(click_frame - 2, 5).maxCoeff(), 5 * onset(quiet_frame));
}

TEST(Beats, ClickTrackPeriod) {
  FeatureConfig cfg;
  const auto a = clicks(20.0, 0.5);
  const auto f = extract_beat_features(a, cfg);
  ASSERT_FALSE(f.beats.fallback);
  ASSERT_GT(f.beats.size(), 30u);
  std::vector<double> gaps;
  for (std::size_t i = 1; i < f.beats.size(); ++i) gaps.push_back(f.beats.times[i] - f.beats.times[i - 1]);
  std::sort(gaps.begin(), gaps.end());
  EXPECT_NEAR(gaps[gaps.size() / 2], 0.5, 0.03);
  EXPECT_EQ(f.mfcc.cols(), static_cast<Eigen::Index>(f.beats.size()));
  EXPECT_EQ(f.chroma.rows(), 12);
}

TEST(Beats, SteadyToneFallsBackToGrid) {
  FeatureConfig cfg;
  const auto f = extract_beat_features(fixtures::tone(6.0, 330.0), cfg);
  EXPECT_TRUE(f.beats.fallback);
  ASSERT_EQ(f.beats.size(), 12u);
  for (std::size_t i = 0; i < f.beats.size(); ++i) {
    EXPECT_NEAR(f.beats.times[i], 0.5 * static_cast<double>(i), 512.0 / 22050);
  }
}

TEST(Beats, FixedGridIsStrictlyIncreasing) {
  const auto g = fixed_beat_grid(0.01, 1.0, 43.07);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g.frames[i], g.frames[i - 1]);
  EXPECT_TRUE(g.fallback);
}

TEST(BeatSync, BruteForceOracle) {
  Rng rng(9);
  Eigen::MatrixXd feat(3, 20);
  for (Eigen::Index i = 0; i < feat.size(); ++i) feat.data()[i] = rng.uniform();
  const std::vector<std::int64_t> beats = {2, 5, 6, 13};
  const auto mean = beat_sync(feat, beats, Aggregate::Mean);
  const auto med = beat_sync(feat, beats, Aggregate::Median);
  const std::vector<std::pair<int, int>> spans = {{0, 5}, {5, 6}, {6, 13}, {13, 20}};
  for (int k = 0; k < 4; ++k) {
    for (int r = 0; r < 3; ++r) {
      std::vector<double> v;
      for (int c = spans[k].first; c < spans[k].second; ++c) v.push_back(feat(r, c));
      double s = 0;
      for (double x : v) s += x;
      EXPECT_NEAR(mean(r, k), s / static_cast<double>(v.size()), 1e-12);
      std::sort(v.begin(), v.end());
      const double m = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
      EXPECT_NEAR(med(r, k), m, 1e-12);
    }
  }
}

TEST(Beats, SilenceIsRejected) {
  PcmAudio a;
  a.sample_rate = 22050;
  a.samples.assign(22050, 0.0f);
  try {
    extract_beat_features(a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SilentAudio);
  }
}
