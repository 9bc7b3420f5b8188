#pragma once

#include "mvgen/media_io.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace mvgen {

struct FeatureConfig {
  int sample_rate = 22050;
  int n_fft = 2048;
  int hop = 512;
  int n_mels = 128;
  int n_mfcc = 32;
  double chroma_fmin = 32.7;   ///< C1
  double chroma_fmax = 5000.0;
  double fallback_beat_period = 0.5;  ///< seconds, used when no pulse is found
  double min_bpm = 40.0;
  double max_bpm = 240.0;
  double tightness = 100.0;
};

/// Power spectrogram, (n_fft/2 + 1) x frames, centered frames with hop spacing.
struct Spectrogram {
  Eigen::MatrixXd power;
  double sample_rate = 0.0;
  int n_fft = 0;
  int hop = 0;

  Eigen::Index frames() const { return power.cols(); }
  double frame_time(Eigen::Index frame) const { return static_cast<double>(frame) * hop / sample_rate; }
};

Spectrogram stft_power(const PcmAudio& audio, const FeatureConfig& cfg);

/// Triangular mel filters (HTK mel scale, unit-area), n_mels x (n_fft/2 + 1).
Eigen::MatrixXd mel_filterbank(int n_mels, int n_fft, double sample_rate);

Eigen::MatrixXd log_mel(const Spectrogram& spec, const FeatureConfig& cfg);
Eigen::MatrixXd mfcc(const Spectrogram& spec, const FeatureConfig& cfg);

/// 12 x frames pitch-class energy (C = row 0), each column scaled to max 1;
/// frames without energy stay zero.
Eigen::MatrixXd chroma(const Spectrogram& spec, const FeatureConfig& cfg);

/// Half-wave rectified log-mel flux, one value per frame.
Eigen::VectorXd onset_strength(const Spectrogram& spec, const FeatureConfig& cfg);

struct BeatGrid {
  std::vector<double> times;           ///< seconds, strictly increasing
  std::vector<std::int64_t> frames;    ///< feature-frame ordinals
  bool fallback = false;               ///< true when the fixed grid was used

  std::size_t size() const { return times.size(); }
};

struct TempoEstimate {
  double period_frames = 0.0;
  double periodicity = 0.0;  ///< normalized autocorrelation at the chosen lag
};

TempoEstimate estimate_tempo(const Eigen::VectorXd& onset, double frame_rate, const FeatureConfig& cfg);

/// Tempo-consistent dynamic-programming beat picker over the onset envelope;
/// falls back to a fixed grid when the envelope has no usable periodicity.
BeatGrid track_beats(const Eigen::VectorXd& onset, double frame_rate, double duration, const FeatureConfig& cfg);

BeatGrid fixed_beat_grid(double period, double duration, double frame_rate);

enum class Aggregate { Mean, Median };

/// Aggregates feature columns over beat intervals [b_k, b_{k+1}); frames
/// before the first beat join the first interval, the last runs to the end.
Eigen::MatrixXd beat_sync(const Eigen::MatrixXd& features, const std::vector<std::int64_t>& beat_frames,
                          Aggregate how);

struct BeatFeatures {
  BeatGrid beats;
  Eigen::MatrixXd mfcc;    ///< n_mfcc x beats, mean-aggregated
  Eigen::MatrixXd chroma;  ///< 12 x beats, median-aggregated
};

/// Throws SilentAudio only when the signal has no energy at all.
BeatFeatures extract_beat_features(const PcmAudio& audio, const FeatureConfig& cfg = {});

}  // namespace mvgen
