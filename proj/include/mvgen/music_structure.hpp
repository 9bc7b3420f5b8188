#pragma once

#include "mvgen/audio_features.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mvgen {

inline constexpr double kMinInputSeconds = 60.0;
inline constexpr double kMaxInputSeconds = 400.0;

/// Boundary timestamps in seconds: strictly increasing, first 0, last the
/// track duration.
struct BoundarySet {
  std::vector<double> times;

  double duration() const { return times.empty() ? 0.0 : times.back(); }
  bool valid() const;
};

/// Throws InputLengthOutOfRange outside [60, 400] s.
void check_input_length(double duration_seconds);

/// Binary k-nearest-neighbour recurrence (Euclidean, self excluded,
/// symmetrized by OR). Ties resolve to the lower column index.
Eigen::MatrixXd knn_recurrence(const Eigen::MatrixXd& features, int k);

/// Lag representation: entry (j, i) of the t x t input lands at row
/// (j - i) + t of a zero-initialized 2t x t matrix, so a repetition at lag p
/// becomes the constant row t + p.
Eigen::MatrixXd skew_recurrence(const Eigen::MatrixXd& recurrence);

/// Row-wise median over a centered window of odd `width`, edges replicated.
Eigen::MatrixXd horizontal_median(const Eigen::MatrixXd& m, int width);

/// k <= 0 selects round(sqrt(t)).
Eigen::MatrixXd self_similarity(const Eigen::MatrixXd& features, int k_neighbors, int median_width);

struct LatentRepetition {
  Eigen::MatrixXd latent;  ///< d x t
  Eigen::MatrixXd basis;   ///< 2t x d, orthonormal columns (zero where rank runs out)
  int effective_rank = 0;

  Eigen::MatrixXd reconstruct() const { return basis * latent; }
};

/// Rank-d factor of R from its thin SVD: latent = S_d V_d^T, basis = U_d.
/// Singular values below 1e-10 of the largest count as rank deficiency.
LatentRepetition latent_repetition(const Eigen::MatrixXd& repetition, int d);

enum class FeatureMode { Repetitive, NonRepetitive };

/// Rows: mfcc, chroma, [latent mfcc, latent chroma,] beat index, beat time,
/// beat time / duration.
Eigen::MatrixXd stack_features(const Eigen::MatrixXd& mfcc, const Eigen::MatrixXd& chroma,
                               const Eigen::MatrixXd& latent_mfcc, const Eigen::MatrixXd& latent_chroma,
                               const BeatGrid& beats, double duration, FeatureMode mode);

/// Zero mean, unit variance per row; constant rows become zero.
Eigen::MatrixXd standardize_rows(const Eigen::MatrixXd& x);

/// Projection learned by ordinal LDA. An identity model passes standardized
/// features through unchanged.
struct OldaModel {
  Eigen::MatrixXd W;  ///< D x D, columns sorted by decreasing discriminative power
  double lambda = 1e-4;
  int d = 0;
  bool identity = false;

  static OldaModel identity_model() { return {Eigen::MatrixXd(), 1e-4, 0, true}; }
  Eigen::MatrixXd project(const Eigen::MatrixXd& features) const;

  std::string to_json() const;
  static OldaModel from_json(std::string_view text);
  static OldaModel load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct TrainingTrack {
  Eigen::MatrixXd features;       ///< D x t
  std::vector<double> beat_times; ///< t entries
  BoundarySet boundaries;
};

/// Segment label per beat: index of the boundary span containing it.
std::vector<int> segment_labels(const std::vector<double>& beat_times, const BoundarySet& boundaries);

struct Scatter {
  Eigen::MatrixXd within;   ///< A_w
  Eigen::MatrixXd ordinal;  ///< A_o, adjacent segments against their mutual centroid
};

Scatter olda_scatter(std::span<const TrainingTrack> tracks);

/// tr((W^T (A_w + lambda I) W)^-1 W^T A_o W)
double olda_objective(const Eigen::MatrixXd& W, const Scatter& scatter, double lambda);

/// Generalized eigenvectors of (A_o, A_w + lambda I), descending. Returns an
/// identity-transform model when A_o vanishes; DegenerateScatter when both
/// scatter matrices vanish. d <= 0 keeps all D columns.
OldaModel olda_fit(std::span<const TrainingTrack> tracks, double lambda, int d = 0);

/// clamp(round(duration / 32 s), 2, 26)
int segment_count_for(double duration_seconds);

/// Temporally constrained agglomerative clustering with Ward merge cost;
/// returns the start column of each of the `segments` segments.
std::vector<Eigen::Index> constrained_agglomerative(const Eigen::MatrixXd& x, int segments);

struct AnalysisConfig {
  FeatureConfig features;
  int k_neighbors = 0;  ///< 0 = round(sqrt(t))
  int median_width = 7;
  int latent_dim = 16;
  FeatureMode mode = FeatureMode::Repetitive;
};

/// Stacked, standardized beat-synchronous features for one track.
struct TrackFeatures {
  BeatGrid beats;
  Eigen::MatrixXd stacked;
  double duration = 0.0;
};

TrackFeatures analyze_track(const PcmAudio& audio, const AnalysisConfig& cfg);

TrainingTrack training_track(const PcmAudio& audio, const BoundarySet& boundaries, const AnalysisConfig& cfg);

BoundarySet boundaries_from_features(const TrackFeatures& features, const OldaModel& model, int segments);

BoundarySet detect_boundaries(const PcmAudio& audio, const OldaModel& model, const AnalysisConfig& cfg = {});

}  // namespace mvgen
