#include "mvgen/music_structure.hpp"

#include "mvgen/error.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mvgen {
using nlohmann::json;

bool BoundarySet::valid() const {
  if (times.size() < 2 || times.front() != 0.0) return false;
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) return false;
  }
  return true;
}

void check_input_length(double duration_seconds) {
  if (!(duration_seconds >= kMinInputSeconds && duration_seconds <= kMaxInputSeconds)) {
    std::ostringstream msg;
    msg << "input length " << duration_seconds << " s is outside [60, 400] s";
    throw Error(Errc::InputLengthOutOfRange, msg.str());
  }
}

Eigen::MatrixXd knn_recurrence(const Eigen::MatrixXd& features, int k) {
  const Eigen::Index t = features.cols();
  if (k < 1 || t < k + 1) {
    throw Error(Errc::TooFewBeats, "need at least k + 1 = " + std::to_string(k + 1) + " beats, got " + std::to_string(t));
  }
  // ties go to the lower index
  const Eigen::VectorXd sq = features.colwise().squaredNorm().transpose();
  Eigen::MatrixXd dist = -2.0 * features.transpose() * features;
  dist.colwise() += sq;
  dist.rowwise() += sq.transpose();

  Eigen::MatrixXd rec = Eigen::MatrixXd::Zero(t, t);
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < t; ++i) {
    order.resize(static_cast<std::size_t>(t));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    order.erase(order.begin() + i);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Eigen::Index a, Eigen::Index b) {
      const double da = std::max(0.0, dist(a, i));
      const double db = std::max(0.0, dist(b, i));
      return da < db || (da == db && a < b);
    });
    for (int n = 0; n < k; ++n) {
      const Eigen::Index j = order[static_cast<std::size_t>(n)];
      rec(j, i) = 1.0;
      rec(i, j) = 1.0;
    }
  }
  return rec;
}

Eigen::MatrixXd skew_recurrence(const Eigen::MatrixXd& recurrence) {
  const Eigen::Index t = recurrence.cols();
  if (recurrence.rows() != t) throw Error(Errc::InvalidArgument, "recurrence matrix must be square");
  Eigen::MatrixXd lag = Eigen::MatrixXd::Zero(2 * t, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j < t; ++j) lag(j - i + t, i) = recurrence(j, i);
  }
  return lag;
}

Eigen::MatrixXd horizontal_median(const Eigen::MatrixXd& m, int width) {
  if (width < 1 || width % 2 == 0) throw Error(Errc::InvalidArgument, "median width must be odd and positive");
  if (width == 1) return m;
  const Eigen::Index half = width / 2;
  const Eigen::Index cols = m.cols();
  Eigen::MatrixXd out(m.rows(), cols);
  std::vector<double> window(static_cast<std::size_t>(width));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index w = -half; w <= half; ++w) {
        const Eigen::Index src = std::clamp<Eigen::Index>(c + w, 0, cols - 1);
        window[static_cast<std::size_t>(w + half)] = m(r, src);
      }
      std::nth_element(window.begin(), window.begin() + half, window.end());
      out(r, c) = window[static_cast<std::size_t>(half)];
    }
  }
  return out;
}

Eigen::MatrixXd self_similarity(const Eigen::MatrixXd& features, int k_neighbors, int median_width) {
  const Eigen::Index t = features.cols();
  if (t < 2) throw Error(Errc::TooFewBeats, "self-similarity needs at least two beats");
  const int k = k_neighbors > 0 ? k_neighbors
                                : std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(t)))));
  return horizontal_median(skew_recurrence(knn_recurrence(features, k)), median_width);
}

LatentRepetition latent_repetition(const Eigen::MatrixXd& repetition, int d) {
  if (d < 1) throw Error(Errc::InvalidArgument, "latent dimension must be >= 1");
  const Eigen::Index t = repetition.cols();
  LatentRepetition out;
  out.latent = Eigen::MatrixXd::Zero(d, t);
  out.basis = Eigen::MatrixXd::Zero(repetition.rows(), d);
  if (t == 0 || repetition.rows() == 0) return out;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(repetition, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double cutoff = sigma.size() ? sigma(0) * 1e-10 : 0.0;
  const Eigen::Index usable = std::min<Eigen::Index>(d, sigma.size());
  for (Eigen::Index k = 0; k < usable; ++k) {
    if (!(sigma(k) > cutoff)) break;
    out.latent.row(k) = sigma(k) * svd.matrixV().col(k).transpose();
    out.basis.col(k) = svd.matrixU().col(k);
    ++out.effective_rank;
  }
  return out;
}

Eigen::MatrixXd stack_features(const Eigen::MatrixXd& mfcc_rows, const Eigen::MatrixXd& chroma_rows,
                               const Eigen::MatrixXd& latent_mfcc, const Eigen::MatrixXd& latent_chroma,
                               const BeatGrid& beats, double duration, FeatureMode mode) {
  const Eigen::Index t = mfcc_rows.cols();
  const bool repetitive = mode == FeatureMode::Repetitive;
  if (t == 0 || chroma_rows.cols() != t || static_cast<Eigen::Index>(beats.size()) != t ||
      (repetitive && (latent_mfcc.cols() != t || latent_chroma.cols() != t))) {
    throw Error(Errc::ColumnMismatch, "feature blocks disagree on the number of beats");
  }
  const Eigen::Index rows = mfcc_rows.rows() + chroma_rows.rows() +
                            (repetitive ? latent_mfcc.rows() + latent_chroma.rows() : 0) + 3;
  Eigen::MatrixXd x(rows, t);
  Eigen::Index r = 0;
  auto put = [&](const Eigen::MatrixXd& block) {
    x.middleRows(r, block.rows()) = block;
    r += block.rows();
  };
  put(mfcc_rows);
  put(chroma_rows);
  if (repetitive) {
    put(latent_mfcc);
    put(latent_chroma);
  }
  for (Eigen::Index k = 0; k < t; ++k) {
    const double time = beats.times[static_cast<std::size_t>(k)];
    x(r, k) = static_cast<double>(k);
    x(r + 1, k) = time;
    x(r + 2, k) = duration > 0 ? time / duration : 0.0;
  }
  return x;
}

Eigen::MatrixXd standardize_rows(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out = x;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double sd = std::sqrt((x.row(r).array() - mean).square().mean());
    if (sd > 1e-12) out.row(r) = (x.row(r).array() - mean) / sd;
    else out.row(r).setZero();
  }
  return out;
}

Eigen::MatrixXd OldaModel::project(const Eigen::MatrixXd& features) const {
  if (identity) return features;
  if (W.rows() != features.rows()) {
    throw Error(Errc::ColumnMismatch, "model expects " + std::to_string(W.rows()) + " feature rows, got " +
                                          std::to_string(features.rows()));
  }
  const Eigen::Index keep = d > 0 ? std::min<Eigen::Index>(d, W.cols()) : W.cols();
  return W.leftCols(keep).transpose() * features;
}

std::string OldaModel::to_json() const {
  json doc;
  doc["D"] = identity ? 0 : W.rows();
  doc["d"] = d;
  doc["lambda"] = lambda;
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(W.size()));
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    for (Eigen::Index j = 0; j < W.cols(); ++j) flat.push_back(W(i, j));
  }
  doc["W"] = flat;
  if (identity) doc["identity"] = true;
  return doc.dump(2) + "\n";
}

OldaModel OldaModel::from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.value("identity", false)) {
      auto m = identity_model();
      m.lambda = doc.value("lambda", m.lambda);
      return m;
    }
    OldaModel m;
    const auto D = doc.at("D").get<Eigen::Index>();
    m.d = doc.at("d").get<int>();
    m.lambda = doc.at("lambda").get<double>();
    const auto flat = doc.at("W").get<std::vector<double>>();
    if (D <= 0 || static_cast<Eigen::Index>(flat.size()) != D * D) {
      throw Error(Errc::InvalidArgument, "model W must hold D*D values");
    }
    if (!(m.lambda > 0)) throw Error(Errc::InvalidArgument, "model lambda must be positive");
    if (m.d < 0 || m.d > D) throw Error(Errc::InvalidArgument, "model d out of range");
    m.W.resize(D, D);
    for (Eigen::Index i = 0; i < D; ++i) {
      for (Eigen::Index j = 0; j < D; ++j) m.W(i, j) = flat[static_cast<std::size_t>(i * D + j)];
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("malformed model: ") + e.what());
  }
}

OldaModel OldaModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read model " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void OldaModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write model " + path.string());
  out << to_json();
}

std::vector<int> segment_labels(const std::vector<double>& beat_times, const BoundarySet& boundaries) {
  if (boundaries.times.size() < 2) throw Error(Errc::InvalidArgument, "boundary set needs at least two entries");
  const int segments = static_cast<int>(boundaries.times.size()) - 1;
  std::vector<int> labels;
  labels.reserve(beat_times.size());
  for (double t : beat_times) {
    const auto it = std::upper_bound(boundaries.times.begin(), boundaries.times.end(), t);
    const int label = static_cast<int>(it - boundaries.times.begin()) - 1;
    labels.push_back(std::clamp(label, 0, segments - 1));
  }
  return labels;
}

Scatter olda_scatter(std::span<const TrainingTrack> tracks) {
  if (tracks.empty()) throw Error(Errc::InvalidArgument, "olda_fit needs at least one training track");
  const Eigen::Index D = tracks.front().features.rows();
  Scatter s{Eigen::MatrixXd::Zero(D, D), Eigen::MatrixXd::Zero(D, D)};
  for (const auto& track : tracks) {
    const auto& x = track.features;
    if (x.rows() != D) throw Error(Errc::ColumnMismatch, "training tracks disagree on feature dimension");
    if (static_cast<Eigen::Index>(track.beat_times.size()) != x.cols()) {
      throw Error(Errc::ColumnMismatch, "beat_times must have one entry per feature column");
    }
    const auto labels = segment_labels(track.beat_times, track.boundaries);
    const int classes = static_cast<int>(track.boundaries.times.size()) - 1;
    std::vector<Eigen::VectorXd> mean(static_cast<std::size_t>(classes), Eigen::VectorXd::Zero(D));
    std::vector<double> count(static_cast<std::size_t>(classes), 0.0);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const auto c = static_cast<std::size_t>(labels[static_cast<std::size_t>(j)]);
      mean[c] += x.col(j);
      count[c] += 1.0;
    }
    for (std::size_t c = 0; c < mean.size(); ++c) {
      if (count[c] > 0) mean[c] /= count[c];
    }
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const Eigen::VectorXd dev = x.col(j) - mean[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])];
      s.within.noalias() += dev * dev.transpose();
    }
    // Consecutive non-empty segments and their mutual centroid.
    std::vector<std::size_t> present;
    for (std::size_t c = 0; c < count.size(); ++c) {
      if (count[c] > 0) present.push_back(c);
    }
    for (std::size_t p = 0; p + 1 < present.size(); ++p) {
      const auto a = present[p];
      const auto b = present[p + 1];
      const Eigen::VectorXd mutual = (count[a] * mean[a] + count[b] * mean[b]) / (count[a] + count[b]);
      const Eigen::VectorXd da = mean[a] - mutual;
      const Eigen::VectorXd db = mean[b] - mutual;
      s.ordinal.noalias() += count[a] * da * da.transpose() + count[b] * db * db.transpose();
    }
  }
  return s;
}

double olda_objective(const Eigen::MatrixXd& W, const Scatter& scatter, double lambda) {
  const Eigen::Index D = scatter.within.rows();
  const Eigen::MatrixXd B = scatter.within + lambda * Eigen::MatrixXd::Identity(D, D);
  const Eigen::MatrixXd denom = W.transpose() * B * W;
  const Eigen::MatrixXd numer = W.transpose() * scatter.ordinal * W;
  return denom.ldlt().solve(numer).trace();
}

OldaModel olda_fit(std::span<const TrainingTrack> tracks, double lambda, int d) {
  if (!(lambda > 0)) throw Error(Errc::InvalidArgument, "lambda must be positive");
  const Scatter s = olda_scatter(tracks);
  const Eigen::Index D = s.within.rows();
  const double within = s.within.trace();
  const double ordinal = s.ordinal.trace();
  if (within <= 1e-12 && ordinal <= 1e-12) {
    throw Error(Errc::DegenerateScatter, "all training features are identical");
  }
  OldaModel model;
  model.lambda = lambda;
  model.d = d > 0 ? std::min<int>(d, static_cast<int>(D)) : static_cast<int>(D);
  if (ordinal <= 1e-12 * (within + ordinal)) {
    model.W = Eigen::MatrixXd::Identity(D, D);
    model.d = static_cast<int>(D);
    return model;
  }
  const Eigen::MatrixXd B = s.within + lambda * Eigen::MatrixXd::Identity(D, D);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(s.ordinal, B);
  if (solver.info() != Eigen::Success) throw Error(Errc::DegenerateScatter, "generalized eigensolver failed");
  // Eigen sorts ascending; flip to descending.
  model.W = solver.eigenvectors().rowwise().reverse();
  return model;
}

int segment_count_for(double duration_seconds) {
  return std::clamp(static_cast<int>(std::lround(duration_seconds / 32.0)), 2, 26);
}

std::vector<Eigen::Index> constrained_agglomerative(const Eigen::MatrixXd& x, int segments) {
  const Eigen::Index t = x.cols();
  if (t == 0) return {};
  segments = std::clamp<int>(segments, 1, static_cast<int>(t));

  struct Segment {
    Eigen::Index start;
    double count;
    Eigen::VectorXd sum;
  };
  std::vector<Segment> segs;
  segs.reserve(static_cast<std::size_t>(t));
  for (Eigen::Index j = 0; j < t; ++j) segs.push_back({j, 1.0, x.col(j)});

  auto ward = [](const Segment& a, const Segment& b) {
    const Eigen::VectorXd diff = a.sum / a.count - b.sum / b.count;
    return a.count * b.count / (a.count + b.count) * diff.squaredNorm();
  };
  std::vector<double> cost(segs.size() > 0 ? segs.size() - 1 : 0);
  for (std::size_t i = 0; i + 1 < segs.size(); ++i) cost[i] = ward(segs[i], segs[i + 1]);

  while (static_cast<int>(segs.size()) > segments) {
    const auto best = static_cast<std::size_t>(std::min_element(cost.begin(), cost.end()) - cost.begin());
    segs[best].count += segs[best + 1].count;
    segs[best].sum += segs[best + 1].sum;
    segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(best) + 1);
    cost.erase(cost.begin() + static_cast<std::ptrdiff_t>(best));
    if (best > 0) cost[best - 1] = ward(segs[best - 1], segs[best]);
    if (best < cost.size()) cost[best] = ward(segs[best], segs[best + 1]);
  }
  std::vector<Eigen::Index> starts;
  for (const auto& s : segs) starts.push_back(s.start);
  return starts;
}

TrackFeatures analyze_track(const PcmAudio& audio, const AnalysisConfig& cfg) {
  TrackFeatures out;
  out.duration = audio.duration();
  BeatFeatures bf = extract_beat_features(audio, cfg.features);
  const auto t = static_cast<Eigen::Index>(bf.beats.size());
  if (t < 2) throw Error(Errc::TooFewBeats, "fewer than two beats detected");
  Eigen::MatrixXd latent_mfcc, latent_chroma;
  if (cfg.mode == FeatureMode::Repetitive) {
    latent_mfcc = latent_repetition(self_similarity(bf.mfcc, cfg.k_neighbors, cfg.median_width), cfg.latent_dim).latent;
    latent_chroma =
        latent_repetition(self_similarity(bf.chroma, cfg.k_neighbors, cfg.median_width), cfg.latent_dim).latent;
  }
  out.stacked = standardize_rows(
      stack_features(bf.mfcc, bf.chroma, latent_mfcc, latent_chroma, bf.beats, out.duration, cfg.mode));
  out.beats = std::move(bf.beats);
  return out;
}

TrainingTrack training_track(const PcmAudio& audio, const BoundarySet& boundaries, const AnalysisConfig& cfg) {
  auto features = analyze_track(audio, cfg);
  return {std::move(features.stacked), std::move(features.beats.times), boundaries};
}

BoundarySet boundaries_from_features(const TrackFeatures& features, const OldaModel& model, int segments) {
  const Eigen::MatrixXd projected = model.project(features.stacked);
  const auto starts = constrained_agglomerative(projected, segments);
  BoundarySet set;
  set.times.push_back(0.0);
  for (std::size_t s = 1; s < starts.size(); ++s) {
    const double t = features.beats.times[static_cast<std::size_t>(starts[s])];
    if (t > set.times.back() && t < features.duration) set.times.push_back(t);
  }
  set.times.push_back(features.duration);
  return set;
}

BoundarySet detect_boundaries(const PcmAudio& audio, const OldaModel& model, const AnalysisConfig& cfg) {
  check_input_length(audio.duration());
  const TrackFeatures features = analyze_track(audio, cfg);
  return boundaries_from_features(features, model, segment_count_for(features.duration));
}

}  // namespace mvgen
