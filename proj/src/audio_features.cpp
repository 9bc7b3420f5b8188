#include "mvgen/audio_features.hpp"

#include "mvgen/error.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

namespace mvgen {

Spectrogram stft_power(const PcmAudio& audio, const FeatureConfig& cfg) {
  if (cfg.n_fft <= 0 || cfg.hop <= 0) throw Error(Errc::InvalidArgument, "bad STFT parameters");
  const auto n = static_cast<Eigen::Index>(audio.samples.size());
  const Eigen::Index frames = 1 + n / cfg.hop;
  const int bins = cfg.n_fft / 2 + 1;
  const int half = cfg.n_fft / 2;

  std::vector<double> window(static_cast<std::size_t>(cfg.n_fft));
  for (int i = 0; i < cfg.n_fft; ++i) {
    window[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.n_fft);
  }

  Spectrogram spec;
  spec.sample_rate = audio.sample_rate;
  spec.n_fft = cfg.n_fft;
  spec.hop = cfg.hop;
  spec.power.resize(bins, frames);

  Eigen::FFT<double> fft;
  std::vector<double> buffer(static_cast<std::size_t>(cfg.n_fft));
  std::vector<std::complex<double>> out;
  for (Eigen::Index f = 0; f < frames; ++f) {
    const Eigen::Index center = f * cfg.hop;
    for (int i = 0; i < cfg.n_fft; ++i) {
      const Eigen::Index s = center - half + i;
      const double x = (s >= 0 && s < n) ? audio.samples[static_cast<std::size_t>(s)] : 0.0;
      buffer[static_cast<std::size_t>(i)] = x * window[static_cast<std::size_t>(i)];
    }
    fft.fwd(out, buffer);
    for (int b = 0; b < bins; ++b) spec.power(b, f) = std::norm(out[static_cast<std::size_t>(b)]);
  }
  return spec;
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

double median_of(std::vector<double>& v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

}  // namespace

Eigen::MatrixXd mel_filterbank(int n_mels, int n_fft, double sample_rate) {
  const int bins = n_fft / 2 + 1;
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_mels, bins);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m) + 1];
    const double hi = edges[static_cast<std::size_t>(m) + 2];
    const double norm = 2.0 / (hi - lo);
    for (int b = 0; b < bins; ++b) {
      const double f = b * sample_rate / n_fft;
      double w = 0.0;
      if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      fb(m, b) = w * norm;
    }
  }
  return fb;
}

Eigen::MatrixXd log_mel(const Spectrogram& spec, const FeatureConfig& cfg) {
  const Eigen::MatrixXd fb = mel_filterbank(cfg.n_mels, spec.n_fft, spec.sample_rate);
  Eigen::MatrixXd mel = fb * spec.power;
  // dB with an 80 dB floor below the loudest bin.
  mel = (mel.array().max(1e-10)).log10() * 10.0;
  const double top = mel.size() ? mel.maxCoeff() : 0.0;
  return mel.array().max(top - 80.0).matrix();
}

Eigen::MatrixXd mfcc(const Spectrogram& spec, const FeatureConfig& cfg) {
  const Eigen::MatrixXd lm = log_mel(spec, cfg);
  const int m = cfg.n_mels;
  Eigen::MatrixXd dct(cfg.n_mfcc, m);
  for (int k = 0; k < cfg.n_mfcc; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
    for (int i = 0; i < m; ++i) dct(k, i) = scale * std::cos(std::numbers::pi * k * (2.0 * i + 1.0) / (2.0 * m));
  }
  return dct * lm;
}

Eigen::MatrixXd chroma(const Spectrogram& spec, const FeatureConfig& cfg) {
  const auto bins = spec.power.rows();
  Eigen::MatrixXd map = Eigen::MatrixXd::Zero(12, bins);
  for (Eigen::Index b = 1; b < bins; ++b) {
    const double f = static_cast<double>(b) * spec.sample_rate / spec.n_fft;
    if (f < cfg.chroma_fmin || f > cfg.chroma_fmax) continue;
    const long midi = std::lround(69.0 + 12.0 * std::log2(f / 440.0));
    map(static_cast<Eigen::Index>(((midi % 12) + 12) % 12), b) = 1.0;
  }
  Eigen::MatrixXd c = map * spec.power;
  const double energy_floor = 1e-10;
  for (Eigen::Index f = 0; f < c.cols(); ++f) {
    const double peak = c.col(f).maxCoeff();
    if (peak > energy_floor) c.col(f) /= peak;
    else c.col(f).setZero();
  }
  return c;
}

Eigen::VectorXd onset_strength(const Spectrogram& spec, const FeatureConfig& cfg) {
  const Eigen::MatrixXd lm = log_mel(spec, cfg);
  Eigen::VectorXd onset = Eigen::VectorXd::Zero(lm.cols());
  for (Eigen::Index f = 1; f < lm.cols(); ++f) {
    onset(f) = (lm.col(f) - lm.col(f - 1)).cwiseMax(0.0).mean();
  }
  return onset;
}

TempoEstimate estimate_tempo(const Eigen::VectorXd& onset, double frame_rate, const FeatureConfig& cfg) {
  TempoEstimate est;
  const Eigen::Index n = onset.size();
  if (n < 4) return est;
  const Eigen::VectorXd centered = onset.array() - onset.mean();
  const double energy = centered.squaredNorm();
  if (energy <= 1e-12) return est;
  const auto min_lag = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(60.0 * frame_rate / cfg.max_bpm)));
  const auto max_lag = std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(std::ceil(60.0 * frame_rate / cfg.min_bpm)));
  double best = -1.0;
  for (Eigen::Index lag = min_lag; lag <= max_lag; ++lag) {
    const double ac = centered.head(n - lag).dot(centered.tail(n - lag)) / energy;
    const double bpm = 60.0 * frame_rate / static_cast<double>(lag);
    const double prior = std::exp(-0.5 * std::pow(std::log2(bpm / 120.0), 2.0));
    if (ac * prior > best) {
      best = ac * prior;
      est.period_frames = static_cast<double>(lag);
      est.periodicity = ac;
    }
  }
  return est;
}

BeatGrid fixed_beat_grid(double period, double duration, double frame_rate) {
  BeatGrid grid;
  grid.fallback = true;
  std::int64_t last_frame = -1;
  for (std::int64_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * period;
    if (t >= duration) break;
    const auto frame = static_cast<std::int64_t>(std::llround(t * frame_rate));
    if (frame <= last_frame) continue;
    grid.times.push_back(static_cast<double>(frame) / frame_rate);
    grid.frames.push_back(frame);
    last_frame = frame;
  }
  return grid;
}

BeatGrid track_beats(const Eigen::VectorXd& onset, double frame_rate, double duration, const FeatureConfig& cfg) {
  constexpr double kMinPeriodicity = 0.1;
  const TempoEstimate tempo = estimate_tempo(onset, frame_rate, cfg);
  if (tempo.period_frames <= 0 || tempo.periodicity < kMinPeriodicity) {
    return fixed_beat_grid(cfg.fallback_beat_period, duration, frame_rate);
  }
  const double period = tempo.period_frames;
  const Eigen::Index n = onset.size();

  // Local score: onset normalized by its standard deviation, smoothed with a
  // Gaussian whose width follows the period.
  const double mean = onset.mean();
  const double sd = std::sqrt((onset.array() - mean).square().mean());
  const Eigen::VectorXd norm = onset / std::max(sd, 1e-12);
  const auto radius = static_cast<Eigen::Index>(std::ceil(period));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (Eigen::Index i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * std::pow(static_cast<double>(i) * 32.0 / period, 2.0));
  }
  Eigen::VectorXd local = Eigen::VectorXd::Zero(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double s = 0.0;
    for (Eigen::Index i = -radius; i <= radius; ++i) {
      const Eigen::Index u = t + i;
      if (u >= 0 && u < n) s += kernel[static_cast<std::size_t>(i + radius)] * norm(u);
    }
    local(t) = s;
  }

  Eigen::VectorXd cumulative(n);
  std::vector<Eigen::Index> backlink(static_cast<std::size_t>(n), -1);
  const auto window_lo = static_cast<Eigen::Index>(std::llround(2.0 * period));
  const auto window_hi = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(period / 2.0)));
  for (Eigen::Index t = 0; t < n; ++t) {
    double best = -std::numeric_limits<double>::infinity();
    Eigen::Index arg = -1;
    for (Eigen::Index prev = t - window_lo; prev <= t - window_hi; ++prev) {
      if (prev < 0) continue;
      const double gap = static_cast<double>(t - prev);
      const double score = cumulative(prev) - cfg.tightness * std::pow(std::log(gap / period), 2.0);
      if (score > best) {
        best = score;
        arg = prev;
      }
    }
    cumulative(t) = local(t) + (arg >= 0 ? best : 0.0);
    backlink[static_cast<std::size_t>(t)] = arg;
  }

  // Last beat: latest local maximum of the cumulative score that is at least
  // half the median local-maximum height.
  std::vector<Eigen::Index> maxima;
  for (Eigen::Index t = 1; t + 1 < n; ++t) {
    if (cumulative(t) > cumulative(t - 1) && cumulative(t) >= cumulative(t + 1)) maxima.push_back(t);
  }
  if (maxima.empty()) return fixed_beat_grid(cfg.fallback_beat_period, duration, frame_rate);
  std::vector<double> heights;
  for (auto t : maxima) heights.push_back(cumulative(t));
  const double threshold = 0.5 * median_of(heights);
  Eigen::Index last = maxima.back();
  for (auto it = maxima.rbegin(); it != maxima.rend(); ++it) {
    if (cumulative(*it) >= threshold) {
      last = *it;
      break;
    }
  }

  std::vector<std::int64_t> frames;
  for (Eigen::Index t = last; t >= 0; t = backlink[static_cast<std::size_t>(t)]) frames.push_back(t);
  std::reverse(frames.begin(), frames.end());

  // Trim weak leading and trailing beats.
  double rms = 0.0;
  for (auto f : frames) rms += local(f) * local(f);
  rms = std::sqrt(rms / static_cast<double>(frames.size()));
  std::size_t first = 0;
  std::size_t end = frames.size();
  while (first < end && local(frames[first]) < 0.5 * rms) ++first;
  while (end > first && local(frames[end - 1]) < 0.5 * rms) --end;
  frames = std::vector<std::int64_t>(frames.begin() + static_cast<std::ptrdiff_t>(first),
                                     frames.begin() + static_cast<std::ptrdiff_t>(end));

  const double expected = duration * frame_rate / period;
  if (frames.size() < 2 || static_cast<double>(frames.size()) < 0.5 * expected) {
    return fixed_beat_grid(cfg.fallback_beat_period, duration, frame_rate);
  }
  BeatGrid grid;
  for (auto f : frames) {
    const double t = static_cast<double>(f) / frame_rate;
    if (t >= duration) break;
    grid.frames.push_back(f);
    grid.times.push_back(t);
  }
  return grid;
}

Eigen::MatrixXd beat_sync(const Eigen::MatrixXd& features, const std::vector<std::int64_t>& beat_frames,
                          Aggregate how) {
  const auto beats = static_cast<Eigen::Index>(beat_frames.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(features.rows(), beats);
  const Eigen::Index n = features.cols();
  std::vector<double> scratch;
  for (Eigen::Index k = 0; k < beats; ++k) {
    const Eigen::Index lo = k == 0 ? 0 : std::min<Eigen::Index>(beat_frames[static_cast<std::size_t>(k)], n);
    Eigen::Index hi = k + 1 < beats ? beat_frames[static_cast<std::size_t>(k) + 1] : n;
    hi = std::min(hi, n);
    if (hi <= lo) continue;
    if (how == Aggregate::Mean) {
      out.col(k) = features.middleCols(lo, hi - lo).rowwise().mean();
    } else {
      for (Eigen::Index r = 0; r < features.rows(); ++r) {
        scratch.clear();
        for (Eigen::Index c = lo; c < hi; ++c) scratch.push_back(features(r, c));
        out(r, k) = median_of(scratch);
      }
    }
  }
  return out;
}

BeatFeatures extract_beat_features(const PcmAudio& audio, const FeatureConfig& cfg) {
  if (audio.sample_rate <= 0 || audio.samples.empty()) throw Error(Errc::SilentAudio, "empty audio");
  double energy = 0.0;
  for (float s : audio.samples) energy += static_cast<double>(s) * s;
  if (energy == 0.0) throw Error(Errc::SilentAudio, "audio has no energy");

  const Spectrogram spec = stft_power(audio, cfg);
  const double frame_rate = audio.sample_rate / cfg.hop;
  const Eigen::VectorXd onset = onset_strength(spec, cfg);

  BeatFeatures out;
  out.beats = track_beats(onset, frame_rate, audio.duration(), cfg);
  out.mfcc = beat_sync(mfcc(spec, cfg), out.beats.frames, Aggregate::Mean);
  out.chroma = beat_sync(chroma(spec, cfg), out.beats.frames, Aggregate::Median);
  return out;
}

}  // namespace mvgen
