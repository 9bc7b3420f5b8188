#include "fixtures.hpp"

#include "mvgen/error.hpp"
#include "mvgen/rng.hpp"

#include <array>
#include <cmath>
#include <cstdlib>
#include <numbers>

namespace fixtures {
namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  std::string templ = (fs::temp_directory_path() / (tag + "-XXXXXX")).string();
  if (!mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed");
  path_ = templ;
}

TempDir::~TempDir() {
  std::error_code ec;
  if (!std::getenv("MVGEN_KEEP_TMP")) fs::remove_all(path_, ec);
}

std::string ffmpeg_path() {
#ifdef MVGEN_TEST_FFMPEG
  return MVGEN_TEST_FFMPEG;
#else
  return "ffmpeg";
#endif
}

mvgen::CodecTool tool() {
  mvgen::CodecConfig cfg;
  cfg.tool_path = ffmpeg_path();
  return mvgen::CodecTool(cfg);
}

namespace {
int level_sum(const Shot& s) { return s.r + s.g + s.b; }
}

std::vector<Shot> random_shots(std::uint64_t seed, int count, int min_len, int max_len) {
  mvgen::Rng rng(seed);
  std::vector<Shot> shots;
  for (int i = 0; i < count; ++i) {
    Shot s;
    s.frames = min_len + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_len - min_len + 1)));
    do {
      s.r = static_cast<std::uint8_t>(30 + rng.below(196));
      s.g = static_cast<std::uint8_t>(30 + rng.below(196));
      s.b = static_cast<std::uint8_t>(30 + rng.below(196));
    } while (!shots.empty() && std::abs(level_sum(s) - level_sum(shots.back())) < 200);
    shots.push_back(s);
  }
  return shots;
}

std::vector<Shot> shots_with_palette(std::uint64_t seed, const std::vector<int>& lengths,
                                     const std::vector<std::array<std::uint8_t, 3>>& palette) {
  mvgen::Rng rng(seed);
  std::vector<Shot> shots;
  std::size_t prev = palette.size();
  for (int len : lengths) {
    std::size_t pick;
    do {
      pick = static_cast<std::size_t>(rng.below(palette.size()));
    } while (pick == prev && palette.size() > 1);
    prev = pick;
    shots.push_back({len, palette[pick][0], palette[pick][1], palette[pick][2]});
  }
  return shots;
}

mvgen::RawFrame shot_frame(const Shot& shot, int frame_in_shot, int width, int height) {
  mvgen::RawFrame f(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // +-12 texture that slides one pixel per frame
      const int t = ((x + y + frame_in_shot) / 8) % 4 * 8 - 12;
      auto* p = f.at(x, y);
      p[0] = static_cast<std::uint8_t>(std::clamp(shot.r + t, 0, 255));
      p[1] = static_cast<std::uint8_t>(std::clamp(shot.g + t, 0, 255));
      p[2] = static_cast<std::uint8_t>(std::clamp(shot.b + t, 0, 255));
    }
  }
  return f;
}

std::vector<mvgen::RawFrame> render_shots(const std::vector<Shot>& shots, int width, int height) {
  std::vector<mvgen::RawFrame> frames;
  std::int64_t index = 0;
  for (const auto& s : shots) {
    for (int i = 0; i < s.frames; ++i) {
      frames.push_back(shot_frame(s, i, width, height));
      frames.back().index = index++;
    }
  }
  return frames;
}

std::vector<std::int64_t> cut_positions(const std::vector<Shot>& shots) {
  std::vector<std::int64_t> cuts;
  std::int64_t at = 0;
  for (std::size_t i = 0; i < shots.size(); ++i) {
    if (i > 0) cuts.push_back(at);
    at += shots[i].frames;
  }
  return cuts;
}

void write_video(const fs::path& out, const std::vector<Shot>& shots, int width, int height, int bar_rows,
                 bool with_audio) {
  int total = 0;
  for (const auto& s : shots) total += s.frames;
  std::optional<fs::path> audio;
  if (with_audio) {
    audio = out;
    audio->replace_extension(".wav");
    mvgen::write_wav(tone(total / 25.0, 330.0, 22050, 0.2), *audio);
  }
  mvgen::VideoWriter writer(tool(), out, {width, height + 2 * bar_rows}, 25.0, audio, false);
  for (const auto& s : shots) {
    for (int i = 0; i < s.frames; ++i) {
      mvgen::RawFrame inner = shot_frame(s, i, width, height);
      if (bar_rows == 0) {
        writer.write(inner);
        continue;
      }
      mvgen::RawFrame full(width, height + 2 * bar_rows);
      std::copy(inner.pixels.begin(), inner.pixels.end(),
                full.pixels.begin() + static_cast<std::ptrdiff_t>(bar_rows) * width * 3);
      writer.write(full);
    }
  }
  writer.finish();
  if (audio) fs::remove(*audio);
}

mvgen::PcmAudio tone(double duration, double freq, int rate, double amp) {
  mvgen::PcmAudio a;
  a.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(duration * rate));
  a.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    a.samples[i] = static_cast<float>(amp * std::sin(2 * std::numbers::pi * freq * static_cast<double>(i) / rate));
  }
  return a;
}

mvgen::PcmAudio two_section_track(double duration, double change, std::uint64_t seed, int rate) {
  mvgen::Rng rng(seed);
  mvgen::PcmAudio a;
  a.sample_rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(duration * rate));
  a.samples.assign(n, 0.0f);
  // section A: low triad with sine partials; B: bright detuned saw-like chord over noise
  const double base_a = 110.0 * std::pow(2.0, static_cast<double>(rng.below(6)) / 12.0);
  const double base_b = base_a * std::pow(2.0, (5.0 + static_cast<double>(rng.below(3))) / 12.0) * 2.0;
  const double beat = 0.5;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double phase = std::fmod(t, beat);
    const double env = std::exp(-phase * 12.0);
    double v = 0.0;
    if (t < change) {
      for (double ratio : {1.0, 1.25, 1.5}) v += 0.12 * std::sin(2 * std::numbers::pi * base_a * ratio * t);
      v *= 0.6 + 0.4 * env;
      v += 0.35 * env * std::sin(2 * std::numbers::pi * 60.0 * phase);  // kick
    } else {
      for (double ratio : {1.0, 1.189, 1.498}) {
        for (int h = 1; h <= 6; ++h) {
          v += 0.05 / h * std::sin(2 * std::numbers::pi * base_b * ratio * h * t);
        }
      }
      const double noise = rng.uniform() * 2.0 - 1.0;
      v += 0.25 * env * noise;  // hat-like burst
    }
    a.samples[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return a;
}

mvgen::ColorHistogram768 random_histogram(std::uint64_t seed) {
  mvgen::Rng rng(seed);
  mvgen::ColorHistogram768 h;
  for (std::size_t block = 0; block < 3; ++block) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 256; ++i) {
      const double v = rng.uniform();
      h.values[block * 256 + i] = v;
      sum += v;
    }
    for (std::size_t i = 0; i < 256; ++i) h.values[block * 256 + i] /= sum;
  }
  return h;
}

}  // namespace fixtures
