#pragma once

#include "mvgen/media_io.hpp"
#include "mvgen/scene_index.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fixtures {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "mvgen");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string ffmpeg_path();
mvgen::CodecTool tool();

// A synthetic shot: flat base color, a diagonal texture and slow drift.
struct Shot {
  int frames = 0;
  std::uint8_t r = 0, g = 0, b = 0;
};

// Random shot list with lengths in [min_len, max_len] and neighbouring colors
// far apart in summed intensity, so every cut is a hard cut.
std::vector<Shot> random_shots(std::uint64_t seed, int count, int min_len, int max_len);
std::vector<Shot> shots_with_palette(std::uint64_t seed, const std::vector<int>& lengths,
                                     const std::vector<std::array<std::uint8_t, 3>>& palette);

mvgen::RawFrame shot_frame(const Shot& shot, int frame_in_shot, int width, int height);
std::vector<mvgen::RawFrame> render_shots(const std::vector<Shot>& shots, int width, int height);
/// First frame index of every shot after the first.
std::vector<std::int64_t> cut_positions(const std::vector<Shot>& shots);

/// Encodes shots to a lossless-ish H.264 file, letterboxed with `bar_rows`
/// black rows top and bottom when > 0, with an optional tone track.
void write_video(const std::filesystem::path& out, const std::vector<Shot>& shots, int width, int height,
                 int bar_rows = 0, bool with_audio = false);

/// Timbre A for [0, change), timbre B afterwards; steady 120 BPM pulse.
mvgen::PcmAudio two_section_track(double duration, double change, std::uint64_t seed, int rate = 22050);
mvgen::PcmAudio tone(double duration, double freq, int rate = 22050, double amp = 0.3);

mvgen::ColorHistogram768 random_histogram(std::uint64_t seed);

}  // namespace fixtures
