#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mvgen {

class Subprocess;

struct Size {
  int width = 0;
  int height = 0;
  friend bool operator==(const Size&, const Size&) = default;
};

/// One decoded RGB24 frame, row-major, 3 bytes per pixel.
struct RawFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
  std::int64_t index = 0;
  double timestamp = 0.0;

  RawFrame() = default;
  RawFrame(int w, int h, std::int64_t frame_index = 0, double ts = 0.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0), index(frame_index), timestamp(ts) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  void fill(std::uint8_t r, std::uint8_t g, std::uint8_t b);
  bool valid() const { return width > 0 && height > 0 && pixels.size() == pixel_count() * 3; }
};

/// Mono PCM in [-1, 1].
struct PcmAudio {
  double sample_rate = 0.0;
  std::vector<float> samples;

  double duration() const { return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0; }
};

/// Target geometry after harmonization. `outer` is always the output frame,
/// `inner` the picture area between the letterbox bars. The `source_*` fields
/// describe what was measured on the input and drive the crop.
struct GeometrySpec {
  Size outer{640, 360};
  Size inner{640, 360};
  int bar_height = 0;
  Size source{};
  int source_bar_rows = 0;

  bool letterboxed() const { return inner.height < outer.height; }
};

inline constexpr Size kOutputSize{640, 360};
inline constexpr int kLetterboxInnerHeight = 272;
inline constexpr double kDarkRowLuma = 16.0;

struct CodecConfig {
  std::string tool_path = "ffmpeg";
  int output_fps = 25;
  std::string video_codec = "libx264";
  std::string preset = "veryfast";
  int crf = 20;
};

struct MediaInfo {
  double duration = 0.0;
  bool has_video = false;
  Size frame_size{};
  double fps = 0.0;
  bool has_audio = false;
  int sample_rate = 0;
  int channels = 0;
};

/// Parses the stream summary the codec tool prints for `-i <file>`.
MediaInfo parse_media_info(const std::string& probe_text);

/// Handle on the external codec tool. All decoding and encoding goes through
/// it as a subprocess exchanging raw RGB24 / s16le PCM over pipes.
class CodecTool {
 public:
  /// Resolution order: config.tool_path if it is not the default, then the
  /// MVGEN_CODEC_TOOL environment variable, then "ffmpeg" on PATH.
  explicit CodecTool(CodecConfig config = {});

  const std::string& path() const { return path_; }
  const CodecConfig& config() const { return config_; }

  MediaInfo probe(const std::filesystem::path& media) const;

 private:
  CodecConfig config_;
  std::string path_;
};

/// Streaming decoder; yields every `stride`-th frame in presentation order.
class FrameReader {
 public:
  FrameReader(const CodecTool& tool, const std::filesystem::path& video, int stride = 1);
  ~FrameReader();
  FrameReader(FrameReader&&) noexcept;
  FrameReader& operator=(FrameReader&&) noexcept;

  std::optional<RawFrame> next();
  const MediaInfo& info() const { return info_; }

 private:
  MediaInfo info_;
  int stride_ = 1;
  std::int64_t next_index_ = 0;
  bool finished_ = false;
  std::unique_ptr<Subprocess> process_;
  std::filesystem::path source_;
};

std::vector<RawFrame> decode_frames(const CodecTool& tool, const std::filesystem::path& video, int sample_stride);

/// Decodes frames [first, first + count) of a video, scaled to `size` when given.
std::vector<RawFrame> decode_frame_range(const CodecTool& tool, const std::filesystem::path& video, double fps,
                                         std::int64_t first, std::int64_t count, std::optional<Size> size);

/// Decodes the first audio stream to mono at `target_rate`; multichannel
/// input is downmixed by averaging channels.
PcmAudio decode_audio(const CodecTool& tool, const std::filesystem::path& media, int target_rate);

double row_luma(const RawFrame& frame, int row);

/// Measures letterbox rows common to every frame and snaps the result to one
/// of the two harmonized categories (full 640x360 or 640x272 inner).
GeometrySpec detect_black_bars(std::span<const RawFrame> frames);

/// Builds the filter chain that maps the measured source geometry onto `spec`.
std::string harmonize_filter(const GeometrySpec& spec, int fps);

std::filesystem::path harmonize(const CodecTool& tool, const std::filesystem::path& video, const GeometrySpec& spec,
                                const std::filesystem::path& out);

/// Encodes raw frames pushed one at a time; optionally muxes an audio file.
class VideoWriter {
 public:
  VideoWriter(const CodecTool& tool, const std::filesystem::path& out, Size size, double fps,
              std::optional<std::filesystem::path> audio = std::nullopt, bool shortest = false);
  ~VideoWriter();
  VideoWriter(const VideoWriter&) = delete;
  VideoWriter& operator=(const VideoWriter&) = delete;

  void write(const RawFrame& frame);
  /// Closes the pipe and waits; throws UndecodableMedia if encoding failed.
  void finish();
  std::int64_t frames_written() const { return written_; }

 private:
  Size size_;
  std::unique_ptr<Subprocess> process_;
  std::int64_t written_ = 0;
  bool finished_ = false;
};

std::vector<std::byte> encode_wav(const PcmAudio& audio);
void write_wav(const PcmAudio& audio, const std::filesystem::path& out);
/// Writes a two-channel WAV; used to build stereo fixtures.
void write_wav_stereo(const PcmAudio& left, const PcmAudio& right, const std::filesystem::path& out);

}  // namespace mvgen
