#include "mvgen/media_io.hpp"

#include "mvgen/error.hpp"
#include "mvgen/subprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

namespace mvgen {
namespace fs = std::filesystem;

void RawFrame::fill(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    pixels[i] = r;
    pixels[i + 1] = g;
    pixels[i + 2] = b;
  }
}

MediaInfo parse_media_info(const std::string& text) {
  MediaInfo info;
  std::smatch m;
  static const std::regex duration_re(R"(Duration:\s*(\d+):(\d+):(\d+(?:\.\d+)?))");
  if (std::regex_search(text, m, duration_re)) {
    info.duration = std::stod(m[1]) * 3600.0 + std::stod(m[2]) * 60.0 + std::stod(m[3]);
  }

  std::istringstream lines(text);
  std::string line;
  static const std::regex size_re(R"([ ,](\d{2,5})x(\d{2,5})[ ,\]])");
  static const std::regex fps_re(R"(([\d.]+)(k?) fps)");
  static const std::regex tbr_re(R"(([\d.]+)(k?) tbr)");
  static const std::regex rate_re(R"((\d+) Hz)");
  static const std::regex channels_re(R"((\d+) channels)");
  while (std::getline(lines, line)) {
    if (line.find("Stream #") == std::string::npos) continue;
    if (!info.has_video && line.find("Video:") != std::string::npos) {
      // Cover art attachments are not playable video.
      if (line.find("attached pic") != std::string::npos) continue;
      info.has_video = true;
      if (std::regex_search(line, m, size_re)) info.frame_size = {std::stoi(m[1]), std::stoi(m[2])};
      if (std::regex_search(line, m, fps_re)) {
        info.fps = std::stod(m[1]) * (m[2] == "k" ? 1000.0 : 1.0);
      } else if (std::regex_search(line, m, tbr_re)) {
        info.fps = std::stod(m[1]) * (m[2] == "k" ? 1000.0 : 1.0);
      }
    } else if (!info.has_audio && line.find("Audio:") != std::string::npos) {
      info.has_audio = true;
      if (std::regex_search(line, m, rate_re)) info.sample_rate = std::stoi(m[1]);
      if (line.find(", mono") != std::string::npos) info.channels = 1;
      else if (line.find(", stereo") != std::string::npos) info.channels = 2;
      else if (line.find(", 5.1") != std::string::npos) info.channels = 6;
      else if (line.find(", 7.1") != std::string::npos) info.channels = 8;
      else if (line.find(", quad") != std::string::npos) info.channels = 4;
      else if (std::regex_search(line, m, channels_re)) info.channels = std::stoi(m[1]);
      else info.channels = 2;
    }
  }
  return info;
}

CodecTool::CodecTool(CodecConfig config) : config_(std::move(config)) {
  std::string wanted = config_.tool_path;
  if (wanted.empty() || wanted == "ffmpeg") {
    if (const char* env = std::getenv("MVGEN_CODEC_TOOL"); env && *env) wanted = env;
    else wanted = "ffmpeg";
  }
  path_ = find_executable(wanted);
  if (path_.empty()) throw Error(Errc::CodecToolMissing, "codec tool not found: " + wanted);
  if (config_.output_fps <= 0) throw Error(Errc::InvalidArgument, "output_fps must be positive");
}

MediaInfo CodecTool::probe(const fs::path& media) const {
  if (!fs::exists(media)) throw Error(Errc::UndecodableMedia, "no such file: " + media.string());
  Subprocess proc({path_, "-hide_banner", "-nostdin", "-i", media.string()}, {});
  proc.wait();
  const std::string text = proc.stderr_text();
  if (text.find("Input #0") == std::string::npos) {
    throw Error(Errc::UndecodableMedia, media.string() + ": " + text.substr(0, 300));
  }
  return parse_media_info(text);
}

namespace {

std::vector<std::string> rawvideo_args(const std::string& tool, const fs::path& video, std::optional<Size> size) {
  std::vector<std::string> args = {tool, "-hide_banner", "-nostdin", "-loglevel", "error", "-i", video.string(),
                                   "-map", "0:v:0", "-an", "-sn"};
  if (size) {
    args.insert(args.end(), {"-vf", "scale=" + std::to_string(size->width) + ":" + std::to_string(size->height)});
  }
  args.insert(args.end(), {"-fps_mode", "passthrough", "-f", "rawvideo", "-pix_fmt", "rgb24", "-"});
  return args;
}

}  // namespace

FrameReader::FrameReader(const CodecTool& tool, const fs::path& video, int stride)
    : stride_(stride), source_(video) {
  if (stride < 1) throw Error(Errc::InvalidArgument, "sample_stride must be >= 1");
  info_ = tool.probe(video);
  if (!info_.has_video || info_.frame_size.width <= 0 || info_.frame_size.height <= 0) {
    throw Error(Errc::UndecodableMedia, video.string() + ": no video stream");
  }
  if (info_.fps <= 0) info_.fps = tool.config().output_fps;
  process_ = std::make_unique<Subprocess>(rawvideo_args(tool.path(), video, std::nullopt),
                                          SpawnOptions{.pipe_stdin = false, .pipe_stdout = true});
}

FrameReader::~FrameReader() = default;
FrameReader::FrameReader(FrameReader&&) noexcept = default;
FrameReader& FrameReader::operator=(FrameReader&&) noexcept = default;

std::optional<RawFrame> FrameReader::next() {
  if (finished_) return std::nullopt;
  const auto [w, h] = info_.frame_size;
  RawFrame frame(w, h);
  while (true) {
    const auto got = process_->read_stdout(std::as_writable_bytes(std::span(frame.pixels)));
    if (got < frame.pixels.size()) {
      finished_ = true;
      if (process_->wait() != 0) {
        throw Error(Errc::UndecodableMedia, source_.string() + ": " + process_->stderr_text().substr(0, 300));
      }
      if (next_index_ == 0) throw Error(Errc::UndecodableMedia, source_.string() + ": no frames decoded");
      return std::nullopt;
    }
    const std::int64_t index = next_index_++;
    if (index % stride_ == 0) {
      frame.index = index;
      frame.timestamp = static_cast<double>(index) / info_.fps;
      return frame;
    }
  }
}

std::vector<RawFrame> decode_frames(const CodecTool& tool, const fs::path& video, int sample_stride) {
  FrameReader reader(tool, video, sample_stride);
  std::vector<RawFrame> frames;
  while (auto f = reader.next()) frames.push_back(std::move(*f));
  return frames;
}

std::vector<RawFrame> decode_frame_range(const CodecTool& tool, const fs::path& video, double fps,
                                         std::int64_t first, std::int64_t count, std::optional<Size> size) {
  if (count <= 0) return {};
  if (!fs::exists(video)) throw Error(Errc::MissingSource, "no such file: " + video.string());
  Size frame_size;
  if (size) {
    frame_size = *size;
  } else {
    frame_size = tool.probe(video).frame_size;
  }
  std::ostringstream seek;
  seek.precision(6);
  seek << std::fixed << static_cast<double>(first) / fps;
  std::vector<std::string> args = {tool.path(), "-hide_banner", "-nostdin", "-loglevel", "error",
                                   "-ss", seek.str(), "-i", video.string(), "-map", "0:v:0", "-an", "-sn",
                                   "-frames:v", std::to_string(count)};
  if (size) args.insert(args.end(), {"-vf", "scale=" + std::to_string(size->width) + ":" + std::to_string(size->height)});
  args.insert(args.end(), {"-fps_mode", "passthrough", "-f", "rawvideo", "-pix_fmt", "rgb24", "-"});
  Subprocess proc(args, {.pipe_stdin = false, .pipe_stdout = true});

  std::vector<RawFrame> frames;
  for (std::int64_t i = 0; i < count; ++i) {
    RawFrame frame(frame_size.width, frame_size.height, first + i, static_cast<double>(first + i) / fps);
    if (proc.read_stdout(std::as_writable_bytes(std::span(frame.pixels))) < frame.pixels.size()) break;
    frames.push_back(std::move(frame));
  }
  if (proc.wait() != 0 || frames.empty()) {
    throw Error(Errc::UndecodableMedia, video.string() + ": " + proc.stderr_text().substr(0, 300));
  }
  return frames;
}

PcmAudio decode_audio(const CodecTool& tool, const fs::path& media, int target_rate) {
  if (target_rate <= 0) throw Error(Errc::InvalidArgument, "target_rate must be positive");
  const MediaInfo info = tool.probe(media);
  if (!info.has_audio) throw Error(Errc::NoAudioStream, media.string());
  const int channels = std::max(1, info.channels);
  Subprocess proc({tool.path(), "-hide_banner", "-nostdin", "-loglevel", "error", "-i", media.string(), "-map",
                   "0:a:0", "-vn", "-sn", "-ac", std::to_string(channels), "-ar", std::to_string(target_rate), "-f",
                   "s16le", "-acodec", "pcm_s16le", "-"},
                  {.pipe_stdin = false, .pipe_stdout = true});

  PcmAudio audio;
  audio.sample_rate = target_rate;
  std::vector<std::int16_t> block(static_cast<std::size_t>(channels) * 8192);
  std::size_t carry = 0;  // bytes of a partial sample frame kept from the previous read
  std::vector<std::byte> bytes(block.size() * sizeof(std::int16_t));
  while (true) {
    const std::size_t wanted = bytes.size() - carry;
    const auto got = proc.read_stdout(std::span(bytes).subspan(carry));
    const std::size_t available = carry + got;
    const std::size_t frame_bytes = static_cast<std::size_t>(channels) * sizeof(std::int16_t);
    const std::size_t whole = available / frame_bytes;
    std::memcpy(block.data(), bytes.data(), whole * frame_bytes);
    for (std::size_t f = 0; f < whole; ++f) {
      double sum = 0.0;
      for (int c = 0; c < channels; ++c) sum += block[f * channels + c];
      audio.samples.push_back(static_cast<float>(sum / channels / 32768.0));
    }
    carry = available - whole * frame_bytes;
    if (carry > 0) std::memmove(bytes.data(), bytes.data() + whole * frame_bytes, carry);
    if (got < wanted) break;
  }
  if (proc.wait() != 0) {
    throw Error(Errc::UndecodableMedia, media.string() + ": " + proc.stderr_text().substr(0, 300));
  }
  return audio;
}

double row_luma(const RawFrame& frame, int row) {
  double sum = 0.0;
  for (int x = 0; x < frame.width; ++x) {
    const auto* p = frame.at(x, row);
    sum += 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return sum / frame.width;
}

GeometrySpec detect_black_bars(std::span<const RawFrame> frames) {
  if (frames.empty()) throw Error(Errc::EmptyInput, "detect_black_bars needs at least one frame");
  const int width = frames.front().width;
  const int height = frames.front().height;
  int bar = height;
  for (const auto& frame : frames) {
    if (frame.width != width || frame.height != height) {
      throw Error(Errc::DimensionMismatch, "sampled frames differ in size");
    }
    int top = 0;
    while (top < height && row_luma(frame, top) < kDarkRowLuma) ++top;
    int bottom = 0;
    while (bottom < height && row_luma(frame, height - 1 - bottom) < kDarkRowLuma) ++bottom;
    bar = std::min({bar, top, bottom});
  }
  // Entirely dark footage carries no letterbox information.
  if (2 * bar >= height) bar = 0;

  GeometrySpec spec;
  spec.source = {width, height};
  spec.source_bar_rows = bar;
  const double content = static_cast<double>(height - 2 * bar) * kOutputSize.width / width;
  const bool boxed = std::abs(content - kLetterboxInnerHeight) < std::abs(content - kOutputSize.height);
  spec.outer = kOutputSize;
  spec.inner = {kOutputSize.width, boxed ? kLetterboxInnerHeight : kOutputSize.height};
  spec.bar_height = (spec.outer.height - spec.inner.height) / 2;
  return spec;
}

std::string harmonize_filter(const GeometrySpec& spec, int fps) {
  if (spec.source.width <= 0 || spec.source.height <= 0) {
    throw Error(Errc::InvalidArgument, "geometry spec lacks source dimensions");
  }
  const int src_w = spec.source.width;
  const int content_h = spec.source.height - 2 * spec.source_bar_rows;
  const double scale = std::max(static_cast<double>(spec.inner.width) / src_w,
                                static_cast<double>(spec.inner.height) / content_h);
  auto even_ceil = [](double v) {
    int n = static_cast<int>(std::ceil(v - 1e-9));
    return n + (n & 1);
  };
  const int scaled_w = std::max(spec.inner.width, even_ceil(src_w * scale));
  const int scaled_h = std::max(spec.inner.height, even_ceil(content_h * scale));

  std::ostringstream vf;
  if (spec.source_bar_rows > 0) vf << "crop=" << src_w << ":" << content_h << ":0:" << spec.source_bar_rows << ",";
  vf << "scale=" << scaled_w << ":" << scaled_h << ":flags=bicubic,";
  vf << "crop=" << spec.inner.width << ":" << spec.inner.height << ",";
  vf << "pad=" << spec.outer.width << ":" << spec.outer.height << ":0:" << spec.bar_height << ":black,";
  vf << "setsar=1,fps=" << fps << ",format=yuv420p";
  return vf.str();
}

fs::path harmonize(const CodecTool& tool, const fs::path& video, const GeometrySpec& spec, const fs::path& out) {
  const MediaInfo info = tool.probe(video);
  if (!info.has_video) throw Error(Errc::UndecodableMedia, video.string() + ": no video stream");
  GeometrySpec effective = spec;
  if (effective.source.width <= 0) effective.source = info.frame_size;
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  const auto& cfg = tool.config();
  std::vector<std::string> args = {tool.path(), "-hide_banner", "-nostdin", "-loglevel", "error", "-y",
                                   "-i", video.string(), "-map", "0:v:0"};
  if (info.has_audio) args.insert(args.end(), {"-map", "0:a:0", "-c:a", "aac", "-b:a", "128k"});
  args.insert(args.end(), {"-vf", harmonize_filter(effective, cfg.output_fps), "-c:v", cfg.video_codec});
  if (cfg.video_codec == "libx264") {
    args.insert(args.end(), {"-preset", cfg.preset, "-crf", std::to_string(cfg.crf)});
  }
  args.insert(args.end(), {"-pix_fmt", "yuv420p", out.string()});
  Subprocess proc(args, {});
  if (proc.wait() != 0) {
    throw Error(Errc::UndecodableMedia, "harmonize " + video.string() + ": " + proc.stderr_text().substr(0, 300));
  }
  return out;
}

VideoWriter::VideoWriter(const CodecTool& tool, const fs::path& out, Size size, double fps,
                         std::optional<fs::path> audio, bool shortest)
    : size_(size) {
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  const auto& cfg = tool.config();
  std::ostringstream rate;
  rate << fps;
  std::vector<std::string> args = {tool.path(), "-hide_banner", "-nostdin", "-loglevel", "error", "-y",
                                   "-f", "rawvideo", "-pix_fmt", "rgb24",
                                   "-s", std::to_string(size.width) + "x" + std::to_string(size.height),
                                   "-r", rate.str(), "-i", "-"};
  if (audio) args.insert(args.end(), {"-i", audio->string(), "-map", "0:v:0", "-map", "1:a:0", "-c:a", "aac", "-b:a", "160k"});
  args.insert(args.end(), {"-c:v", cfg.video_codec});
  if (cfg.video_codec == "libx264") args.insert(args.end(), {"-preset", cfg.preset, "-crf", std::to_string(cfg.crf)});
  args.insert(args.end(), {"-pix_fmt", "yuv420p"});
  if (shortest) args.push_back("-shortest");
  args.push_back(out.string());
  process_ = std::make_unique<Subprocess>(args, SpawnOptions{.pipe_stdin = true, .pipe_stdout = false});
}

VideoWriter::~VideoWriter() {
  if (!finished_ && process_) process_->wait();
}

void VideoWriter::write(const RawFrame& frame) {
  if (frame.width != size_.width || frame.height != size_.height || !frame.valid()) {
    throw Error(Errc::DimensionMismatch, "frame size does not match encoder");
  }
  if (!process_->write_stdin(std::as_bytes(std::span(frame.pixels)))) {
    finished_ = true;
    process_->wait();
    throw Error(Errc::UndecodableMedia, "encoder exited early: " + process_->stderr_text().substr(0, 300));
  }
  ++written_;
}

void VideoWriter::finish() {
  if (finished_) return;
  finished_ = true;
  process_->close_stdin();
  if (process_->wait() != 0) {
    throw Error(Errc::UndecodableMedia, "encoder failed: " + process_->stderr_text().substr(0, 300));
  }
}

namespace {

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}
void put_u16(std::vector<std::byte>& out, std::uint16_t v) {
  out.push_back(static_cast<std::byte>(v & 0xff));
  out.push_back(static_cast<std::byte>(v >> 8));
}
void put_tag(std::vector<std::byte>& out, const char* tag) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>(tag[i]));
}
std::int16_t to_s16(float v) {
  const double clamped = std::clamp(static_cast<double>(v), -1.0, 1.0);
  return static_cast<std::int16_t>(std::lround(clamped * 32767.0));
}

std::vector<std::byte> wav_bytes(std::span<const std::span<const float>> channels, int rate) {
  const std::size_t frames = channels.empty() ? 0 : channels.front().size();
  const auto n_ch = static_cast<std::uint16_t>(channels.size());
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(frames * n_ch * 2);
  std::vector<std::byte> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, n_ch);
  put_u32(out, static_cast<std::uint32_t>(rate));
  put_u32(out, static_cast<std::uint32_t>(rate) * n_ch * 2);
  put_u16(out, static_cast<std::uint16_t>(n_ch * 2));
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (std::size_t i = 0; i < frames; ++i) {
    for (const auto& ch : channels) put_u16(out, static_cast<std::uint16_t>(to_s16(ch[i])));
  }
  return out;
}

void write_bytes(const std::vector<std::byte>& bytes, const fs::path& out) {
  if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
  std::ofstream file(out, std::ios::binary);
  if (!file) throw Error(Errc::Io, "cannot write " + out.string());
  file.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

std::vector<std::byte> encode_wav(const PcmAudio& audio) {
  const std::span<const float> mono(audio.samples);
  return wav_bytes(std::span(&mono, 1), static_cast<int>(audio.sample_rate));
}

void write_wav(const PcmAudio& audio, const fs::path& out) { write_bytes(encode_wav(audio), out); }

void write_wav_stereo(const PcmAudio& left, const PcmAudio& right, const fs::path& out) {
  if (left.samples.size() != right.samples.size() || left.sample_rate != right.sample_rate) {
    throw Error(Errc::InvalidArgument, "stereo channels must match in length and rate");
  }
  const std::span<const float> chans[2] = {left.samples, right.samples};
  write_bytes(wav_bytes(chans, static_cast<int>(left.sample_rate)), out);
}

}  // namespace mvgen
