#include "mvgen/render.hpp"

#include "mvgen/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace mvgen {
namespace fs = std::filesystem;

namespace {

constexpr double kDurationTolerance = 0.1;
constexpr double kEps = 1e-9;

}  // namespace

std::vector<FramePick> plan_frames(const EditDecisionList& edl, int fps, const SceneResolver& resolve) {
  if (fps <= 0) throw Error(Errc::InvalidArgument, "fps must be positive");
  if (edl.entries.empty()) throw Error(Errc::InvalidArgument, "empty EDL");
  const auto total = static_cast<std::int64_t>(std::llround(edl.audio_duration * fps));
  std::vector<SceneSource> sources;
  sources.reserve(edl.entries.size());
  for (const auto& e : edl.entries) sources.push_back(resolve(e.scene));

  std::vector<FramePick> picks;
  picks.reserve(static_cast<std::size_t>(std::max<std::int64_t>(total, 0)));
  std::size_t entry = 0;
  for (std::int64_t k = 0; k < total; ++k) {
    const double t = static_cast<double>(k) / fps;
    while (entry + 1 < edl.entries.size() && edl.entries[entry + 1].out_start <= t + kEps) ++entry;
    const auto& e = edl.entries[entry];
    const auto& src = sources[entry];
    const double offset = std::clamp(t - e.out_start, 0.0, std::max(0.0, e.length()));
    auto frame = src.start_frame + static_cast<std::int64_t>(std::floor((e.trim_in + offset) * src.fps + kEps));
    frame = std::clamp(frame, src.start_frame, src.end_frame);

    double gain = 1.0;
    if (edl.fade_out && edl.fade_out->duration > 0 && t + kEps >= edl.fade_out->start) {
      const double fade_end = edl.fade_out->start + edl.fade_out->duration;
      gain = std::clamp((fade_end - (t + 0.5 / fps)) / edl.fade_out->duration, 0.0, 1.0);
    }
    picks.push_back({entry, frame, gain});
  }
  return picks;
}

fs::path render(const CodecTool& tool, const EditDecisionList& edl, const fs::path& audio, const fs::path& out,
                const SceneResolver& resolve) {
  const int fps = tool.config().output_fps;
  for (const auto& e : edl.entries) {
    const auto src = resolve(e.scene);
    if (!fs::exists(src.media)) throw Error(Errc::MissingSource, e.scene + " -> " + src.media.string());
  }
  if (!fs::exists(audio)) throw Error(Errc::MissingSource, "audio " + audio.string());
  const MediaInfo audio_info = tool.probe(audio);
  if (!audio_info.has_audio) throw Error(Errc::NoAudioStream, audio.string());

  double covered = 0.0;
  for (const auto& e : edl.entries) covered += e.length();
  if (std::abs(audio_info.duration - edl.audio_duration) > kDurationTolerance ||
      std::abs(covered - edl.audio_duration) > kDurationTolerance) {
    throw Error(Errc::DurationMismatch, "EDL covers " + std::to_string(covered) + " s, audio is " +
                                            std::to_string(audio_info.duration) + " s");
  }

  const auto picks = plan_frames(edl, fps, resolve);

  // Source frame window needed per entry.
  std::map<std::size_t, std::pair<std::int64_t, std::int64_t>> windows;
  for (const auto& p : picks) {
    auto [it, inserted] = windows.try_emplace(p.entry, p.source_frame, p.source_frame);
    if (!inserted) {
      it->second.first = std::min(it->second.first, p.source_frame);
      it->second.second = std::max(it->second.second, p.source_frame);
    }
  }

  VideoWriter writer(tool, out, kOutputSize, fps, audio, /*shortest=*/false);
  std::size_t loaded_entry = SIZE_MAX;
  std::vector<RawFrame> loaded;
  std::int64_t loaded_first = 0;
  RawFrame composed(kOutputSize.width, kOutputSize.height);
  for (std::size_t k = 0; k < picks.size(); ++k) {
    const auto& p = picks[k];
    if (p.entry != loaded_entry) {
      const auto [first, last] = windows.at(p.entry);
      const auto src = resolve(edl.entries[p.entry].scene);
      loaded = decode_frame_range(tool, src.media, src.fps, first, last - first + 1, kOutputSize);
      loaded_first = first;
      loaded_entry = p.entry;
    }
    const auto idx = static_cast<std::size_t>(
        std::clamp<std::int64_t>(p.source_frame - loaded_first, 0, static_cast<std::int64_t>(loaded.size()) - 1));
    const RawFrame& src = loaded[idx];
    if (p.gain >= 1.0) {
      composed.pixels = src.pixels;
    } else {
      for (std::size_t i = 0; i < src.pixels.size(); ++i) {
        composed.pixels[i] = static_cast<std::uint8_t>(std::lround(src.pixels[i] * p.gain));
      }
    }
    composed.index = static_cast<std::int64_t>(k);
    writer.write(composed);
  }
  writer.finish();
  return out;
}

}  // namespace mvgen
