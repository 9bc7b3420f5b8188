#pragma once

#include "mvgen/edl.hpp"
#include "mvgen/media_io.hpp"

#include <filesystem>
#include <functional>

namespace mvgen {

/// Where a scene's pixels live: a (harmonized) media file and its frame range.
struct SceneSource {
  std::filesystem::path media;
  double fps = 25.0;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
};

using SceneResolver = std::function<SceneSource(const std::string& scene_ref)>;

/// What output frame k shows: which entry, which source frame, and the fade gain.
struct FramePick {
  std::size_t entry = 0;
  std::int64_t source_frame = 0;
  double gain = 1.0;
};

/// Maps the EDL onto the output frame grid. Frame k samples the timeline at
/// k / fps; the fade gain falls linearly to zero at the end of the fade.
std::vector<FramePick> plan_frames(const EditDecisionList& edl, int fps, const SceneResolver& resolve);

/// Renders an EDL over `audio` to a 640x360 video at the tool's output fps.
/// Throws MissingSource when a scene's media is absent and DurationMismatch
/// when the EDL does not span the audio within 0.1 s.
std::filesystem::path render(const CodecTool& tool, const EditDecisionList& edl, const std::filesystem::path& audio,
                             const std::filesystem::path& out, const SceneResolver& resolve);

}  // namespace mvgen
