#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mvgen {

/// "<source_id>:<start_frame>" identifies a scene across the index, the
/// cluster catalog and the EDL.
struct SceneRef {
  std::string source_id;
  std::int64_t start_frame = 0;

  std::string str() const { return source_id + ":" + std::to_string(start_frame); }
  static SceneRef parse(std::string_view text);
  friend auto operator<=>(const SceneRef&, const SceneRef&) = default;
};

struct EdlEntry {
  std::string scene;
  double trim_in = 0.0;
  double trim_out = 0.0;
  double out_start = 0.0;
  int cluster = 0;

  double length() const { return trim_out - trim_in; }
  double out_end() const { return out_start + length(); }
};

struct FadeOut {
  double start = 0.0;
  double duration = 0.0;
};

struct EditDecisionList {
  double audio_duration = 0.0;
  std::vector<EdlEntry> entries;
  std::optional<FadeOut> fade_out;
};

std::string edl_to_json(const EditDecisionList& edl);
EditDecisionList edl_from_json(std::string_view text);
void save_edl(const EditDecisionList& edl, const std::filesystem::path& path);
EditDecisionList load_edl(const std::filesystem::path& path);

}  // namespace mvgen
