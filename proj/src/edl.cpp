#include "mvgen/edl.hpp"

#include "mvgen/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace mvgen {
namespace fs = std::filesystem;
using nlohmann::json;

SceneRef SceneRef::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw Error(Errc::InvalidArgument, "bad scene reference: " + std::string(text));
  }
  SceneRef ref;
  ref.source_id = std::string(text.substr(0, colon));
  try {
    std::size_t used = 0;
    const std::string digits(text.substr(colon + 1));
    ref.start_frame = std::stoll(digits, &used);
    if (used != digits.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw Error(Errc::InvalidArgument, "bad scene reference: " + std::string(text));
  }
  return ref;
}

std::string edl_to_json(const EditDecisionList& edl) {
  json doc;
  doc["audio_duration"] = edl.audio_duration;
  doc["entries"] = json::array();
  for (const auto& e : edl.entries) {
    doc["entries"].push_back({{"scene", e.scene},
                              {"trim_in", e.trim_in},
                              {"trim_out", e.trim_out},
                              {"out_start", e.out_start},
                              {"cluster", e.cluster}});
  }
  if (edl.fade_out) doc["fade_out"] = {{"start", edl.fade_out->start}, {"duration", edl.fade_out->duration}};
  return doc.dump(2) + "\n";
}

EditDecisionList edl_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    EditDecisionList edl;
    edl.audio_duration = doc.at("audio_duration").get<double>();
    for (const auto& e : doc.at("entries")) {
      EdlEntry entry;
      entry.scene = e.at("scene").get<std::string>();
      entry.trim_in = e.at("trim_in").get<double>();
      entry.trim_out = e.at("trim_out").get<double>();
      entry.out_start = e.at("out_start").get<double>();
      entry.cluster = e.value("cluster", 0);
      edl.entries.push_back(std::move(entry));
    }
    if (doc.contains("fade_out") && !doc["fade_out"].is_null()) {
      edl.fade_out = FadeOut{doc["fade_out"].at("start").get<double>(), doc["fade_out"].at("duration").get<double>()};
    }
    return edl;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("malformed EDL: ") + e.what());
  }
}

void save_edl(const EditDecisionList& edl, const fs::path& path) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << edl_to_json(edl);
}

EditDecisionList load_edl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return edl_from_json(ss.str());
}

}  // namespace mvgen
