#include "mvgen/scene_index.hpp"

#include "mvgen/error.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace mvgen {
namespace fs = std::filesystem;
using nlohmann::json;

bool ColorHistogram768::valid(double tolerance) const {
  for (std::size_t block = 0; block < 3; ++block) {
    double sum = 0.0;
    for (double v : channel(block)) {
      if (!(v >= 0.0) || !std::isfinite(v)) return false;
      sum += v;
    }
    if (std::abs(sum - 1.0) > tolerance) return false;
  }
  return true;
}

void HistogramAccumulator::add(const RawFrame& frame) {
  const auto* p = frame.pixels.data();
  for (std::size_t i = 0, n = frame.pixel_count(); i < n; ++i, p += 3) {
    ++counts_[p[2]];        // blue
    ++counts_[256 + p[1]];  // green
    ++counts_[512 + p[0]];  // red
  }
  pixels_ += frame.pixel_count();
}

ColorHistogram768 HistogramAccumulator::normalized() const {
  if (pixels_ == 0) throw Error(Errc::EmptyScene, "no pixels accumulated");
  ColorHistogram768 h;
  const double total = static_cast<double>(pixels_);
  for (std::size_t i = 0; i < kHistogramBins; ++i) h.values[i] = static_cast<double>(counts_[i]) / total;
  return h;
}

void HistogramAccumulator::reset() {
  counts_.fill(0);
  pixels_ = 0;
}

ColorHistogram768 scene_histogram(std::span<const RawFrame> sampled_frames) {
  if (sampled_frames.empty()) throw Error(Errc::EmptyScene, "scene has no sampled frames");
  HistogramAccumulator acc;
  for (const auto& f : sampled_frames) acc.add(f);
  return acc.normalized();
}

bool accept_scene(const Scene& scene) {
  const auto n = scene.frame_count();
  return n >= kMinSceneFrames && n <= kMaxSceneFrames;
}

bool accept_video(std::span<const Scene> scenes) {
  return std::none_of(scenes.begin(), scenes.end(), [](const Scene& s) { return s.duration() > kMaxSceneSeconds; });
}

std::size_t SceneIndex::scene_count() const {
  std::size_t n = 0;
  for (const auto& [id, v] : videos) n += v.scenes.size();
  return n;
}

const IndexedScene* SceneIndex::find(const SceneRef& ref) const {
  const auto it = videos.find(ref.source_id);
  if (it == videos.end()) return nullptr;
  for (const auto& s : it->second.scenes) {
    if (s.scene.start_frame == ref.start_frame) return &s;
  }
  return nullptr;
}

fs::path SceneIndex::media_path(const std::string& source_id) const { return root / "media" / (source_id + ".mp4"); }

std::vector<const IndexedScene*> SceneIndex::slice(GenreCategory genre) const {
  std::vector<const IndexedScene*> out;
  for (const auto& [id, v] : videos) {
    if (genre != GenreCategory::Unknown && v.genre != genre) continue;
    for (const auto& s : v.scenes) out.push_back(&s);
  }
  return out;
}

namespace {

json params_to_json(const DetectorParams& p) {
  json j = {{"mode", p.mode == DetectorMode::Content ? "content" : "histogram"},
            {"pixel_threshold", p.pixel_threshold},
            {"percent_threshold", p.percent_threshold}};
  j["histogram_threshold"] = p.histogram_threshold ? json(*p.histogram_threshold) : json(nullptr);
  return j;
}

DetectorParams params_from_json(const json& j) {
  DetectorParams p;
  p.mode = j.value("mode", "content") == "histogram" ? DetectorMode::Histogram : DetectorMode::Content;
  p.pixel_threshold = j.value("pixel_threshold", 30.0);
  p.percent_threshold = j.value("percent_threshold", 30.0);
  if (j.contains("histogram_threshold") && !j["histogram_threshold"].is_null()) {
    p.histogram_threshold = j["histogram_threshold"].get<double>();
  }
  return p;
}

json manifest_json(const SceneIndex& index) {
  json m;
  m["videos"] = json::array();
  for (const auto& [id, v] : index.videos) m["videos"].push_back(id);
  m["created"] = index.created;
  m["detector_params"] = params_to_json(index.params);
  m["rejected"] = json::array();
  for (const auto& r : index.rejected) m["rejected"].push_back({{"source_id", r.source_id}, {"reason", r.reason}});
  return m;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::CorruptIndex, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + path.string());
    out << text;
  }
  fs::rename(tmp, path);
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace

std::string video_record_to_json(const VideoRecord& record) {
  json doc;
  doc["source_id"] = record.source_id;
  doc["genre"] = std::string(genre_key(record.genre));
  doc["fps"] = record.fps;
  doc["scenes"] = json::array();
  for (const auto& s : record.scenes) {
    doc["scenes"].push_back({{"start_frame", s.scene.start_frame},
                             {"end_frame", s.scene.end_frame},
                             {"duration_s", s.scene.duration()},
                             {"histogram", s.histogram.values}});
  }
  return doc.dump(1) + "\n";
}

VideoRecord video_record_from_json(std::string_view text) {
  VideoRecord record;
  try {
    const json doc = json::parse(text);
    record.source_id = doc.at("source_id").get<std::string>();
    if (record.source_id.empty()) throw Error(Errc::CorruptIndex, "empty source_id");
    const auto genre = parse_genre(doc.at("genre").get<std::string>());
    if (!genre) throw Error(Errc::CorruptIndex, record.source_id + ": unknown genre");
    record.genre = *genre;
    record.fps = doc.at("fps").get<double>();
    if (!(record.fps > 0)) throw Error(Errc::CorruptIndex, record.source_id + ": fps must be positive");
    for (const auto& js : doc.at("scenes")) {
      IndexedScene s;
      s.scene.source_id = record.source_id;
      s.scene.fps = record.fps;
      s.scene.start_frame = js.at("start_frame").get<std::int64_t>();
      s.scene.end_frame = js.at("end_frame").get<std::int64_t>();
      if (s.scene.start_frame < 0 || s.scene.end_frame < s.scene.start_frame) {
        throw Error(Errc::CorruptIndex, record.source_id + ": bad frame range");
      }
      const double duration = js.at("duration_s").get<double>();
      if (std::abs(duration - s.scene.duration()) > 1e-6) {
        throw Error(Errc::CorruptIndex, record.source_id + ": duration disagrees with frame range");
      }
      if (!accept_scene(s.scene)) throw Error(Errc::CorruptIndex, record.source_id + ": scene outside [12,125] frames");
      const auto& hist = js.at("histogram");
      if (!hist.is_array() || hist.size() != kHistogramBins) {
        throw Error(Errc::CorruptIndex, record.source_id + ": histogram must have 768 entries");
      }
      for (std::size_t i = 0; i < kHistogramBins; ++i) s.histogram.values[i] = hist[i].get<double>();
      if (!s.histogram.valid()) {
        throw Error(Errc::CorruptIndex, record.source_id + ": histogram channel does not sum to 1");
      }
      record.scenes.push_back(s);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptIndex, std::string("schema violation: ") + e.what());
  }
  return record;
}

fs::path save_index(const SceneIndex& index, const fs::path& dir) {
  fs::create_directories(dir / "videos");
  SceneIndex copy_for_manifest = index;
  const fs::path manifest_path = dir / "manifest.json";
  // Keep the original timestamp when nothing else changed so rebuilding an
  // unchanged corpus reproduces the manifest byte for byte.
  if (fs::exists(manifest_path)) {
    try {
      const json old = json::parse(read_text(manifest_path));
      json candidate = manifest_json(index);
      candidate["created"] = old.value("created", "");
      if (candidate == old) copy_for_manifest.created = old.value("created", index.created);
    } catch (const json::exception&) {
    }
  }
  if (copy_for_manifest.created.empty()) copy_for_manifest.created = now_iso8601();

  std::set<std::string> keep;
  for (const auto& [id, v] : index.videos) {
    write_text(dir / "videos" / (id + ".json"), video_record_to_json(v));
    keep.insert(id + ".json");
  }
  for (const auto& entry : fs::directory_iterator(dir / "videos")) {
    if (entry.path().extension() == ".json" && !keep.contains(entry.path().filename().string())) {
      fs::remove(entry.path());
    }
  }
  write_text(manifest_path, manifest_json(copy_for_manifest).dump(2) + "\n");
  return dir;
}

SceneIndex load_index(const fs::path& dir) {
  SceneIndex index;
  index.root = dir;
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw Error(Errc::CorruptIndex, "missing " + manifest_path.string());
  try {
    const json m = json::parse(read_text(manifest_path));
    index.created = m.value("created", "");
    if (m.contains("detector_params")) index.params = params_from_json(m["detector_params"]);
    for (const auto& r : m.value("rejected", json::array())) {
      index.rejected.push_back({r.at("source_id").get<std::string>(), r.value("reason", "")});
    }
    for (const auto& id_json : m.at("videos")) {
      const auto id = id_json.get<std::string>();
      auto record = video_record_from_json(read_text(dir / "videos" / (id + ".json")));
      if (record.source_id != id) throw Error(Errc::CorruptIndex, "manifest id " + id + " does not match its file");
      if (!accept_video(std::vector<Scene>([&] {
            std::vector<Scene> s;
            for (const auto& is : record.scenes) s.push_back(is.scene);
            return s;
          }()))) {
        throw Error(Errc::CorruptIndex, id + ": contains a scene longer than 60 s");
      }
      index.videos.emplace(id, std::move(record));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptIndex, std::string("manifest schema violation: ") + e.what());
  }
  return index;
}

std::string index_digest(const SceneIndex& index) {
  json m = manifest_json(index);
  m.erase("created");
  std::string all = m.dump();
  for (const auto& [id, v] : index.videos) all += video_record_to_json(v);
  return sha256_hex(all);
}

std::vector<std::pair<std::string, fs::path>> list_corpus(const fs::path& corpus_dir) {
  static const std::set<std::string> kExtensions = {".mp4", ".mkv", ".webm", ".avi", ".mov", ".m4v",
                                                    ".flv", ".mpg", ".mpeg", ".ts",  ".wmv"};
  if (!fs::is_directory(corpus_dir)) throw Error(Errc::EmptyCorpus, corpus_dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(corpus_dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (kExtensions.contains(ext)) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::pair<std::string, fs::path>> out;
  std::set<std::string> used;
  for (const auto& f : files) {
    std::string id = f.stem().string();
    for (auto& c : id) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-')) c = '_';
    }
    if (id.empty()) id = "video";
    std::string unique = id;
    for (int n = 2; used.contains(unique); ++n) unique = id + "_" + std::to_string(n);
    used.insert(unique);
    out.emplace_back(unique, f);
  }
  return out;
}

std::map<std::string, GenreCategory> load_corpus_genres(const fs::path& corpus_dir) {
  std::map<std::string, GenreCategory> out;
  const fs::path path = corpus_dir / "genres.json";
  if (!fs::exists(path)) return out;
  try {
    const json doc = json::parse(read_text(path));
    for (const auto& [key, value] : doc.items()) {
      const auto g = parse_genre(value.get<std::string>());
      if (!g) throw Error(Errc::InvalidArgument, "genres.json: unknown genre for " + key);
      out[key] = *g;
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("genres.json: ") + e.what());
  }
  return out;
}

VideoOutcome index_video(const CodecTool& tool, const fs::path& video, const std::string& source_id,
                         const BuildOptions& options, std::optional<GenreCategory> genre_override) {
  VideoOutcome outcome;
  const fs::path media = options.index_dir / "media" / (source_id + ".mp4");
  try {
    const MediaInfo info = tool.probe(video);
    if (!info.has_video) throw Error(Errc::UndecodableMedia, "no video stream");

    const int bar_stride = std::max(1, static_cast<int>(std::lround(info.fps > 0 ? info.fps : 25.0)));
    const auto sampled = decode_frames(tool, video, bar_stride);
    const GeometrySpec geometry = detect_black_bars(sampled);
    harmonize(tool, video, geometry, media);

    FrameReader reader(tool, media, 1);
    const double fps = reader.info().fps > 0 ? reader.info().fps : tool.config().output_fps;
    ShotDetector detector(options.params);
    HistogramAccumulator acc;
    std::vector<Scene> scenes;
    std::vector<ColorHistogram768> histograms;
    std::int64_t scene_start = 0;
    std::int64_t count = 0;
    while (auto frame = reader.next()) {
      if (auto cut = detector.push(*frame)) {
        scenes.push_back({source_id, scene_start, cut->frame_index - 1, fps});
        histograms.push_back(acc.normalized());
        acc.reset();
        scene_start = cut->frame_index;
      }
      if ((frame->index - scene_start) % kHistogramStride == 0) acc.add(*frame);
      ++count;
    }
    if (count == 0) throw Error(Errc::UndecodableMedia, "no frames");
    scenes.push_back({source_id, scene_start, count - 1, fps});
    histograms.push_back(acc.normalized());

    if (!accept_video(scenes)) {
      double longest = 0;
      for (const auto& s : scenes) longest = std::max(longest, s.duration());
      char reason[96];
      std::snprintf(reason, sizeof reason, "scene longer than 60 s (%.2f s)", longest);
      outcome.rejection = RejectedVideo{source_id, reason};
      fs::remove(media);
      return outcome;
    }

    VideoRecord record;
    record.source_id = source_id;
    record.fps = fps;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      if (accept_scene(scenes[i])) record.scenes.push_back({scenes[i], histograms[i]});
    }
    if (record.scenes.empty()) {
      outcome.rejection = RejectedVideo{source_id, "no scene within [12, 125] frames"};
      fs::remove(media);
      return outcome;
    }

    if (genre_override) {
      record.genre = *genre_override;
    } else if (options.resolve_genre && info.has_audio) {
      record.genre = options.resolve_genre(media, std::nullopt).category;
    }
    outcome.record = std::move(record);
  } catch (const Error& e) {
    if (e.code() == Errc::CodecToolMissing) throw;
    std::error_code ec;
    fs::remove(media, ec);
    outcome.rejection = RejectedVideo{source_id, e.what()};
  }
  return outcome;
}

SceneIndex build_index(const CodecTool& tool, const fs::path& corpus_dir, const BuildOptions& options) {
  options.params.validate();
  const auto corpus = list_corpus(corpus_dir);
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "no videos in " + corpus_dir.string());
  const auto overrides = load_corpus_genres(corpus_dir);

  std::vector<VideoOutcome> outcomes(corpus.size());
  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  std::size_t done = 0;
  std::exception_ptr failure;
  auto work = [&] {
    while (true) {
      const std::size_t i = next++;
      if (i >= corpus.size()) return;
      const auto& [id, path] = corpus[i];
      std::optional<GenreCategory> genre;
      if (auto it = overrides.find(id); it != overrides.end()) genre = it->second;
      else if (auto it2 = overrides.find(path.filename().string()); it2 != overrides.end()) genre = it2->second;
      try {
        outcomes[i] = index_video(tool, path, id, options, genre);
      } catch (...) {
        std::lock_guard lock(progress_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
      std::lock_guard lock(progress_mutex);
      ++done;
      if (options.progress) {
        const auto& o = outcomes[i];
        std::string line = "[index] " + std::to_string(100 * done / corpus.size()) + "% " + id + ": ";
        line += o.record ? "indexed (" + std::to_string(o.record->scenes.size()) + " scenes, " +
                               std::string(genre_key(o.record->genre)) + ")"
                         : "rejected (" + o.rejection->reason + ")";
        options.progress(line);
      }
    }
  };
  unsigned workers = options.workers ? options.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(corpus.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  if (failure) std::rethrow_exception(failure);

  SceneIndex index;
  index.root = options.index_dir;
  index.params = options.params;
  for (auto& o : outcomes) {
    if (o.record) index.videos.emplace(o.record->source_id, std::move(*o.record));
    else if (o.rejection) index.rejected.push_back(std::move(*o.rejection));
  }
  return index;
}

std::vector<RejectedVideo> clean_index(SceneIndex& index) {
  std::vector<RejectedVideo> removed;
  for (auto it = index.videos.begin(); it != index.videos.end();) {
    std::vector<Scene> scenes;
    bool scenes_ok = true;
    for (const auto& s : it->second.scenes) {
      scenes.push_back(s.scene);
      scenes_ok = scenes_ok && accept_scene(s.scene) && s.histogram.valid();
    }
    std::string reason;
    if (!accept_video(scenes)) reason = "scene longer than 60 s";
    else if (!scenes_ok) reason = "invalid scene record";
    else if (scenes.empty()) reason = "no scene within [12, 125] frames";
    else if (!index.root.empty() && !fs::exists(index.media_path(it->first))) reason = "harmonized media missing";
    if (reason.empty()) {
      ++it;
      continue;
    }
    if (!index.root.empty()) {
      std::error_code ec;
      fs::remove(index.media_path(it->first), ec);
      fs::remove(index.root / "videos" / (it->first + ".json"), ec);
    }
    removed.push_back({it->first, reason});
    index.rejected.push_back(removed.back());
    it = index.videos.erase(it);
  }
  return removed;
}

}  // namespace mvgen
