#include "mvgen/pipeline.hpp"

#include "mvgen/genre_http.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace mvgen {
namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::EmptyCorpus: return kExitEmptyCorpus;
    case Errc::InputLengthOutOfRange: return kExitInputLength;
    case Errc::InsufficientFootage:
    case Errc::EmptySlice: return kExitFootage;
    case Errc::CodecToolMissing:
    case Errc::UndecodableMedia:
    case Errc::NoAudioStream:
    case Errc::EmptyInput:
    case Errc::MissingSource:
    case Errc::DurationMismatch: return kExitMedia;
    default: return kExitFailure;
  }
}

void PipelineConfig::validate() const {
  detector.validate();
  assembly.validate();
  if (K < 1) throw Error(Errc::InvalidArgument, "K must be >= 1");
  if (analysis.median_width < 1 || analysis.median_width % 2 == 0) {
    throw Error(Errc::InvalidArgument, "median width must be odd and positive");
  }
  if (analysis.latent_dim < 1) throw Error(Errc::InvalidArgument, "latent dimension must be >= 1");
  if (model != "identity" && !fs::exists(model)) throw Error(Errc::Io, "model file not found: " + model);
}

PipelineConfig PipelineConfig::from_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read config " + path.string());
  PipelineConfig cfg;
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  try {
    const json doc = json::parse(in);
    if (doc.contains("index_dir")) cfg.index_dir = resolve(doc["index_dir"].get<std::string>());
    if (doc.contains("codec_tool_path")) cfg.codec_tool_path = doc["codec_tool_path"].get<std::string>();
    if (doc.contains("workers")) cfg.workers = doc["workers"].get<unsigned>();
    if (doc.contains("model")) {
      const auto m = doc["model"].get<std::string>();
      cfg.model = m == "identity" ? m : resolve(m).string();
    }
    if (const auto it = doc.find("detector"); it != doc.end()) {
      cfg.detector.pixel_threshold = it->value("pixel_threshold", cfg.detector.pixel_threshold);
      cfg.detector.percent_threshold = it->value("percent_threshold", cfg.detector.percent_threshold);
      if (it->contains("histogram_threshold") && !(*it)["histogram_threshold"].is_null()) {
        cfg.detector.histogram_threshold = (*it)["histogram_threshold"].get<double>();
      }
      const auto mode = it->value("mode", std::string("content"));
      if (mode == "content") cfg.detector.mode = DetectorMode::Content;
      else if (mode == "histogram") cfg.detector.mode = DetectorMode::Histogram;
      else throw Error(Errc::InvalidArgument, "detector mode must be content or histogram");
    }
    if (const auto it = doc.find("clustering"); it != doc.end()) {
      cfg.K = it->value("K", cfg.K);
      cfg.cluster_seed = it->value("seed", cfg.cluster_seed);
      const auto init = it->value("init", std::string("random"));
      if (init == "random") cfg.kmeans_init = KMeansInit::RandomPoints;
      else if (init == "kmeans++") cfg.kmeans_init = KMeansInit::PlusPlus;
      else throw Error(Errc::InvalidArgument, "clustering init must be random or kmeans++");
    }
    if (const auto it = doc.find("assembly"); it != doc.end()) {
      cfg.assembly.C = it->value("C", cfg.assembly.C);
      cfg.assembly.end_offset = it->value("end_offset", cfg.assembly.end_offset);
      cfg.assembly.fade_duration = it->value("fade", cfg.assembly.fade_duration);
    }
    if (const auto it = doc.find("analysis"); it != doc.end()) {
      const auto mode = it->value("mode", std::string("repetitive"));
      if (mode == "repetitive") cfg.analysis.mode = FeatureMode::Repetitive;
      else if (mode == "nonrepetitive") cfg.analysis.mode = FeatureMode::NonRepetitive;
      else throw Error(Errc::InvalidArgument, "analysis mode must be repetitive or nonrepetitive");
      cfg.analysis.k_neighbors = it->value("k_neighbors", cfg.analysis.k_neighbors);
      cfg.analysis.median_width = it->value("median_width", cfg.analysis.median_width);
      cfg.analysis.latent_dim = it->value("latent_dim", cfg.analysis.latent_dim);
    }
    if (const auto it = doc.find("genre"); it != doc.end()) {
      cfg.fingerprint_endpoint = it->value("fingerprint_endpoint", cfg.fingerprint_endpoint);
      cfg.fingerprint_key = it->value("fingerprint_key", cfg.fingerprint_key);
      cfg.tags_endpoint = it->value("tags_endpoint", cfg.tags_endpoint);
      cfg.tags_key = it->value("tags_key", cfg.tags_key);
      if (it->contains("cache")) cfg.genre_cache = resolve((*it)["cache"].get<std::string>());
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("malformed config: ") + e.what());
  }
  return cfg;
}

OldaModel load_model(const PipelineConfig& cfg) {
  if (cfg.model.empty() || cfg.model == "identity") return OldaModel::identity_model();
  return OldaModel::load(cfg.model);
}

SceneResolver index_resolver(const SceneIndex& index) {
  return [&index](const std::string& text) {
    const SceneRef ref = SceneRef::parse(text);
    const auto* scene = index.find(ref);
    if (!scene) throw Error(Errc::MissingSource, "scene not in index: " + text);
    return SceneSource{index.media_path(ref.source_id), scene->scene.fps, scene->scene.start_frame,
                       scene->scene.end_frame};
  };
}

fs::path edl_path_for(const fs::path& video) {
  fs::path p = video;
  p.replace_extension(".edl.json");
  return p;
}

namespace {

CodecTool make_tool(const PipelineConfig& cfg) {
  CodecConfig cc;
  cc.tool_path = cfg.codec_tool_path;
  return CodecTool(cc);
}

std::string env_or(const std::string& value, const char* name) {
  if (!value.empty()) return value;
  const char* v = std::getenv(name);
  return v ? v : "";
}

// Live service clients, present only when credentials are configured.
struct GenreStack {
  std::unique_ptr<HttpFingerprintClient> fingerprint;
  std::unique_ptr<HttpTagClient> tags;
  std::unique_ptr<GenreCache> cache;

  explicit GenreStack(const PipelineConfig& cfg) {
    const auto fp_key = env_or(cfg.fingerprint_key, "MVGEN_FINGERPRINT_KEY");
    if (!fp_key.empty() && !cfg.fingerprint_endpoint.empty()) {
      fingerprint = std::make_unique<HttpFingerprintClient>(cfg.fingerprint_endpoint, fp_key);
    }
    const auto tag_key = env_or(cfg.tags_key, "MVGEN_TAGS_KEY");
    if (!tag_key.empty() && !cfg.tags_endpoint.empty()) {
      tags = std::make_unique<HttpTagClient>(cfg.tags_endpoint, tag_key);
    }
    cache = std::make_unique<GenreCache>(cfg.genre_cache.empty() ? cfg.index_dir / "genre_cache.json"
                                                                 : cfg.genre_cache);
  }

  bool online() const { return fingerprint || tags; }
  GenreServices services() const { return {fingerprint.get(), tags.get(), cache.get(), nullptr}; }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void stage(std::ostream& log, const std::string& name, int percent, const std::string& detail = {}) {
  log << "[" << name << "] " << percent << "%";
  if (!detail.empty()) log << " " << detail;
  log << std::endl;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << std::endl;
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << std::endl;
    return kExitFailure;
  }
}

}  // namespace

GenerateReport generate(const fs::path& audio_path, const PipelineConfig& cfg, const GenerateOptions& opts,
                        std::ostream& log) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const CodecTool tool = make_tool(cfg);
  GenerateReport report;

  stage(log, "boundaries", 0, audio_path.string());
  const PcmAudio audio = decode_audio(tool, audio_path, cfg.analysis.features.sample_rate);
  check_input_length(audio.duration());
  report.boundaries = detect_boundaries(audio, load_model(cfg), cfg.analysis);
  stage(log, "boundaries", 100, std::to_string(report.boundaries.times.size() - 2) + " internal");

  stage(log, "genre", 0);
  if (opts.genre) {
    report.genre = {*opts.genre, GenreSource::Manual};
  } else {
    GenreStack stack(cfg);
    report.genre = resolve_genre(audio, stack.services());
  }
  stage(log, "genre", 100,
        std::string(genre_key(report.genre.category)) + " (" + std::string(genre_source_name(report.genre.source)) +
            ")");

  stage(log, "clusters", 0);
  const SceneIndex index = load_index(cfg.index_dir);
  bool cached = false;
  KMeansOptions km;
  km.init = cfg.kmeans_init;
  const ClusterCatalog catalog = load_or_cluster(index, report.genre.category, cfg.K, cfg.cluster_seed, &cached, km);
  stage(log, "clusters", 100, "K=" + std::to_string(catalog.K) + (cached ? " (cached)" : ""));

  stage(log, "assembly", 0);
  AssemblyConfig acfg = cfg.assembly;
  acfg.seed = opts.seed;
  const auto selected = select_clusters(catalog, index, audio.duration(), acfg);
  report.edl = assemble(report.boundaries, selected, catalog, index, acfg);
  report.video = opts.out.empty() ? fs::path(audio_path.stem().string() + ".mp4") : opts.out;
  report.edl_path = edl_path_for(report.video);
  if (report.video.has_parent_path()) fs::create_directories(report.video.parent_path());
  save_edl(report.edl, report.edl_path);
  report.planning_seconds = seconds_since(t0);
  stage(log, "assembly", 100, std::to_string(report.edl.entries.size()) + " entries");

  if (opts.render) {
    const auto t1 = std::chrono::steady_clock::now();
    stage(log, "render", 0);
    render(tool, report.edl, audio_path, report.video, index_resolver(index));
    report.render_seconds = seconds_since(t1);
    stage(log, "render", 100, report.video.string());
  }
  return report;
}

int cmd_index_build(const fs::path& corpus, const PipelineConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    cfg.validate();
    const CodecTool tool = make_tool(cfg);
    GenreStack stack(cfg);
    BuildOptions options;
    options.params = cfg.detector;
    options.index_dir = cfg.index_dir;
    options.workers = cfg.workers;
    options.progress = [&err](const std::string& line) { err << line << std::endl; };
    if (stack.online()) {
      options.resolve_genre = [&](const fs::path& media, std::optional<GenreCategory> manual) {
        const PcmAudio audio = decode_audio(tool, media, cfg.analysis.features.sample_rate);
        return resolve_genre(audio, stack.services(), manual);
      };
    }
    SceneIndex index = build_index(tool, corpus, options);
    save_index(index, cfg.index_dir);
    out << "indexed " << index.videos.size() << " rejected " << index.rejected.size() << " scenes "
        << index.scene_count() << "\n";
    for (const auto& r : index.rejected) out << "rejected " << r.source_id << ": " << r.reason << "\n";
    return index.videos.empty() ? kExitFailure : kExitOk;
  });
}

int cmd_index_clean(const PipelineConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    SceneIndex index = load_index(cfg.index_dir);
    const auto removed = clean_index(index);
    save_index(index, cfg.index_dir);
    std::error_code ec;
    if (!removed.empty()) fs::remove_all(cfg.index_dir / "catalogs", ec);
    for (const auto& r : removed) out << "removed " << r.source_id << ": " << r.reason << "\n";
    out << "kept " << index.videos.size() << " removed " << removed.size() << "\n";
    return kExitOk;
  });
}

int cmd_cluster(const PipelineConfig& cfg, GenreCategory genre, int k, std::uint64_t seed, std::ostream& out,
                std::ostream& err) {
  return guarded(err, [&] {
    const SceneIndex index = load_index(cfg.index_dir);
    KMeansOptions km;
    km.init = cfg.kmeans_init;
    stage(err, "cluster", 0, catalog_slice_key(genre));
    const ClusterCatalog catalog = cluster_index(index, genre, k, seed, km);
    const fs::path path = catalog_path(cfg.index_dir, genre, k, seed);
    save_catalog(catalog, path);
    stage(err, "cluster", 100, "K=" + std::to_string(catalog.K));
    if (catalog.K < k) err << "warning: K reduced to " << catalog.K << " distinct histograms" << std::endl;
    out << path.string() << "\n";
    return kExitOk;
  });
}

int cmd_analyze(const fs::path& audio_path, const PipelineConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    cfg.validate();
    const CodecTool tool = make_tool(cfg);
    const PcmAudio audio = decode_audio(tool, audio_path, cfg.analysis.features.sample_rate);
    const BoundarySet b = detect_boundaries(audio, load_model(cfg), cfg.analysis);
    out << std::fixed << std::setprecision(3);
    for (double t : b.times) out << t << "\n";
    return kExitOk;
  });
}

int cmd_generate(const fs::path& audio, const PipelineConfig& cfg, const GenerateOptions& opts, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&] {
    const GenerateReport r = generate(audio, cfg, opts, err);
    err << std::fixed << std::setprecision(3) << "planning " << r.planning_seconds << " s, render "
        << r.render_seconds << " s" << std::endl;
    if (opts.render) out << r.video.string() << "\n";
    out << r.edl_path.string() << "\n";
    return kExitOk;
  });
}

}  // namespace mvgen
