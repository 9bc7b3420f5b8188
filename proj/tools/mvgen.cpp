#include "mvgen/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace mvgen;

namespace {

std::optional<GenreCategory> genre_arg(const std::string& text, bool allow_auto) {
  if (allow_auto && text == "auto") return std::nullopt;
  if (text == "whole" || text == "all") return GenreCategory::Unknown;
  auto g = parse_genre(text);
  if (!g) throw CLI::ValidationError("--genre", "unknown genre '" + text + "'");
  return g;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mvgen: music-video generator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string index_dir;
  std::string tool_path;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--index", index_dir, "index directory (overrides config)");
  app.add_option("--codec-tool", tool_path, "ffmpeg binary (overrides config)");

  auto* index_cmd = app.add_subcommand("index", "build or clean the scene index");
  index_cmd->require_subcommand(1);
  std::string corpus;
  unsigned workers = 0;
  auto* build_cmd = index_cmd->add_subcommand("build", "index a corpus directory");
  build_cmd->add_option("dir", corpus, "corpus directory")->required();
  build_cmd->add_option("--workers", workers, "parallel videos (0 = CPU count)");
  auto* clean_cmd = index_cmd->add_subcommand("clean", "re-apply scene and video filters");

  std::string genre_text = "whole";
  int k = -1;
  std::uint64_t seed = 0;
  auto* cluster_cmd = app.add_subcommand("cluster", "cluster a genre slice by color");
  cluster_cmd->add_option("--genre", genre_text, "pop|rock|hiphop|electronic|whole");
  cluster_cmd->add_option("--k", k, "cluster count");
  cluster_cmd->add_option("--seed", seed, "RNG seed");

  std::string audio;
  std::string model;
  std::string mode;
  auto* analyze_cmd = app.add_subcommand("analyze", "print music boundaries, one per line");
  analyze_cmd->add_option("audio", audio, "audio file")->required();
  analyze_cmd->add_option("--model", model, "OLDA model file or 'identity'");
  analyze_cmd->add_option("--mode", mode, "repetitive|nonrepetitive");

  std::string gen_genre = "auto";
  std::string out_path;
  auto* generate_cmd = app.add_subcommand("generate", "generate a music video for an audio track");
  generate_cmd->add_option("audio", audio, "audio file")->required();
  generate_cmd->add_option("--genre", gen_genre, "auto|pop|rock|hiphop|electronic|whole");
  generate_cmd->add_option("--seed", seed, "RNG seed");
  generate_cmd->add_option("--out", out_path, "output video");
  generate_cmd->add_option("--model", model, "OLDA model file or 'identity'");
  bool plan_only = false;
  generate_cmd->add_flag("--plan-only", plan_only, "write the EDL without rendering");

  CLI11_PARSE(app, argc, argv);

  PipelineConfig cfg;
  try {
    if (!config_path.empty()) cfg = PipelineConfig::from_json_file(config_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitFailure;
  }
  if (!index_dir.empty()) cfg.index_dir = index_dir;
  if (!tool_path.empty()) cfg.codec_tool_path = tool_path;
  if (!model.empty()) cfg.model = model;
  if (mode == "nonrepetitive") cfg.analysis.mode = FeatureMode::NonRepetitive;
  else if (mode == "repetitive") cfg.analysis.mode = FeatureMode::Repetitive;
  else if (!mode.empty()) {
    std::cerr << "error: --mode must be repetitive or nonrepetitive" << std::endl;
    return kExitFailure;
  }

  try {
    if (*build_cmd) {
      if (workers) cfg.workers = workers;
      return cmd_index_build(corpus, cfg, std::cout, std::cerr);
    }
    if (*clean_cmd) return cmd_index_clean(cfg, std::cout, std::cerr);
    if (*cluster_cmd) {
      const auto g = genre_arg(genre_text, false);
      return cmd_cluster(cfg, *g, k > 0 ? k : cfg.K, cluster_cmd->count("--seed") ? seed : cfg.cluster_seed,
                         std::cout, std::cerr);
    }
    if (*analyze_cmd) return cmd_analyze(audio, cfg, std::cout, std::cerr);
    if (*generate_cmd) {
      GenerateOptions opts;
      opts.genre = genre_arg(gen_genre, true);
      opts.seed = seed;
      opts.out = out_path;
      opts.render = !plan_only;
      return cmd_generate(audio, cfg, opts, std::cout, std::cerr);
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitFailure;
  }
  return kExitFailure;
}
