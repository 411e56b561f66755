// ontree: builds a navigable task tree from a project's contributing docs.
#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "ontree/error.hpp"
#include "ontree/net.hpp"
#include "ontree/pipeline.hpp"
#include "ontree/serve.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_fatal = 1;
constexpr int exit_usage = 2;

struct Globals {
  std::string config_path;
  bool offline = false;
  std::string out_dir;
  std::string entry;
  int depth = -1;
  bool verbose = false;
  bool quiet = false;
  std::optional<double> percentile;
  std::optional<int> buffer;
  std::optional<int> min_sentences;
  bool refine = false;
};

ontree::PipelineConfig make_config(const Globals& g) {
  ontree::PipelineConfig c;
  if (!g.config_path.empty()) c = ontree::load_config(g.config_path);
  if (!g.entry.empty()) c.entry = g.entry;
  if (!g.out_dir.empty()) c.output_dir = g.out_dir;
  if (g.depth >= 0) c.depth_limit = g.depth;
  if (g.offline) c.offline = true;
  if (g.percentile) c.segmenter.percentile = *g.percentile;
  if (g.buffer) c.segmenter.buffer = *g.buffer;
  if (g.min_sentences) c.segmenter.min_sentences = *g.min_sentences;
  if (g.refine) c.segmenter.refine = true;
  if (c.entry.empty()) c.entry = ".";
  return c;
}

int serve(const std::string& tree, const std::string& assets, const std::string& viewer, const std::string& host,
          int port) {
  // Signals are taken synchronously by a watcher thread, not in a handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  ontree::TreeStore store(tree, assets);
  ontree::Server server(store, {host, port, viewer});
  int bound = server.bind();
  spdlog::info("serving {} on http://{}:{}", tree, host, bound);
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {}; shutting down", sig);
    server.stop();
  });
  server.run();
  // run() can also return on its own; wake the watcher so it can be joined.
  pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Turn a project's contributing documentation into a task tree"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Pipeline config (JSON)")->check(CLI::ExistingFile);
  app.add_flag("--offline", g.offline, "Use deterministic local providers; no network access");
  app.add_option("--out", g.out_dir, "Output directory for artifacts");
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");
  app.add_flag("-q,--quiet", g.quiet, "Warnings and errors only");

  auto* ingest = app.add_subcommand("ingest", "Fetch the entry document and linked Markdown into corpus.json");
  auto* segment = app.add_subcommand("segment", "Split corpus.json into segments.json");
  auto* condense = app.add_subcommand("condense", "Drop boilerplate and merge near-duplicate segments");
  auto* graph = app.add_subcommand("graph", "Title segments and build tree.json");
  auto* media = app.add_subcommand("media", "Write scripts, narration and the media manifest");
  auto* build = app.add_subcommand("build", "Run every stage in order");
  for (auto* sub : {ingest, build}) {
    sub->add_option("entry", g.entry, "Repository directory, Markdown file or URL");
    sub->add_option("--depth", g.depth, "Link depth to follow (default 2)")->check(CLI::NonNegativeNumber);
  }

  for (auto* sub : {segment, build}) {
    sub->add_option("--percentile", g.percentile, "Distance percentile for chunk breaks")->check(CLI::Range(0.0, 100.0));
    sub->add_option("--buffer", g.buffer, "Neighbouring sentences joined before embedding")->check(CLI::NonNegativeNumber);
    sub->add_option("--min-sentences", g.min_sentences, "Shortest allowed segment")->check(CLI::PositiveNumber);
    sub->add_flag("--refine", g.refine, "Ask the completion provider to review each boundary");
  }

  auto* eval = app.add_subcommand("eval", "Score segments against reference boundaries (Pk, WindowDiff)");
  std::string ref_path;
  std::string hyp_path;
  std::string k_mode = "auto";
  eval->add_option("--ref", ref_path, "Annotation file (refs.json)")->required();
  eval->add_option("--hyp", hyp_path, "Segments file")->required();
  eval->add_option("--k", k_mode, "Window size: auto or a positive integer");

  auto* srv = app.add_subcommand("serve", "Serve tree.json over HTTP");
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string tree_path = "tree.json";
  std::string assets_path;
  std::string viewer_path;
  srv->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  srv->add_option("--host", host, "Bind address");
  srv->add_option("--tree", tree_path, "Tree file");
  srv->add_option("--assets", assets_path, "Assets directory (default: assets/ next to the tree)");
  srv->add_option("--viewer", viewer_path, "Built viewer bundle served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  auto logger = spdlog::stderr_color_mt("ontree");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^%l%$: %v");
  spdlog::set_level(g.verbose ? spdlog::level::debug : g.quiet ? spdlog::level::warn : spdlog::level::info);

  std::optional<int> fixed_k;
  if (k_mode != "auto") {
    try {
      std::size_t used = 0;
      fixed_k = std::stoi(k_mode, &used);
      if (used != k_mode.size() || *fixed_k < 1) throw std::invalid_argument(k_mode);
    } catch (const std::exception&) {
      std::cerr << "--k must be 'auto' or a positive integer\n";
      return exit_usage;
    }
  }

  try {
    std::optional<ontree::net::OfflineScope> offline;
    if (g.offline) offline.emplace();

    if (*eval) {
      auto report = ontree::run_eval(ref_path, hyp_path, fixed_k);
      std::cout << nlohmann::json(report).dump(2) << "\n";
      return exit_ok;
    }
    if (*srv) {
      if (assets_path.empty()) assets_path = (std::filesystem::path(tree_path).parent_path() / "assets").string();
      return serve(tree_path, assets_path, viewer_path, host, port);
    }

    ontree::Pipeline pipeline(make_config(g));
    if (*ingest) pipeline.ingest();
    if (*segment) pipeline.segment();
    if (*condense) pipeline.condense();
    if (*graph) pipeline.graph();
    if (*media) pipeline.media();
    if (*build) pipeline.build();
    spdlog::info("artifacts in {}", pipeline.config().output_dir);
    return exit_ok;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return exit_fatal;
  }
}
