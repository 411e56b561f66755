#include "ontree/pipeline.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>

#include "ontree/error.hpp"
#include "ontree/fsutil.hpp"
#include "ontree/net.hpp"

namespace ontree {

void PipelineConfig::validate() const {
  if (entry.empty()) throw ValidationError("config: entry is required");
  if (depth_limit < 0) throw ValidationError("config: depth_limit must be >= 0");
  if (output_dir.empty()) throw ValidationError("config: output_dir is required");
  segmenter.validate();
  condense.validate();
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = nlohmann::json{{"entry", c.entry},
                     {"project", c.project},
                     {"depth_limit", c.depth_limit},
                     {"segmenter", c.segmenter},
                     {"condense", c.condense},
                     {"providers",
                      {{"embedding", c.providers.embedding},
                       {"completion", c.providers.completion},
                       {"narration", c.providers.narration},
                       {"path_keywords", c.providers.rules.path_keywords}}},
                     {"output_dir", c.output_dir},
                     {"offline", c.offline}};
  if (!c.prompts_dir.empty()) j["prompts_dir"] = c.prompts_dir;
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  c.entry = j.value("entry", c.entry);
  c.project = j.value("project", c.project);
  c.depth_limit = j.value("depth_limit", c.depth_limit);
  if (j.contains("segmenter")) c.segmenter = j.at("segmenter").get<SegmenterConfig>();
  if (j.contains("condense")) c.condense = j.at("condense").get<CondenseConfig>();
  if (j.contains("providers")) {
    const auto& p = j.at("providers");
    if (p.contains("embedding")) c.providers.embedding = p.at("embedding").get<ProviderConfig>();
    if (p.contains("completion")) c.providers.completion = p.at("completion").get<ProviderConfig>();
    if (p.contains("narration")) c.providers.narration = p.at("narration").get<ProviderConfig>();
    if (p.contains("path_keywords"))
      c.providers.rules.path_keywords = p.at("path_keywords").get<std::vector<std::string>>();
  }
  c.output_dir = j.value("output_dir", c.output_dir);
  c.offline = j.value("offline", c.offline);
  c.prompts_dir = j.value("prompts_dir", c.prompts_dir);
}

PipelineConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(fsutil::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("config {}: {}", path.string(), e.what()));
  }
  auto c = j.get<PipelineConfig>();
  auto base = path.parent_path();
  auto rebase = [&](std::string& p) {
    if (p.empty() || p.find("://") != std::string::npos) return;
    if (std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  rebase(c.entry);
  rebase(c.output_dir);
  rebase(c.prompts_dir);
  return c;
}

std::string build_timestamp(bool offline) {
  long long seconds = 0;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    seconds = std::atoll(epoch);
  } else if (!offline) {
    seconds = std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
  }
  std::chrono::sys_seconds tp{std::chrono::seconds(seconds)};
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(tp)));
}

std::string derive_project_name(const SourceLocator& entry) {
  if (entry.kind == LocatorKind::http_url) {
    auto url = net::parse_url(entry.target());
    auto path = url.path;
    // https://host/owner/repo/... -> repo
    std::vector<std::string> parts;
    std::size_t start = 1;
    while (start < path.size()) {
      auto slash = path.find('/', start);
      auto part = path.substr(start, slash == std::string::npos ? std::string::npos : slash - start);
      if (!part.empty()) parts.push_back(part);
      if (slash == std::string::npos) break;
      start = slash + 1;
    }
    return parts.size() >= 2 ? parts[1] : url.host;
  }
  auto dir = std::filesystem::path(entry.target()).parent_path();
  if (dir.filename() == "docs" || dir.filename() == ".github") dir = dir.parent_path();
  auto name = dir.filename().string();
  return name.empty() ? "project" : name;
}

std::string dump_artifact(const nlohmann::json& j) { return j.dump(2) + "\n"; }

namespace {

nlohmann::json read_json(const std::filesystem::path& p, const char* stage) {
  try {
    return nlohmann::json::parse(fsutil::read_file(p));
  } catch (const std::exception& e) {
    throw StageError(stage, fmt::format("cannot load {}: {}", p.string(), e.what()));
  }
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  spdlog::info("stage {}", name);
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

PromptLibrary load_prompts(const PipelineConfig& c) {
  return c.prompts_dir.empty() ? PromptLibrary() : PromptLibrary(c.prompts_dir);
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config)
    : config_(std::move(config)),
      providers_(make_providers(config_.providers.embedding, config_.providers.completion,
                                config_.providers.narration, config_.offline, config_.providers.rules)),
      prompts_(load_prompts(config_)) {
  config_.validate();
}

Corpus Pipeline::ingest() {
  return stage("ingest", [&] {
    auto entry = resolve_entry(config_.entry);
    TraverseOptions opts;
    opts.depth_limit = config_.depth_limit;
    auto corpus = traverse(entry, opts);
    if (config_.project.empty()) config_.project = derive_project_name(entry);
    fsutil::write_atomic(out(artifact::corpus), dump_artifact(corpus));
    spdlog::info("ingested {} documents", corpus.documents.size());
    return corpus;
  });
}

SegmentsFile Pipeline::segment() {
  return stage("segment", [&] {
    auto corpus = read_json(out(artifact::corpus), "segment").get<Corpus>();
    auto file = segment_corpus(corpus, config_.segmenter, *providers_.embedding);
    if (config_.segmenter.refine) {
      RetrievalStore store(corpus, *providers_.embedding);
      for (auto& doc : file.documents)
        doc.segments = refine_boundaries(doc.segments, store, *providers_.completion, prompts_,
                                         config_.segmenter.min_sentences);
    }
    fsutil::write_atomic(out(artifact::segments), dump_artifact(file));
    spdlog::info("segmented into {} segments", file.all().size());
    return file;
  });
}

std::vector<Segment> Pipeline::condense() {
  return stage("condense", [&] {
    auto corpus = read_json(out(artifact::corpus), "condense").get<Corpus>();
    auto file = read_json(out(artifact::segments), "condense").get<SegmentsFile>();
    CondenseLog log;
    auto kept = ontree::condense(file.all(), corpus, config_.condense, *providers_.embedding, &log);
    fsutil::write_atomic(out(artifact::condense_log), dump_artifact(log));
    nlohmann::json segs = kept;
    fsutil::write_atomic(out(artifact::condensed), dump_artifact({{"segments", segs}}));
    spdlog::info("condensed to {} segments ({} boilerplate lines, {} clusters)", kept.size(), log.removed.size(),
                 log.clusters.size());
    return kept;
  });
}

TaskTree Pipeline::graph() {
  return stage("graph", [&] {
    auto segments = read_json(out(artifact::condensed), "graph").at("segments").get<std::vector<Segment>>();
    if (config_.project.empty()) {
      auto corpus = read_json(out(artifact::corpus), "graph").get<Corpus>();
      config_.project = derive_project_name(corpus.entry);
    }
    title_segments(segments, *providers_.completion, prompts_);
    auto proposal = propose_structure(segments, *providers_.completion, prompts_);
    auto tree = mark_main_path(validate_repair(proposal, segments, config_.project), proposal);
    tree.generated_at = build_timestamp(config_.offline);
    std::vector<std::string> ids;
    for (const auto& s : segments) ids.push_back(s.id);
    auto problems = tree_violations(tree, ids);
    if (!problems.empty()) throw StructureError("repaired tree is invalid: " + problems.front());
    if (std::filesystem::exists(out(artifact::tree)))
      spdlog::warn("overwriting {}; edits made through serve are discarded by regeneration",
                   out(artifact::tree).string());
    fsutil::write_atomic(out(artifact::tree), canonical_json(tree));
    return tree;
  });
}

TaskTree Pipeline::media() {
  return stage("media", [&] {
    auto tree = read_json(out(artifact::tree), "media").get<TaskTree>();
    auto segments = read_json(out(artifact::condensed), "media").at("segments").get<std::vector<Segment>>();
    MediaManifest manifest;
    MediaOptions opts;
    opts.voice_id = config_.providers.narration.voice_id;
    tree = generate_media(std::move(tree), segments, *providers_.completion, *providers_.narration, prompts_,
                          config_.output_dir, manifest, opts);
    fsutil::write_atomic(out(artifact::media_manifest), dump_artifact(manifest));
    fsutil::write_atomic(out(artifact::tree), canonical_json(tree));
    return tree;
  });
}

TaskTree Pipeline::build() {
  std::optional<net::OfflineScope> guard;
  if (config_.offline) guard.emplace();
  ingest();
  segment();
  condense();
  graph();
  return media();
}

MetricReport run_eval(const std::filesystem::path& ref, const std::filesystem::path& hyp, std::optional<int> k) {
  auto load = [](const std::filesystem::path& p) {
    if (!std::filesystem::is_regular_file(p)) throw NotFoundError("no such file: " + p.string());
    try {
      return nlohmann::json::parse(fsutil::read_file(p));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("{}: {}", p.string(), e.what()));
    }
  };
  return evaluate_corpus(load(ref), load(hyp), k);
}

}  // namespace ontree
