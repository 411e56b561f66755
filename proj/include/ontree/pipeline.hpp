#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ontree/condense.hpp"
#include "ontree/error.hpp"
#include "ontree/graphgen.hpp"
#include "ontree/ingest.hpp"
#include "ontree/media.hpp"
#include "ontree/providers.hpp"
#include "ontree/segment.hpp"
#include "ontree/segmetrics.hpp"

namespace ontree {

struct ProvidersConfig {
  ProviderConfig embedding;
  ProviderConfig completion;
  ProviderConfig narration;
  OfflineRules rules;
};

struct PipelineConfig {
  std::string entry;
  std::string project;  // derived from the entry when empty
  int depth_limit = 2;
  SegmenterConfig segmenter;
  CondenseConfig condense;
  ProvidersConfig providers;
  std::string output_dir = "out";
  bool offline = false;
  std::string prompts_dir;  // optional override of the built-in prompts

  void validate() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

/// Reads a JSON config; relative entry/output/prompts paths are taken
/// relative to the config file's directory.
PipelineConfig load_config(const std::filesystem::path& path);

/// A fatal error inside one pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error(stage + ": " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

namespace artifact {
inline constexpr const char* corpus = "corpus.json";
inline constexpr const char* segments = "segments.json";
inline constexpr const char* condensed = "condensed.json";
inline constexpr const char* condense_log = "condense.log.json";
inline constexpr const char* tree = "tree.json";
inline constexpr const char* media_manifest = "media_manifest.json";
}  // namespace artifact

/// SOURCE_DATE_EPOCH when set, the Unix epoch for offline builds, else now.
std::string build_timestamp(bool offline);
std::string derive_project_name(const SourceLocator& entry);

/// Canonical JSON text used for every artifact (sorted keys, trailing newline).
std::string dump_artifact(const nlohmann::json& j);

/// Runs stages against the files in config.output_dir. Each stage reads its
/// inputs from disk, so stages can be rerun after manual edits.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  Corpus ingest();
  SegmentsFile segment();
  std::vector<Segment> condense();
  TaskTree graph();
  TaskTree media();
  /// All stages in order; returns the final tree.
  TaskTree build();

  const PipelineConfig& config() const { return config_; }
  std::filesystem::path out(const char* name) const { return std::filesystem::path(config_.output_dir) / name; }

 private:
  PipelineConfig config_;
  ProviderSuite providers_;
  PromptLibrary prompts_;
};

MetricReport run_eval(const std::filesystem::path& ref, const std::filesystem::path& hyp, std::optional<int> k);

}  // namespace ontree
