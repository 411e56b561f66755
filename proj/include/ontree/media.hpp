#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ontree/graphgen.hpp"
#include "ontree/providers.hpp"
#include "ontree/segment.hpp"

namespace ontree {

struct ScriptStep {
  int index = 0;
  std::string instruction;
  std::string expected_outcome;
};

inline constexpr const char* script_style_version = "1";

struct Script {
  std::string node_id;
  std::vector<ScriptStep> steps;
  std::string style_version = script_style_version;
};

enum class MediaType { audio, video, image };
enum class MediaSource { narration, recorder, upload };

std::string_view to_string(MediaType t);
std::string_view to_string(MediaSource s);
MediaType media_type_from_string(std::string_view s);

struct MediaAsset {
  std::string id;  // equal to path
  MediaType type = MediaType::image;
  std::string path;  // "assets/audio/x.mp3", relative to the output directory
  std::string caption;
  MediaSource source = MediaSource::upload;
  double duration_s = 0.0;
};

/// Throws ValidationError unless the extension fits the type
/// (audio .mp3, video .mp4, image .png/.jpg/.jpeg).
void check_media_type(MediaType type, const std::string& path);

enum class RecordingStatus { pending, recorded, skipped };

struct RecorderManifest {
  std::string node_id;
  std::string script_ref;
  RecordingStatus status = RecordingStatus::pending;
  std::string notes;
  std::string video_path;  // set iff recorded
};

/// Integration point for live demonstration capture.
class Recorder {
 public:
  virtual ~Recorder() = default;
  virtual RecorderManifest record(const Script& script, const std::filesystem::path& assets_root) = 0;
};

/// Default: never records, marks every manifest skipped.
class SkippingRecorder final : public Recorder {
 public:
  RecorderManifest record(const Script& script, const std::filesystem::path& assets_root) override;
};

/// Parses "N. instruction => expected outcome" lines. Malformed lines are
/// dropped; surviving steps are renumbered 1..n.
std::vector<ScriptStep> parse_script(const std::string& raw);

/// `segments` maps segment id to segment; the node body falls back to
/// body_markdown when none of its segments are known.
Script generate_script(const TaskNode& node, const std::map<std::string, const Segment*>& segments,
                       CompletionProvider& completion, const PromptLibrary& prompts);

/// Writes assets/audio/{node_id}.mp3 under `out_dir`. Returns nullopt (with a
/// warning) when the provider fails.
std::optional<MediaAsset> synthesize_narration(const Script& script, NarrationProvider& narration,
                                               const std::filesystem::path& out_dir, const std::string& voice_id = {});

/// Appends the asset to the node unless an entry with the same path exists.
/// Throws NotFoundError for unknown nodes, ValidationError for a type mismatch
/// or a file missing from `out_dir` (skipped when out_dir is empty).
TaskTree attach_media(TaskTree tree, const std::string& node_id, const MediaAsset& asset,
                      const std::filesystem::path& out_dir = {});

struct MediaManifest {
  std::vector<Script> scripts;
  std::vector<RecorderManifest> recordings;
  std::vector<MediaAsset> assets;
};

void to_json(nlohmann::json& j, const Script& s);
void from_json(const nlohmann::json& j, Script& s);
void to_json(nlohmann::json& j, const MediaAsset& a);
void to_json(nlohmann::json& j, const RecorderManifest& m);
void to_json(nlohmann::json& j, const MediaManifest& m);

struct MediaOptions {
  std::string voice_id;
  Recorder* recorder = nullptr;  // defaults to SkippingRecorder
};

/// Scripts, narration and recorder manifests for every task/step node.
/// Node work runs in parallel; attachment happens in node id order.
TaskTree generate_media(TaskTree tree, const std::vector<Segment>& segments, CompletionProvider& completion,
                        NarrationProvider& narration, const PromptLibrary& prompts,
                        const std::filesystem::path& out_dir, MediaManifest& manifest,
                        const MediaOptions& options = {});

}  // namespace ontree
