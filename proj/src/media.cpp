#include "ontree/media.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <regex>

#include "ontree/error.hpp"
#include "ontree/fsutil.hpp"
#include "parallel.hpp"
#include "text_util.hpp"

namespace ontree {

std::string_view to_string(MediaType t) {
  switch (t) {
    case MediaType::audio: return "audio";
    case MediaType::video: return "video";
    case MediaType::image: return "image";
  }
  return "image";
}

std::string_view to_string(MediaSource s) {
  switch (s) {
    case MediaSource::narration: return "narration";
    case MediaSource::recorder: return "recorder";
    case MediaSource::upload: return "upload";
  }
  return "upload";
}

MediaType media_type_from_string(std::string_view s) {
  if (s == "audio") return MediaType::audio;
  if (s == "video") return MediaType::video;
  if (s == "image") return MediaType::image;
  throw ValidationError("unknown media type: " + std::string(s));
}

namespace {

std::string_view to_string(RecordingStatus s) {
  switch (s) {
    case RecordingStatus::pending: return "pending";
    case RecordingStatus::recorded: return "recorded";
    case RecordingStatus::skipped: return "skipped";
  }
  return "pending";
}

}  // namespace

void check_media_type(MediaType type, const std::string& path) {
  auto ext = detail::lower(std::filesystem::path(path).extension().string());
  bool ok = false;
  switch (type) {
    case MediaType::audio: ok = ext == ".mp3"; break;
    case MediaType::video: ok = ext == ".mp4"; break;
    case MediaType::image: ok = ext == ".png" || ext == ".jpg" || ext == ".jpeg"; break;
  }
  if (!ok) throw ValidationError(fmt::format("{} asset cannot have extension '{}'", to_string(type), ext));
}

RecorderManifest SkippingRecorder::record(const Script& script, const std::filesystem::path&) {
  return {script.node_id, script.node_id, RecordingStatus::skipped, "no recorder configured", ""};
}

std::vector<ScriptStep> parse_script(const std::string& raw) {
  static const std::regex step_re(R"(^\s*(\d{1,4})\s*[.)]\s+(.*)$)");
  std::vector<ScriptStep> steps;
  std::size_t start = 0;
  int last = 0;
  bool gaps = false;
  while (start < raw.size()) {
    auto nl = raw.find('\n', start);
    std::string line = raw.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
    start = nl == std::string::npos ? raw.size() : nl + 1;
    std::smatch m;
    if (!std::regex_match(line, m, step_re)) {
      if (!detail::trim(line).empty()) spdlog::debug("script: dropping line '{}'", line.substr(0, 60));
      continue;
    }
    std::string body = m[2].str();
    std::string instruction = body;
    std::string outcome;
    if (auto arrow = body.find("=>"); arrow != std::string::npos) {
      instruction = body.substr(0, arrow);
      outcome = body.substr(arrow + 2);
    }
    instruction = std::string(detail::trim(instruction));
    if (instruction.empty()) continue;
    int n = std::stoi(m[1].str());
    if (n != last + 1) gaps = true;
    last = n;
    steps.push_back({0, instruction, std::string(detail::trim(outcome))});
  }
  if (gaps) spdlog::warn("script step numbers were not contiguous; renumbered");
  for (std::size_t i = 0; i < steps.size(); ++i) steps[i].index = static_cast<int>(i) + 1;
  return steps;
}

Script generate_script(const TaskNode& node, const std::map<std::string, const Segment*>& segments,
                       CompletionProvider& completion, const PromptLibrary& prompts) {
  if (node.kind != NodeKind::task && node.kind != NodeKind::step)
    throw ValidationError("scripts are generated for task and step nodes only: " + node.id);
  Script script;
  script.node_id = node.id;

  std::string body;
  for (const auto& ref : node.segment_refs) {
    auto it = segments.find(ref);
    if (it == segments.end()) continue;
    body += (body.empty() ? "" : "\n") + segment_prompt_body(*it->second);
  }
  if (body.empty()) body = node.body_markdown;

  // A body of headings alone has nothing to instruct.
  std::string content_only;
  {
    std::size_t start = 0;
    while (start < body.size()) {
      auto nl = body.find('\n', start);
      auto line = detail::trim(std::string_view(body).substr(start, nl == std::string::npos ? std::string::npos : nl - start));
      start = nl == std::string::npos ? body.size() : nl + 1;
      if (line.empty() || line.front() == '#') continue;
      content_only += (content_only.empty() ? "" : "\n") + std::string(line);
    }
  }
  if (content_only.empty()) {
    script.steps.push_back({1, "Review this section", ""});
    return script;
  }

  CompletionRequest req;
  req.task = CompletionTask::script;
  req.prompt = prompt::render(prompts.template_for(CompletionTask::script),
                              {{"segment", prompt::section("SEGMENT", body)}});
  req.few_shot_examples = prompts.script_examples();
  try {
    script.steps = parse_script(completion.complete(req));
  } catch (const ProviderError& e) {
    spdlog::warn("{}: script completion failed ({})", node.id, e.what());
  }
  if (script.steps.empty()) {
    std::string flat = detail::collapse_ws(content_only);
    script.steps.push_back({1, flat, ""});
  }
  return script;
}

std::optional<MediaAsset> synthesize_narration(const Script& script, NarrationProvider& narration,
                                               const std::filesystem::path& out_dir, const std::string& voice_id) {
  if (script.steps.empty()) throw ValidationError("cannot narrate an empty script");
  NarrationRequest req;
  req.voice_id = voice_id;
  for (const auto& s : script.steps) req.parts.push_back(s.instruction);
  NarrationResult result;
  try {
    result = narration.synthesize(req);
  } catch (const Error& e) {
    spdlog::warn("{}: narration failed ({}); keeping text only", script.node_id, e.what());
    return std::nullopt;
  }
  if (result.audio.empty()) {
    spdlog::warn("{}: narration returned no audio; keeping text only", script.node_id);
    return std::nullopt;
  }
  MediaAsset a;
  a.path = "assets/audio/" + script.node_id + ".mp3";
  a.id = a.path;
  a.type = MediaType::audio;
  a.source = MediaSource::narration;
  a.caption = "Narrated walkthrough";
  a.duration_s = result.duration_s;
  fsutil::write_atomic(out_dir / a.path, result.audio);
  return a;
}

TaskTree attach_media(TaskTree tree, const std::string& node_id, const MediaAsset& asset,
                      const std::filesystem::path& out_dir) {
  auto& node = tree.at(node_id);
  check_media_type(asset.type, asset.path);
  if (!out_dir.empty() && !std::filesystem::is_regular_file(out_dir / asset.path))
    throw ValidationError("asset file missing: " + asset.path);
  bool present = std::any_of(node.media.begin(), node.media.end(), [&](const MediaRef& m) { return m.path == asset.path; });
  if (!present) node.media.push_back({std::string(to_string(asset.type)), asset.path, asset.caption});
  return tree;
}

void to_json(nlohmann::json& j, const Script& s) {
  auto steps = nlohmann::json::array();
  for (const auto& st : s.steps)
    steps.push_back({{"index", st.index}, {"instruction", st.instruction}, {"expected_outcome", st.expected_outcome}});
  j = nlohmann::json{{"node_id", s.node_id}, {"style_version", s.style_version}, {"steps", steps}};
}

void from_json(const nlohmann::json& j, Script& s) {
  s.node_id = j.at("node_id").get<std::string>();
  s.style_version = j.value("style_version", script_style_version);
  s.steps.clear();
  for (const auto& js : j.at("steps"))
    s.steps.push_back({js.at("index").get<int>(), js.at("instruction").get<std::string>(),
                       js.value("expected_outcome", "")});
}

void to_json(nlohmann::json& j, const MediaAsset& a) {
  j = nlohmann::json{{"id", a.id},         {"type", to_string(a.type)},     {"path", a.path},
                     {"caption", a.caption}, {"source", to_string(a.source)}, {"duration_s", a.duration_s}};
}

void to_json(nlohmann::json& j, const RecorderManifest& m) {
  j = nlohmann::json{{"node_id", m.node_id}, {"script_ref", m.script_ref}, {"status", to_string(m.status)}, {"notes", m.notes}};
  if (!m.video_path.empty()) j["video_path"] = m.video_path;
}

void to_json(nlohmann::json& j, const MediaManifest& m) {
  j = nlohmann::json{{"scripts", m.scripts}, {"recordings", m.recordings}, {"assets", m.assets}};
}

TaskTree generate_media(TaskTree tree, const std::vector<Segment>& segments, CompletionProvider& completion,
                        NarrationProvider& narration, const PromptLibrary& prompts,
                        const std::filesystem::path& out_dir, MediaManifest& manifest, const MediaOptions& options) {
  std::map<std::string, const Segment*> by_id;
  for (const auto& s : segments) by_id.emplace(s.id, &s);

  std::vector<std::string> ids;  // std::map order = sorted node ids
  for (const auto& [id, n] : tree.nodes)
    if (n.kind == NodeKind::task || n.kind == NodeKind::step) ids.push_back(id);

  SkippingRecorder skipping;
  Recorder& recorder = options.recorder ? *options.recorder : skipping;
  std::vector<Script> scripts(ids.size());
  std::vector<std::optional<MediaAsset>> audio(ids.size());
  detail::parallel_for(ids.size(), [&](std::size_t i) {
    scripts[i] = generate_script(tree.at(ids[i]), by_id, completion, prompts);
    audio[i] = synthesize_narration(scripts[i], narration, out_dir, options.voice_id);
  });

  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (audio[i]) {
      tree = attach_media(std::move(tree), ids[i], *audio[i], out_dir);
      manifest.assets.push_back(*audio[i]);
    }
    auto rec = recorder.record(scripts[i], out_dir / "assets");
    if (rec.status == RecordingStatus::recorded) {
      if (rec.video_path.empty()) throw ValidationError("recorder reported a recording without a video: " + ids[i]);
      MediaAsset video{rec.video_path, MediaType::video, rec.video_path, "Recorded demonstration", MediaSource::recorder, 0.0};
      tree = attach_media(std::move(tree), ids[i], video, out_dir);
      manifest.assets.push_back(video);
    }
    manifest.recordings.push_back(std::move(rec));
    manifest.scripts.push_back(std::move(scripts[i]));
  }
  return tree;
}

}  // namespace ontree
