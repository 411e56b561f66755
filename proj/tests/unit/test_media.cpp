#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "ontree/error.hpp"
#include "ontree/media.hpp"

using namespace ontree;

namespace {

class FailingNarration : public NarrationProvider {
 public:
  NarrationResult synthesize(const NarrationRequest&) override { throw ProviderError("voice service down", "req-9"); }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Fixture {
  std::vector<Segment> segments;
  TaskTree tree;

  Fixture() {
    auto units = testutil::units_of({"# Build the Project", "Install the compiler.", "Run make.", "Check the binary.",
                                     "# Ship", "Tag the release."});
    segments.push_back(make_segment(0, units, 0, 4));
    segments.push_back(make_segment(0, units, 4, 6));
    StructureProposal p{{OutlineEntry{segments[0].id, "root", NodeKind::task, 1, true},
                         OutlineEntry{segments[1].id, "root", NodeKind::category, 2, false}},
                        ""};
    tree = validate_repair(p, segments);
  }
  std::map<std::string, const Segment*> by_id() const {
    std::map<std::string, const Segment*> m;
    for (const auto& s : segments) m[s.id] = &s;
    return m;
  }
};

}  // namespace

TEST_SUITE("media") {

TEST_CASE("offline script follows the body sentences") {
  Fixture f;
  RuleCompletion rules;
  PromptLibrary prompts;
  auto node_id = node_id_for(f.segments[0].id);
  auto script = generate_script(f.tree.at(node_id), f.by_id(), rules, prompts);
  CHECK(script.node_id == node_id);
  REQUIRE(script.steps.size() == 3);
  CHECK(script.steps[0].index == 1);
  CHECK(script.steps[0].instruction == "Install the compiler.");
  CHECK(script.steps[2].instruction == "Check the binary.");
  CHECK(script.style_version == "1");
}

TEST_CASE("parse_script") {
  auto steps = parse_script("Intro text\n1. Open the terminal => a prompt appears\n3) Run make\nnonsense\n");
  REQUIRE(steps.size() == 2);
  CHECK(steps[0].index == 1);
  CHECK(steps[0].instruction == "Open the terminal");
  CHECK(steps[0].expected_outcome == "a prompt appears");
  CHECK(steps[1].index == 2);
  CHECK(steps[1].instruction == "Run make");
  CHECK(parse_script("").empty());
}

TEST_CASE("empty body yields a placeholder step") {
  TaskNode node;
  node.id = "node-x";
  node.title = "Heading only";
  RuleCompletion rules;
  auto script = generate_script(node, {}, rules, PromptLibrary{});
  REQUIRE(script.steps.size() == 1);
  CHECK(script.steps[0].instruction == "Review this section");
}

TEST_CASE("narration") {
  testutil::TempDir out;
  Script s{"node-a", {{1, "a", ""}, {2, "b", ""}, {3, "c", ""}, {4, "d", ""}}, "1"};
  SilentNarration silent;
  auto asset = synthesize_narration(s, silent, out.path());
  REQUIRE(asset);
  CHECK(asset->type == MediaType::audio);
  CHECK(asset->source == MediaSource::narration);
  CHECK(asset->duration_s == 4.0);
  CHECK(asset->path == "assets/audio/node-a.mp3");
  CHECK(asset->id == asset->path);
  auto first = slurp(out / asset->path);
  CHECK_FALSE(first.empty());
  synthesize_narration(s, silent, out.path());
  CHECK(slurp(out / asset->path) == first);

  FailingNarration failing;
  CHECK_FALSE(synthesize_narration(Script{"node-b", s.steps, "1"}, failing, out.path()));
  CHECK_FALSE(std::filesystem::exists(out / "assets/audio/node-b.mp3"));
}

TEST_CASE("attach_media") {
  Fixture f;
  auto node_id = node_id_for(f.segments[0].id);
  MediaAsset img{"assets/images/shot.png", MediaType::image, "assets/images/shot.png", "Terminal", MediaSource::upload, 0};
  auto t = attach_media(f.tree, node_id, img);
  CHECK(t.at(node_id).media.size() == f.tree.at(node_id).media.size() + 1);
  auto again = attach_media(t, node_id, img);
  CHECK(again.at(node_id).media.size() == t.at(node_id).media.size());
  CHECK_THROWS_AS(attach_media(f.tree, "zzz", img), NotFoundError);

  MediaAsset wrong = img;
  wrong.type = MediaType::audio;
  CHECK_THROWS_AS(attach_media(f.tree, node_id, wrong), ValidationError);

  testutil::TempDir out;
  CHECK_THROWS_AS(attach_media(f.tree, node_id, img, out.path()), ValidationError);
  out.write("assets/images/shot.png", "x");
  CHECK_NOTHROW(attach_media(f.tree, node_id, img, out.path()));
}

TEST_CASE("check_media_type") {
  CHECK_NOTHROW(check_media_type(MediaType::image, "a.JPG"));
  CHECK_NOTHROW(check_media_type(MediaType::video, "a.mp4"));
  CHECK_THROWS_AS(check_media_type(MediaType::video, "a.mp3"), ValidationError);
  CHECK_THROWS_AS(check_media_type(MediaType::image, "a.gif"), ValidationError);
}

TEST_CASE("generate_media over a tree") {
  Fixture f;
  testutil::TempDir out;
  RuleCompletion rules;
  SilentNarration silent;
  MediaManifest manifest;
  auto t = generate_media(f.tree, f.segments, rules, silent, PromptLibrary{}, out.path(), manifest);
  // Only the task node is scripted; categories and the root are not.
  REQUIRE(manifest.scripts.size() == 1);
  CHECK(manifest.scripts[0].node_id == node_id_for(f.segments[0].id));
  REQUIRE(manifest.recordings.size() == 1);
  CHECK(manifest.recordings[0].status == RecordingStatus::skipped);
  REQUIRE(manifest.assets.size() == 1);
  const auto& media = t.at(node_id_for(f.segments[0].id)).media;
  REQUIRE(media.size() == 1);
  CHECK(media[0].type == "audio");
  CHECK(std::filesystem::exists(out / media[0].path));
  CHECK(tree_violations(t).empty());

  nlohmann::json j = manifest;
  CHECK(j.contains("scripts"));
  CHECK(j["recordings"][0]["status"] == "skipped");

  MediaManifest degraded;
  FailingNarration failing;
  auto t2 = generate_media(f.tree, f.segments, rules, failing, PromptLibrary{}, out.path(), degraded);
  CHECK(degraded.assets.empty());
  CHECK(degraded.scripts.size() == 1);
  CHECK(t2.at(node_id_for(f.segments[0].id)).media.empty());
}

}  // TEST_SUITE
