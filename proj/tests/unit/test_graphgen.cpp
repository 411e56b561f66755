#include <algorithm>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "ontree/error.hpp"
#include "ontree/graphgen.hpp"

using namespace ontree;

namespace {

Segment segment_of(const std::vector<std::string>& lines, int doc = 0, int start = 0) {
  auto units = testutil::units_of(lines);
  auto s = make_segment(doc, units, 0, static_cast<int>(units.size()));
  s.id = segment_id(doc, start);
  return s;
}

OutlineEntry entry(const std::string& id, const std::string& parent, int order, bool main = false,
                   NodeKind kind = NodeKind::task) {
  return OutlineEntry{id, parent, kind, order, main};
}

std::string parent_of(const TaskTree& t, const std::string& segid) {
  auto parents = t.parents();
  return parents.at(node_id_for(segid));
}

std::vector<std::string> ids_of(const std::vector<Segment>& segs) {
  std::vector<std::string> out;
  for (const auto& s : segs) out.push_back(s.id);
  return out;
}

}  // namespace

TEST_SUITE("graphgen") {

TEST_CASE("offline titles") {
  CHECK(offline_title(segment_of({"# Run the Test Suite", "Use make test."})) == "Run the Test Suite");
  CHECK(offline_title(segment_of({"clone the repo then install deps locally"})) == "clone the repo then install deps");
  CHECK(offline_title(segment_of({"Short."})) == "Short");
}

TEST_CASE("title clamp") {
  CHECK(clamp_title("one two three four five six seven eight nine ten eleven twelve thirteen fourteen") ==
        "one two three four five six seven eight nine ten");
  CHECK(clamp_title("\"Open a Pull Request.\"\nextra line") == "Open a Pull Request");
  CHECK(clamp_title("   ") == "");
}

TEST_CASE("title_segment uses the provider and falls back") {
  PromptLibrary prompts;
  auto seg = segment_of({"# Build the Project", "Run make."});
  testutil::ScriptedCompletion long_answer(
      [](const CompletionRequest&) { return "a b c d e f g h i j k l m n"; });
  CHECK(title_segment(seg, long_answer, prompts) == "a b c d e f g h i j");
  REQUIRE(long_answer.requests.size() == 1);
  CHECK(long_answer.requests[0].task == CompletionTask::title);
  CHECK(prompt::extract(long_answer.requests[0].prompt, "SEGMENT") == std::optional<std::string>("## Build the Project\nRun make."));

  testutil::ScriptedCompletion empty([](const CompletionRequest&) { return "  "; });
  CHECK(title_segment(seg, empty, prompts) == "Build the Project");
  testutil::ScriptedCompletion failing([](const CompletionRequest&) -> std::string { throw ProviderError("down", "req-1"); });
  CHECK(title_segment(seg, failing, prompts) == "Build the Project");
}

TEST_CASE("offline structure proposal") {
  PromptLibrary prompts;
  RuleCompletion rules;
  std::vector<Segment> segs{segment_of({"# Setup", "Install things."}, 0, 0),
                            segment_of({"# Testing", "Run them."}, 0, 2)};
  segs[0].title = "Setup";
  segs[1].title = "Testing";
  auto p = propose_structure(segs, rules, prompts);
  REQUIRE(p.outline.size() == 2);
  CHECK(p.outline[0].segment_id == segs[0].id);
  CHECK(p.outline[0].kind_hint == NodeKind::category);
  CHECK(p.outline[1].kind_hint == NodeKind::category);
  CHECK(p.outline[0].order_index < p.outline[1].order_index);
  CHECK_FALSE(p.outline[0].main_path);
  CHECK(p.outline[1].main_path);  // "test" keyword

  std::vector<Segment> pr{segment_of({"Some words here."}, 0, 0)};
  pr[0].title = "Create a Pull Request";
  CHECK(propose_structure(pr, rules, prompts).outline[0].main_path);
}

TEST_CASE("structure prompt carries the few-shot exemplars") {
  PromptLibrary prompts;
  auto segs = testutil::flat_segments(3);
  testutil::ScriptedCompletion c([&](const CompletionRequest&) {
    return "1 | " + segs[0].id + " | task | root | main";
  });
  auto p = propose_structure(segs, c, prompts);
  REQUIRE(c.requests.size() == 1);
  CHECK(c.requests[0].few_shot_examples.size() == prompts.structure_examples().size());
  CHECK(c.requests[0].prompt.find(segs[2].id) != std::string::npos);
  CHECK(p.outline.size() == 1);
}

TEST_CASE("parse_structure") {
  auto segs = testutil::flat_segments(3);
  auto raw = "Here is the outline:\n"
             "1 | " + segs[0].id + " | category | root | -\n"
             "2 | seg-404-0000 | task | root | -\n"
             "3 | " + segs[1].id + " | task | " + segs[0].id + " | main\n"
             "not an outline line\n";
  auto p = parse_structure(raw, segs);
  REQUIRE(p.outline.size() == 2);
  CHECK(p.outline[1].segment_id == segs[1].id);
  CHECK(p.outline[1].parent_hint == segs[0].id);
  CHECK(p.outline[1].main_path);
  CHECK(p.outline[1].order_index == 2);  // renumbered
  CHECK(p.raw_completion == raw);
  CHECK_THROWS_AS(parse_structure("nothing useful", segs), StructureError);
}

TEST_CASE("repair: two-node cycle") {
  auto segs = testutil::flat_segments(2);
  StructureProposal p{{entry(segs[0].id, segs[1].id, 1), entry(segs[1].id, segs[0].id, 2)}, ""};
  auto t = validate_repair(p, segs);
  CHECK(tree_violations(t, ids_of(segs)).empty());
  // Oracle: the cycle member with the higher order (B) goes to root; A stays under B.
  CHECK(parent_of(t, segs[1].id) == "root");
  CHECK(parent_of(t, segs[0].id) == node_id_for(segs[1].id));
}

TEST_CASE("repair: orphans, unknown parents, duplicate claims") {
  auto segs = testutil::flat_segments(4);
  StructureProposal p{{entry(segs[0].id, "root", 1, false, NodeKind::category), entry(segs[1].id, "seg-777-0000", 2),
                       entry(segs[0].id, segs[1].id, 3), entry(segs[2].id, segs[0].id, 4)},
                      ""};
  auto t = validate_repair(p, segs);
  CHECK(tree_violations(t, ids_of(segs)).empty());
  CHECK(parent_of(t, segs[1].id) == "root");
  CHECK(parent_of(t, segs[0].id) == "root");  // first claim
  CHECK(parent_of(t, segs[2].id) == node_id_for(segs[0].id));
  CHECK(parent_of(t, segs[3].id) == "root");  // orphan
  CHECK(t.at(node_id_for(segs[3].id)).kind == NodeKind::task);
  CHECK(t.at("root").children.back() == node_id_for(segs[3].id));
}

TEST_CASE("repair: well-formed proposal is preserved") {
  auto segs = testutil::flat_segments(5);
  StructureProposal p{{entry(segs[0].id, "root", 1, false, NodeKind::category), entry(segs[2].id, segs[0].id, 2),
                       entry(segs[1].id, segs[0].id, 3), entry(segs[3].id, "root", 4, false, NodeKind::category),
                       entry(segs[4].id, segs[3].id, 5, false, NodeKind::step)},
                      ""};
  auto t = validate_repair(p, segs, "Demo");
  CHECK(tree_violations(t, ids_of(segs)).empty());
  CHECK(t.project == "Demo");
  CHECK(t.at("root").children == std::vector<std::string>{node_id_for(segs[0].id), node_id_for(segs[3].id)});
  CHECK(t.at(node_id_for(segs[0].id)).children == std::vector<std::string>{node_id_for(segs[2].id), node_id_for(segs[1].id)});
  CHECK(t.at(node_id_for(segs[4].id)).kind == NodeKind::step);
  CHECK(t.at(node_id_for(segs[0].id)).kind == NodeKind::category);
  CHECK(t.ancestor_path(node_id_for(segs[4].id)) == std::vector<std::string>{"root", node_id_for(segs[3].id)});
}

TEST_CASE("main path ranks") {
  auto segs = testutil::flat_segments(4);
  StructureProposal p{{entry(segs[0].id, "root", 5, true), entry(segs[1].id, "root", 2, true),
                       entry(segs[2].id, "root", 9, true), entry(segs[3].id, "root", 1)},
                      ""};
  auto t = mark_main_path(validate_repair(p, segs), p);
  CHECK(t.at(node_id_for(segs[0].id)).main_path_rank == 2);
  CHECK(t.at(node_id_for(segs[1].id)).main_path_rank == 1);
  CHECK(t.at(node_id_for(segs[2].id)).main_path_rank == 3);
  CHECK_FALSE(t.at(node_id_for(segs[3].id)).main_path_rank);

  StructureProposal none{{entry(segs[0].id, "root", 1)}, ""};
  auto plain = mark_main_path(validate_repair(none, segs), none);
  for (const auto& [id, n] : plain.nodes) CHECK_FALSE(n.main_path_rank);

  // A flagged segment that consolidation removed is skipped.
  std::vector<Segment> kept{segs[0], segs[2], segs[3]};
  auto t2 = mark_main_path(validate_repair(p, kept), p);
  CHECK(t2.at(node_id_for(segs[0].id)).main_path_rank == 1);
  CHECK(t2.at(node_id_for(segs[2].id)).main_path_rank == 2);
  CHECK(tree_violations(t2, ids_of(kept)).empty());
}

TEST_CASE("random proposals always repair into valid trees") {
  std::mt19937 rng(2024);
  for (int round = 0; round < 2000; ++round) {
    auto segs = testutil::flat_segments(1 + static_cast<int>(rng() % 12));
    auto p = testutil::random_proposal(segs, rng);
    auto t = mark_main_path(validate_repair(p, segs), p);
    auto v = tree_violations(t, ids_of(segs));
    if (!v.empty()) FAIL("round " << round << ": " << v.front());
  }
}

TEST_CASE("tree_violations detects broken trees") {
  auto segs = testutil::flat_segments(3);
  StructureProposal p{{entry(segs[0].id, "root", 1), entry(segs[1].id, segs[0].id, 2)}, ""};
  auto good = validate_repair(p, segs);
  REQUIRE(tree_violations(good).empty());

  auto twice = good;
  twice.at("root").children.push_back(node_id_for(segs[1].id));
  CHECK_FALSE(tree_violations(twice).empty());

  auto unreachable = good;
  auto& rc = unreachable.at("root").children;
  rc.erase(std::find(rc.begin(), rc.end(), node_id_for(segs[2].id)));
  CHECK_FALSE(tree_violations(unreachable).empty());

  auto ranks = good;
  ranks.at(node_id_for(segs[0].id)).main_path_rank = 1;
  ranks.at(node_id_for(segs[1].id)).main_path_rank = 3;
  CHECK_FALSE(tree_violations(ranks).empty());

  CHECK_FALSE(tree_violations(good, {segs[0].id, segs[1].id}).empty());  // extra reference
}

TEST_CASE("canonical JSON") {
  auto segs = testutil::flat_segments(3);
  StructureProposal p{{entry(segs[0].id, "root", 1, true), entry(segs[1].id, segs[0].id, 2)}, ""};
  auto t = mark_main_path(validate_repair(p, segs, "Demo"), p);
  t.generated_at = "1970-01-01T00:00:00Z";
  t.at(node_id_for(segs[1].id)).media.push_back({"audio", "assets/audio/x.mp3", "Narration"});
  auto text = canonical_json(t);
  CHECK(text.back() == '\n');
  CHECK(text.find("\n  \"generated_at\": \"1970-01-01T00:00:00Z\",\n") != std::string::npos);
  auto j = nlohmann::json::parse(text);
  CHECK(j["version"] == "1");
  CHECK(j["root"] == "root");
  CHECK(j["nodes"][node_id_for(segs[0].id)]["main_path_rank"] == 1);
  CHECK_FALSE(j["nodes"][node_id_for(segs[1].id)].contains("main_path_rank"));
  auto back = j.get<TaskTree>();
  CHECK(canonical_json(back) == text);
  CHECK(back.at(node_id_for(segs[1].id)).media[0].caption == "Narration");
}

}  // TEST_SUITE
