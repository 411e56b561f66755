#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ontree/providers.hpp"
#include "ontree/segment.hpp"

namespace ontree {

enum class NodeKind { root, category, task, step };

std::string_view to_string(NodeKind kind);
NodeKind node_kind_from_string(std::string_view s);

/// Media reference as stored in tree.json.
struct MediaRef {
  std::string type;  // audio, video, image
  std::string path;  // "assets/..."
  std::string caption;

  bool operator==(const MediaRef&) const = default;
};

struct TaskNode {
  std::string id;
  NodeKind kind = NodeKind::task;
  std::string title;
  std::string summary;
  std::string body_markdown;
  std::vector<std::string> segment_refs;
  std::vector<std::string> children;
  std::optional<int> main_path_rank;
  std::vector<MediaRef> media;
  std::vector<SourceSpan> spans;
};

inline constexpr const char* tree_schema_version = "1";
inline constexpr const char* root_id = "root";

struct TaskTree {
  std::string version = tree_schema_version;
  std::string project;
  std::string generated_at;  // ISO 8601 UTC
  std::string root = root_id;
  std::map<std::string, TaskNode> nodes;

  const TaskNode& at(const std::string& id) const;
  TaskNode& at(const std::string& id);
  /// Parent id of every non-root node reachable from the root.
  std::map<std::string, std::string> parents() const;
  /// Ancestor ids from the root down to (excluding) `id`.
  std::vector<std::string> ancestor_path(const std::string& id) const;
};

/// Empty when every tree invariant holds, otherwise one message per violation.
std::vector<std::string> tree_violations(const TaskTree& tree);
/// Also checks that every segment id is referenced by exactly one node.
std::vector<std::string> tree_violations(const TaskTree& tree, const std::vector<std::string>& segment_ids);

void to_json(nlohmann::json& j, const TaskTree& tree);
void from_json(const nlohmann::json& j, TaskTree& tree);
/// Sorted keys, two-space indent, trailing newline.
std::string canonical_json(const TaskTree& tree);

std::string node_id_for(const std::string& segment_id);

/// At most 10 words, first line only, no surrounding quotes or terminal punctuation.
std::string clamp_title(std::string_view raw);
/// First heading of the segment, else its first 6 words.
std::string offline_title(const Segment& segment);
/// Segment units one per line, headings written as "## text".
std::string segment_prompt_body(const Segment& segment);

/// Falls back to offline_title when the provider fails or returns nothing usable.
std::string title_segment(const Segment& segment, CompletionProvider& completion, const PromptLibrary& prompts);
/// Titles every segment in place, in parallel.
void title_segments(std::vector<Segment>& segments, CompletionProvider& completion, const PromptLibrary& prompts);

struct OutlineEntry {
  std::string segment_id;
  std::string parent_hint;  // segment id or "root"
  NodeKind kind_hint = NodeKind::task;
  int order_index = 0;
  bool main_path = false;
};

struct StructureProposal {
  std::vector<OutlineEntry> outline;
  std::string raw_completion;
};

/// Parses "order | segment id | kind | parent | main or -" lines. Lines that do
/// not parse or name unknown segments are dropped with a warning. Throws
/// StructureError if nothing parses.
StructureProposal parse_structure(const std::string& raw, const std::vector<Segment>& segments);

StructureProposal propose_structure(const std::vector<Segment>& segments, CompletionProvider& completion,
                                    const PromptLibrary& prompts);

/// Builds a valid tree from any proposal. Repairs: duplicate claims (first
/// wins), unknown parents (to root), cycles (highest order_index member moves
/// to root), segments missing from the proposal (tasks under root).
TaskTree validate_repair(const StructureProposal& proposal, const std::vector<Segment>& segments,
                         const std::string& project = "project");

/// Ranks main-path nodes 1..m by the proposal's order_index. Nodes missing
/// from the tree are skipped.
TaskTree mark_main_path(TaskTree tree, const StructureProposal& proposal);

}  // namespace ontree
