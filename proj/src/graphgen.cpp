#include "ontree/graphgen.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <deque>
#include <set>

#include "ontree/error.hpp"
#include "parallel.hpp"
#include "text_util.hpp"

namespace ontree {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::root: return "root";
    case NodeKind::category: return "category";
    case NodeKind::task: return "task";
    case NodeKind::step: return "step";
  }
  return "task";
}

NodeKind node_kind_from_string(std::string_view s) {
  auto l = detail::lower(detail::trim(s));
  if (l == "root") return NodeKind::root;
  if (l == "category") return NodeKind::category;
  if (l == "task") return NodeKind::task;
  if (l == "step") return NodeKind::step;
  throw ValidationError("unknown node kind: " + std::string(s));
}

// ---------------------------------------------------------------------------
// TaskTree

const TaskNode& TaskTree::at(const std::string& id) const {
  auto it = nodes.find(id);
  if (it == nodes.end()) throw NotFoundError("no node " + id);
  return it->second;
}

TaskNode& TaskTree::at(const std::string& id) {
  auto it = nodes.find(id);
  if (it == nodes.end()) throw NotFoundError("no node " + id);
  return it->second;
}

std::map<std::string, std::string> TaskTree::parents() const {
  std::map<std::string, std::string> out;
  for (const auto& [id, node] : nodes)
    for (const auto& c : node.children) out.emplace(c, id);
  return out;
}

std::vector<std::string> TaskTree::ancestor_path(const std::string& id) const {
  at(id);
  auto up = parents();
  std::vector<std::string> path;
  std::string cur = id;
  while (cur != root) {
    auto it = up.find(cur);
    if (it == up.end() || path.size() > nodes.size()) break;
    cur = it->second;
    path.push_back(cur);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<std::string> tree_violations(const TaskTree& tree) {
  std::vector<std::string> out;
  auto root_it = tree.nodes.find(tree.root);
  if (root_it == tree.nodes.end()) {
    out.push_back("root node missing");
    return out;
  }
  if (root_it->second.kind != NodeKind::root) out.push_back("root node has the wrong kind");

  std::map<std::string, int> parent_count;
  std::vector<int> ranks;
  for (const auto& [id, node] : tree.nodes) {
    if (node.id != id) out.push_back(fmt::format("node key {} holds id {}", id, node.id));
    if (id != tree.root && node.kind == NodeKind::root) out.push_back("second root: " + id);
    if ((node.kind == NodeKind::task || node.kind == NodeKind::step) && node.segment_refs.empty())
      out.push_back("node without segments: " + id);
    std::set<std::string> seen;
    for (const auto& c : node.children) {
      if (!seen.insert(c).second) out.push_back(fmt::format("duplicate child {} under {}", c, id));
      if (!tree.nodes.count(c)) out.push_back(fmt::format("unknown child {} under {}", c, id));
      ++parent_count[c];
    }
    if (node.main_path_rank) ranks.push_back(*node.main_path_rank);
  }
  for (const auto& [id, node] : tree.nodes) {
    int n = parent_count.count(id) ? parent_count[id] : 0;
    if (id == tree.root && n != 0) out.push_back("root has a parent");
    if (id != tree.root && n != 1) out.push_back(fmt::format("node {} has {} parents", id, n));
  }

  std::set<std::string> reached{tree.root};
  std::deque<std::string> queue{tree.root};
  while (!queue.empty()) {
    auto id = queue.front();
    queue.pop_front();
    for (const auto& c : tree.nodes.at(id).children) {
      if (!tree.nodes.count(c)) continue;
      if (!reached.insert(c).second) {
        out.push_back("cycle or shared node at " + c);
        continue;
      }
      queue.push_back(c);
    }
  }
  if (reached.size() != tree.nodes.size())
    out.push_back(fmt::format("{} nodes unreachable from root", tree.nodes.size() - reached.size()));

  std::sort(ranks.begin(), ranks.end());
  for (std::size_t i = 0; i < ranks.size(); ++i)
    if (ranks[i] != static_cast<int>(i) + 1) {
      out.push_back("main path ranks are not 1..m");
      break;
    }
  return out;
}

std::vector<std::string> tree_violations(const TaskTree& tree, const std::vector<std::string>& segment_ids) {
  auto out = tree_violations(tree);
  std::map<std::string, int> refs;
  for (const auto& [id, node] : tree.nodes)
    for (const auto& s : node.segment_refs) ++refs[s];
  std::set<std::string> expected(segment_ids.begin(), segment_ids.end());
  for (const auto& s : expected) {
    int n = refs.count(s) ? refs[s] : 0;
    if (n != 1) out.push_back(fmt::format("segment {} referenced {} times", s, n));
  }
  for (const auto& [s, n] : refs)
    if (!expected.count(s)) out.push_back("unknown segment reference " + s);
  return out;
}

void to_json(nlohmann::json& j, const TaskTree& tree) {
  auto nodes = nlohmann::json::object();
  for (const auto& [id, n] : tree.nodes) {
    auto media = nlohmann::json::array();
    for (const auto& m : n.media) media.push_back({{"type", m.type}, {"path", m.path}, {"caption", m.caption}});
    nlohmann::json jn{{"kind", to_string(n.kind)},
                      {"title", n.title},
                      {"summary", n.summary},
                      {"body_markdown", n.body_markdown},
                      {"segment_refs", n.segment_refs},
                      {"children", n.children},
                      {"media", media},
                      {"spans", n.spans}};
    if (n.main_path_rank) jn["main_path_rank"] = *n.main_path_rank;
    nodes[id] = std::move(jn);
  }
  j = nlohmann::json{{"version", tree.version},
                     {"project", tree.project},
                     {"generated_at", tree.generated_at},
                     {"root", tree.root},
                     {"nodes", nodes}};
}

void from_json(const nlohmann::json& j, TaskTree& tree) {
  tree = TaskTree{};
  tree.version = j.at("version").get<std::string>();
  if (tree.version != tree_schema_version) throw ValidationError("unsupported tree version " + tree.version);
  tree.project = j.value("project", "");
  tree.generated_at = j.value("generated_at", "");
  tree.root = j.at("root").get<std::string>();
  for (const auto& [id, jn] : j.at("nodes").items()) {
    TaskNode n;
    n.id = id;
    n.kind = node_kind_from_string(jn.at("kind").get<std::string>());
    n.title = jn.value("title", "");
    n.summary = jn.value("summary", "");
    n.body_markdown = jn.value("body_markdown", "");
    n.segment_refs = jn.value("segment_refs", std::vector<std::string>{});
    n.children = jn.value("children", std::vector<std::string>{});
    if (jn.contains("main_path_rank") && !jn.at("main_path_rank").is_null())
      n.main_path_rank = jn.at("main_path_rank").get<int>();
    for (const auto& jm : jn.value("media", nlohmann::json::array()))
      n.media.push_back({jm.at("type").get<std::string>(), jm.at("path").get<std::string>(), jm.value("caption", "")});
    n.spans = jn.value("spans", std::vector<SourceSpan>{});
    tree.nodes.emplace(id, std::move(n));
  }
}

std::string canonical_json(const TaskTree& tree) { return nlohmann::json(tree).dump(2) + "\n"; }

std::string node_id_for(const std::string& segment_id) { return "node-" + segment_id; }

// ---------------------------------------------------------------------------
// Titles

std::string clamp_title(std::string_view raw) {
  auto text = detail::trim(raw.substr(0, raw.find('\n')));
  auto words = detail::split_words(text);
  if (words.size() > 10) {
    spdlog::info("title clamped from {} to 10 words", words.size());
    words.resize(10);
  }
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  auto strip_edges = [&] {
    bool changed = true;
    while (changed && !out.empty()) {
      changed = false;
      if (std::string_view(".!?:;,").find(out.back()) != std::string_view::npos) {
        out.pop_back();
        changed = true;
      }
      if (out.size() >= 2 && (out.front() == '"' || out.front() == '\'') && out.back() == out.front()) {
        out = out.substr(1, out.size() - 2);
        changed = true;
      }
    }
  };
  strip_edges();
  return std::string(detail::trim(out));
}

std::string offline_title(const Segment& segment) {
  for (const auto& u : segment.units)
    if (u.kind == BlockKind::heading) return clamp_title(u.text);
  auto words = detail::split_words(segment.text);
  if (words.size() > 6) words.resize(6);
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return clamp_title(out);
}

std::string segment_prompt_body(const Segment& segment) {
  std::string out;
  for (const auto& u : segment.units) {
    if (!out.empty()) out += '\n';
    if (u.kind == BlockKind::heading)
      out += std::string(static_cast<std::size_t>(std::clamp(u.heading_level, 1, 6)), '#') + " ";
    // Multi-line units (code, tables) are flattened so each unit stays one line.
    auto t = u.text;
    std::replace(t.begin(), t.end(), '\n', ' ');
    out += t;
  }
  return out;
}

std::string title_segment(const Segment& segment, CompletionProvider& completion, const PromptLibrary& prompts) {
  if (segment.units.empty() && detail::trim(segment.text).empty())
    throw ValidationError("cannot title empty segment " + segment.id);
  CompletionRequest req;
  req.task = CompletionTask::title;
  req.prompt = prompt::render(prompts.template_for(CompletionTask::title),
                              {{"segment", prompt::section("SEGMENT", segment_prompt_body(segment))}});
  std::string title;
  try {
    title = clamp_title(completion.complete(req));
  } catch (const ProviderError& e) {
    spdlog::warn("{}: title completion failed ({}); using heading rule", segment.id, e.what());
  }
  if (title.empty()) {
    spdlog::info("{}: empty title from provider; using heading rule", segment.id);
    title = offline_title(segment);
  }
  return title;
}

void title_segments(std::vector<Segment>& segments, CompletionProvider& completion, const PromptLibrary& prompts) {
  detail::parallel_for(segments.size(),
                       [&](std::size_t i) { segments[i].title = title_segment(segments[i], completion, prompts); });
}

// ---------------------------------------------------------------------------
// Structure

namespace {

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto bar = line.find('|', start);
    out.emplace_back(detail::trim(line.substr(start, bar == std::string_view::npos ? bar : bar - start)));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return out;
}

std::optional<OutlineEntry> parse_line(std::string_view line) {
  auto fields = split_fields(line);
  if (fields.size() != 4 && fields.size() != 5) return std::nullopt;
  OutlineEntry e;
  std::string order = fields[0];
  while (!order.empty() && (order.back() == '.' || order.back() == ')')) order.pop_back();
  if (order.empty() || !std::all_of(order.begin(), order.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
      order.size() > 9)
    return std::nullopt;
  e.order_index = std::stoi(order);
  e.segment_id = fields[1];
  try {
    e.kind_hint = node_kind_from_string(fields[2]);
  } catch (const ValidationError&) {
    return std::nullopt;
  }
  if (e.kind_hint == NodeKind::root) return std::nullopt;
  e.parent_hint = detail::lower(fields[3]) == "root" ? std::string(root_id) : fields[3];
  if (fields.size() == 5) {
    auto flag = detail::lower(fields[4]);
    if (flag == "main") e.main_path = true;
    else if (flag != "-" && !flag.empty()) return std::nullopt;
  }
  if (e.segment_id.empty() || e.parent_hint.empty()) return std::nullopt;
  return e;
}

}  // namespace

StructureProposal parse_structure(const std::string& raw, const std::vector<Segment>& segments) {
  std::set<std::string> known;
  for (const auto& s : segments) known.insert(s.id);
  StructureProposal p;
  p.raw_completion = raw;
  std::size_t start = 0;
  while (start <= raw.size()) {
    auto nl = raw.find('\n', start);
    auto line = detail::trim(std::string_view(raw).substr(start, nl == std::string::npos ? std::string::npos : nl - start));
    start = nl == std::string::npos ? raw.size() + 1 : nl + 1;
    if (line.empty()) continue;
    auto e = parse_line(line);
    if (!e) {
      spdlog::warn("dropping unparseable outline line: {}", std::string(line).substr(0, 80));
      continue;
    }
    if (!known.count(e->segment_id)) {
      spdlog::warn("dropping outline line for unknown segment {}", e->segment_id);
      continue;
    }
    p.outline.push_back(std::move(*e));
  }
  if (p.outline.empty()) throw StructureError("structure completion yielded no usable outline entries");
  // order_index must be unique: renumber 1..n keeping the provider's order.
  std::vector<std::size_t> idx(p.outline.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return p.outline[a].order_index < p.outline[b].order_index; });
  for (std::size_t r = 0; r < idx.size(); ++r) p.outline[idx[r]].order_index = static_cast<int>(r) + 1;
  return p;
}

StructureProposal propose_structure(const std::vector<Segment>& segments, CompletionProvider& completion,
                                    const PromptLibrary& prompts) {
  if (segments.empty()) throw StructureError("no segments to structure");
  std::string listing;
  for (const auto& s : segments) {
    auto title = s.title.empty() ? offline_title(s) : s.title;
    listing += fmt::format("{}{}\t{}\t{}", listing.empty() ? "" : "\n", s.id, s.heading_level(), title);
  }
  CompletionRequest req;
  req.task = CompletionTask::structure;
  req.prompt = prompt::render(prompts.template_for(CompletionTask::structure),
                              {{"segments", prompt::section("SEGMENTS", listing)}});
  req.few_shot_examples = prompts.structure_examples();
  std::string raw;
  try {
    raw = completion.complete(req);
  } catch (const EmptyCompletionError&) {
    throw StructureError("structure completion was empty");
  }
  return parse_structure(raw, segments);
}

// ---------------------------------------------------------------------------
// Repair

namespace {

std::string summary_of(const Segment& s) {
  std::string out;
  int taken = 0;
  for (const auto& u : s.units) {
    if (u.kind == BlockKind::heading || u.kind == BlockKind::code || u.kind == BlockKind::table) continue;
    out += (out.empty() ? "" : " ") + u.text;
    if (++taken == 2) break;
  }
  return out;
}

TaskNode node_for(const Segment& s, NodeKind kind) {
  TaskNode n;
  n.id = node_id_for(s.id);
  n.kind = kind;
  n.title = s.title.empty() ? offline_title(s) : clamp_title(s.title);
  n.summary = summary_of(s);
  n.body_markdown = s.body_markdown();
  n.segment_refs = {s.id};
  n.spans = s.source_spans;
  return n;
}

}  // namespace

TaskTree validate_repair(const StructureProposal& proposal, const std::vector<Segment>& segments,
                         const std::string& project) {
  std::map<std::string, std::size_t> position;  // document order
  for (std::size_t i = 0; i < segments.size(); ++i) position.emplace(segments[i].id, i);

  struct Claim {
    NodeKind kind;
    std::string parent;  // segment id or root
    int order;
  };
  std::map<std::string, Claim> claims;
  int max_order = 0;
  for (const auto& e : proposal.outline) {
    if (!position.count(e.segment_id)) {
      spdlog::warn("outline names unknown segment {}; ignored", e.segment_id);
      continue;
    }
    if (claims.count(e.segment_id)) {
      spdlog::warn("segment {} claimed twice; keeping the first claim", e.segment_id);
      continue;
    }
    std::string parent = e.parent_hint;
    if (parent != root_id && !position.count(parent)) {
      spdlog::warn("segment {} has unknown parent {}; attached to root", e.segment_id, parent);
      parent = root_id;
    }
    NodeKind kind = e.kind_hint == NodeKind::root ? NodeKind::task : e.kind_hint;
    claims.emplace(e.segment_id, Claim{kind, parent, e.order_index});
    max_order = std::max(max_order, e.order_index);
  }

  // Break cycles: walk up from each claim; on revisiting a node of the current
  // walk, move the cycle member with the highest order_index under root.
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& [start_id, start_claim] : claims) {
      std::vector<std::string> walk;
      std::set<std::string> on_walk;
      std::string cur = start_id;
      while (cur != root_id && claims.count(cur) && !on_walk.count(cur)) {
        walk.push_back(cur);
        on_walk.insert(cur);
        cur = claims.at(cur).parent;
      }
      if (cur == root_id || !claims.count(cur)) continue;
      auto first = std::find(walk.begin(), walk.end(), cur);
      std::string breaker = *first;
      for (auto it = first; it != walk.end(); ++it) {
        const auto& c = claims.at(*it);
        const auto& b = claims.at(breaker);
        if (std::tie(c.order, position[*it]) > std::tie(b.order, position[breaker])) breaker = *it;
      }
      spdlog::warn("cycle through {} broken; {} attached to root", cur, breaker);
      claims.at(breaker).parent = root_id;
      changed = true;
      break;
    }
  }

  for (const auto& s : segments) {
    if (claims.count(s.id)) continue;
    spdlog::info("segment {} missing from outline; added as a task under root", s.id);
    claims.emplace(s.id, Claim{NodeKind::task, root_id, ++max_order});
  }

  TaskTree tree;
  tree.project = project;
  TaskNode root;
  root.id = root_id;
  root.kind = NodeKind::root;
  root.title = project;
  tree.nodes.emplace(root.id, root);
  for (const auto& s : segments) tree.nodes.emplace(node_id_for(s.id), node_for(s, claims.at(s.id).kind));

  std::map<std::string, std::vector<std::string>> kids;  // parent node id -> child segment ids
  for (const auto& [id, c] : claims) kids[c.parent == root_id ? root_id : node_id_for(c.parent)].push_back(id);
  for (auto& [parent, children] : kids) {
    std::sort(children.begin(), children.end(), [&](const std::string& a, const std::string& b) {
      return std::tie(claims.at(a).order, position[a]) < std::tie(claims.at(b).order, position[b]);
    });
    auto& node = tree.nodes.at(parent);
    for (const auto& c : children) node.children.push_back(node_id_for(c));
  }
  return tree;
}

TaskTree mark_main_path(TaskTree tree, const StructureProposal& proposal) {
  for (auto& [id, n] : tree.nodes) n.main_path_rank.reset();
  std::set<std::string> seen;
  std::vector<std::pair<int, std::string>> flagged;
  for (const auto& e : proposal.outline) {
    if (!seen.insert(e.segment_id).second) continue;
    if (!e.main_path) continue;
    auto id = node_id_for(e.segment_id);
    if (!tree.nodes.count(id)) continue;
    flagged.emplace_back(e.order_index, id);
  }
  std::stable_sort(flagged.begin(), flagged.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  int rank = 0;
  for (const auto& [order, id] : flagged) tree.nodes.at(id).main_path_rank = ++rank;
  return tree;
}

}  // namespace ontree
