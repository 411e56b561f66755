#include "ontree/condense.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <map>
#include <numeric>

#include "ontree/error.hpp"
#include "text_util.hpp"

namespace ontree {

void CondenseConfig::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("condense.tau must be in [0, 1]");
  if (boilerplate_min_files < 2) throw ValidationError("condense.boilerplate_min_files must be >= 2");
}

void to_json(nlohmann::json& j, const CondenseConfig& c) {
  j = nlohmann::json{{"tau", c.tau}, {"boilerplate_min_files", c.boilerplate_min_files}};
}

void from_json(const nlohmann::json& j, CondenseConfig& c) {
  c.tau = j.value("tau", c.tau);
  c.boilerplate_min_files = j.value("boilerplate_min_files", c.boilerplate_min_files);
  c.validate();
}

void to_json(nlohmann::json& j, const CondenseLog& log) {
  auto removed = nlohmann::json::array();
  for (const auto& r : log.removed) removed.push_back({{"document", r.document}, {"line", r.line}, {"span", r.span}});
  auto clusters = nlohmann::json::array();
  for (const auto& c : log.clusters)
    clusters.push_back({{"members", c.member_ids},
                        {"representative", c.representative_id},
                        {"pairwise_min_similarity", c.pairwise_min_similarity}});
  j = nlohmann::json{{"removed_lines", removed}, {"clusters", clusters}, {"dropped_segments", log.dropped_segments}};
}

std::string normalize_line(std::string_view text) { return detail::lower(detail::collapse_ws(detail::trim(text))); }

namespace {

bool eligible(const Block& b) { return b.kind != BlockKind::heading && !detail::trim(b.text).empty(); }

}  // namespace

std::set<std::string> boilerplate_lines(const Corpus& corpus, int min_files) {
  if (min_files < 2) throw ValidationError("boilerplate min_files must be >= 2");
  std::map<std::string, int> seen_in;
  for (const auto& doc : corpus.documents) {
    std::set<std::string> lines;
    for (const auto& b : doc.blocks)
      if (eligible(b)) lines.insert(normalize_line(b.text));
    for (const auto& l : lines) ++seen_in[l];
  }
  std::set<std::string> out;
  for (const auto& [line, count] : seen_in)
    if (count >= min_files) out.insert(line);
  return out;
}

Corpus filter_boilerplate(const Corpus& corpus, int min_files, std::vector<BoilerplateRemoval>* removed) {
  auto lines = boilerplate_lines(corpus, min_files);
  Corpus out = corpus;
  for (std::size_t d = 1; d < out.documents.size(); ++d) {
    auto& doc = out.documents[d];
    std::vector<Block> kept;
    for (auto& b : doc.blocks) {
      if (eligible(b) && lines.count(normalize_line(b.text))) {
        if (removed) removed->push_back({doc.name, normalize_line(b.text), b.span});
        continue;
      }
      kept.push_back(std::move(b));
    }
    doc.blocks = std::move(kept);
  }
  return out;
}

std::vector<Segment> prune_boilerplate(const std::vector<Segment>& segments, const Corpus& corpus, int min_files,
                                       CondenseLog* log) {
  auto lines = boilerplate_lines(corpus, min_files);
  if (lines.empty() || corpus.documents.empty()) return segments;
  const std::string& entry = corpus.documents.front().name;

  std::vector<Segment> out;
  for (const auto& seg : segments) {
    if (seg.document == entry) {
      out.push_back(seg);
      continue;
    }
    const Document* doc = corpus.find(seg.document);
    if (!doc) throw ValidationError(fmt::format("segment {} refers to unknown document {}", seg.id, seg.document));
    Segment s = seg;
    s.units.clear();
    int last_logged = -1;
    for (const auto& u : seg.units) {
      if (u.block_ref < 0 || u.block_ref >= static_cast<int>(doc->blocks.size()))
        throw ValidationError(fmt::format("segment {} refers to a missing block", seg.id));
      const Block& b = doc->blocks[static_cast<std::size_t>(u.block_ref)];
      if (eligible(b) && lines.count(normalize_line(b.text))) {
        if (log && last_logged != u.block_ref) log->removed.push_back({doc->name, normalize_line(b.text), b.span});
        last_logged = u.block_ref;
        continue;
      }
      s.units.push_back(u);
    }
    if (s.units.size() == seg.units.size()) {
      out.push_back(seg);
    } else if (s.units.empty()) {
      if (log) log->dropped_segments.push_back(seg.id);
    } else {
      s.rebuild_text();
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

bool earlier(const Segment& a, const Segment& b) {
  return std::tie(a.doc_index, a.start) < std::tie(b.doc_index, b.start);
}

}  // namespace

std::vector<DuplicateCluster> find_duplicates(const std::vector<Segment>& segments, double tau,
                                              EmbeddingProvider& embedder) {
  if (segments.size() < 2) return {};
  std::vector<std::string> texts;
  for (const auto& s : segments) texts.push_back(s.text);
  auto vectors = embedder.embed(texts);
  const std::size_t n = segments.size();
  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
  std::vector<bool> zero(n);
  for (std::size_t i = 0; i < n; ++i) zero[i] = vectors[i].norm() == 0.0;

  DisjointSets sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double c = std::min(1.0, cosine(vectors[i], vectors[j]));
      if (segments[i].text == segments[j].text) c = 1.0;  // guard against rounding below 1
      sim[i][j] = sim[j][i] = c;
      if (!zero[i] && !zero[j] && c >= tau) sets.unite(i, j);
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[sets.find(i)].push_back(i);

  std::vector<DuplicateCluster> out;
  for (const auto& [root, members] : groups) {
    if (members.size() < 2) continue;
    DuplicateCluster c;
    double min_sim = 1.0;
    std::size_t rep = members.front();
    for (std::size_t a = 0; a < members.size(); ++a) {
      c.member_ids.push_back(segments[members[a]].id);
      if (earlier(segments[members[a]], segments[rep])) rep = members[a];
      for (std::size_t b = a + 1; b < members.size(); ++b) min_sim = std::min(min_sim, sim[members[a]][members[b]]);
    }
    std::sort(c.member_ids.begin(), c.member_ids.end());
    c.representative_id = segments[rep].id;
    c.pairwise_min_similarity = min_sim;
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(),
            [](const DuplicateCluster& a, const DuplicateCluster& b) { return a.member_ids.front() < b.member_ids.front(); });
  return out;
}

std::vector<Segment> consolidate(const std::vector<Segment>& segments, const std::vector<DuplicateCluster>& clusters) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < segments.size(); ++i) index[segments[i].id] = i;

  std::vector<Segment> out = segments;
  std::vector<bool> dropped(segments.size(), false);
  for (const auto& c : clusters) {
    auto rep_it = index.find(c.representative_id);
    if (rep_it == index.end()) throw ValidationError("duplicate cluster references unknown segment " + c.representative_id);
    auto& rep = out[rep_it->second];
    for (const auto& id : c.member_ids) {
      auto it = index.find(id);
      if (it == index.end()) throw ValidationError("duplicate cluster references unknown segment " + id);
      if (id == c.representative_id) continue;
      for (const auto& span : segments[it->second].source_spans)
        if (std::find(rep.source_spans.begin(), rep.source_spans.end(), span) == rep.source_spans.end())
          rep.source_spans.push_back(span);
      dropped[it->second] = true;
    }
    rep.origin = SegmentOrigin::consolidated;
  }
  std::vector<Segment> kept;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!dropped[i]) kept.push_back(std::move(out[i]));
  return kept;
}

std::vector<Segment> condense(const std::vector<Segment>& segments, const Corpus& corpus,
                              const CondenseConfig& config, EmbeddingProvider& embedder, CondenseLog* log) {
  config.validate();
  auto pruned = prune_boilerplate(segments, corpus, config.boilerplate_min_files, log);
  auto clusters = find_duplicates(pruned, config.tau, embedder);
  for (const auto& c : clusters)
    spdlog::info("consolidating {} near-duplicate segments into {}", c.member_ids.size(), c.representative_id);
  auto out = consolidate(pruned, clusters);
  if (log) log->clusters.insert(log->clusters.end(), clusters.begin(), clusters.end());
  return out;
}

}  // namespace ontree
