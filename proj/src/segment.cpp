#include "ontree/segment.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <future>
#include <regex>

#include "ontree/error.hpp"
#include "text_util.hpp"

namespace ontree {

// ---------------------------------------------------------------------------
// BoundarySet

BoundarySet BoundarySet::make(int n_sentences, std::vector<int> boundaries) {
  if (n_sentences < 0) throw ValidationError("negative sentence count");
  for (std::size_t i = 0; i < boundaries.size(); ++i) {
    int b = boundaries[i];
    if (b < 1 || b > n_sentences - 1)
      throw ValidationError(fmt::format("boundary {} outside 1..{}", b, n_sentences - 1));
    if (i > 0 && b <= boundaries[i - 1]) throw ValidationError("boundaries must be strictly increasing");
  }
  return BoundarySet{n_sentences, std::move(boundaries)};
}

std::vector<int> BoundarySet::segment_lengths() const {
  std::vector<int> out;
  int prev = 0;
  for (int b : boundaries) {
    out.push_back(b - prev);
    prev = b;
  }
  out.push_back(n_sentences - prev);
  return out;
}

std::vector<int> BoundarySet::segment_ids() const {
  std::vector<int> ids(static_cast<std::size_t>(n_sentences));
  int seg = 0;
  std::size_t next = 0;
  for (int i = 0; i < n_sentences; ++i) {
    while (next < boundaries.size() && boundaries[next] <= i) {
      ++seg;
      ++next;
    }
    ids[static_cast<std::size_t>(i)] = seg;
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Config and segment helpers

void SegmenterConfig::validate() const {
  if (buffer < 0) throw ValidationError("buffer must be >= 0");
  if (!(percentile >= 0.0 && percentile <= 100.0)) throw ValidationError("percentile must be in [0, 100]");
  if (min_sentences < 1) throw ValidationError("min_sentences must be >= 1");
}

void to_json(nlohmann::json& j, const SegmenterConfig& c) {
  j = nlohmann::json{{"buffer", c.buffer},
                     {"percentile", c.percentile},
                     {"min_sentences", c.min_sentences},
                     {"refine", c.refine},
                     {"heading_bias", c.heading_bias}};
}

void from_json(const nlohmann::json& j, SegmenterConfig& c) {
  c.buffer = j.value("buffer", c.buffer);
  c.percentile = j.value("percentile", c.percentile);
  c.min_sentences = j.value("min_sentences", c.min_sentences);
  c.refine = j.value("refine", c.refine);
  c.heading_bias = j.value("heading_bias", c.heading_bias);
  c.validate();
}

std::string_view to_string(SegmentOrigin origin) {
  switch (origin) {
    case SegmentOrigin::chunker: return "chunker";
    case SegmentOrigin::refined: return "refined";
    case SegmentOrigin::consolidated: return "consolidated";
  }
  return "chunker";
}

namespace {

SegmentOrigin origin_from_string(std::string_view s) {
  if (s == "chunker") return SegmentOrigin::chunker;
  if (s == "refined") return SegmentOrigin::refined;
  if (s == "consolidated") return SegmentOrigin::consolidated;
  throw ValidationError("unknown segment origin: " + std::string(s));
}

}  // namespace

std::string segment_id(int doc_index, int start) { return fmt::format("seg-{:03}-{:04}", doc_index, start); }

int Segment::heading_level() const {
  for (const auto& u : units)
    if (u.kind == BlockKind::heading) return u.heading_level;
  return 0;
}

void Segment::rebuild_text() {
  text.clear();
  source_spans.clear();
  for (const auto& u : units) {
    if (!text.empty()) text += '\n';
    text += u.text;
    if (source_spans.empty() || !(source_spans.back() == u.span)) {
      bool seen = std::find(source_spans.begin(), source_spans.end(), u.span) != source_spans.end();
      if (!seen) source_spans.push_back(u.span);
    }
  }
}

std::string Segment::body_markdown() const {
  std::string out;
  int current_block = -1;
  auto separate = [&] {
    if (!out.empty()) out += "\n\n";
  };
  for (const auto& u : units) {
    bool same_block = u.block_ref == current_block && u.kind == BlockKind::paragraph;
    current_block = u.block_ref;
    if (same_block) {
      out += " " + u.text;
      continue;
    }
    separate();
    switch (u.kind) {
      case BlockKind::heading:
        out += std::string(static_cast<std::size_t>(std::clamp(u.heading_level, 1, 6)), '#') + " " + u.text;
        break;
      case BlockKind::list_item:
        out += "- " + u.text;
        break;
      case BlockKind::code:
        out += "```\n" + u.text + "\n```";
        break;
      default:
        out += u.text;
    }
  }
  return out;
}

Segment make_segment(int doc_index, const std::vector<SentenceUnit>& units, int start, int end,
                     SegmentOrigin origin) {
  if (start < 0 || end > static_cast<int>(units.size()) || start >= end)
    throw ValidationError(fmt::format("bad segment range [{}, {})", start, end));
  Segment s;
  s.id = segment_id(doc_index, start);
  s.document = units[static_cast<std::size_t>(start)].document_ref;
  s.doc_index = doc_index;
  s.start = start;
  s.end = end;
  s.origin = origin;
  s.units.assign(units.begin() + start, units.begin() + end);
  s.rebuild_text();
  return s;
}

// ---------------------------------------------------------------------------
// Chunker

std::vector<std::string> buffered_texts(const std::vector<std::string>& sentences, int buffer) {
  if (sentences.empty()) throw ValidationError("buffered_texts needs at least one sentence");
  if (buffer < 0) throw ValidationError("buffer must be >= 0");
  const int n = static_cast<int>(sentences.size());
  std::vector<std::string> out;
  out.reserve(sentences.size());
  for (int i = 0; i < n; ++i) {
    int lo = std::max(0, i - buffer);
    int hi = std::min(n - 1, i + buffer);
    std::string joined;
    for (int k = lo; k <= hi; ++k) {
      if (k > lo) joined += ' ';
      joined += sentences[static_cast<std::size_t>(k)];
    }
    out.push_back(std::move(joined));
  }
  return out;
}

double nearest_rank_percentile(std::vector<double> values, double percentile) {
  if (values.empty()) throw ValidationError("percentile of an empty series");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<long>(std::ceil(percentile / 100.0 * n));
  rank = std::clamp(rank, 1L, static_cast<long>(values.size()));
  return values[static_cast<std::size_t>(rank - 1)];
}

namespace {

// Keeps candidates left to right while every segment stays >= min_len.
std::vector<int> thin(const std::vector<int>& candidates, int min_len, int n) {
  std::vector<int> kept;
  int prev = 0;
  for (int b : candidates) {
    if (b - prev >= min_len && n - b >= min_len) {
      kept.push_back(b);
      prev = b;
    }
  }
  return kept;
}

bool fits(const std::vector<int>& chosen, int b, int min_len, int n) {
  auto it = std::lower_bound(chosen.begin(), chosen.end(), b);
  if (it != chosen.end() && *it == b) return false;
  int prev = it == chosen.begin() ? 0 : *(it - 1);
  int next = it == chosen.end() ? n : *it;
  return b - prev >= min_len && next - b >= min_len;
}

}  // namespace

BoundarySet breakpoints(const std::vector<double>& distances, double percentile, int min_sentences, int n,
                        const std::set<int>& preferred) {
  if (n <= 0) throw ValidationError("breakpoints needs at least one sentence");
  if (min_sentences < 1) throw ValidationError("min_sentences must be >= 1");
  if (static_cast<int>(distances.size()) != n - 1)
    throw ValidationError(fmt::format("expected {} distances, got {}", n - 1, distances.size()));
  if (n == 1) return BoundarySet{1, {}};

  const double threshold = nearest_rank_percentile(distances, percentile);
  std::vector<int> candidates;
  for (int i = 0; i < n - 1; ++i)
    if (distances[static_cast<std::size_t>(i)] > threshold) candidates.push_back(i + 1);
  // A cut just past a heading (or a run of them) moves back so the heading opens the segment.
  for (int& b : candidates)
    if (!preferred.count(b))
      while (b > 1 && preferred.count(b - 1)) --b;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::vector<int> first;
  std::vector<int> rest;
  for (int b : candidates) (preferred.count(b) ? first : rest).push_back(b);
  std::vector<int> chosen = thin(first, min_sentences, n);
  if (chosen.empty()) {
    chosen = thin(rest, min_sentences, n);
  } else {
    for (int b : rest) {
      if (fits(chosen, b, min_sentences, n)) chosen.insert(std::lower_bound(chosen.begin(), chosen.end(), b), b);
    }
  }
  return BoundarySet::make(n, std::move(chosen));
}

std::vector<Segment> segment_document(const std::vector<SentenceUnit>& sentences, const SegmenterConfig& config,
                                      EmbeddingProvider& embedder, int doc_index) {
  config.validate();
  if (sentences.empty()) return {};
  const int n = static_cast<int>(sentences.size());
  BoundarySet cuts{n, {}};
  if (n > 1) {
    std::vector<std::string> texts;
    texts.reserve(sentences.size());
    for (const auto& s : sentences) texts.push_back(s.text);
    auto vectors = embedder.embed(buffered_texts(texts, config.buffer));
    if (static_cast<int>(vectors.size()) != n) throw ValidationError("embedding count mismatch");
    std::vector<double> distances;
    distances.reserve(static_cast<std::size_t>(n - 1));
    for (int i = 0; i + 1 < n; ++i)
      distances.push_back(1.0 - cosine(vectors[static_cast<std::size_t>(i)], vectors[static_cast<std::size_t>(i + 1)]));
    std::set<int> headings;
    if (config.heading_bias)
      for (int i = 1; i < n; ++i)
        if (sentences[static_cast<std::size_t>(i)].kind == BlockKind::heading) headings.insert(i);
    cuts = breakpoints(distances, config.percentile, config.min_sentences, n, headings);
  }
  std::vector<Segment> out;
  int prev = 0;
  for (int b : cuts.boundaries) {
    out.push_back(make_segment(doc_index, sentences, prev, b));
    prev = b;
  }
  out.push_back(make_segment(doc_index, sentences, prev, n));
  return out;
}

// ---------------------------------------------------------------------------
// Refinement

std::optional<RefineAnswer> parse_refine_answer(std::string_view text) {
  auto line = detail::trim(text.substr(0, text.find('\n')));
  std::string upper(line);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  while (!upper.empty() && (upper.back() == '.' || upper.back() == '!')) upper.pop_back();
  if (upper == "KEEP") return RefineAnswer{RefineAction::keep, 0};
  if (upper == "MERGE") return RefineAnswer{RefineAction::merge, 0};
  static const std::regex move_re(R"(^MOVE\s*([+-]?)\s*(\d+)$)");
  std::smatch m;
  if (std::regex_match(upper, m, move_re)) {
    if (m[2].length() > 2) return std::nullopt;
    int d = std::stoi(m[2].str());
    if (m[1] == "-") d = -d;
    if (d < -2 || d > 2) return std::nullopt;
    if (d == 0) return RefineAnswer{RefineAction::keep, 0};
    return RefineAnswer{RefineAction::move, d};
  }
  return std::nullopt;
}

namespace {

std::string unit_lines(const std::vector<SentenceUnit>& units, int from, int to) {
  std::string out;
  for (int i = std::max(from, 0); i < std::min(to, static_cast<int>(units.size())); ++i)
    out += (out.empty() ? "" : "\n") + units[static_cast<std::size_t>(i)].text;
  return out;
}

std::vector<Segment> refine_document(const std::vector<Segment>& segments, const RetrievalStore& store,
                                     CompletionProvider& completion, const PromptLibrary& prompts,
                                     int min_sentences) {
  if (segments.size() < 2) return segments;
  // Reassemble the document's units; segments must tile [0, N).
  std::vector<SentenceUnit> units;
  std::vector<int> bounds;
  for (const auto& s : segments) {
    if (s.start != static_cast<int>(units.size())) throw ValidationError("refine needs a contiguous partition");
    if (!units.empty()) bounds.push_back(s.start);
    units.insert(units.end(), s.units.begin(), s.units.end());
  }
  const int n = static_cast<int>(units.size());
  const int doc_index = segments.front().doc_index;
  const std::string& document = segments.front().document;

  std::size_t idx = 0;
  while (idx < bounds.size()) {
    int b = bounds[idx];
    int prev = idx == 0 ? 0 : bounds[idx - 1];
    int next = idx + 1 < bounds.size() ? bounds[idx + 1] : n;

    CompletionRequest req;
    req.task = CompletionTask::refine_boundary;
    std::string before = unit_lines(units, std::max(prev, b - 2), b);
    std::string after = unit_lines(units, b, std::min(next, b + 2));
    req.prompt = prompt::render(prompts.template_for(CompletionTask::refine_boundary),
                                {{"document", document},
                                 {"boundary", std::to_string(b)},
                                 {"before", prompt::section("BEFORE", before)},
                                 {"after", prompt::section("AFTER", after)}});
    req.context_passages = store.retrieve(before + "\n" + after, 3);

    auto raw = completion.complete(req);
    auto answer = parse_refine_answer(raw);
    if (!answer) {
      spdlog::warn("{}: malformed refinement answer at boundary {}: '{}'; keeping", document, b,
                   std::string(detail::trim(raw)).substr(0, 60));
      ++idx;
      continue;
    }
    if (answer->action == RefineAction::merge) {
      bounds.erase(bounds.begin() + static_cast<long>(idx));
      continue;
    }
    if (answer->action == RefineAction::move) {
      int moved = b + answer->shift;
      if (moved - prev >= min_sentences && next - moved >= min_sentences && moved > 0 && moved < n)
        bounds[idx] = moved;
      else
        spdlog::info("{}: discarding MOVE {:+} at boundary {} (would violate the partition)", document,
                     answer->shift, b);
    }
    ++idx;
  }

  std::vector<Segment> out;
  int prev = 0;
  bounds.push_back(n);
  for (int b : bounds) {
    auto original = std::find_if(segments.begin(), segments.end(),
                                 [&](const Segment& s) { return s.start == prev && s.end == b; });
    if (original != segments.end()) {
      out.push_back(*original);
    } else {
      Segment s = make_segment(doc_index, units, prev, b, SegmentOrigin::refined);
      s.document = document;
      out.push_back(std::move(s));
    }
    prev = b;
  }
  return out;
}

}  // namespace

std::vector<Segment> refine_boundaries(const std::vector<Segment>& segments, const RetrievalStore& store,
                                       CompletionProvider& completion, const PromptLibrary& prompts,
                                       int min_sentences) {
  std::vector<Segment> out;
  std::size_t i = 0;
  while (i < segments.size()) {
    std::size_t j = i;
    while (j < segments.size() && segments[j].doc_index == segments[i].doc_index) ++j;
    std::vector<Segment> doc(segments.begin() + static_cast<long>(i), segments.begin() + static_cast<long>(j));
    auto refined = refine_document(doc, store, completion, prompts, min_sentences);
    out.insert(out.end(), refined.begin(), refined.end());
    i = j;
  }
  return out;
}

BoundarySet boundaries_of(const std::vector<Segment>& document_segments, int n_sentences) {
  std::vector<int> b;
  for (std::size_t i = 1; i < document_segments.size(); ++i) b.push_back(document_segments[i].start);
  return BoundarySet::make(n_sentences, std::move(b));
}

std::vector<Segment> SegmentsFile::all() const {
  std::vector<Segment> out;
  for (const auto& d : documents) out.insert(out.end(), d.segments.begin(), d.segments.end());
  return out;
}

SegmentsFile segment_corpus(const Corpus& corpus, const SegmenterConfig& config, EmbeddingProvider& embedder) {
  config.validate();
  std::vector<std::future<std::vector<Segment>>> jobs;
  std::vector<int> counts;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    auto units = split_sentences(corpus.documents[d]);
    counts.push_back(static_cast<int>(units.size()));
    jobs.push_back(std::async(std::launch::async, [units = std::move(units), &config, &embedder, d] {
      return segment_document(units, config, embedder, static_cast<int>(d));
    }));
  }
  SegmentsFile out;
  out.config = config;
  for (std::size_t d = 0; d < jobs.size(); ++d)
    out.documents.push_back(DocumentSegments{corpus.documents[d].name, counts[d], jobs[d].get()});
  return out;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const Segment& s) {
  auto units = nlohmann::json::array();
  for (const auto& u : s.units)
    units.push_back({{"index", u.index},
                     {"kind", to_string(u.kind)},
                     {"level", u.heading_level},
                     {"block", u.block_ref},
                     {"text", u.text},
                     {"span", u.span}});
  j = nlohmann::json{{"id", s.id},
                     {"document", s.document},
                     {"doc_index", s.doc_index},
                     {"start", s.start},
                     {"end", s.end},
                     {"origin", to_string(s.origin)},
                     {"text", s.text},
                     {"spans", s.source_spans},
                     {"units", units}};
  if (!s.title.empty()) j["title"] = s.title;
}

void from_json(const nlohmann::json& j, Segment& s) {
  s = Segment{};
  s.id = j.at("id").get<std::string>();
  s.document = j.value("document", "");
  s.doc_index = j.value("doc_index", 0);
  s.start = j.at("start").get<int>();
  s.end = j.at("end").get<int>();
  s.origin = origin_from_string(j.value("origin", "chunker"));
  s.title = j.value("title", "");
  for (const auto& ju : j.value("units", nlohmann::json::array())) {
    SentenceUnit u;
    u.index = ju.at("index").get<int>();
    u.kind = block_kind_from_string(ju.value("kind", "paragraph"));
    u.heading_level = ju.value("level", 0);
    u.block_ref = ju.value("block", 0);
    u.text = ju.at("text").get<std::string>();
    u.span = ju.at("span").get<SourceSpan>();
    u.document_ref = s.document;
    s.units.push_back(std::move(u));
  }
  if (s.units.empty()) {
    s.text = j.value("text", "");
    s.source_spans = j.value("spans", std::vector<SourceSpan>{});
  } else {
    s.rebuild_text();
    // Spans can carry merged provenance beyond the units (consolidation).
    if (j.contains("spans")) s.source_spans = j.at("spans").get<std::vector<SourceSpan>>();
  }
}

void to_json(nlohmann::json& j, const SegmentsFile& f) {
  auto docs = nlohmann::json::array();
  for (const auto& d : f.documents)
    docs.push_back({{"document", d.document}, {"n_sentences", d.n_sentences}, {"segments", d.segments}});
  j = nlohmann::json{{"config", f.config}, {"documents", docs}};
}

void from_json(const nlohmann::json& j, SegmentsFile& f) {
  f = SegmentsFile{};
  if (j.contains("config")) f.config = j.at("config").get<SegmenterConfig>();
  auto read_doc = [](const nlohmann::json& jd) {
    DocumentSegments d;
    d.document = jd.at("document").get<std::string>();
    d.segments = jd.at("segments").get<std::vector<Segment>>();
    d.n_sentences = jd.contains("n_sentences") ? jd.at("n_sentences").get<int>()
                                               : (d.segments.empty() ? 0 : d.segments.back().end);
    for (auto& s : d.segments)
      if (s.document.empty()) s.document = d.document;
    return d;
  };
  if (j.contains("documents")) {
    for (const auto& jd : j.at("documents")) f.documents.push_back(read_doc(jd));
  } else {
    f.documents.push_back(read_doc(j));  // single-document form {document, config, segments}
  }
}

}  // namespace ontree
