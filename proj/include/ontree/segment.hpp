#pragma once

#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "ontree/boundary.hpp"
#include "ontree/ingest.hpp"
#include "ontree/providers.hpp"

namespace ontree {

struct SegmenterConfig {
  int buffer = 1;
  double percentile = 95.0;
  int min_sentences = 2;
  bool refine = false;
  /// Prefer chunker candidates that coincide with a heading when min_sentences
  /// forces a choice between neighbouring candidates, and never let a heading
  /// end a segment.
  bool heading_bias = true;

  void validate() const;
};

void to_json(nlohmann::json& j, const SegmenterConfig& c);
void from_json(const nlohmann::json& j, SegmenterConfig& c);

enum class SegmentOrigin { chunker, refined, consolidated };

std::string_view to_string(SegmentOrigin origin);

struct Segment {
  std::string id;
  std::string document;  // Document::name
  int doc_index = 0;     // position of the document in the corpus
  int start = 0;         // sentence range [start, end) within the document
  int end = 0;
  std::string text;  // unit texts joined by '\n'
  std::vector<SourceSpan> source_spans;
  SegmentOrigin origin = SegmentOrigin::chunker;
  std::vector<SentenceUnit> units;
  std::string title;  // filled by graphgen

  /// Level of the first heading unit, 0 if the segment has none.
  int heading_level() const;
  /// Units rendered back to Markdown (headings, list items, fenced code).
  std::string body_markdown() const;
  /// Recomputes text and source_spans from units.
  void rebuild_text();
};

std::string segment_id(int doc_index, int start);

/// Builds a segment over units[start, end) of one document.
Segment make_segment(int doc_index, const std::vector<SentenceUnit>& units, int start, int end,
                     SegmentOrigin origin = SegmentOrigin::chunker);

/// Element i joins sentences [i - buffer, i + buffer], clamped to the document.
std::vector<std::string> buffered_texts(const std::vector<std::string>& sentences, int buffer);

/// Percentile threshold by the nearest-rank method over `values`.
double nearest_rank_percentile(std::vector<double> values, double percentile);

/// Boundary b is a candidate when distances[b-1] is strictly above the
/// percentile threshold. Candidates are then thinned left to right so no
/// segment is shorter than min_sentences. Candidates listed in `preferred`
/// (heading starts) are placed first and the rest fill in around them; a
/// candidate right after a run of preferred sentences moves to its start.
BoundarySet breakpoints(const std::vector<double>& distances, double percentile, int min_sentences, int n,
                        const std::set<int>& preferred = {});

/// buffered_texts -> embed -> 1 - cosine distances -> breakpoints.
std::vector<Segment> segment_document(const std::vector<SentenceUnit>& sentences, const SegmenterConfig& config,
                                      EmbeddingProvider& embedder, int doc_index = 0);

enum class RefineAction { keep, move, merge };

struct RefineAnswer {
  RefineAction action = RefineAction::keep;
  int shift = 0;  // for move
};

/// Parses "KEEP", "MERGE" or "MOVE +d"/"MOVE -d". Unknown answers and
/// shifts outside [-2, 2] come back as nullopt.
std::optional<RefineAnswer> parse_refine_answer(std::string_view text);

/// Asks the completion provider about every boundary between adjacent
/// segments of the same document, left to right. Answers that would break the
/// partition or min_sentences are discarded.
std::vector<Segment> refine_boundaries(const std::vector<Segment>& segments, const RetrievalStore& store,
                                       CompletionProvider& completion, const PromptLibrary& prompts,
                                       int min_sentences);

BoundarySet boundaries_of(const std::vector<Segment>& document_segments, int n_sentences);

struct DocumentSegments {
  std::string document;
  int n_sentences = 0;
  std::vector<Segment> segments;
};

struct SegmentsFile {
  SegmenterConfig config;
  std::vector<DocumentSegments> documents;

  std::vector<Segment> all() const;
};

void to_json(nlohmann::json& j, const Segment& s);
void from_json(const nlohmann::json& j, Segment& s);
void to_json(nlohmann::json& j, const SegmentsFile& f);
void from_json(const nlohmann::json& j, SegmentsFile& f);

/// Segments every document of the corpus (one task per document).
SegmentsFile segment_corpus(const Corpus& corpus, const SegmenterConfig& config, EmbeddingProvider& embedder);

}  // namespace ontree
