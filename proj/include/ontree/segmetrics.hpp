#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ontree/boundary.hpp"

namespace ontree {

struct EvalPair {
  BoundarySet reference;
  BoundarySet hypothesis;
};

/// max(1, round-half-up(mean reference segment length / 2)).
int choose_k(const BoundarySet& reference);

/// Probe-pair error: fraction of pairs (i, i+k), i in [0, N-k), on which
/// reference and hypothesis disagree about "same segment".
double pk(const EvalPair& pair, int k);

/// Boundary-count error: window i covers gaps i+1..i+k; fraction of the N-k
/// windows whose boundary counts differ.
double window_diff(const EvalPair& pair, int k);

struct DocumentScore {
  std::string doc;
  int k = 0;
  double pk = 0.0;
  double window_diff = 0.0;
};

struct MetricReport {
  std::vector<DocumentScore> per_document;
  double macro_pk = 0.0;
  double macro_window_diff = 0.0;
};

void to_json(nlohmann::json& j, const MetricReport& r);

/// One annotated document of refs.json.
struct Annotation {
  std::string doc;
  BoundarySet boundaries;
};

std::vector<Annotation> parse_annotations(const nlohmann::json& refs);

/// Hypotheses keyed like annotations. `fixed_k` overrides choose_k.
/// Throws MismatchError naming the document on a missing document or N mismatch.
MetricReport evaluate(const std::vector<Annotation>& refs, const std::vector<Annotation>& hyps,
                      std::optional<int> fixed_k = std::nullopt);

/// refs.json against a segments file (see SegmentsFile).
MetricReport evaluate_corpus(const nlohmann::json& refs, const nlohmann::json& segments,
                             std::optional<int> fixed_k = std::nullopt);

}  // namespace ontree
