#include "ontree/segmetrics.hpp"

#include <fmt/format.h>

#include <cmath>
#include <map>

#include "ontree/error.hpp"
#include "ontree/segment.hpp"

namespace ontree {

namespace {

void check(const EvalPair& pair, int k) {
  const int n = pair.reference.n_sentences;
  if (n != pair.hypothesis.n_sentences)
    throw MismatchError(fmt::format("sentence counts differ: {} vs {}", n, pair.hypothesis.n_sentences));
  if (k < 1 || k >= n) throw ValidationError(fmt::format("k={} outside [1, {})", k, n));
}

// Prefix counts: gaps[b] = number of boundaries <= b.
std::vector<int> boundary_prefix(const BoundarySet& s) {
  std::vector<int> prefix(static_cast<std::size_t>(s.n_sentences) + 1, 0);
  for (int b : s.boundaries) prefix[static_cast<std::size_t>(b)] = 1;
  for (std::size_t i = 1; i < prefix.size(); ++i) prefix[i] += prefix[i - 1];
  return prefix;
}

}  // namespace

int choose_k(const BoundarySet& reference) {
  if (reference.n_sentences < 2) throw ValidationError("choose_k needs N >= 2");
  // mean/2 = N / (2 * segments); round half up in integers.
  const int num = reference.n_sentences;
  const int den = 2 * reference.segment_count();
  return std::max(1, (2 * num + den) / (2 * den));
}

double pk(const EvalPair& pair, int k) {
  check(pair, k);
  const int n = pair.reference.n_sentences;
  auto ref = boundary_prefix(pair.reference);
  auto hyp = boundary_prefix(pair.hypothesis);
  int wrong = 0;
  for (int i = 0; i < n - k; ++i) {
    // sentences i and i+k share a segment iff no boundary in gaps i+1..i+k
    bool same_ref = ref[static_cast<std::size_t>(i + k)] == ref[static_cast<std::size_t>(i)];
    bool same_hyp = hyp[static_cast<std::size_t>(i + k)] == hyp[static_cast<std::size_t>(i)];
    if (same_ref != same_hyp) ++wrong;
  }
  return static_cast<double>(wrong) / (n - k);
}

double window_diff(const EvalPair& pair, int k) {
  check(pair, k);
  const int n = pair.reference.n_sentences;
  auto ref = boundary_prefix(pair.reference);
  auto hyp = boundary_prefix(pair.hypothesis);
  int wrong = 0;
  for (int i = 0; i < n - k; ++i) {
    int r = ref[static_cast<std::size_t>(i + k)] - ref[static_cast<std::size_t>(i)];
    int h = hyp[static_cast<std::size_t>(i + k)] - hyp[static_cast<std::size_t>(i)];
    if (r != h) ++wrong;
  }
  return static_cast<double>(wrong) / (n - k);
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  auto docs = nlohmann::json::array();
  for (const auto& d : r.per_document)
    docs.push_back({{"doc", d.doc}, {"k", d.k}, {"pk", d.pk}, {"window_diff", d.window_diff}});
  j = nlohmann::json{{"per_document", docs},
                     {"macro_average", {{"pk", r.macro_pk}, {"window_diff", r.macro_window_diff}}}};
}

std::vector<Annotation> parse_annotations(const nlohmann::json& refs) {
  std::vector<Annotation> out;
  for (const auto& d : refs.at("documents")) {
    auto name = d.at("doc").get<std::string>();
    try {
      out.push_back({name, BoundarySet::make(d.at("n_sentences").get<int>(), d.at("boundaries").get<std::vector<int>>())});
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}: {}", name, e.what()));
    }
  }
  return out;
}

MetricReport evaluate(const std::vector<Annotation>& refs, const std::vector<Annotation>& hyps,
                      std::optional<int> fixed_k) {
  std::map<std::string, const Annotation*> by_name;
  for (const auto& h : hyps) by_name[h.doc] = &h;
  MetricReport report;
  for (const auto& r : refs) {
    auto it = by_name.find(r.doc);
    if (it == by_name.end()) throw MismatchError(fmt::format("{}: no hypothesis for annotated document", r.doc));
    const auto& h = *it->second;
    if (h.boundaries.n_sentences != r.boundaries.n_sentences)
      throw MismatchError(fmt::format("{}: annotation has {} sentences, hypothesis has {}", r.doc,
                                      r.boundaries.n_sentences, h.boundaries.n_sentences));
    if (r.boundaries.n_sentences < 2) throw MismatchError(fmt::format("{}: need at least 2 sentences", r.doc));
    EvalPair pair{r.boundaries, h.boundaries};
    int k = fixed_k ? *fixed_k : choose_k(r.boundaries);
    if (k >= r.boundaries.n_sentences) throw ValidationError(fmt::format("{}: k={} too large", r.doc, k));
    report.per_document.push_back({r.doc, k, pk(pair, k), window_diff(pair, k)});
  }
  if (!report.per_document.empty()) {
    for (const auto& d : report.per_document) {
      report.macro_pk += d.pk;
      report.macro_window_diff += d.window_diff;
    }
    report.macro_pk /= static_cast<double>(report.per_document.size());
    report.macro_window_diff /= static_cast<double>(report.per_document.size());
  }
  return report;
}

MetricReport evaluate_corpus(const nlohmann::json& refs, const nlohmann::json& segments, std::optional<int> fixed_k) {
  auto file = segments.get<SegmentsFile>();
  std::vector<Annotation> hyps;
  for (const auto& d : file.documents) hyps.push_back({d.document, boundaries_of(d.segments, d.n_sentences)});
  return evaluate(parse_annotations(refs), hyps, fixed_k);
}

}  // namespace ontree
