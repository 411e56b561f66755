#include "doctest.h"
#include "ontree/error.hpp"
#include "ontree/segmetrics.hpp"

using namespace ontree;

namespace {

// Naive oracle: materialize segment ids, compare probe pairs and window counts directly.
std::vector<int> ids_of(int n, const std::vector<int>& b) {
  std::vector<int> ids(static_cast<std::size_t>(n));
  int seg = 0;
  for (int i = 0; i < n; ++i) {
    if (std::find(b.begin(), b.end(), i) != b.end()) ++seg;
    ids[static_cast<std::size_t>(i)] = seg;
  }
  return ids;
}

double pk_oracle(int n, const std::vector<int>& ref, const std::vector<int>& hyp, int k) {
  auto r = ids_of(n, ref), h = ids_of(n, hyp);
  int bad = 0;
  for (int i = 0; i + k < n; ++i) bad += (r[i] == r[i + k]) != (h[i] == h[i + k]);
  return static_cast<double>(bad) / (n - k);
}

double wd_oracle(int n, const std::vector<int>& ref, const std::vector<int>& hyp, int k) {
  auto r = ids_of(n, ref), h = ids_of(n, hyp);
  int bad = 0;
  for (int i = 0; i + k < n; ++i) bad += (r[i + k] - r[i]) != (h[i + k] - h[i]);
  return static_cast<double>(bad) / (n - k);
}

std::vector<int> from_mask(int n, unsigned mask) {
  std::vector<int> b;
  for (int g = 1; g < n; ++g)
    if (mask & (1u << (g - 1))) b.push_back(g);
  return b;
}

}  // namespace

TEST_SUITE("segmetrics") {

TEST_CASE("oracle reproduces the hand-counted anchors") {
  CHECK(pk_oracle(8, {4}, {}, 2) == doctest::Approx(2.0 / 6));
  CHECK(pk_oracle(8, {4}, {1, 2, 3, 4, 5, 6, 7}, 2) == doctest::Approx(4.0 / 6));
  CHECK(wd_oracle(8, {4}, {}, 2) == doctest::Approx(2.0 / 6));
  CHECK(wd_oracle(8, {4}, {3}, 2) == doctest::Approx(2.0 / 6));
}

TEST_CASE("anchors") {
  auto ref = BoundarySet::make(8, {4});
  CHECK(std::abs(pk({ref, BoundarySet::make(8, {})}, 2) - 2.0 / 6) < 1e-12);
  CHECK(std::abs(pk({ref, BoundarySet::make(8, {1, 2, 3, 4, 5, 6, 7})}, 2) - 4.0 / 6) < 1e-12);
  CHECK(std::abs(window_diff({ref, BoundarySet::make(8, {})}, 2) - 2.0 / 6) < 1e-12);
  CHECK(std::abs(window_diff({ref, BoundarySet::make(8, {3})}, 2) - 2.0 / 6) < 1e-12);
  CHECK(pk({ref, ref}, 2) == 0.0);
  CHECK(window_diff({ref, ref}, 2) == 0.0);
}

TEST_CASE("choose_k") {
  CHECK(choose_k(BoundarySet::make(8, {4})) == 2);
  CHECK(choose_k(BoundarySet::make(10, {})) == 5);
  CHECK(choose_k(BoundarySet::make(8, {3})) == 2);
  CHECK(choose_k(BoundarySet::make(3, {})) == 2);  // 1.5 rounds up
  CHECK(choose_k(BoundarySet::make(2, {1})) == 1);
  CHECK(choose_k(BoundarySet::make(6, {1, 2, 3, 4, 5})) == 1);  // max(1, round(0.5))
}

TEST_CASE("k out of range is an error") {
  auto ref = BoundarySet::make(5, {2});
  CHECK_THROWS_AS(pk({ref, ref}, 0), ValidationError);
  CHECK_THROWS_AS(pk({ref, ref}, 5), ValidationError);
  CHECK_THROWS_AS(window_diff({ref, ref}, 6), ValidationError);
  CHECK_THROWS_AS(pk({ref, BoundarySet::make(6, {2})}, 2), MismatchError);
  CHECK_THROWS_AS(BoundarySet::make(5, {3, 2}), ValidationError);
  CHECK_THROWS_AS(BoundarySet::make(5, {5}), ValidationError);
}

TEST_CASE("exhaustive oracle equivalence, N <= 8") {
  // The acceptance binary covers N <= 12; this keeps the unit run fast.
  for (int n = 2; n <= 8; ++n) {
    unsigned masks = 1u << (n - 1);
    for (unsigned rm = 0; rm < masks; ++rm) {
      auto rb = from_mask(n, rm);
      auto ref = BoundarySet::make(n, rb);
      for (unsigned hm = 0; hm < masks; ++hm) {
        auto hb = from_mask(n, hm);
        EvalPair pair{ref, BoundarySet::make(n, hb)};
        for (int k = 1; k < n; ++k) {
          double p = pk(pair, k), w = window_diff(pair, k);
          if (p != pk_oracle(n, rb, hb, k) || w != wd_oracle(n, rb, hb, k)) {
            FAIL("mismatch at n=" << n << " ref=" << rm << " hyp=" << hm << " k=" << k);
          }
          if (p < 0 || p > 1 || w < 0 || w > 1) FAIL("out of range");
        }
      }
    }
  }
}

TEST_CASE("empty against empty is zero") {
  for (int n = 2; n <= 12; ++n)
    for (int k = 1; k < n; ++k) {
      EvalPair pair{BoundarySet::make(n, {}), BoundarySet::make(n, {})};
      CHECK(window_diff(pair, k) == 0.0);
      CHECK(pk(pair, k) == 0.0);
    }
}

TEST_CASE("evaluate and macro averages") {
  std::vector<Annotation> refs{{"a.md", BoundarySet::make(8, {4})}, {"b.md", BoundarySet::make(8, {4})}};
  std::vector<Annotation> hyps{{"b.md", BoundarySet::make(8, {})}, {"a.md", BoundarySet::make(8, {4})}};
  auto report = evaluate(refs, hyps);
  REQUIRE(report.per_document.size() == 2);
  CHECK(report.per_document[0].doc == "a.md");
  CHECK(report.per_document[0].pk == 0.0);
  CHECK(report.per_document[1].pk == doctest::Approx(1.0 / 3));
  CHECK(report.macro_pk == doctest::Approx(1.0 / 6));
  CHECK(report.macro_window_diff == doctest::Approx(1.0 / 6));
  CHECK(report.per_document[1].k == 2);

  auto fixed = evaluate(refs, hyps, 3);
  CHECK(fixed.per_document[0].k == 3);
  CHECK(fixed.per_document[1].pk == doctest::Approx(3.0 / 5));

  nlohmann::json j = report;
  CHECK(j["macro_average"]["pk"].get<double>() == doctest::Approx(1.0 / 6));
  CHECK(j["per_document"][1]["window_diff"].get<double>() == doctest::Approx(1.0 / 3));
}

TEST_CASE("evaluate errors name the document") {
  std::vector<Annotation> refs{{"guide.md", BoundarySet::make(10, {5})}};
  try {
    evaluate(refs, {{"guide.md", BoundarySet::make(9, {5})}});
    FAIL("expected MismatchError");
  } catch (const MismatchError& e) {
    CHECK(std::string(e.what()).find("guide.md") != std::string::npos);
  }
  try {
    evaluate(refs, {});
    FAIL("expected MismatchError");
  } catch (const MismatchError& e) {
    CHECK(std::string(e.what()).find("guide.md") != std::string::npos);
  }
}

TEST_CASE("evaluate_corpus reads refs and segments files") {
  auto refs = nlohmann::json::parse(R"({"documents":[{"doc":"a.md","n_sentences":8,"boundaries":[4]}]})");
  auto segments = nlohmann::json::parse(R"({
    "config": {"buffer":1,"percentile":95,"min_sentences":2,"refine":false,"heading_bias":true},
    "documents": [{"document":"a.md","n_sentences":8,"segments":[
      {"id":"seg-000-0000","document":"a.md","doc_index":0,"start":0,"end":4,"origin":"chunker","text":"","spans":[],"units":[]},
      {"id":"seg-000-0004","document":"a.md","doc_index":0,"start":4,"end":8,"origin":"chunker","text":"","spans":[],"units":[]}]}]})");
  auto report = evaluate_corpus(refs, segments);
  CHECK(report.macro_pk == 0.0);
  CHECK(report.macro_window_diff == 0.0);
  CHECK_THROWS_AS(parse_annotations(nlohmann::json::parse(R"({"documents":[{"doc":"x","n_sentences":3,"boundaries":[3]}]})")),
                  ValidationError);
}

}  // TEST_SUITE
