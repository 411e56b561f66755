#include <algorithm>

#include "doctest.h"
#include "helpers.hpp"
#include "ontree/condense.hpp"
#include "ontree/error.hpp"

using namespace ontree;

namespace {

Corpus corpus_of(const std::vector<std::pair<std::string, std::string>>& docs) {
  Corpus c;
  for (const auto& [name, text] : docs) c.documents.push_back(parse_markdown(text, SourceLocator::local("/tmp/" + name), name));
  return c;
}

const std::string footer = "Licensed under the MIT License.";

Corpus footer_corpus(int with_footer) {
  std::vector<std::pair<std::string, std::string>> docs{
      {"README.md", "# Project\n\nWelcome to the project. Read the guides below.\n\n"},
      {"setup.md", "# Setup\n\nInstall the compiler. Install the build tool.\n\n"},
      {"testing.md", "# Testing\n\nRun the unit tests. Check the coverage report.\n\n"}};
  for (int i = 0; i < with_footer; ++i) docs[static_cast<std::size_t>(i)].second += footer + "\n";
  return corpus_of(docs);
}

bool has_block(const Document& d, const std::string& text) {
  return std::any_of(d.blocks.begin(), d.blocks.end(), [&](const Block& b) { return b.text == text; });
}

SegmentsFile segment_all(const Corpus& corpus) {
  HashedTfEmbedding e;
  SegmenterConfig cfg;
  cfg.percentile = 50;
  cfg.min_sentences = 1;
  return segment_corpus(corpus, cfg, e);
}

std::vector<std::string> ids(const std::vector<Segment>& segs) {
  std::vector<std::string> out;
  for (const auto& s : segs) out.push_back(s.id);
  return out;
}

}  // namespace

TEST_SUITE("condense") {

TEST_CASE("normalize_line") {
  CHECK(normalize_line("  Licensed   under\tthe MIT  ") == "licensed under the mit");
  CHECK(normalize_line("") == "");
}

TEST_CASE("planted footer is kept only in the entry document") {
  auto corpus = footer_corpus(3);
  CHECK(boilerplate_lines(corpus, 3) == std::set<std::string>{normalize_line(footer)});
  std::vector<BoilerplateRemoval> removed;
  auto out = filter_boilerplate(corpus, 3, &removed);
  CHECK(has_block(out.documents[0], footer));
  CHECK_FALSE(has_block(out.documents[1], footer));
  CHECK_FALSE(has_block(out.documents[2], footer));
  REQUIRE(removed.size() == 2);
  CHECK(removed[0].document == "setup.md");
  CHECK(removed[0].span.line_start == 5);
  // Headings and everything else stay.
  CHECK(out.documents[1].blocks.size() == corpus.documents[1].blocks.size() - 1);
  CHECK(out.documents[0].blocks.size() == corpus.documents[0].blocks.size());
}

TEST_CASE("below threshold and single documents are untouched") {
  auto two = footer_corpus(2);
  CHECK(boilerplate_lines(two, 3).empty());
  auto out = filter_boilerplate(two, 3);
  CHECK(has_block(out.documents[1], footer));

  auto one = corpus_of({{"only.md", "Same line.\n\nSame line.\n\nSame line.\n"}});
  for (int m : {2, 3, 5}) CHECK(filter_boilerplate(one, m).documents[0].blocks.size() == one.documents[0].blocks.size());
}

TEST_CASE("headings are never boilerplate") {
  auto c = corpus_of({{"a.md", "# Overview\n\nAlpha text.\n"}, {"b.md", "# Overview\n\nBeta text.\n"},
                      {"c.md", "# Overview\n\nGamma text.\n"}});
  CHECK(boilerplate_lines(c, 2).empty());
}

TEST_CASE("prune_boilerplate on segments") {
  auto corpus = footer_corpus(3);
  auto segs = segment_all(corpus).all();
  CondenseLog log;
  auto pruned = prune_boilerplate(segs, corpus, 3, &log);
  CHECK(log.removed.size() == 2);
  for (const auto& s : pruned) {
    if (s.document == "README.md") continue;
    CHECK(s.text.find(footer) == std::string::npos);
  }
  bool entry_keeps = false;
  for (const auto& s : pruned)
    if (s.document == "README.md" && s.text.find(footer) != std::string::npos) entry_keeps = true;
  CHECK(entry_keeps);
}

TEST_CASE("find_duplicates") {
  HashedTfEmbedding e;
  auto units = testutil::units_of({"Fork the repository on the forge.", "Build with make.", "Fork the repository on the forge.",
                                   "Ship it.", "!!!"});
  std::vector<Segment> segs;
  for (int i = 0; i < 5; ++i) segs.push_back(make_segment(0, units, i, i + 1));

  auto clusters = find_duplicates(segs, 1.0, e);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].member_ids == std::vector<std::string>{"seg-000-0000", "seg-000-0002"});
  CHECK(clusters[0].representative_id == "seg-000-0000");
  CHECK(clusters[0].pairwise_min_similarity == 1.0);

  // tau 0: every non-zero segment that shares something links; "!!!" embeds to zero and stays out.
  auto all = find_duplicates(segs, 0.0, e);
  REQUIRE(all.size() == 1);
  CHECK(all[0].member_ids.size() == 4);
  CHECK(std::find(all[0].member_ids.begin(), all[0].member_ids.end(), "seg-000-0004") == all[0].member_ids.end());
}

TEST_CASE("distinct fixture has no duplicates at tau 0.99") {
  auto corpus = footer_corpus(0);
  auto segs = segment_all(corpus).all();
  HashedTfEmbedding e;
  // Hand check: no two fixture segments share their full vocabulary, so every cosine is below 0.99.
  for (std::size_t i = 0; i < segs.size(); ++i)
    for (std::size_t j = i + 1; j < segs.size(); ++j) CHECK(cosine(e.embed_one(segs[i].text), e.embed_one(segs[j].text)) < 0.99);
  CHECK(find_duplicates(segs, 0.99, e).empty());
}

TEST_CASE("consolidate") {
  auto a = testutil::units_of({"intro", "Fork the repo.", "middle", "x", "y", "z", "w", "Fork the repo."}, "a.md");
  std::vector<Segment> segs;
  for (int i = 0; i < 8; ++i) segs.push_back(make_segment(0, a, i, i + 1));
  DuplicateCluster c{{segs[1].id, segs[7].id}, segs[1].id, 1.0};

  auto out = consolidate(segs, {c});
  REQUIRE(out.size() == 7);
  auto kept = ids(out);
  CHECK(std::find(kept.begin(), kept.end(), segs[7].id) == kept.end());
  CHECK(out[1].id == segs[1].id);
  CHECK(out[1].origin == SegmentOrigin::consolidated);
  CHECK(out[1].source_spans == std::vector<SourceSpan>{{"a.md", 2, 2}, {"a.md", 8, 8}});
  CHECK(out[1].text == segs[1].text);
  CHECK(out[0].origin == SegmentOrigin::chunker);

  CHECK(ids(consolidate(segs, {})) == ids(segs));
  CHECK_THROWS_AS(consolidate(segs, {DuplicateCluster{{segs[1].id, "seg-999-0000"}, segs[1].id, 1.0}}), ValidationError);
}

TEST_CASE("condense is idempotent and invents nothing") {
  auto corpus = footer_corpus(3);
  // Cross-document duplicate paragraph.
  corpus.documents[2] = parse_markdown("# Testing\n\nInstall the compiler. Install the build tool.\n\nRun the unit tests.\n\n" + footer + "\n",
                                       SourceLocator::local("/tmp/testing.md"), "testing.md");
  auto segs = segment_all(corpus).all();
  HashedTfEmbedding e;
  CondenseConfig cfg;
  CondenseLog log;
  auto once = condense(segs, corpus, cfg, e, &log);
  CHECK_FALSE(log.clusters.empty());
  auto twice = condense(once, corpus, cfg, e);
  CHECK(nlohmann::json(twice) == nlohmann::json(once));

  for (const auto& s : once) {
    std::string joined;
    for (const auto& u : s.units) {
      const auto& doc = *std::find_if(corpus.documents.begin(), corpus.documents.end(),
                                      [&](const Document& d) { return d.name == u.document_ref; });
      REQUIRE(u.block_ref < static_cast<int>(doc.blocks.size()));
      CHECK(doc.blocks[static_cast<std::size_t>(u.block_ref)].text.find(u.text) != std::string::npos);
      joined += (joined.empty() ? "" : "\n") + u.text;
    }
    CHECK(s.text == joined);
  }

  nlohmann::json lj = log;
  CHECK(lj.contains("removed_lines"));
  CHECK(lj["clusters"][0].contains("pairwise_min_similarity"));
}

TEST_CASE("config validation") {
  CondenseConfig c;
  c.tau = 1.5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.boilerplate_min_files = 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

}  // TEST_SUITE
