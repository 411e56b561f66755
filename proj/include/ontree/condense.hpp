#pragma once

#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "ontree/ingest.hpp"
#include "ontree/providers.hpp"
#include "ontree/segment.hpp"

namespace ontree {

struct CondenseConfig {
  double tau = 0.92;
  int boilerplate_min_files = 3;

  void validate() const;
};

void to_json(nlohmann::json& j, const CondenseConfig& c);
void from_json(const nlohmann::json& j, CondenseConfig& c);

struct DuplicateCluster {
  std::vector<std::string> member_ids;  // sorted
  std::string representative_id;
  double pairwise_min_similarity = 0.0;
};

struct BoilerplateRemoval {
  std::string document;
  std::string line;  // normalized form
  SourceSpan span;
};

struct CondenseLog {
  std::vector<BoilerplateRemoval> removed;
  std::vector<DuplicateCluster> clusters;
  std::vector<std::string> dropped_segments;  // emptied by boilerplate removal
};

void to_json(nlohmann::json& j, const CondenseLog& log);

/// Trimmed, lowercased, whitespace-collapsed.
std::string normalize_line(std::string_view text);

/// Normalized non-heading block texts found in at least `min_files` distinct documents.
std::set<std::string> boilerplate_lines(const Corpus& corpus, int min_files);

/// Drops boilerplate blocks from every document except the entry (documents[0]).
Corpus filter_boilerplate(const Corpus& corpus, int min_files, std::vector<BoilerplateRemoval>* removed = nullptr);

/// Same removal applied to already-segmented text: units whose block is
/// boilerplate are pruned, and segments left empty are dropped.
std::vector<Segment> prune_boilerplate(const std::vector<Segment>& segments, const Corpus& corpus, int min_files,
                                       CondenseLog* log = nullptr);

/// Connected components of the graph with an edge wherever cosine >= tau.
/// Zero-vector segments never join a cluster. Clusters are ordered by their
/// smallest member id.
std::vector<DuplicateCluster> find_duplicates(const std::vector<Segment>& segments, double tau,
                                              EmbeddingProvider& embedder);

/// Keeps each cluster's representative, drops the other members and folds
/// their source spans into it. Throws ValidationError on unknown ids.
std::vector<Segment> consolidate(const std::vector<Segment>& segments, const std::vector<DuplicateCluster>& clusters);

/// prune_boilerplate, then find_duplicates + consolidate.
std::vector<Segment> condense(const std::vector<Segment>& segments, const Corpus& corpus,
                              const CondenseConfig& config, EmbeddingProvider& embedder, CondenseLog* log = nullptr);

}  // namespace ontree
