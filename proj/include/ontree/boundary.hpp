#pragma once

#include <vector>

namespace ontree {

/// A segmentation of N sentences, stored as split points. Boundary b means a
/// new segment starts at sentence b, so boundaries are a subset of {1..N-1}.
struct BoundarySet {
  int n_sentences = 0;
  std::vector<int> boundaries;  // strictly increasing

  /// Throws ValidationError unless boundaries are strictly increasing and in range.
  static BoundarySet make(int n_sentences, std::vector<int> boundaries);

  int segment_count() const { return static_cast<int>(boundaries.size()) + 1; }
  std::vector<int> segment_lengths() const;
  /// Segment index of every sentence, 0-based.
  std::vector<int> segment_ids() const;

  bool operator==(const BoundarySet&) const = default;
};

}  // namespace ontree
