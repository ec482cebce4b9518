#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cgat/graph.hpp"

namespace cgat {

enum class CandidatePolicy { Full, Sampled };

struct EvalConfig {
  std::vector<std::size_t> ks{10, 20, 50};
  CandidatePolicy policy = CandidatePolicy::Full;
  std::size_t sampled_negatives = 100;  // Sampled policy only
  Split split = Split::Test;
  bool include_valid_in_candidates = false;
  std::size_t workers = 1;
  std::uint64_t seed = 0;  // Sampled policy only

  void validate() const;
};

struct MetricTriple {
  double precision = 0.0;
  double recall = 0.0;
  double hit_ratio = 0.0;

  friend bool operator==(const MetricTriple&, const MetricTriple&) = default;
};

struct EvalReport {
  Split split = Split::Test;
  std::vector<std::size_t> ks;
  std::vector<MetricTriple> metrics;  // parallel to ks
  std::size_t users = 0;
  double seconds = 0.0;  // not part of the text form

  const MetricTriple& at(std::size_t k) const;
  // "split<TAB>K<TAB>metric<TAB>value" per line, metric in
  // {precision, recall, hit_ratio}; preceded by a "# users" comment line.
  std::string to_text() const;
  static EvalReport parse(const std::string& text);
};

// Scores candidate items for one user. Implementations must be safe to call
// concurrently from several threads.
class UserScorer {
 public:
  virtual ~UserScorer() = default;
  virtual void score(UserId user, std::span<const ItemId> candidates,
                     std::span<double> out) const = 0;
};

// Candidates ordered by descending score, ties by ascending item index;
// only the first `limit` entries are produced.
std::vector<ItemId> rank_items(std::span<const ItemId> candidates, std::span<const double> scores,
                               std::size_t limit = SIZE_MAX);

// Items not among the user's train positives, nor valid positives when
// ranking the test split (unless include_valid is set).
std::vector<ItemId> candidate_items(const InteractionStore& store, UserId user, Split split,
                                    bool include_valid);

// Precision, recall and hit indicator of the first K ranked items against
// sorted `positives`, which must be non-empty.
MetricTriple metrics_for_user(std::span<const ItemId> ranked, std::span<const ItemId> positives,
                              std::size_t k);

// Unweighted mean over users with at least one positive in cfg.split.
EvalReport evaluate(const UserScorer& scorer, const InteractionStore& store,
                    const EvalConfig& cfg);

}  // namespace cgat
