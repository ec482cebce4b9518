#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "cgat/graph.hpp"
#include "cgat/rng.hpp"

namespace cgat {

struct WalkConfig {
  double gamma = 0.2;            // weight of "return or stay close" moves, in (0, 0.5)
  std::size_t num_walks = 15;    // M
  std::size_t walk_length = 8;   // L
  std::size_t context_size = 4;  // |C_h^g|, tied to the sampled local context size S

  void validate() const;

  friend bool operator==(const WalkConfig&, const WalkConfig&) = default;
};

// Fixed-size local context: uniform without replacement when the entity has
// at least `count` neighbors, with replacement otherwise, and `count` copies
// of (self_relation, h) for an isolated entity.
std::vector<Neighbor> sample_local_neighbors(const KnowledgeGraph& kg, EntityId h,
                                             std::size_t count, RngStream& rng);

// One biased random-walk transition out of `cur`. Each distinct neighbor c
// of cur has weight gamma when c == prev or c is adjacent to prev, and
// 1 - gamma otherwise; weights are normalized over the neighbors. Without a
// previous entity the step is uniform. An isolated entity steps to itself.
EntityId walk_step(const KnowledgeGraph& kg, std::optional<EntityId> prev, EntityId cur,
                   double gamma, RngStream& rng);

// num_walks paths of walk_length entities each, root not included.
std::vector<std::vector<EntityId>> run_walks(const KnowledgeGraph& kg, EntityId root,
                                             const WalkConfig& cfg, RngStream& rng);

// Top `size` entities by visit count (descending, ties by ascending index),
// root excluded.
std::vector<EntityId> rank_by_frequency(const std::vector<std::vector<EntityId>>& walks,
                                        EntityId root, std::size_t size);

std::vector<EntityId> nonlocal_context(const KnowledgeGraph& kg, EntityId root,
                                       const WalkConfig& cfg, RngStream& rng);

// Frozen per-item non-local contexts C_i^g, indexed by ItemId.
class WalkCache {
 public:
  WalkCache(WalkConfig cfg, std::uint64_t seed, std::vector<std::vector<EntityId>> contexts);

  std::span<const EntityId> context(ItemId item) const { return contexts_.at(item.index()); }
  std::size_t item_count() const { return contexts_.size(); }
  const WalkConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }

  // Binary format: "CGWC", u32 version, u32 item count, u32 context size,
  // u64 seed, f64 gamma, u32 M, u32 L, then per item u32 index, u32 length
  // and u32 entity indices. All little-endian.
  void save(const std::filesystem::path& path) const;
  static WalkCache load(const std::filesystem::path& path);

  friend bool operator==(const WalkCache&, const WalkCache&) = default;

 private:
  WalkConfig cfg_;
  std::uint64_t seed_;
  std::vector<std::vector<EntityId>> contexts_;
};

// Item i uses the stream RngStream(seed ^ i), so any worker count gives the
// same cache.
WalkCache build_walk_cache(const KnowledgeGraph& kg, const WalkConfig& cfg, std::uint64_t seed,
                           std::size_t workers = 1);

struct BprTuple {
  UserId user;
  ItemId positive;
  ItemId negative;
};

// n_neg tuples per training interaction, negatives uniform over items outside
// the user's train positives and distinct within one interaction whenever
// enough candidates exist. Users owning every item are skipped.
std::vector<BprTuple> sample_bpr_batch(const InteractionStore& store, std::size_t n_neg,
                                       RngStream& rng);

struct KgTuple {
  EntityId head;
  RelationId relation;
  EntityId tail;
  EntityId corrupted;
};

// One corrupted tail per original triple, uniform over entities that are
// neither h nor adjacent to h. Triples whose head touches every entity are
// skipped.
std::vector<KgTuple> sample_kg_negatives(const KnowledgeGraph& kg, RngStream& rng);

// `count` items from the user's train positives minus `exclude`; without
// replacement when possible. Empty result means "no history".
std::vector<ItemId> sample_history(const InteractionStore& store, UserId user,
                                   std::optional<ItemId> exclude, std::size_t count,
                                   RngStream& rng);

}  // namespace cgat
