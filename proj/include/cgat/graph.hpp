#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cgat/ids.hpp"

namespace cgat {

// Bidirectional raw-string <-> dense index map for one namespace. Dense
// indices are handed out in first-appearance order.
class IdMap {
 public:
  std::uint32_t intern(std::string_view raw);
  std::optional<std::uint32_t> find(std::string_view raw) const;
  const std::string& raw(std::uint32_t dense) const { return names_.at(dense); }
  std::size_t size() const { return names_.size(); }

 private:
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::string> names_;
};

struct IdMaps {
  IdMap users;
  IdMap items;
  IdMap entities;
  IdMap relations;  // original relations only
};

// `kind<TAB>raw<TAB>dense` per line, kinds user/item/entity/relation.
void write_id_maps(const IdMaps& maps, const std::filesystem::path& path);
IdMaps read_id_maps(const std::filesystem::path& path);

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct Neighbor {
  RelationId relation;
  EntityId entity;

  friend auto operator<=>(const Neighbor&, const Neighbor&) = default;
};

// Item knowledge graph with symmetric adjacency. Relation indices:
// [0, R) original, [R, 2R) inverses, 2R is the reserved self-loop relation
// used when an entity has no neighbors. relation_count() is 2R; embedding
// tables need embedding_relation_count() = 2R + 1 rows.
class KnowledgeGraph {
 public:
  // Triples must reference valid indices; duplicates are dropped (first
  // occurrence kept). item_entity must be injective.
  KnowledgeGraph(std::size_t entity_count, std::size_t original_relation_count,
                 std::vector<Triple> triples, std::vector<EntityId> item_entity);

  std::size_t entity_count() const { return entity_count_; }
  std::size_t original_relation_count() const { return relation_count_; }
  std::size_t relation_count() const { return 2 * relation_count_; }
  std::size_t embedding_relation_count() const { return 2 * relation_count_ + 1; }
  std::size_t item_count() const { return item_entity_.size(); }

  RelationId inverse(RelationId r) const;
  RelationId self_relation() const { return RelationId(2 * relation_count_); }

  // Original-direction triples D, duplicate-free, in load order.
  const std::vector<Triple>& triples() const { return triples_; }

  // Local context C_h^l: (relation, tail) pairs sorted by (relation, tail).
  std::span<const Neighbor> neighbors(EntityId h) const;
  // Distinct neighbor entities of h, ascending.
  std::span<const EntityId> neighbor_entities(EntityId h) const;
  bool adjacent(EntityId a, EntityId b) const;

  EntityId item_entity(ItemId item) const { return item_entity_.at(item.index()); }
  const std::vector<EntityId>& item_entities() const { return item_entity_; }

 private:
  std::size_t entity_count_;
  std::size_t relation_count_;
  std::vector<Triple> triples_;
  std::vector<EntityId> item_entity_;
  std::vector<std::size_t> adj_offsets_;
  std::vector<Neighbor> adj_;
  std::vector<std::size_t> ent_offsets_;
  std::vector<EntityId> ent_;
};

inline std::span<const Neighbor> local_context(const KnowledgeGraph& kg, EntityId h) {
  return kg.neighbors(h);
}

struct Interaction {
  UserId user;
  ItemId item;

  friend auto operator<=>(const Interaction&, const Interaction&) = default;
};

// All retained positive interactions before splitting.
struct Interactions {
  std::size_t user_count = 0;
  std::size_t item_count = 0;
  std::vector<Interaction> pairs;
};

enum class Split { Train, Valid, Test };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

// Positive interactions partitioned into train / valid / test.
class InteractionStore {
 public:
  // Throws InputError if a (user, item) pair appears twice across the splits.
  InteractionStore(std::size_t user_count, std::size_t item_count, std::vector<Interaction> train,
                   std::vector<Interaction> valid, std::vector<Interaction> test);

  std::size_t user_count() const { return user_count_; }
  std::size_t item_count() const { return item_count_; }

  const std::vector<Interaction>& interactions(Split split) const;
  // Sorted ascending.
  std::span<const ItemId> positives(Split split, UserId user) const;
  bool contains(Split split, UserId user, ItemId item) const;

 private:
  struct Part {
    std::vector<Interaction> flat;
    std::vector<std::vector<ItemId>> by_user;
  };
  const Part& part(Split split) const;

  std::size_t user_count_;
  std::size_t item_count_;
  Part parts_[3];
};

// Reads `user<TAB>item<TAB>rating` lines, keeping rows with rating strictly
// greater than `threshold` (all rows when absent). Users and items are added
// to `maps` in first-appearance order among retained rows.
Interactions load_interactions(const std::filesystem::path& ratings_path,
                               std::optional<double> threshold, IdMaps& maps);

// Reads `head<TAB>relation<TAB>tail` and `item<TAB>entity`. Every item already
// present in maps.items must map to exactly one KG entity, and no two items
// may share an entity; offenders are listed in the thrown InputError.
KnowledgeGraph load_kg(const std::filesystem::path& kg_path,
                       const std::filesystem::path& item_map_path, IdMaps& maps);

struct SplitRatios {
  double train = 0.6;
  double valid = 0.2;
  double test = 0.2;
};

// Global shuffle under `seed`, then contiguous cuts at floor(train * n) and
// floor((train + valid) * n).
InteractionStore split_interactions(const Interactions& data, SplitRatios ratios,
                                    std::uint64_t seed);

}  // namespace cgat
