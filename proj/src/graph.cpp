#include "cgat/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include "cgat/errors.hpp"
#include "cgat/rng.hpp"
#include "tsv.hpp"

namespace cgat {

std::uint32_t IdMap::intern(std::string_view raw) {
  auto it = index_.find(std::string(raw));
  if (it != index_.end()) return it->second;
  const auto dense = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(raw);
  index_.emplace(names_.back(), dense);
  return dense;
}

std::optional<std::uint32_t> IdMap::find(std::string_view raw) const {
  auto it = index_.find(std::string(raw));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

constexpr std::string_view kKinds[] = {"user", "item", "entity", "relation"};

IdMap& map_for(IdMaps& maps, std::string_view kind) {
  if (kind == "user") return maps.users;
  if (kind == "item") return maps.items;
  if (kind == "entity") return maps.entities;
  if (kind == "relation") return maps.relations;
  throw InputError("unknown id namespace '" + std::string(kind) + "'");
}

}  // namespace

void write_id_maps(const IdMaps& maps, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  const IdMap* all[] = {&maps.users, &maps.items, &maps.entities, &maps.relations};
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::uint32_t i = 0; i < all[k]->size(); ++i) {
      out << kKinds[k] << '\t' << all[k]->raw(i) << '\t' << i << '\n';
    }
  }
}

IdMaps read_id_maps(const std::filesystem::path& path) {
  IdMaps maps;
  detail::for_each_tsv_line(path, 3, [&](const auto& f, std::size_t lineno) {
    IdMap& map = map_for(maps, f[0]);
    const auto dense = detail::parse_index(f[2], path, lineno);
    if (map.intern(f[1]) != dense) {
      throw ParseError(path.string(), lineno, "dense indices must be contiguous and unique");
    }
  });
  return maps;
}

KnowledgeGraph::KnowledgeGraph(std::size_t entity_count, std::size_t original_relation_count,
                               std::vector<Triple> triples, std::vector<EntityId> item_entity)
    : entity_count_(entity_count),
      relation_count_(original_relation_count),
      item_entity_(std::move(item_entity)) {
  std::set<Triple> seen;
  for (const Triple& t : triples) {
    if (t.head.index() >= entity_count_ || t.tail.index() >= entity_count_ ||
        t.relation.index() >= relation_count_) {
      throw ContractError("triple references an out-of-range index");
    }
    if (seen.insert(t).second) triples_.push_back(t);
  }

  std::unordered_set<EntityId> used;
  for (EntityId e : item_entity_) {
    if (e.index() >= entity_count_) throw ContractError("item mapped to out-of-range entity");
    if (!used.insert(e).second) throw ContractError("item to entity mapping is not injective");
  }

  std::vector<std::vector<Neighbor>> lists(entity_count_);
  for (const Triple& t : triples_) {
    lists[t.head.index()].push_back({t.relation, t.tail});
    lists[t.tail.index()].push_back({inverse(t.relation), t.head});
  }
  adj_offsets_.reserve(entity_count_ + 1);
  ent_offsets_.reserve(entity_count_ + 1);
  adj_offsets_.push_back(0);
  ent_offsets_.push_back(0);
  std::vector<EntityId> ents;
  for (auto& list : lists) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    adj_.insert(adj_.end(), list.begin(), list.end());
    adj_offsets_.push_back(adj_.size());

    ents.clear();
    for (const Neighbor& n : list) ents.push_back(n.entity);
    std::sort(ents.begin(), ents.end());
    ents.erase(std::unique(ents.begin(), ents.end()), ents.end());
    ent_.insert(ent_.end(), ents.begin(), ents.end());
    ent_offsets_.push_back(ent_.size());
  }
}

RelationId KnowledgeGraph::inverse(RelationId r) const {
  if (r.index() < relation_count_) return RelationId(r.index() + relation_count_);
  if (r.index() < 2 * relation_count_) return RelationId(r.index() - relation_count_);
  return r;
}

std::span<const Neighbor> KnowledgeGraph::neighbors(EntityId h) const {
  const std::size_t i = h.index();
  return {adj_.data() + adj_offsets_.at(i), adj_.data() + adj_offsets_.at(i + 1)};
}

std::span<const EntityId> KnowledgeGraph::neighbor_entities(EntityId h) const {
  const std::size_t i = h.index();
  return {ent_.data() + ent_offsets_.at(i), ent_.data() + ent_offsets_.at(i + 1)};
}

bool KnowledgeGraph::adjacent(EntityId a, EntityId b) const {
  const auto ents = neighbor_entities(a);
  return std::binary_search(ents.begin(), ents.end(), b);
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "valid") return Split::Valid;
  if (name == "test") return Split::Test;
  throw InputError("unknown split '" + std::string(name) + "'");
}

InteractionStore::InteractionStore(std::size_t user_count, std::size_t item_count,
                                   std::vector<Interaction> train, std::vector<Interaction> valid,
                                   std::vector<Interaction> test)
    : user_count_(user_count), item_count_(item_count) {
  std::vector<Interaction>* inputs[] = {&train, &valid, &test};
  std::set<Interaction> seen;
  for (std::size_t s = 0; s < 3; ++s) {
    Part& p = parts_[s];
    p.flat = std::move(*inputs[s]);
    p.by_user.assign(user_count_, {});
    for (const Interaction& x : p.flat) {
      if (x.user.index() >= user_count_ || x.item.index() >= item_count_) {
        throw InputError("interaction references an out-of-range user or item");
      }
      if (!seen.insert(x).second) {
        throw InputError("interaction (" + std::to_string(x.user.value) + ", " +
                         std::to_string(x.item.value) + ") appears more than once");
      }
      p.by_user[x.user.index()].push_back(x.item);
    }
    for (auto& items : p.by_user) std::sort(items.begin(), items.end());
  }
}

const InteractionStore::Part& InteractionStore::part(Split split) const {
  return parts_[static_cast<int>(split)];
}

const std::vector<Interaction>& InteractionStore::interactions(Split split) const {
  return part(split).flat;
}

std::span<const ItemId> InteractionStore::positives(Split split, UserId user) const {
  return part(split).by_user.at(user.index());
}

bool InteractionStore::contains(Split split, UserId user, ItemId item) const {
  const auto items = positives(split, user);
  return std::binary_search(items.begin(), items.end(), item);
}

Interactions load_interactions(const std::filesystem::path& ratings_path,
                               std::optional<double> threshold, IdMaps& maps) {
  Interactions out;
  std::set<Interaction> seen;
  detail::for_each_tsv_line(ratings_path, 3, [&](const auto& f, std::size_t lineno) {
    const double rating = detail::parse_double(f[2], ratings_path, lineno);
    if (threshold && !(rating > *threshold)) return;
    const Interaction x{UserId(maps.users.intern(f[0])), ItemId(maps.items.intern(f[1]))};
    if (seen.insert(x).second) out.pairs.push_back(x);
  });
  if (out.pairs.empty()) {
    throw InputError(ratings_path.string() + ": no interactions retained");
  }
  out.user_count = maps.users.size();
  out.item_count = maps.items.size();
  return out;
}

KnowledgeGraph load_kg(const std::filesystem::path& kg_path,
                       const std::filesystem::path& item_map_path, IdMaps& maps) {
  std::vector<Triple> triples;
  detail::for_each_tsv_line(kg_path, 3, [&](const auto& f, std::size_t) {
    const EntityId h(maps.entities.intern(f[0]));
    const RelationId r(maps.relations.intern(f[1]));
    const EntityId t(maps.entities.intern(f[2]));
    triples.push_back({h, r, t});
  });

  constexpr std::uint32_t kUnmapped = UINT32_MAX;
  std::vector<std::uint32_t> item_entity(maps.items.size(), kUnmapped);
  std::vector<std::string> offenders;
  detail::for_each_tsv_line(item_map_path, 2, [&](const auto& f, std::size_t lineno) {
    const auto item = maps.items.find(f[0]);
    if (!item) return;  // item filtered out of the interaction data
    const auto entity = maps.entities.find(f[1]);
    if (!entity) {
      offenders.push_back("line " + std::to_string(lineno) + ": item '" + std::string(f[0]) +
                          "' mapped to unknown entity '" + std::string(f[1]) + "'");
      return;
    }
    auto& slot = item_entity[*item];
    if (slot != kUnmapped && slot != *entity) {
      offenders.push_back("line " + std::to_string(lineno) + ": item '" + std::string(f[0]) +
                          "' mapped to more than one entity");
    }
    slot = *entity;
  });

  std::unordered_map<std::uint32_t, std::uint32_t> owner;
  for (std::uint32_t i = 0; i < item_entity.size(); ++i) {
    if (item_entity[i] == kUnmapped) {
      offenders.push_back("item '" + maps.items.raw(i) + "' has no entity mapping");
      continue;
    }
    auto [it, fresh] = owner.emplace(item_entity[i], i);
    if (!fresh) {
      offenders.push_back("items '" + maps.items.raw(it->second) + "' and '" + maps.items.raw(i) +
                          "' share entity '" + maps.entities.raw(item_entity[i]) + "'");
    }
  }
  if (!offenders.empty()) {
    std::string msg = "invalid item map " + item_map_path.string() + " (" +
                      std::to_string(offenders.size()) + " problems):";
    for (std::size_t i = 0; i < offenders.size() && i < 20; ++i) msg += "\n  " + offenders[i];
    throw InputError(msg);
  }

  std::vector<EntityId> mapping;
  mapping.reserve(item_entity.size());
  for (auto e : item_entity) mapping.emplace_back(e);
  return KnowledgeGraph(maps.entities.size(), maps.relations.size(), std::move(triples),
                        std::move(mapping));
}

InteractionStore split_interactions(const Interactions& data, SplitRatios ratios,
                                    std::uint64_t seed) {
  const double total = ratios.train + ratios.valid + ratios.test;
  if (std::abs(total - 1.0) > 1e-9 || ratios.train < 0 || ratios.valid < 0 || ratios.test < 0) {
    throw ContractError("split ratios must be nonnegative and sum to 1");
  }
  std::vector<Interaction> all = data.pairs;
  RngStream rng(seed);
  rng.shuffle(std::span(all));

  const std::size_t n = all.size();
  // The epsilon keeps exact products such as 0.8 * 10 from rounding down.
  const auto cut1 = std::min(n, static_cast<std::size_t>(std::floor(ratios.train * n + 1e-9)));
  const auto cut2 = std::min(
      n, static_cast<std::size_t>(std::floor((ratios.train + ratios.valid) * n + 1e-9)));
  std::vector<Interaction> train(all.begin(), all.begin() + cut1);
  std::vector<Interaction> valid(all.begin() + cut1, all.begin() + cut2);
  std::vector<Interaction> test(all.begin() + cut2, all.end());
  return InteractionStore(data.user_count, data.item_count, std::move(train), std::move(valid),
                          std::move(test));
}

}  // namespace cgat
