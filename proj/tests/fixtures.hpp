#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cgat/dataset.hpp"
#include "cgat/graph.hpp"
#include "cgat/rng.hpp"

namespace cgat::testing {

inline EntityId E(std::uint32_t i) { return EntityId(i); }
inline RelationId R(std::uint32_t i) { return RelationId(i); }
inline UserId U(std::uint32_t i) { return UserId(i); }
inline ItemId I(std::uint32_t i) { return ItemId(i); }

// Items 0..n-1 map to entities 0..n-1.
inline std::vector<EntityId> identity_items(std::size_t n) {
  std::vector<EntityId> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(i);
  return out;
}

// Random graph with `entities` nodes, `relations` relation types and about
// `edges` triples; the first `items` entities are items.
inline KnowledgeGraph random_graph(std::uint64_t seed, std::size_t entities, std::size_t relations,
                                   std::size_t edges, std::size_t items) {
  RngStream rng(seed);
  std::vector<Triple> triples;
  for (std::size_t k = 0; k < edges; ++k) {
    const auto h = rng.uniform_index(entities);
    auto t = rng.uniform_index(entities);
    if (t == h) t = (t + 1) % entities;
    triples.push_back({EntityId(h), RelationId(rng.uniform_index(relations)), EntityId(t)});
  }
  return KnowledgeGraph(entities, relations, std::move(triples), identity_items(items));
}

struct PlantedConfig {
  std::size_t users = 50;
  std::size_t items = 100;
  std::size_t positives = 41;  // per user, all in the user's group
};

// Two latent groups. Items 0..49 form group 0 and 50..99 group 1; user u
// belongs to group u % 2. The KG links each item to its group entity; each
// user holds out one valid and one test positive.
inline Dataset planted_dataset(std::uint64_t seed, PlantedConfig cfg = {}) {
  RngStream rng(seed);
  const std::size_t half = cfg.items / 2;
  const std::uint32_t g0 = static_cast<std::uint32_t>(cfg.items);
  std::vector<Triple> triples;
  for (std::size_t i = 0; i < cfg.items; ++i) {
    const std::uint32_t group = g0 + static_cast<std::uint32_t>(i / half);
    triples.push_back({EntityId(i), R(0), EntityId(group)});
  }
  IdMaps ids;
  for (std::size_t u = 0; u < cfg.users; ++u) ids.users.intern("u" + std::to_string(u));
  for (std::size_t i = 0; i < cfg.items; ++i) ids.items.intern("i" + std::to_string(i));
  for (std::size_t e = 0; e < cfg.items + 2; ++e) ids.entities.intern("e" + std::to_string(e));
  ids.relations.intern("in_group");
  KnowledgeGraph kg(cfg.items + 2, 1, std::move(triples), identity_items(cfg.items));

  std::vector<Interaction> train, valid, test;
  for (std::size_t u = 0; u < cfg.users; ++u) {
    const std::size_t base = (u % 2) * half;
    std::vector<std::uint32_t> pool(half);
    for (std::size_t k = 0; k < half; ++k) pool[k] = static_cast<std::uint32_t>(base + k);
    rng.shuffle(std::span<std::uint32_t>(pool));
    pool.resize(cfg.positives);
    valid.push_back({UserId(u), ItemId(pool[0])});
    test.push_back({UserId(u), ItemId(pool[1])});
    for (std::size_t k = 2; k < pool.size(); ++k) train.push_back({UserId(u), ItemId(pool[k])});
  }
  InteractionStore store(cfg.users, cfg.items, std::move(train), std::move(valid), std::move(test));
  return Dataset{std::move(ids), std::move(kg), std::move(store)};
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Raw input files (ratings, kg, item map) for a dataset, using its raw ids.
inline void write_raw_files(const Dataset& data, const std::filesystem::path& dir) {
  std::string ratings, kg, items;
  for (Split s : {Split::Train, Split::Valid, Split::Test}) {
    for (const Interaction& x : data.store.interactions(s)) {
      ratings += data.ids.users.raw(x.user.value) + "\t" + data.ids.items.raw(x.item.value) + "\t1\n";
    }
  }
  for (const Triple& t : data.kg.triples()) {
    kg += data.ids.entities.raw(t.head.value) + "\t" + data.ids.relations.raw(t.relation.value) + "\t" +
          data.ids.entities.raw(t.tail.value) + "\n";
  }
  for (std::size_t i = 0; i < data.kg.item_count(); ++i) {
    items += data.ids.items.raw(static_cast<std::uint32_t>(i)) + "\t" +
             data.ids.entities.raw(data.kg.item_entity(ItemId(i)).value) + "\n";
  }
  write_file(dir / "ratings.tsv", ratings);
  write_file(dir / "kg.tsv", kg);
  write_file(dir / "item_map.tsv", items);
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cgat_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace cgat::testing
