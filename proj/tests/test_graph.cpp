#include <doctest.h>

#include <algorithm>
#include <set>

#include "cgat/dataset.hpp"
#include "cgat/errors.hpp"
#include "cgat/graph.hpp"
#include "fixtures.hpp"

using namespace cgat;
using namespace cgat::testing;

namespace {

Interactions n_interactions(std::size_t n) {
  Interactions data;
  data.user_count = n;
  data.item_count = 1;
  for (std::size_t k = 0; k < n; ++k) data.pairs.push_back({UserId(k), I(0)});
  return data;
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("IdMap interns in first-appearance order and round-trips") {
  IdMap m;
  CHECK(m.intern("b") == 0);
  CHECK(m.intern("a") == 1);
  CHECK(m.intern("b") == 0);
  CHECK(m.size() == 2);
  CHECK(m.raw(1) == "a");
  CHECK(*m.find("a") == 1);
  CHECK_FALSE(m.find("zzz").has_value());
}

TEST_CASE("id map file round trip") {
  const auto dir = temp_dir("idmaps");
  IdMaps maps;
  maps.users.intern("alice");
  maps.items.intern("song 1");
  maps.items.intern("song 2");
  maps.entities.intern("m.01");
  maps.relations.intern("film.genre");
  write_id_maps(maps, dir / "ids.tsv");
  const IdMaps back = read_id_maps(dir / "ids.tsv");
  CHECK(back.users.raw(0) == "alice");
  CHECK(back.items.size() == 2);
  CHECK(*back.items.find("song 2") == 1);
  CHECK(back.entities.raw(0) == "m.01");
  CHECK(back.relations.raw(0) == "film.genre");
}

TEST_CASE("single triple yields forward and inverse adjacency") {
  const KnowledgeGraph kg(2, 1, {{E(0), R(0), E(1)}}, {E(0)});
  REQUIRE(kg.neighbors(E(0)).size() == 1);
  CHECK(kg.neighbors(E(0))[0] == Neighbor{R(0), E(1)});
  REQUIRE(kg.neighbors(E(1)).size() == 1);
  CHECK(kg.neighbors(E(1))[0] == Neighbor{kg.inverse(R(0)), E(0)});
  CHECK(kg.relation_count() == 2);
  CHECK(kg.embedding_relation_count() == 3);
  CHECK(kg.inverse(R(0)) != R(0));
  CHECK(kg.self_relation() == R(2));
}

TEST_CASE("a repeated triple is stored once") {
  const KnowledgeGraph kg(2, 1, {{E(0), R(0), E(1)}, {E(0), R(0), E(1)}}, {E(0)});
  CHECK(kg.triples().size() == 1);
  CHECK(kg.neighbors(E(0)).size() == 1);
}

TEST_CASE("chain, isolated entity and star contexts") {
  // a=0 -r0-> b=1 -r1-> c=2, d=3 isolated
  const KnowledgeGraph chain(4, 2, {{E(0), R(0), E(1)}, {E(1), R(1), E(2)}}, {E(0)});
  const auto ctx = local_context(chain, E(1));
  const std::set<Neighbor> got(ctx.begin(), ctx.end());
  CHECK(got == std::set<Neighbor>{{chain.inverse(R(0)), E(0)}, {R(1), E(2)}});
  CHECK(local_context(chain, E(3)).empty());

  std::vector<Triple> spokes;
  for (std::uint32_t k = 1; k <= 5; ++k) spokes.push_back({E(0), R(0), E(k)});
  const KnowledgeGraph star(6, 1, spokes, {E(0)});
  CHECK(local_context(star, E(0)).size() == 5);
  CHECK(local_context(star, E(3)).size() == 1);
}

TEST_CASE("adjacency is closed under reversal") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const KnowledgeGraph kg = random_graph(seed, 12, 3, 20, 4);
    for (std::uint32_t h = 0; h < 12; ++h) {
      for (const Neighbor& n : kg.neighbors(E(h))) {
        const auto back = kg.neighbor_entities(n.entity);
        CHECK(std::binary_search(back.begin(), back.end(), E(h)));
        CHECK(kg.adjacent(n.entity, E(h)));
      }
    }
  }
}

TEST_CASE("items must map to distinct entities") {
  CHECK_THROWS_AS(KnowledgeGraph(3, 1, {}, {E(1), E(1)}), ContractError);
}

TEST_CASE("interaction loading") {
  const auto dir = temp_dir("ratings");
  SUBCASE("strict threshold") {
    write_file(dir / "r.tsv", "u1\ti1\t5\nu1\ti2\t4\nu2\ti3\t3\n");
    IdMaps maps;
    const auto data = load_interactions(dir / "r.tsv", 4.0, maps);
    CHECK(data.pairs.size() == 1);
    CHECK(maps.items.size() == 1);
  }
  SUBCASE("no threshold keeps everything and collapses duplicates") {
    write_file(dir / "r.tsv", "# header\nu1\ti1\t1\nu1\ti1\t2\nu2\ti1\t0\n");
    IdMaps maps;
    const auto data = load_interactions(dir / "r.tsv", std::nullopt, maps);
    CHECK(data.pairs.size() == 2);
    CHECK(data.user_count == 2);
    CHECK(data.item_count == 1);
  }
  SUBCASE("first-appearance indexing is stable across runs") {
    write_file(dir / "r.tsv", "z\tq\t1\na\tp\t1\nz\tp\t1\n");
    IdMaps m1, m2;
    const auto d1 = load_interactions(dir / "r.tsv", std::nullopt, m1);
    const auto d2 = load_interactions(dir / "r.tsv", std::nullopt, m2);
    CHECK(m1.users.raw(0) == "z");
    CHECK(m1.items.raw(1) == "p");
    CHECK(d1.pairs == d2.pairs);
  }
  SUBCASE("malformed lines report their line number") {
    write_file(dir / "r.tsv", "u1\ti1\t5\nu2\ti2\n");
    IdMaps maps;
    try {
      load_interactions(dir / "r.tsv", std::nullopt, maps);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    write_file(dir / "r.tsv", "u1\ti1\tfive\n");
    CHECK_THROWS_AS(load_interactions(dir / "r.tsv", std::nullopt, maps), ParseError);
  }
  SUBCASE("nothing retained is an input error") {
    write_file(dir / "r.tsv", "u1\ti1\t1\n");
    IdMaps maps;
    CHECK_THROWS_AS(load_interactions(dir / "r.tsv", 4.0, maps), InputError);
  }
  SUBCASE("missing file") {
    IdMaps maps;
    CHECK_THROWS_AS(load_interactions(dir / "absent.tsv", std::nullopt, maps), InputError);
  }
}

TEST_CASE("KG loading") {
  const auto dir = temp_dir("kg");
  write_file(dir / "r.tsv", "u1\ti1\t1\nu1\ti2\t1\n");
  IdMaps maps;
  load_interactions(dir / "r.tsv", std::nullopt, maps);
  SUBCASE("valid files") {
    write_file(dir / "kg.tsv", "m1\tgenre\tg\nm2\tgenre\tg\nm1\tgenre\tg\n");
    write_file(dir / "map.tsv", "i1\tm1\ni2\tm2\n");
    const KnowledgeGraph kg = load_kg(dir / "kg.tsv", dir / "map.tsv", maps);
    CHECK(kg.entity_count() == 3);
    CHECK(kg.original_relation_count() == 1);
    CHECK(kg.triples().size() == 2);
    CHECK(kg.item_count() == 2);
    CHECK(kg.item_entity(I(1)) == E(*maps.entities.find("m2")));
  }
  SUBCASE("item mapped to an unknown entity") {
    write_file(dir / "kg.tsv", "m1\tgenre\tg\n");
    write_file(dir / "map.tsv", "i1\tm1\ni2\tnowhere\n");
    CHECK_THROWS_AS(load_kg(dir / "kg.tsv", dir / "map.tsv", maps), InputError);
  }
  SUBCASE("item mapped twice") {
    write_file(dir / "kg.tsv", "m1\tgenre\tg\nm2\tgenre\tg\n");
    write_file(dir / "map.tsv", "i1\tm1\ni2\tm2\ni1\tm2\n");
    CHECK_THROWS_AS(load_kg(dir / "kg.tsv", dir / "map.tsv", maps), InputError);
  }
  SUBCASE("item without an entity") {
    write_file(dir / "kg.tsv", "m1\tgenre\tg\n");
    write_file(dir / "map.tsv", "i1\tm1\n");
    CHECK_THROWS_AS(load_kg(dir / "kg.tsv", dir / "map.tsv", maps), InputError);
  }
  SUBCASE("malformed triple") {
    write_file(dir / "kg.tsv", "m1\tgenre\n");
    write_file(dir / "map.tsv", "i1\tm1\n");
    CHECK_THROWS_AS(load_kg(dir / "kg.tsv", dir / "map.tsv", maps), ParseError);
  }
}

TEST_CASE("split sizes use floor cuts with the remainder in test") {
  const auto store = split_interactions(n_interactions(10), {}, 1);
  CHECK(store.interactions(Split::Train).size() == 6);
  CHECK(store.interactions(Split::Valid).size() == 2);
  CHECK(store.interactions(Split::Test).size() == 2);

  const auto big = split_interactions(n_interactions(21173), {}, 2020);
  CHECK(big.interactions(Split::Train).size() == 12703);
  CHECK(big.interactions(Split::Valid).size() == 4235);
  CHECK(big.interactions(Split::Test).size() == 4235);
}

TEST_CASE("split is deterministic and partitions the data") {
  Interactions data;
  data.user_count = 30;
  data.item_count = 40;
  RngStream gen(3);
  std::set<Interaction> all;
  while (all.size() < 300) all.insert({UserId(gen.uniform_index(30)), ItemId(gen.uniform_index(40))});
  data.pairs.assign(all.begin(), all.end());

  const auto a = split_interactions(data, {}, 11);
  const auto b = split_interactions(data, {}, 11);
  const auto c = split_interactions(data, {}, 12);
  CHECK(a.interactions(Split::Train) == b.interactions(Split::Train));
  CHECK(a.interactions(Split::Test) == b.interactions(Split::Test));
  CHECK(a.interactions(Split::Train) != c.interactions(Split::Train));

  std::set<Interaction> seen;
  for (Split s : {Split::Train, Split::Valid, Split::Test}) {
    for (const Interaction& x : a.interactions(s)) {
      CHECK(seen.insert(x).second);
      for (Split other : {Split::Train, Split::Valid, Split::Test}) {
        CHECK(a.contains(other, x.user, x.item) == (other == s));
      }
    }
  }
  CHECK(seen == all);
}

TEST_CASE("a pair in two splits is rejected") {
  CHECK_THROWS_AS(InteractionStore(1, 2, {{U(0), I(0)}}, {{U(0), I(0)}}, {}), InputError);
}

TEST_CASE("positives are sorted per user") {
  const InteractionStore store(2, 5, {{U(0), I(4)}, {U(0), I(1)}, {U(1), I(2)}}, {}, {});
  const auto p = store.positives(Split::Train, U(0));
  REQUIRE(p.size() == 2);
  CHECK(p[0] == I(1));
  CHECK(p[1] == I(4));
  CHECK(store.positives(Split::Test, U(1)).empty());
}

TEST_CASE("split names round trip") {
  for (Split s : {Split::Train, Split::Valid, Split::Test}) CHECK(parse_split(split_name(s)) == s);
  CHECK_THROWS_AS(parse_split("holdout"), InputError);
}

TEST_CASE("dataset directory round trip") {
  const auto dir = temp_dir("dataset");
  const Dataset data = planted_dataset(4, {6, 10, 4});
  save_dataset(data, dir);
  const Dataset back = load_dataset(dir);
  CHECK(back.kg.triples() == data.kg.triples());
  CHECK(back.kg.item_entities() == data.kg.item_entities());
  CHECK(back.kg.entity_count() == data.kg.entity_count());
  for (Split s : {Split::Train, Split::Valid, Split::Test}) {
    CHECK(back.store.interactions(s) == data.store.interactions(s));
  }
  CHECK(back.ids.users.raw(3) == "u3");
  const auto stats = dataset_stats(back);
  CHECK(stats.users == 6);
  CHECK(stats.items == 10);
  CHECK(stats.interactions == 6 * 4);
  CHECK(stats.triples == 10);
  CHECK(stats.density == doctest::Approx(24.0 / 60.0));
}

}  // TEST_SUITE
