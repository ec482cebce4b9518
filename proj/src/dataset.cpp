#include "cgat/dataset.hpp"

#include <fmt/format.h>

#include <fstream>
#include <ostream>

#include "cgat/errors.hpp"
#include "tsv.hpp"

namespace cgat {

namespace {

void write_pairs(const std::vector<Interaction>& pairs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& x : pairs) out << x.user.value << '\t' << x.item.value << '\n';
}

std::vector<Interaction> read_pairs(const std::filesystem::path& path) {
  std::vector<Interaction> pairs;
  detail::for_each_tsv_line(path, 2, [&](const auto& f, std::size_t lineno) {
    pairs.push_back({UserId(detail::parse_index(f[0], path, lineno)),
                     ItemId(detail::parse_index(f[1], path, lineno))});
  });
  return pairs;
}

}  // namespace

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_id_maps(data.ids, dir / "id_maps.tsv");
  {
    std::ofstream out(dir / "kg.tsv");
    if (!out) throw InputError("cannot write " + (dir / "kg.tsv").string());
    for (const Triple& t : data.kg.triples()) {
      out << t.head.value << '\t' << t.relation.value << '\t' << t.tail.value << '\n';
    }
  }
  {
    std::ofstream out(dir / "item_entity.tsv");
    const auto& mapping = data.kg.item_entities();
    for (std::size_t i = 0; i < mapping.size(); ++i) out << i << '\t' << mapping[i].value << '\n';
  }
  write_pairs(data.store.interactions(Split::Train), dir / "train.tsv");
  write_pairs(data.store.interactions(Split::Valid), dir / "valid.tsv");
  write_pairs(data.store.interactions(Split::Test), dir / "test.tsv");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  IdMaps ids = read_id_maps(dir / "id_maps.tsv");

  std::vector<Triple> triples;
  const auto kg_path = dir / "kg.tsv";
  detail::for_each_tsv_line(kg_path, 3, [&](const auto& f, std::size_t lineno) {
    triples.push_back({EntityId(detail::parse_index(f[0], kg_path, lineno)),
                       RelationId(detail::parse_index(f[1], kg_path, lineno)),
                       EntityId(detail::parse_index(f[2], kg_path, lineno))});
  });
  for (const Triple& t : triples) {
    if (t.head.index() >= ids.entities.size() || t.tail.index() >= ids.entities.size() ||
        t.relation.index() >= ids.relations.size()) {
      throw InputError(kg_path.string() + ": index out of range of id_maps.tsv");
    }
  }

  std::vector<EntityId> mapping(ids.items.size());
  std::vector<bool> mapped(ids.items.size(), false);
  const auto map_path = dir / "item_entity.tsv";
  detail::for_each_tsv_line(map_path, 2, [&](const auto& f, std::size_t lineno) {
    const auto item = detail::parse_index(f[0], map_path, lineno);
    const auto entity = detail::parse_index(f[1], map_path, lineno);
    if (item >= mapping.size() || entity >= ids.entities.size() || mapped[item]) {
      throw ParseError(map_path.string(), lineno, "invalid item mapping");
    }
    mapping[item] = EntityId(entity);
    mapped[item] = true;
  });
  for (std::size_t i = 0; i < mapped.size(); ++i) {
    if (!mapped[i]) throw InputError(map_path.string() + ": item " + std::to_string(i) + " unmapped");
  }

  KnowledgeGraph kg(ids.entities.size(), ids.relations.size(), std::move(triples),
                    std::move(mapping));
  InteractionStore store(ids.users.size(), ids.items.size(), read_pairs(dir / "train.tsv"),
                         read_pairs(dir / "valid.tsv"), read_pairs(dir / "test.tsv"));
  return Dataset{std::move(ids), std::move(kg), std::move(store)};
}

DatasetStats dataset_stats(const Dataset& data) {
  DatasetStats s;
  s.users = data.store.user_count();
  s.items = data.store.item_count();
  s.interactions = data.store.interactions(Split::Train).size() +
                   data.store.interactions(Split::Valid).size() +
                   data.store.interactions(Split::Test).size();
  if (s.users > 0 && s.items > 0) {
    s.density = static_cast<double>(s.interactions) / (static_cast<double>(s.users) * s.items);
  }
  s.entities = data.kg.entity_count();
  s.relations = data.kg.original_relation_count();
  s.triples = data.kg.triples().size();
  return s;
}

void print_stats(std::ostream& out, const DatasetStats& s) {
  out << fmt::format("#Users\t{}\n#Items\t{}\n#Interactions\t{}\n#Density\t{:.4f}%\n", s.users,
                     s.items, s.interactions, 100.0 * s.density);
  out << fmt::format("#Entities\t{}\n#Relations\t{}\n#Triples\t{}\n", s.entities, s.relations,
                     s.triples);
}

}  // namespace cgat
