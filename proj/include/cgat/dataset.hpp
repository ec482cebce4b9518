#pragma once

#include <filesystem>
#include <iosfwd>

#include "cgat/graph.hpp"

namespace cgat {

// A preprocessed, densely indexed dataset as written by `cgat preprocess`.
struct Dataset {
  IdMaps ids;
  KnowledgeGraph kg;
  InteractionStore store;
};

// Directory layout: id_maps.tsv, kg.tsv (dense h r t), item_entity.tsv,
// train.tsv / valid.tsv / test.tsv (dense user item).
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  double density = 0.0;
  std::size_t entities = 0;
  std::size_t relations = 0;  // original relations
  std::size_t triples = 0;
};

DatasetStats dataset_stats(const Dataset& data);
void print_stats(std::ostream& out, const DatasetStats& stats);

}  // namespace cgat
