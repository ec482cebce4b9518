#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cgat/eval.hpp"
#include "cgat/model.hpp"
#include "cgat/sampler.hpp"
#include "cgat/training.hpp"

namespace cgat {

struct DataPaths {
  std::string ratings;
  std::string kg;
  std::string item_map;
  std::optional<double> threshold;
  std::string dataset;     // preprocessed dataset directory
  std::string cache;       // walk cache file; default <dataset>/walk_cache.bin
  std::string out;         // output directory
  std::string checkpoint;  // checkpoint to evaluate
};

// Everything a run needs. The walk context size always follows model.S.
struct RunConfig {
  DataPaths data;
  WalkConfig walk;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  std::uint64_t seed = 2020;
  std::size_t workers = 1;

  // Pushes seed / workers / S into the sub-configs.
  void sync();
  std::filesystem::path cache_path() const;
};

// One settable key. Key names are unique across sections.
struct ConfigField {
  std::string section;
  std::string key;
  std::string help;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<ConfigField>& config_fields();
const ConfigField* find_field(std::string_view key);

// Sets one key from its text form; throws InputError on unknown keys or
// malformed values.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

// "[section]" headers and "key = value" lines; '#' and ';' start comments.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

// Every key with its current value, grouped by section; reading it back
// reproduces the configuration.
std::string config_to_text(const RunConfig& cfg);

}  // namespace cgat
