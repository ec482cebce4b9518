#include "cgat/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cgat/checkpoint.hpp"
#include "cgat/errors.hpp"
#include "cgat/model.hpp"
#include "cgat/scorer.hpp"

namespace cgat {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

fs::path prepare_out(const RunConfig& cfg) {
  if (cfg.data.out.empty()) return {};
  const fs::path dir(cfg.data.out);
  fs::create_directories(dir);
  write_text(dir / "config.ini", config_to_text(cfg));
  return dir;
}

void require(const std::string& value, const char* key) {
  if (value.empty()) throw InputError(fmt::format("missing required setting '{}'", key));
}

bool walk_matches(const WalkConfig& a, const WalkConfig& b) {
  return a.gamma == b.gamma && a.num_walks == b.num_walks && a.walk_length == b.walk_length &&
         a.context_size == b.context_size;
}

// Loads the cache when one exists for this configuration, otherwise builds
// it in memory.
WalkCache obtain_cache(const RunConfig& cfg, const KnowledgeGraph& kg, std::ostream& log) {
  const fs::path path = cfg.cache_path();
  const std::uint64_t seed = derive_seed(cfg.seed, "walks");
  if (fs::exists(path)) {
    WalkCache cache = WalkCache::load(path);
    if (cache.item_count() != kg.item_count()) {
      throw InputError(path.string() + ": walk cache does not match the dataset");
    }
    if (walk_matches(cache.config(), cfg.walk) && cache.seed() == seed) return cache;
    log << "walk cache " << path.string() << " was built with other settings; rebuilding\n";
  }
  return build_walk_cache(kg, cfg.walk, seed, cfg.workers);
}

RunConfig checked(RunConfig cfg) {
  cfg.sync();
  cfg.walk.validate();
  cfg.model.validate();
  cfg.train.validate_config();
  cfg.eval.validate();
  return cfg;
}

EvalReport evaluate_model(const CgatModel& model, const Dataset& data, const WalkCache& cache,
                          const RunConfig& cfg) {
  auto ctx = sample_eval_contexts(data.kg, data.store, cfg.model.S, cfg.model.N,
                                  derive_seed(cfg.seed, "eval"));
  CgatScorer scorer(model, cache, std::move(ctx));
  return evaluate(scorer, data.store, cfg.eval);
}

TrainResult train_on(const RunConfig& cfg, const Dataset& data, const WalkCache& cache,
                     const fs::path& out, std::ostream& log) {
  CgatModel model(cfg.model, data.store.user_count(), data.kg);
  TrainResult result;
  result.report = train(model, data.kg, data.store, cache, cfg.train, [&](const EpochRecord& r) {
    log << fmt::format("epoch {:3d}  l_bpr {:.5f}  l_kg {:.5f}  l2 {:.5f}  hr20_valid {:.4f}  {:.1f}s\n",
                       r.epoch, r.l_bpr, r.l_kg, r.l2, r.hr20_valid, r.seconds);
  });
  result.test = evaluate_model(model, data, cache, cfg);
  if (!out.empty()) {
    diff::save_checkpoint(model.params(), model.checkpoint_header(), out / "checkpoint.bin");
    write_text(out / "report.tsv", result.report.to_text());
    write_text(out / "timing.tsv", result.report.timing_text());
    write_text(out / "test_report.tsv", result.test.to_text());
  }
  return result;
}

}  // namespace

Dataset cmd_preprocess(const RunConfig& raw, std::ostream& out) {
  const RunConfig cfg = checked(raw);
  require(cfg.data.ratings, "ratings");
  require(cfg.data.kg, "kg");
  require(cfg.data.item_map, "item_map");
  require(cfg.data.out, "out");
  IdMaps ids;
  Interactions all = load_interactions(cfg.data.ratings, cfg.data.threshold, ids);
  KnowledgeGraph kg = load_kg(cfg.data.kg, cfg.data.item_map, ids);
  InteractionStore store = split_interactions(all, {}, derive_seed(cfg.seed, "split"));
  Dataset data{std::move(ids), std::move(kg), std::move(store)};
  const fs::path dir = prepare_out(cfg);
  save_dataset(data, dir);
  print_stats(out, dataset_stats(data));
  return data;
}

WalkCache cmd_build_cache(const RunConfig& raw, std::ostream& log) {
  const RunConfig cfg = checked(raw);
  require(cfg.data.dataset, "dataset");
  prepare_out(cfg);
  const Dataset data = load_dataset(cfg.data.dataset);
  WalkCache cache = build_walk_cache(data.kg, cfg.walk, derive_seed(cfg.seed, "walks"), cfg.workers);
  const fs::path path = cfg.cache_path();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  cache.save(path);
  log << "wrote " << cache.item_count() << " item contexts to " << path.string() << "\n";
  return cache;
}

TrainResult cmd_train(const RunConfig& raw, std::ostream& log) {
  const RunConfig cfg = checked(raw);
  require(cfg.data.dataset, "dataset");
  const fs::path out = prepare_out(cfg);
  const Dataset data = load_dataset(cfg.data.dataset);
  const WalkCache cache = obtain_cache(cfg, data.kg, log);
  TrainResult result = train_on(cfg, data, cache, out, log);
  log << result.test.to_text();
  return result;
}

EvalReport cmd_evaluate(const RunConfig& raw, std::ostream& out) {
  const RunConfig cfg = checked(raw);
  require(cfg.data.dataset, "dataset");
  require(cfg.data.checkpoint, "checkpoint");
  const fs::path dir = prepare_out(cfg);
  const Dataset data = load_dataset(cfg.data.dataset);
  const WalkCache cache = obtain_cache(cfg, data.kg, std::cerr);
  CgatModel model(cfg.model, data.store.user_count(), data.kg);
  diff::load_checkpoint(cfg.data.checkpoint, model.checkpoint_header(), model.params());
  const EvalReport report = evaluate_model(model, data, cache, cfg);
  out << report.to_text();
  if (!dir.empty()) write_text(dir / "eval_report.tsv", report.to_text());
  return report;
}

const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> names{"full", "w/oL", "w/oG", "w/oUA"};
  return names;
}

ModelConfig ablation_variant(const ModelConfig& base, const std::string& variant) {
  ModelConfig m = base;
  m.disable_local = m.disable_nonlocal = m.disable_user_attention = false;
  m.gate_override.reset();
  if (variant == "w/oL") m.disable_local = true;
  else if (variant == "w/oG") m.disable_nonlocal = true;
  else if (variant == "w/oUA") m.disable_user_attention = true;
  else if (variant != "full") throw InputError("unknown ablation variant '" + variant + "'");
  return m;
}

std::string ablation_to_text(const std::vector<AblationRow>& rows) {
  std::string out = "variant\thr20\n";
  for (const auto& r : rows) out += fmt::format("{}\t{}\n", r.variant, r.hr20);
  return out;
}

std::vector<AblationRow> parse_ablation(const std::string& text) {
  std::vector<AblationRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "variant\thr20") continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("<ablation>", lineno, "expected 2 fields");
    AblationRow r;
    r.variant = line.substr(0, tab);
    try {
      r.hr20 = std::stod(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError("<ablation>", lineno, "not a number");
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& raw, std::ostream& log) {
  const RunConfig cfg = checked(raw);
  require(cfg.data.dataset, "dataset");
  const fs::path out = prepare_out(cfg);
  const Dataset data = load_dataset(cfg.data.dataset);
  const WalkCache cache = obtain_cache(cfg, data.kg, log);
  std::vector<AblationRow> rows;
  for (const std::string& v : ablation_variants()) {
    RunConfig run = cfg;
    run.model = ablation_variant(cfg.model, v);
    run.eval.ks = {20};
    log << "== " << v << "\n";
    fs::path sub;
    if (!out.empty()) {
      sub = out / (v == "full" ? v : "wo" + v.substr(3));
      fs::create_directories(sub);
      write_text(sub / "config.ini", config_to_text(run));
    }
    const TrainResult r = train_on(run, data, cache, sub, log);
    rows.push_back({v, r.test.at(20).hit_ratio});
  }
  if (!out.empty()) write_text(out / "ablation.tsv", ablation_to_text(rows));
  return rows;
}

std::string sweep_to_text(const std::string& param, const std::vector<SweepRow>& rows) {
  std::string out = fmt::format("{}\tK\tprecision\trecall\thit_ratio\n", param);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.report.ks.size(); ++i) {
      const auto& m = row.report.metrics[i];
      out += fmt::format("{}\t{}\t{}\t{}\t{}\n", row.value, row.report.ks[i], m.precision,
                         m.recall, m.hit_ratio);
    }
  }
  return out;
}

std::vector<SweepRow> cmd_sweep(const RunConfig& raw, const std::string& param,
                                const std::vector<std::string>& values, std::ostream& log) {
  if (find_field(param) == nullptr) throw InputError("unknown sweep parameter '" + param + "'");
  if (values.empty()) throw InputError("sweep needs at least one value");
  const RunConfig base = checked(raw);
  require(base.data.dataset, "dataset");
  const fs::path out = prepare_out(base);
  const Dataset data = load_dataset(base.data.dataset);
  std::vector<SweepRow> rows;
  for (const std::string& value : values) {
    RunConfig run = base;
    set_config_value(run, param, value);
    run = checked(run);
    log << "== " << param << " = " << value << "\n";
    const WalkCache cache = obtain_cache(run, data.kg, log);
    fs::path sub;
    if (!out.empty()) {
      sub = out / fmt::format("{}_{}", param, value);
      fs::create_directories(sub);
      write_text(sub / "config.ini", config_to_text(run));
    }
    rows.push_back({value, train_on(run, data, cache, sub, log).test});
  }
  if (!out.empty()) write_text(out / "sweep.tsv", sweep_to_text(param, rows));
  return rows;
}

namespace {

struct Overrides {
  std::string config_file;
  std::map<std::string, std::string> values;
};

void add_config_options(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--config", ov.config_file, "config file (sections and key = value lines)");
  for (const auto& f : config_fields()) {
    std::string names = "--" + f.key;
    if (f.key.find('_') != std::string::npos) {
      std::string dashed = f.key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      names += ",--" + dashed;
    }
    cmd->add_option(names, ov.values[f.key], f.help)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
}

RunConfig resolve(CLI::App* cmd, const Overrides& ov) {
  RunConfig cfg;
  if (!ov.config_file.empty()) apply_config_file(cfg, ov.config_file);
  for (const auto& f : config_fields()) {
    if (cmd->count("--" + f.key) > 0) set_config_value(cfg, f.key, ov.values.at(f.key));
  }
  cfg.sync();
  return cfg;
}

std::vector<std::string> split_values(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, ',')) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"CGAT knowledge-graph recommender"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app;
    Overrides ov;
  };
  std::map<std::string, std::unique_ptr<Sub>> subs;
  auto make = [&](const std::string& name, const std::string& desc) {
    auto s = std::make_unique<Sub>();
    s->app = app.add_subcommand(name, desc);
    add_config_options(s->app, s->ov);
    Sub* raw = s.get();
    subs.emplace(name, std::move(s));
    return raw;
  };
  make("preprocess", "index raw files, split interactions, write a dataset directory");
  make("build-cache", "precompute non-local walk contexts");
  make("train", "train CGAT and write checkpoint and reports");
  make("evaluate", "rank items with a trained checkpoint");
  make("ablate", "train the full model and its three ablations");
  Sub* sweep = make("sweep", "train and evaluate once per parameter value");
  std::string sweep_param;
  std::string sweep_values;
  sweep->app->add_option("--param", sweep_param, "config key to vary")->required();
  sweep->app->add_option("--values", sweep_values, "comma-separated values")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    for (auto& [name, sub] : subs) {
      if (!sub->app->parsed()) continue;
      const RunConfig cfg = resolve(sub->app, sub->ov);
      if (name == "preprocess") cmd_preprocess(cfg, std::cout);
      else if (name == "build-cache") cmd_build_cache(cfg, std::cerr);
      else if (name == "train") cmd_train(cfg, std::cerr);
      else if (name == "evaluate") cmd_evaluate(cfg, std::cout);
      else if (name == "ablate") std::cout << ablation_to_text(cmd_ablate(cfg, std::cerr));
      else if (name == "sweep") {
        std::cout << sweep_to_text(sweep_param,
                                   cmd_sweep(cfg, sweep_param, split_values(sweep_values), std::cerr));
      }
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace cgat
