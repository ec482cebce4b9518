#include "cgat/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "cgat/errors.hpp"

namespace cgat {

void RunConfig::sync() {
  walk.context_size = model.S;
  train.seed = seed;
  train.workers = workers;
  eval.seed = seed;
  eval.workers = workers;
}

std::filesystem::path RunConfig::cache_path() const {
  if (!data.cache.empty()) return data.cache;
  return std::filesystem::path(data.dataset) / "walk_cache.bin";
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw InputError(fmt::format("{}: expected a non-negative integer, got '{}'", key, v));
  }
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const std::string s(v);
    const double out = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw InputError(fmt::format("{}: expected a number, got '{}'", key, v));
  }
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InputError(fmt::format("{}: expected true or false, got '{}'", key, v));
}

std::vector<std::size_t> to_list(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    auto end = v.find(',', start);
    if (end == std::string_view::npos) end = v.size();
    out.push_back(to_u64(key, trim(v.substr(start, end - start))));
    start = end + 1;
  }
  return out;
}

std::string num(double v) { return fmt::format("{}", v); }
std::string flag(bool v) { return v ? "true" : "false"; }

using Fields = std::vector<ConfigField>;

template <typename Get, typename Set>
void add(Fields& f, const char* section, const char* key, const char* help, Get get, Set set) {
  f.push_back({section, key, help, set, get});
}

Fields build_fields() {
  Fields f;
  // [data]
  add(f, "data", "ratings", "ratings file: user<TAB>item<TAB>rating",
      [](const RunConfig& c) { return c.data.ratings; },
      [](RunConfig& c, std::string_view v) { c.data.ratings = v; });
  add(f, "data", "kg", "knowledge graph file: head<TAB>relation<TAB>tail",
      [](const RunConfig& c) { return c.data.kg; },
      [](RunConfig& c, std::string_view v) { c.data.kg = v; });
  add(f, "data", "item_map", "item to entity file: item<TAB>entity",
      [](const RunConfig& c) { return c.data.item_map; },
      [](RunConfig& c, std::string_view v) { c.data.item_map = v; });
  add(f, "data", "threshold", "keep ratings strictly above this value (empty: keep all)",
      [](const RunConfig& c) { return c.data.threshold ? num(*c.data.threshold) : std::string(); },
      [](RunConfig& c, std::string_view v) {
        if (v.empty() || v == "none") c.data.threshold.reset();
        else c.data.threshold = to_double("threshold", v);
      });
  add(f, "data", "dataset", "preprocessed dataset directory",
      [](const RunConfig& c) { return c.data.dataset; },
      [](RunConfig& c, std::string_view v) { c.data.dataset = v; });
  add(f, "data", "cache", "walk cache file (default: <dataset>/walk_cache.bin)",
      [](const RunConfig& c) { return c.data.cache; },
      [](RunConfig& c, std::string_view v) { c.data.cache = v; });
  add(f, "data", "out", "output directory",
      [](const RunConfig& c) { return c.data.out; },
      [](RunConfig& c, std::string_view v) { c.data.out = v; });
  add(f, "data", "checkpoint", "checkpoint file",
      [](const RunConfig& c) { return c.data.checkpoint; },
      [](RunConfig& c, std::string_view v) { c.data.checkpoint = v; });
  // [walk]
  add(f, "walk", "gamma", "walk bias, in (0, 0.5)",
      [](const RunConfig& c) { return num(c.walk.gamma); },
      [](RunConfig& c, std::string_view v) { c.walk.gamma = to_double("gamma", v); });
  add(f, "walk", "M", "walks per item",
      [](const RunConfig& c) { return std::to_string(c.walk.num_walks); },
      [](RunConfig& c, std::string_view v) { c.walk.num_walks = to_u64("M", v); });
  add(f, "walk", "L", "walk length",
      [](const RunConfig& c) { return std::to_string(c.walk.walk_length); },
      [](RunConfig& c, std::string_view v) { c.walk.walk_length = to_u64("L", v); });
  // [model]
  add(f, "model", "d", "embedding width",
      [](const RunConfig& c) { return std::to_string(c.model.d); },
      [](RunConfig& c, std::string_view v) { c.model.d = to_u64("d", v); });
  add(f, "model", "S", "local neighbors and non-local context size",
      [](const RunConfig& c) { return std::to_string(c.model.S); },
      [](RunConfig& c, std::string_view v) { c.model.S = to_u64("S", v); });
  add(f, "model", "N", "history items",
      [](const RunConfig& c) { return std::to_string(c.model.N); },
      [](RunConfig& c, std::string_view v) { c.model.N = to_u64("N", v); });
  add(f, "model", "disable_local", "drop the local context (w/o L)",
      [](const RunConfig& c) { return flag(c.model.disable_local); },
      [](RunConfig& c, std::string_view v) { c.model.disable_local = to_bool("disable_local", v); });
  add(f, "model", "disable_nonlocal", "drop the non-local context (w/o G)",
      [](const RunConfig& c) { return flag(c.model.disable_nonlocal); },
      [](RunConfig& c, std::string_view v) {
        c.model.disable_nonlocal = to_bool("disable_nonlocal", v);
      });
  add(f, "model", "disable_user_attention", "replace the user preference with ones (w/o UA)",
      [](const RunConfig& c) { return flag(c.model.disable_user_attention); },
      [](RunConfig& c, std::string_view v) {
        c.model.disable_user_attention = to_bool("disable_user_attention", v);
      });
  // [train]
  add(f, "train", "eta", "Adam learning rate",
      [](const RunConfig& c) { return num(c.train.eta); },
      [](RunConfig& c, std::string_view v) { c.train.eta = to_double("eta", v); });
  add(f, "train", "lambda1", "KG loss weight",
      [](const RunConfig& c) { return num(c.train.lambda1); },
      [](RunConfig& c, std::string_view v) { c.train.lambda1 = to_double("lambda1", v); });
  add(f, "train", "lambda2", "L2 weight",
      [](const RunConfig& c) { return num(c.train.lambda2); },
      [](RunConfig& c, std::string_view v) { c.train.lambda2 = to_double("lambda2", v); });
  add(f, "train", "B", "BPR batch size",
      [](const RunConfig& c) { return std::to_string(c.train.batch_size); },
      [](RunConfig& c, std::string_view v) { c.train.batch_size = to_u64("B", v); });
  add(f, "train", "n_neg", "negatives per observed interaction",
      [](const RunConfig& c) { return std::to_string(c.train.n_neg); },
      [](RunConfig& c, std::string_view v) { c.train.n_neg = to_u64("n_neg", v); });
  add(f, "train", "epochs", "maximum epochs",
      [](const RunConfig& c) { return std::to_string(c.train.epochs); },
      [](RunConfig& c, std::string_view v) { c.train.epochs = to_u64("epochs", v); });
  add(f, "train", "max_batches", "stop after this many batches (0: no limit)",
      [](const RunConfig& c) { return std::to_string(c.train.max_batches); },
      [](RunConfig& c, std::string_view v) { c.train.max_batches = to_u64("max_batches", v); });
  add(f, "train", "patience", "early-stopping patience in epochs",
      [](const RunConfig& c) { return std::to_string(c.train.patience); },
      [](RunConfig& c, std::string_view v) { c.train.patience = to_u64("patience", v); });
  add(f, "train", "fixed_negatives", "sample negatives once instead of every epoch",
      [](const RunConfig& c) { return flag(c.train.fixed_negatives); },
      [](RunConfig& c, std::string_view v) {
        c.train.fixed_negatives = to_bool("fixed_negatives", v);
      });
  add(f, "train", "validate", "track validation HR@20 for early stopping",
      [](const RunConfig& c) { return flag(c.train.validate); },
      [](RunConfig& c, std::string_view v) { c.train.validate = to_bool("validate", v); });
  // [eval]
  add(f, "eval", "K", "comma-separated cutoffs",
      [](const RunConfig& c) {
        std::string out;
        for (std::size_t k : c.eval.ks) out += (out.empty() ? "" : ",") + std::to_string(k);
        return out;
      },
      [](RunConfig& c, std::string_view v) { c.eval.ks = to_list("K", v); });
  add(f, "eval", "split", "valid or test",
      [](const RunConfig& c) { return std::string(split_name(c.eval.split)); },
      [](RunConfig& c, std::string_view v) { c.eval.split = parse_split(v); });
  add(f, "eval", "candidates", "full or sampled",
      [](const RunConfig& c) {
        return std::string(c.eval.policy == CandidatePolicy::Full ? "full" : "sampled");
      },
      [](RunConfig& c, std::string_view v) {
        if (v == "full") c.eval.policy = CandidatePolicy::Full;
        else if (v == "sampled") c.eval.policy = CandidatePolicy::Sampled;
        else throw InputError(fmt::format("candidates: expected full or sampled, got '{}'", v));
      });
  add(f, "eval", "sampled_negatives", "negatives per user in sampled mode",
      [](const RunConfig& c) { return std::to_string(c.eval.sampled_negatives); },
      [](RunConfig& c, std::string_view v) {
        c.eval.sampled_negatives = to_u64("sampled_negatives", v);
      });
  add(f, "eval", "include_valid_in_candidates", "keep valid positives among test candidates",
      [](const RunConfig& c) { return flag(c.eval.include_valid_in_candidates); },
      [](RunConfig& c, std::string_view v) {
        c.eval.include_valid_in_candidates = to_bool("include_valid_in_candidates", v);
      });
  // [run]
  add(f, "run", "seed", "root seed",
      [](const RunConfig& c) { return std::to_string(c.seed); },
      [](RunConfig& c, std::string_view v) { c.seed = to_u64("seed", v); });
  add(f, "run", "workers", "threads for cache building and evaluation",
      [](const RunConfig& c) { return std::to_string(c.workers); },
      [](RunConfig& c, std::string_view v) { c.workers = to_u64("workers", v); });
  return f;
}

}  // namespace

const std::vector<ConfigField>& config_fields() {
  static const Fields fields = build_fields();
  return fields;
}

const ConfigField* find_field(std::string_view key) {
  for (const auto& f : config_fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  const ConfigField* f = find_field(key);
  if (f == nullptr) throw InputError(fmt::format("unknown config key '{}'", key));
  f->set(cfg, trim(value));
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ParseError(origin, lineno, "unterminated section header");
      section = trim(std::string_view(body).substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(origin, lineno, "expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const ConfigField* f = find_field(key);
    if (f == nullptr) throw ParseError(origin, lineno, "unknown key '" + key + "'");
    if (!section.empty() && f->section != section) {
      throw ParseError(origin, lineno,
                       fmt::format("key '{}' belongs to section [{}]", key, f->section));
    }
    try {
      f->set(cfg, trim(std::string_view(body).substr(eq + 1)));
    } catch (const ParseError&) {
      throw;
    } catch (const InputError& e) {
      throw ParseError(origin, lineno, e.what());
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path.string());
}

std::string config_to_text(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& f : config_fields()) {
    if (f.section != section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += fmt::format("{} = {}\n", f.key, f.get(cfg));
  }
  return out;
}

}  // namespace cgat
