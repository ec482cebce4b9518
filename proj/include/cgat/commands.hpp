#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cgat/config.hpp"
#include "cgat/dataset.hpp"
#include "cgat/eval.hpp"
#include "cgat/sampler.hpp"
#include "cgat/training.hpp"

namespace cgat {

// Each command writes its effective configuration to <out>/config.ini when an
// output directory is set.

// Loads the raw files, splits under the "split" stream and writes the
// dataset directory to cfg.data.out.
Dataset cmd_preprocess(const RunConfig& cfg, std::ostream& out);

// Builds the walk cache under the "walks" stream and saves it to
// cfg.cache_path().
WalkCache cmd_build_cache(const RunConfig& cfg, std::ostream& log);

struct TrainResult {
  TrainReport report;
  EvalReport test;  // best-validation parameters on the test split
};

// Writes checkpoint.bin, report.tsv, timing.tsv and test_report.tsv.
TrainResult cmd_train(const RunConfig& cfg, std::ostream& log);

EvalReport cmd_evaluate(const RunConfig& cfg, std::ostream& out);

struct AblationRow {
  std::string variant;  // full, w/oL, w/oG, w/oUA
  double hr20 = 0.0;

  friend bool operator==(const AblationRow&, const AblationRow&) = default;
};

ModelConfig ablation_variant(const ModelConfig& base, const std::string& variant);
const std::vector<std::string>& ablation_variants();
std::string ablation_to_text(const std::vector<AblationRow>& rows);
std::vector<AblationRow> parse_ablation(const std::string& text);

// Trains every variant with the same seed and reports test HR@20.
std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, std::ostream& log);

struct SweepRow {
  std::string value;
  EvalReport report;
};

std::string sweep_to_text(const std::string& param, const std::vector<SweepRow>& rows);

// Train and evaluate once per value of `param`, all with the same seed.
std::vector<SweepRow> cmd_sweep(const RunConfig& cfg, const std::string& param,
                                const std::vector<std::string>& values, std::ostream& log);

// Full command-line entry point; returns the process exit code (0 success,
// 1 input error, 2 numeric failure).
int run_cli(int argc, char** argv);

}  // namespace cgat
