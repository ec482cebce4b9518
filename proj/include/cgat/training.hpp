#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cgat/autodiff.hpp"
#include "cgat/model.hpp"
#include "cgat/sampler.hpp"

namespace cgat {

struct TrainConfig {
  double eta = 1e-3;
  double lambda1 = 5e-5;  // KG loss weight
  double lambda2 = 1e-5;  // L2 weight
  std::size_t batch_size = 1024;  // B
  std::size_t n_neg = 5;
  std::size_t epochs = 100;
  std::size_t max_batches = 0;  // 0: no limit
  std::size_t patience = 10;    // epochs without a better validation HR@20
  std::uint64_t seed = 2020;
  bool fixed_negatives = false;  // build the negative sets once
  bool validate = true;          // evaluate HR@20 on the valid split each epoch
  bool initialize = true;        // re-initialize parameters before training
  std::size_t workers = 1;       // validation threads

  void validate_config() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double l_bpr = 0.0;  // mean over batches of the batch-mean BPR loss
  double l_kg = 0.0;   // same for the KG loss
  double l2 = 0.0;     // lambda2 * squared norm of trainable parameters, end of epoch
  double hr20_valid = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_hr20 = 0.0;
  std::size_t batches = 0;
  bool stopped_early = false;

  // epoch, l_bpr, l_kg, l2, hr20_valid per line; wall time goes to a
  // separate timing file so this one is reproducible byte for byte.
  std::string to_text() const;
  std::string timing_text() const;
};

// One BPR training tuple with its sampled contexts. The history is shared
// by the positive and the negative score.
struct BprExample {
  UserId user;
  ItemSample positive;
  ItemSample negative;
  std::vector<ItemSample> history;
};

// Contexts for a batch: each distinct item gets one neighbor sample, each
// tuple its own history drawn without the positive item.
std::vector<BprExample> make_bpr_examples(std::span<const BprTuple> tuples,
                                          const KnowledgeGraph& kg, const InteractionStore& store,
                                          const WalkCache& cache, std::size_t S, std::size_t N,
                                          RngStream& rng);

// Mean over the batch of -log sigmoid(y_ui+ - y_ui-).
diff::Var bpr_loss(CgatForward& fwd, std::span<const BprExample> batch);
// ||e_h - e_rt||^2 with e_rt = (e_r || e_t) W0.
diff::Var kg_distance(CgatForward& fwd, EntityId h, RelationId r, EntityId t);
// Mean over the batch of log sigmoid(s(h, t) - s(h, t')).
diff::Var kg_loss(CgatForward& fwd, std::span<const KgTuple> batch);
// Sum of squared entries of every trainable parameter.
diff::Var l2_norm(CgatModel& model, diff::Tape& tape);

struct Objective {
  diff::Var total;
  diff::Var bpr;  // invalid when the BPR batch is empty
  diff::Var kg;   // invalid when the KG batch is empty
  diff::Var l2;   // invalid when lambda2 is zero
};

// L_BPR + lambda1 L_KG + lambda2 ||Theta||^2.
Objective total_objective(CgatForward& fwd, std::span<const BprExample> bpr,
                          std::span<const KgTuple> kg, double lambda1, double lambda2);

// Called after every epoch with the record just appended.
using EpochCallback = std::function<void(const EpochRecord&)>;

// Minibatch Adam over fresh negatives each epoch, validation HR@20 after
// every epoch, early stopping, and the best-validation parameters restored
// into `model` at the end.
TrainReport train(CgatModel& model, const KnowledgeGraph& kg, const InteractionStore& store,
                  const WalkCache& cache, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace cgat
