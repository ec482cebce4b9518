#include "cgat/training.hpp"

#include <algorithm>
#include <chrono>
#include <unordered_map>

#include <fmt/format.h>

#include "cgat/errors.hpp"
#include "cgat/eval.hpp"
#include "cgat/optim.hpp"
#include "cgat/scorer.hpp"

namespace cgat {

using diff::Tensor;
using diff::Var;

void TrainConfig::validate_config() const {
  if (!(eta > 0.0)) throw InputError("eta must be positive");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw InputError("lambda1 and lambda2 must be non-negative");
  if (batch_size == 0) throw InputError("B must be positive");
  if (n_neg == 0) throw InputError("n_neg must be positive");
  if (epochs == 0) throw InputError("epochs must be positive");
}

std::string TrainReport::to_text() const {
  std::string out = "epoch\tl_bpr\tl_kg\tl2\thr20_valid\n";
  for (const auto& r : epochs) {
    out += fmt::format("{}\t{}\t{}\t{}\t{}\n", r.epoch, r.l_bpr, r.l_kg, r.l2, r.hr20_valid);
  }
  return out;
}

std::string TrainReport::timing_text() const {
  std::string out = "epoch\tseconds\n";
  for (const auto& r : epochs) out += fmt::format("{}\t{:.3f}\n", r.epoch, r.seconds);
  return out;
}

std::vector<BprExample> make_bpr_examples(std::span<const BprTuple> tuples,
                                          const KnowledgeGraph& kg, const InteractionStore& store,
                                          const WalkCache& cache, std::size_t S, std::size_t N,
                                          RngStream& rng) {
  std::unordered_map<std::uint32_t, ItemSample> samples;
  auto sample = [&](ItemId item) -> const ItemSample& {
    auto it = samples.find(item.value);
    if (it == samples.end()) {
      it = samples.emplace(item.value, sample_item(kg, cache, item, S, rng)).first;
    }
    return it->second;
  };
  std::vector<BprExample> out;
  out.reserve(tuples.size());
  for (const BprTuple& t : tuples) {
    BprExample ex{t.user, sample(t.positive), sample(t.negative), {}};
    for (ItemId j : sample_history(store, t.user, t.positive, N, rng)) {
      ex.history.push_back(sample(j));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

Var bpr_loss(CgatForward& fwd, std::span<const BprExample> batch) {
  if (batch.empty()) throw ContractError("bpr_loss: empty batch");
  std::vector<Var> diffs;
  diffs.reserve(batch.size());
  std::vector<Var> q_hist;
  for (const BprExample& ex : batch) {
    q_hist.clear();
    for (const ItemSample& h : ex.history) q_hist.push_back(fwd.contextualized_item(ex.user, h));
    Var pos = fwd.score(ex.user, fwd.contextualized_item(ex.user, ex.positive), q_hist);
    Var neg = fwd.score(ex.user, fwd.contextualized_item(ex.user, ex.negative), q_hist);
    diffs.push_back(diff::sub(pos, neg));
  }
  Var total = diff::sum(diff::log_sigmoid(diff::concat(diffs)));
  return diff::scale(total, -1.0 / static_cast<double>(batch.size()));
}

Var kg_distance(CgatForward& fwd, EntityId h, RelationId r, EntityId t) {
  Var e_h = fwd.tape().param_row(fwd.model().ids().entity_embedding, h.index());
  return diff::squared_norm(diff::sub(e_h, fwd.kg_relation_fuse(r, t)));
}

Var kg_loss(CgatForward& fwd, std::span<const KgTuple> batch) {
  if (batch.empty()) throw ContractError("kg_loss: empty batch");
  std::vector<Var> diffs;
  diffs.reserve(batch.size());
  for (const KgTuple& k : batch) {
    diffs.push_back(diff::sub(kg_distance(fwd, k.head, k.relation, k.tail),
                              kg_distance(fwd, k.head, k.relation, k.corrupted)));
  }
  Var total = diff::sum(diff::log_sigmoid(diff::concat(diffs)));
  return diff::scale(total, 1.0 / static_cast<double>(batch.size()));
}

Var l2_norm(CgatModel& model, diff::Tape& tape) {
  std::vector<Var> terms;
  for (diff::ParamId id : model.params().ids()) {
    if (model.params().trainable(id)) terms.push_back(diff::squared_norm(tape.param(id)));
  }
  if (terms.empty()) return tape.constant(Tensor(1, 1));
  return diff::add_n(terms);
}

Objective total_objective(CgatForward& fwd, std::span<const BprExample> bpr,
                          std::span<const KgTuple> kg, double lambda1, double lambda2) {
  Objective obj;
  std::vector<Var> terms;
  if (!bpr.empty()) {
    obj.bpr = bpr_loss(fwd, bpr);
    terms.push_back(obj.bpr);
  }
  if (!kg.empty()) {
    obj.kg = kg_loss(fwd, kg);
    if (lambda1 != 0.0) terms.push_back(diff::scale(obj.kg, lambda1));
  }
  if (lambda2 != 0.0) {
    obj.l2 = l2_norm(fwd.model(), fwd.tape());
    terms.push_back(diff::scale(obj.l2, lambda2));
  }
  obj.total = terms.empty() ? fwd.tape().constant(Tensor(1, 1)) : diff::add_n(terms);
  return obj;
}

namespace {

double squared_norm_of(const diff::ParamRegistry& params) {
  double s = 0.0;
  for (diff::ParamId id : params.ids()) {
    if (!params.trainable(id)) continue;
    for (double v : params.value(id).data()) s += v * v;
  }
  return s;
}

std::vector<Tensor> snapshot(const diff::ParamRegistry& params) {
  std::vector<Tensor> out;
  for (diff::ParamId id : params.ids()) out.push_back(params.value(id));
  return out;
}

void restore(diff::ParamRegistry& params, const std::vector<Tensor>& values) {
  for (diff::ParamId id : params.ids()) params.value(id) = values[id.index()];
}

}  // namespace

TrainReport train(CgatModel& model, const KnowledgeGraph& kg, const InteractionStore& store,
                  const WalkCache& cache, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate_config();
  if (store.interactions(Split::Train).empty()) throw InputError("training split is empty");
  const ModelConfig& mcfg = model.config();
  if (cache.item_count() != kg.item_count()) throw InputError("walk cache does not match the KG");

  if (cfg.initialize) {
    RngStream init(derive_seed(cfg.seed, "init"));
    model.initialize(init);
  }
  diff::ParamRegistry& params = model.params();
  params.zero_grad();
  diff::Adam adam(params);

  RngStream neg_rng(derive_seed(cfg.seed, "negatives"));
  RngStream batch_rng(derive_seed(cfg.seed, "batches"));

  const bool do_validate = cfg.validate && !store.interactions(Split::Valid).empty();
  std::optional<EvalContexts> eval_ctx;
  EvalConfig eval_cfg;
  eval_cfg.ks = {20};
  eval_cfg.split = Split::Valid;
  eval_cfg.workers = cfg.workers;
  if (do_validate) {
    eval_ctx = sample_eval_contexts(kg, store, mcfg.S, mcfg.N, derive_seed(cfg.seed, "eval"));
  }

  std::vector<BprTuple> bpr_set;
  std::vector<KgTuple> kg_set;
  TrainReport report;
  std::vector<Tensor> best = snapshot(params);
  bool have_best = false;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    if (epoch == 0 || !cfg.fixed_negatives) {
      bpr_set = sample_bpr_batch(store, cfg.n_neg, neg_rng);
      kg_set = sample_kg_negatives(kg, neg_rng);
      if (bpr_set.empty()) throw InputError("no BPR training tuples could be built");
    }
    batch_rng.shuffle(std::span<BprTuple>(bpr_set));
    batch_rng.shuffle(std::span<KgTuple>(kg_set));

    const std::size_t n_batches = (bpr_set.size() + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t kg_batch =
        (cfg.batch_size * kg_set.size() + bpr_set.size() - 1) / bpr_set.size();

    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t done = 0;
    double kg_batches = 0.0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      if (cfg.max_batches != 0 && report.batches >= cfg.max_batches) break;
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(bpr_set.size(), lo + cfg.batch_size);
      const std::size_t klo = std::min(kg_set.size(), b * kg_batch);
      const std::size_t khi = std::min(kg_set.size(), klo + kg_batch);

      const auto examples =
          make_bpr_examples(std::span(bpr_set).subspan(lo, hi - lo), kg, store, cache, mcfg.S,
                            mcfg.N, batch_rng);
      diff::Tape tape(&params);
      CgatForward fwd(model, tape);
      const Objective obj = total_objective(fwd, examples, std::span(kg_set).subspan(klo, khi - klo),
                                            cfg.lambda1, cfg.lambda2);
      tape.backward(obj.total);
      adam.step(params, cfg.eta);

      rec.l_bpr += obj.bpr.value()[0];
      if (obj.kg.valid()) {
        rec.l_kg += obj.kg.value()[0];
        kg_batches += 1.0;
      }
      ++done;
      ++report.batches;
    }
    if (done == 0) break;
    rec.l_bpr /= static_cast<double>(done);
    if (kg_batches > 0.0) rec.l_kg /= kg_batches;
    rec.l2 = cfg.lambda2 * squared_norm_of(params);

    if (do_validate) {
      CgatScorer scorer(model, cache, *eval_ctx);
      rec.hr20_valid = evaluate(scorer, store, eval_cfg).at(20).hit_ratio;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (!have_best || rec.hr20_valid > report.best_hr20 || !do_validate) {
      have_best = true;
      report.best_epoch = epoch;
      report.best_hr20 = rec.hr20_valid;
      best = snapshot(params);
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      report.stopped_early = true;
      break;
    }
    if (cfg.max_batches != 0 && report.batches >= cfg.max_batches) break;
  }
  restore(params, best);
  return report;
}

}  // namespace cgat
