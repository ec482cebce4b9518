#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "cgat/errors.hpp"
#include "cgat/gradcheck.hpp"
#include "cgat/optim.hpp"
#include "cgat/training.hpp"
#include "fixtures.hpp"
#include "scenarios.hpp"

using namespace cgat;
using namespace cgat::diff;
using namespace cgat::testing;

namespace {

ModelConfig tiny_config(std::size_t d = 4) {
  ModelConfig cfg;
  cfg.d = d;
  cfg.S = 3;
  cfg.N = 3;
  return cfg;
}

struct Fixture {
  Dataset data;
  WalkCache cache;
};

Fixture planted_fixture(std::uint64_t seed, PlantedConfig pc) {
  Dataset data = planted_dataset(seed, pc);
  WalkConfig wc;
  wc.context_size = 3;
  WalkCache cache = build_walk_cache(data.kg, wc, seed);
  return Fixture{std::move(data), std::move(cache)};
}

void randomize(CgatModel& model, std::uint64_t seed) {
  RngStream rng(seed);
  for (ParamId id : model.params().ids()) uniform_fill(model.params().value(id), -0.5, 0.5, rng);
}

std::vector<BprExample> examples_for(const Fixture& f, std::uint64_t seed, std::size_t n) {
  RngStream rng(seed);
  auto tuples = sample_bpr_batch(f.data.store, 2, rng);
  tuples.resize(std::min(n, tuples.size()));
  return make_bpr_examples(tuples, f.data.kg, f.data.store, f.cache, 3, 3, rng);
}

std::vector<KgTuple> kg_tuples_for(const Fixture& f, std::uint64_t seed, std::size_t n) {
  RngStream rng(seed);
  auto tuples = sample_kg_negatives(f.data.kg, rng);
  tuples.resize(std::min(n, tuples.size()));
  return tuples;
}

std::vector<Tensor> grads_of(CgatModel& model, const std::function<Var(CgatForward&)>& build) {
  model.params().zero_grad();
  Tape tape(&model.params());
  CgatForward fwd(model, tape);
  tape.backward(build(fwd));
  std::vector<Tensor> out;
  for (ParamId id : model.params().ids()) out.push_back(model.params().grad(id));
  model.params().zero_grad();
  return out;
}

TrainConfig quick_train(std::uint64_t seed) {
  TrainConfig tc;
  tc.eta = 5e-3;
  tc.batch_size = 64;
  tc.epochs = 3;
  tc.seed = seed;
  return tc;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("equal positive and negative scores cost log 2") {
  const Fixture f = planted_fixture(1, {6, 10, 4});
  CgatModel model(tiny_config(), 6, f.data.kg);
  randomize(model, 2);
  auto ex = examples_for(f, 3, 5);
  for (auto& e : ex) e.negative = e.positive;
  Tape tape(&model.params());
  CgatForward fwd(model, tape);
  CHECK(bpr_loss(fwd, ex).value()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("BPR loss vanishes for a large margin") {
  Tape tape;
  const Var l = scale(log_sigmoid(tape.constant(Tensor::row({50.0}))), -1.0);
  CHECK(l.value()[0] < 1e-20);
  CHECK(l.value()[0] >= 0.0);
}

TEST_CASE("KG distance") {
  // h=0, t=1, r=0
  const KnowledgeGraph kg(3, 1, {{E(0), R(0), E(1)}}, {E(0)});
  CgatModel model(tiny_config(2), 1, kg);
  auto& p = model.params();
  const auto& ids = model.ids();
  Tensor& ent = p.value(ids.entity_embedding);
  Tensor& rel = p.value(ids.relation_embedding);
  Tensor& w0 = p.value(ids.w0);

  SUBCASE("hand-computed 2-d example") {
    ent(0, 0) = 1.0, ent(0, 1) = 2.0;
    ent(1, 0) = 2.0, ent(1, 1) = 0.0;
    rel(0, 0) = 0.5, rel(0, 1) = -1.0;
    w0 = Tensor(4, 2, {1.0, 0.0, 0.0, 1.0, 0.5, 0.0, 0.0, -0.5});
    // e_rt = (1.5, -1), e_h - e_rt = (-0.5, 3)
    Tape tape(&p);
    CgatForward fwd(model, tape);
    CHECK(kg_distance(fwd, E(0), R(0), E(1)).value()[0] == doctest::Approx(9.25).epsilon(1e-15));
  }
  SUBCASE("zero when the head equals the fused tail") {
    w0 = Tensor(4, 2, {1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0});
    ent(0, 0) = rel(0, 0) = 0.3;
    ent(0, 1) = rel(0, 1) = -0.7;
    Tape tape(&p);
    CgatForward fwd(model, tape);
    CHECK(kg_distance(fwd, E(0), R(0), E(1)).value()[0] == 0.0);
  }
  SUBCASE("never negative") {
    RngStream rng(4);
    for (int rep = 0; rep < 100; ++rep) {
      for (ParamId id : p.ids()) uniform_fill(p.value(id), -2.0, 2.0, rng);
      Tape tape(&p);
      CgatForward fwd(model, tape);
      CHECK(kg_distance(fwd, E(rng.uniform_index(3)), R(rng.uniform_index(3)), E(rng.uniform_index(3))).value()[0] >= 0.0);
    }
  }
}

TEST_CASE("KG loss sign and monotonicity") {
  const KnowledgeGraph kg(4, 1, {{E(0), R(0), E(1)}}, {E(0)});
  CgatModel model(tiny_config(2), 1, kg);
  auto& p = model.params();
  const auto& ids = model.ids();
  RngStream rng(5);
  for (ParamId id : p.ids()) uniform_fill(p.value(id), -1.0, 1.0, rng);

  {
    const std::vector<KgTuple> same{{E(0), R(0), E(1), E(1)}};
    Tape tape(&p);
    CgatForward fwd(model, tape);
    CHECK(kg_loss(fwd, same).value()[0] == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  }

  // With W0 = [I; I], s(h, t) = ||e_h - e_r - e_t||^2; shrink the residual
  // through e_t while t' stays put.
  p.value(ids.w0) = Tensor(4, 2, {1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0});
  const std::vector<KgTuple> batch{{E(0), R(0), E(1), E(3)}};
  double previous = 1e300;
  for (double delta : {2.0, 1.0, 0.5, 0.1, 0.0}) {
    Tensor& ent = p.value(ids.entity_embedding);
    const Tensor& rel = p.value(ids.relation_embedding);
    for (std::size_t k = 0; k < 2; ++k) ent(1, k) = ent(0, k) - rel(0, k) - delta;
    Tape tape(&p);
    CgatForward fwd(model, tape);
    const double loss = kg_loss(fwd, batch).value()[0];
    CHECK(loss < previous);
    previous = loss;
  }
}

TEST_CASE("loss gradients match central differences") {
  const Fixture f = planted_fixture(6, {6, 10, 5});
  double worst = 0.0;
  for (std::uint64_t draw = 0; draw < 10; ++draw) {
    CgatModel model(tiny_config(), 6, f.data.kg);
    randomize(model, 10 + draw);
    const auto ex = examples_for(f, 20 + draw, 4);
    const auto kt = kg_tuples_for(f, 30 + draw, 4);
    auto& reg = model.params();
    auto objective = [&](bool with_grad) {
      Tape tape(&reg);
      CgatForward fwd(model, tape);
      const Objective obj = total_objective(fwd, ex, kt, 0.7, 0.05);
      if (with_grad) tape.backward(obj.total);
      return obj.total.value()[0];
    };
    RngStream rng(40 + draw);
    const auto ids = reg.ids();
    worst = std::max(worst, finite_difference_check(reg, objective, ids, 6, 1e-5, rng).max_rel_error);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("objective composition") {
  const Fixture f = planted_fixture(7, {6, 10, 5});
  CgatModel model(tiny_config(), 6, f.data.kg);
  randomize(model, 8);
  const auto ex = examples_for(f, 9, 6);
  const auto kt = kg_tuples_for(f, 10, 5);

  SUBCASE("zero weights reduce to the BPR loss") {
    Tape tape(&model.params());
    CgatForward fwd(model, tape);
    const Objective obj = total_objective(fwd, ex, kt, 0.0, 0.0);
    CHECK(obj.total.value()[0] == bpr_loss(fwd, ex).value()[0]);
    CHECK_FALSE(obj.l2.valid());
  }
  SUBCASE("zero parameters have zero L2") {
    for (ParamId id : model.params().ids()) model.params().value(id).fill(0.0);
    Tape tape(&model.params());
    CHECK(l2_norm(model, tape).value()[0] == 0.0);
  }
  SUBCASE("gradient of the sum is the sum of gradients") {
    const double l1 = 0.4, l2 = 0.02;
    const auto total = grads_of(model, [&](CgatForward& fwd) { return total_objective(fwd, ex, kt, l1, l2).total; });
    const auto g_bpr = grads_of(model, [&](CgatForward& fwd) { return bpr_loss(fwd, ex); });
    const auto g_kg = grads_of(model, [&](CgatForward& fwd) { return scale(kg_loss(fwd, kt), l1); });
    const auto g_l2 = grads_of(model, [&](CgatForward& fwd) { return scale(l2_norm(model, fwd.tape()), l2); });
    double worst = 0.0;
    for (std::size_t k = 0; k < total.size(); ++k) {
      for (std::size_t j = 0; j < total[k].size(); ++j) {
        const double sum = g_bpr[k][j] + g_kg[k][j] + g_l2[k][j];
        worst = std::max(worst, std::abs(total[k][j] - sum) / std::max(1.0, std::abs(sum)));
      }
    }
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("batch examples share neighbor samples and keep positives out of histories") {
  const Fixture f = planted_fixture(11, {8, 20, 8});
  RngStream rng(12);
  const auto tuples = sample_bpr_batch(f.data.store, 3, rng);
  const auto ex = make_bpr_examples(tuples, f.data.kg, f.data.store, f.cache, 3, 4, rng);
  REQUIRE(ex.size() == tuples.size());
  std::map<ItemId, std::vector<Neighbor>> seen;
  auto record = [&](const ItemSample& s) {
    CHECK(s.neighbors.size() == 3);
    auto [it, fresh] = seen.emplace(s.item, s.neighbors);
    if (!fresh) CHECK(it->second == s.neighbors);
  };
  for (std::size_t k = 0; k < ex.size(); ++k) {
    CHECK(ex[k].user == tuples[k].user);
    CHECK(ex[k].positive.item == tuples[k].positive);
    CHECK(ex[k].negative.item == tuples[k].negative);
    CHECK(ex[k].history.size() == 4);
    record(ex[k].positive);
    record(ex[k].negative);
    for (const auto& h : ex[k].history) {
      record(h);
      CHECK(h.item != ex[k].positive.item);
      CHECK(f.data.store.contains(Split::Train, ex[k].user, h.item));
    }
  }
}

TEST_CASE("single-batch overfit") {
  // Ten interactions: five users with two positives each.
  std::vector<Interaction> train;
  for (std::uint32_t u = 0; u < 5; ++u) {
    train.push_back({U(u), I(2 * u)});
    train.push_back({U(u), I(2 * u + 1)});
  }
  const KnowledgeGraph kg = random_graph(13, 20, 2, 30, 12);
  const InteractionStore store(5, 12, train, {}, {});
  WalkConfig wc;
  wc.context_size = 3;
  const WalkCache cache = build_walk_cache(kg, wc, 14);
  CgatModel model(tiny_config(8), 5, kg);
  RngStream rng(15);
  model.initialize(rng);
  const auto tuples = sample_bpr_batch(store, 1, rng);
  REQUIRE(tuples.size() == 10);
  const auto ex = make_bpr_examples(tuples, kg, store, cache, 3, 3, rng);
  Adam adam(model.params());
  double loss = 0.0;
  for (int it = 0; it < 200; ++it) {
    Tape tape(&model.params());
    CgatForward fwd(model, tape);
    const Var l = bpr_loss(fwd, ex);
    tape.backward(l);
    adam.step(model.params(), 1e-2);
    loss = l.value()[0];
  }
  CHECK(loss < 0.05);
}

TEST_CASE("KG-only training separates true from corrupted tails") {
  const auto run = kg_direction(1, 500);
  CHECK(run.mean_true < run.mean_corrupt);
}

TEST_CASE("planted smoke: BPR loss falls over five epochs") {
  double first = 0.0, fifth = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const Fixture f = planted_fixture(seed, {20, 40, 12});
    CgatModel model(tiny_config(8), 20, f.data.kg);
    TrainConfig tc = quick_train(seed);
    tc.epochs = 6;
    tc.validate = false;
    const auto rep = train(model, f.data.kg, f.data.store, f.cache, tc);
    REQUIRE(rep.epochs.size() == 6);
    first += rep.epochs[0].l_bpr;
    fifth += rep.epochs[5].l_bpr;
  }
  CHECK(fifth < first);
}

TEST_CASE("the KG term changes the trained parameters") {
  const Fixture f = planted_fixture(16, {10, 20, 8});
  auto run = [&](double lambda1) {
    CgatModel model(tiny_config(), 10, f.data.kg);
    TrainConfig tc = quick_train(17);
    tc.lambda1 = lambda1;
    tc.epochs = 1;
    train(model, f.data.kg, f.data.store, f.cache, tc);
    return model.params().value(model.ids().entity_embedding);
  };
  CHECK_FALSE(run(0.0) == run(0.5));
}

TEST_CASE("dropping a context trains like pinning the gate, bit for bit") {
  const Fixture f = planted_fixture(21, {10, 20, 8});
  const std::pair<bool, double> cases[] = {{true, 0.0}, {false, 1.0}};
  for (const auto& [local_off, pin] : cases) {
    ModelConfig off = tiny_config();
    off.disable_local = local_off;
    off.disable_nonlocal = !local_off;
    ModelConfig pinned = tiny_config();
    pinned.gate_override = pin;
    TrainConfig tc = quick_train(22);
    tc.lambda1 = 0.5;
    CgatModel a(off, 10, f.data.kg), b(pinned, 10, f.data.kg);
    CHECK(train(a, f.data.kg, f.data.store, f.cache, tc).to_text() ==
          train(b, f.data.kg, f.data.store, f.cache, tc).to_text());
    for (ParamId id : a.params().ids()) {
      INFO(a.params().name(id));
      CHECK(a.params().value(id) == b.params().value(id));
    }
  }
}

TEST_CASE("training is deterministic across runs and cache worker counts") {
  const Dataset data = planted_dataset(18, {10, 20, 8});
  WalkConfig wc;
  wc.context_size = 3;
  auto run = [&](std::size_t workers) {
    const WalkCache cache = build_walk_cache(data.kg, wc, 19, workers);
    CgatModel model(tiny_config(), 10, data.kg);
    const auto rep = train(model, data.kg, data.store, cache, quick_train(20));
    return std::make_pair(rep.to_text(), model.params().value(model.ids().w2));
  };
  const auto a = run(1);
  const auto b = run(1);
  const auto c = run(3);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first == c.first);
  CHECK(a.second == c.second);
}

TEST_CASE("training report layout") {
  const Fixture f = planted_fixture(21, {10, 20, 8});
  CgatModel model(tiny_config(), 10, f.data.kg);
  std::size_t callbacks = 0;
  const auto rep = train(model, f.data.kg, f.data.store, f.cache, quick_train(22),
                         [&](const EpochRecord& r) { CHECK(r.epoch == callbacks++); });
  CHECK(callbacks == 3);
  const std::string text = rep.to_text();
  CHECK(text.rfind("epoch\tl_bpr\tl_kg\tl2\thr20_valid\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  CHECK(rep.timing_text().find("seconds") != std::string::npos);
  for (const auto& r : rep.epochs) {
    CHECK(std::isfinite(r.l_bpr));
    CHECK(std::isfinite(r.l_kg));
    CHECK(r.l2 > 0.0);
    CHECK(r.hr20_valid >= 0.0);
    CHECK(r.hr20_valid <= 1.0);
  }
}

TEST_CASE("batch limit, early stopping and best-epoch restore") {
  const Fixture f = planted_fixture(23, {10, 20, 8});
  SUBCASE("max_batches") {
    CgatModel model(tiny_config(), 10, f.data.kg);
    TrainConfig tc = quick_train(24);
    tc.max_batches = 2;
    const auto rep = train(model, f.data.kg, f.data.store, f.cache, tc);
    CHECK(rep.batches == 2);
    CHECK(rep.epochs.size() == 1);
  }
  SUBCASE("patience") {
    CgatModel model(tiny_config(), 10, f.data.kg);
    TrainConfig tc = quick_train(25);
    tc.eta = 1e-12;
    tc.epochs = 20;
    tc.patience = 2;
    const auto rep = train(model, f.data.kg, f.data.store, f.cache, tc);
    CHECK(rep.stopped_early);
    CHECK(rep.epochs.size() < 20);
    CHECK(rep.best_hr20 >= rep.epochs.back().hr20_valid);
  }
  SUBCASE("restored parameters reproduce the best validation score") {
    CgatModel model(tiny_config(), 10, f.data.kg);
    TrainConfig tc = quick_train(26);
    tc.epochs = 4;
    const auto rep = train(model, f.data.kg, f.data.store, f.cache, tc);
    EvalConfig ec;
    ec.ks = {20};
    ec.split = Split::Valid;
    const CgatScorer scorer(model, f.cache, sample_eval_contexts(f.data.kg, f.data.store, 3, 3, derive_seed(26, "eval")));
    CHECK(evaluate(scorer, f.data.store, ec).at(20).hit_ratio == rep.best_hr20);
  }
}

TEST_CASE("fixed negatives reuse the first epoch's sets") {
  const Fixture f = planted_fixture(27, {10, 20, 8});
  CgatModel a(tiny_config(), 10, f.data.kg);
  CgatModel b(tiny_config(), 10, f.data.kg);
  TrainConfig tc = quick_train(28);
  tc.epochs = 1;
  const auto ra = train(a, f.data.kg, f.data.store, f.cache, tc);
  tc.fixed_negatives = true;
  const auto rb = train(b, f.data.kg, f.data.store, f.cache, tc);
  CHECK(ra.to_text() == rb.to_text());
  tc.epochs = 2;
  CgatModel c(tiny_config(), 10, f.data.kg);
  CgatModel d(tiny_config(), 10, f.data.kg);
  const auto rc = train(c, f.data.kg, f.data.store, f.cache, tc);
  tc.fixed_negatives = false;
  const auto rd = train(d, f.data.kg, f.data.store, f.cache, tc);
  CHECK(rc.to_text() != rd.to_text());
}

TEST_CASE("training input errors") {
  const Fixture f = planted_fixture(29, {4, 10, 4});
  CgatModel model(tiny_config(), 4, f.data.kg);
  const InteractionStore empty(4, 10, {}, {}, {});
  CHECK_THROWS_AS(train(model, f.data.kg, empty, f.cache, quick_train(1)), InputError);
  TrainConfig bad = quick_train(1);
  bad.eta = 0.0;
  CHECK_THROWS_AS(train(model, f.data.kg, f.data.store, f.cache, bad), InputError);
  bad = quick_train(1);
  bad.batch_size = 0;
  CHECK_THROWS_AS(train(model, f.data.kg, f.data.store, f.cache, bad), InputError);
}

TEST_CASE("a diverging run aborts with a numeric error") {
  const Fixture f = planted_fixture(30, {6, 10, 4});
  CgatModel model(tiny_config(), 6, f.data.kg);
  TrainConfig tc = quick_train(31);
  tc.eta = 1e300;
  tc.epochs = 2;
  CHECK_THROWS_AS(train(model, f.data.kg, f.data.store, f.cache, tc), NumericError);
}

}  // TEST_SUITE
