#include "cgat/model.hpp"

#include <algorithm>

#include "cgat/errors.hpp"

namespace cgat {

using diff::Tensor;
using diff::Var;

void ModelConfig::validate() const {
  if (d == 0) throw InputError("d must be positive");
  if (S == 0 || N == 0) throw InputError("S and N must be at least 1");
  if (disable_local && disable_nonlocal) {
    throw InputError("disable_local and disable_nonlocal cannot both be set");
  }
  if (gate_override && !(*gate_override >= 0.0 && *gate_override <= 1.0)) {
    throw InputError("gate override must lie in [0, 1]");
  }
}

CgatModel::CgatModel(const ModelConfig& cfg, std::size_t user_count, const KnowledgeGraph& kg)
    : cfg_(cfg), user_count_(user_count), item_entity_(kg.item_entities()) {
  cfg_.validate();
  if (user_count == 0) throw InputError("model needs at least one user");
  const std::size_t d = cfg_.d;
  auto& p = params_;
  ids_.user_embedding = p.add("user_embedding", Tensor(user_count, d));
  ids_.entity_embedding = p.add("entity_embedding", Tensor(kg.entity_count(), d));
  ids_.relation_embedding = p.add("relation_embedding", Tensor(kg.embedding_relation_count(), d));
  ids_.w0 = p.add("W0", Tensor(2 * d, d));
  ids_.w1 = p.add("W1", Tensor(2 * d, d));
  ids_.b1 = p.add("b1", Tensor(1, d));
  ids_.w1_user = p.add("W1_user", Tensor(d, d));
  ids_.b1_user = p.add("b1_user", Tensor(1, d));
  ids_.w2 = p.add("W2", Tensor(2 * d, d));
  ids_.b2 = p.add("b2", Tensor(1, d));
  ids_.gru = diff::GruParams::create(p, "gru", d);
  ids_.omega = p.add("omega", Tensor(1, d));
  ids_.w = p.add("w", Tensor(1, 4 * d));
  ids_.b = p.add("b", Tensor(1, 1));
  ids_.w3 = p.add("W3", Tensor(3 * d, d));
  ids_.b3 = p.add("b3", Tensor(1, d));
}

void CgatModel::initialize(RngStream& rng) {
  const auto& g = ids_.gru;
  for (diff::ParamId id : {ids_.user_embedding, ids_.entity_embedding, ids_.relation_embedding}) {
    diff::uniform_fill(params_.value(id), -0.05, 0.05, rng);
  }
  for (diff::ParamId id : {ids_.w0, ids_.w1, ids_.w1_user, ids_.w2, g.w_z, g.u_z, g.w_r, g.u_r,
                           g.w_h, g.u_h, ids_.w, ids_.w3}) {
    diff::xavier_uniform(params_.value(id), rng);
  }
  for (diff::ParamId id : {ids_.b1, ids_.b1_user, ids_.b2, g.b_z, g.b_r, g.b_h, ids_.omega,
                           ids_.b, ids_.b3}) {
    params_.value(id).fill(0.0);
  }
}

void CgatModel::set_config(const ModelConfig& cfg) {
  if (cfg.d != cfg_.d) throw ContractError("set_config cannot change d");
  cfg.validate();
  cfg_ = cfg;
}

diff::CheckpointHeader CgatModel::checkpoint_header() const {
  return {static_cast<std::uint32_t>(cfg_.d), static_cast<std::uint32_t>(user_count_),
          static_cast<std::uint32_t>(params_.value(ids_.entity_embedding).rows()),
          static_cast<std::uint32_t>(params_.value(ids_.relation_embedding).rows())};
}

ItemSample sample_item(const KnowledgeGraph& kg, const WalkCache& cache, ItemId item,
                       std::size_t S, RngStream& rng) {
  return {item, sample_local_neighbors(kg, kg.item_entity(item), S, rng), cache.context(item)};
}

CgatForward::CgatForward(CgatModel& model, diff::Tape& tape)
    : model_(model), tape_(tape), d_(model.config().d) {}

Var CgatForward::fuse(std::unordered_map<std::uint64_t, Var>& cache, RelationId r, EntityId t) {
  const std::uint64_t key = (static_cast<std::uint64_t>(r.value) << 32) | t.value;
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  Var e_r = tape_.param_row(model_.ids().relation_embedding, r.index());
  Var out = diff::matmul(diff::concat(e_r, entity(t)), param(model_.ids().w0));
  cache.emplace(key, out);
  return out;
}

Var CgatForward::relation_fuse(RelationId r, EntityId t) { return fuse(fused_, r, t); }

Var CgatForward::kg_relation_fuse(RelationId r, EntityId t) { return fuse(kg_fused_, r, t); }

Var CgatForward::user_preference(UserId u) {
  if (auto it = preferences_.find(u.value); it != preferences_.end()) return it->second;
  Var m;
  if (model_.config().disable_user_attention) {
    m = tape_.constant(Tensor(1, d_, 1.0));
  } else {
    Var e_u = tape_.param_row(model_.ids().user_embedding, u.index());
    m = diff::relu(diff::affine(e_u, param(model_.ids().w1_user), param(model_.ids().b1_user)));
  }
  preferences_.emplace(u.value, m);
  return m;
}

std::size_t CgatForward::KeyHash::operator()(const Key& k) const {
  std::uint64_t x = k.h;
  x = x * 0x9e3779b97f4a7c15ULL + k.r;
  x = x * 0x9e3779b97f4a7c15ULL + k.t;
  return static_cast<std::size_t>(splitmix64(x));
}

Var CgatForward::attention_key(EntityId h, const Neighbor& n) {
  const Key key{h.value, n.relation.value, n.entity.value};
  if (auto it = keys_.find(key); it != keys_.end()) return it->second;
  Var x = diff::concat(entity(h), relation_fuse(n.relation, n.entity));
  Var k = diff::tanh(diff::affine(x, param(model_.ids().w1), param(model_.ids().b1)));
  keys_.emplace(key, k);
  return k;
}

Var CgatForward::user_attention(UserId u, EntityId h, std::span<const Neighbor> sampled) {
  if (sampled.empty()) throw ContractError("user_attention needs at least one neighbor");
  Var m = user_preference(u);
  std::vector<Var> logits;
  logits.reserve(sampled.size());
  for (const Neighbor& n : sampled) logits.push_back(diff::dot(attention_key(h, n), m));
  return diff::softmax(diff::concat(logits));
}

Var CgatForward::local_embedding(UserId u, EntityId h, std::span<const Neighbor> sampled) {
  Var alpha = user_attention(u, h, sampled);
  std::vector<Var> tails;
  tails.reserve(sampled.size());
  for (const Neighbor& n : sampled) tails.push_back(entity(n.entity));
  Var e_c = diff::matmul(alpha, diff::stack_rows(tails));
  return diff::tanh(
      diff::affine(diff::concat(entity(h), e_c), param(model_.ids().w2), param(model_.ids().b2)));
}

Var CgatForward::nonlocal_embedding(EntityId h, std::span<const EntityId> context) {
  std::vector<std::uint32_t> key;
  key.reserve(context.size() + 1);
  key.push_back(h.value);
  for (EntityId e : context) key.push_back(e.value);
  if (auto it = nonlocal_.find(key); it != nonlocal_.end()) return it->second;

  if (!gru_) gru_ = diff::GruWeights::bind(tape_, model_.ids().gru);
  std::vector<Var> seq;
  seq.reserve(context.size());
  for (auto it = context.rbegin(); it != context.rend(); ++it) seq.push_back(entity(*it));
  Var e_c = diff::gru_run(tape_, *gru_, seq, d_);
  Var out = diff::tanh(
      diff::affine(diff::concat(entity(h), e_c), param(model_.ids().w2), param(model_.ids().b2)));
  nonlocal_.emplace(std::move(key), out);
  return out;
}

Var CgatForward::kg_context(UserId u, EntityId h, std::span<const Neighbor> sampled,
                            std::span<const EntityId> context) {
  const ModelConfig& cfg = model_.config();
  if (cfg.disable_local) return nonlocal_embedding(h, context);
  if (cfg.disable_nonlocal) return local_embedding(u, h, sampled);
  Var local = local_embedding(u, h, sampled);
  Var global = nonlocal_embedding(h, context);
  Var s = cfg.gate_override ? tape_.constant(Tensor(1, d_, *cfg.gate_override))
                            : diff::sigmoid(param(model_.ids().omega));
  return diff::gate(s, local, global);
}

Var CgatForward::contextualized_item(UserId u, const ItemSample& item) {
  const std::uint64_t key = (static_cast<std::uint64_t>(u.value) << 32) | item.item.value;
  if (auto it = items_.find(key); it != items_.end()) {
    if (it->second.neighbors != item.neighbors) {
      throw ContractError("item resampled with different neighbors on one tape");
    }
    return it->second.q;
  }
  const EntityId h = model_.item_entity(item.item);
  Var q = diff::concat(entity(h), kg_context(u, h, item.neighbors, item.nonlocal));
  items_.emplace(key, CachedItem{item.neighbors, q});
  return q;
}

Var CgatForward::interaction_weights(Var q_target, std::span<const Var> q_history) {
  if (q_history.empty()) throw ContractError("interaction_weights needs a non-empty history");
  Var w = param(model_.ids().w);
  Var b = param(model_.ids().b);
  std::vector<Var> logits;
  logits.reserve(q_history.size());
  for (Var q_j : q_history) {
    logits.push_back(diff::tanh(diff::add(diff::dot(diff::concat(q_target, q_j), w), b)));
  }
  return diff::softmax(diff::concat(logits));
}

Var CgatForward::interaction_context(UserId u, Var q_target, std::span<const Var> q_history) {
  Var e_u = tape_.param_row(model_.ids().user_embedding, u.index());
  Var e_hist = q_history.empty()
                   ? tape_.constant(Tensor(1, 2 * d_))
                   : diff::matmul(interaction_weights(q_target, q_history),
                                  diff::stack_rows(q_history));
  Var c_u = diff::relu(
      diff::affine(diff::concat(e_u, e_hist), param(model_.ids().w3), param(model_.ids().b3)));
  return diff::concat(e_u, c_u);
}

Var CgatForward::score(UserId u, Var q_target, std::span<const Var> q_history) {
  return diff::dot(interaction_context(u, q_target, q_history), q_target);
}

Var CgatForward::score(UserId u, const ItemSample& target, std::span<const ItemSample> history) {
  Var q_i = contextualized_item(u, target);
  std::vector<Var> q_hist;
  q_hist.reserve(history.size());
  for (const ItemSample& h : history) q_hist.push_back(contextualized_item(u, h));
  return score(u, q_i, q_hist);
}

}  // namespace cgat
