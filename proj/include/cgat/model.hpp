#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "cgat/autodiff.hpp"
#include "cgat/checkpoint.hpp"
#include "cgat/graph.hpp"
#include "cgat/gru.hpp"
#include "cgat/rng.hpp"
#include "cgat/sampler.hpp"

namespace cgat {

struct ModelConfig {
  std::size_t d = 32;  // embedding width
  std::size_t S = 4;   // sampled local neighbors (and non-local context size)
  std::size_t N = 16;  // sampled history items
  bool disable_local = false;           // CGAT w/o L: context = non-local only
  bool disable_nonlocal = false;        // CGAT w/o G: context = local only
  bool disable_user_attention = false;  // CGAT w/o UA: m_u replaced by ones
  // When set, sigma(omega) is replaced by this constant in every coordinate.
  std::optional<double> gate_override;

  void validate() const;
};

// Registry ids of every CGAT tensor.
struct CgatParams {
  diff::ParamId user_embedding;      // |U| x d
  diff::ParamId entity_embedding;    // |E| x d, items share their entity's row
  diff::ParamId relation_embedding;  // (2R + 1) x d
  diff::ParamId w0;                  // 2d x d, relation/tail fusion
  diff::ParamId w1, b1;              // 2d x d, 1 x d, attention layer
  diff::ParamId w1_user, b1_user;    // d x d, 1 x d, user preference transform
  diff::ParamId w2, b2;              // 2d x d, 1 x d, shared context aggregator
  diff::GruParams gru;               // d x d weights, 1 x d biases
  diff::ParamId omega;               // 1 x d gate logits
  diff::ParamId w, b;                // 1 x 4d, 1 x 1, history attention
  diff::ParamId w3, b3;              // 3d x d, 1 x d, user context
};

class CgatModel {
 public:
  CgatModel(const ModelConfig& cfg, std::size_t user_count, const KnowledgeGraph& kg);

  // Glorot-uniform weight matrices, zero biases and gate, embeddings
  // uniform in (-0.05, 0.05).
  void initialize(RngStream& rng);

  const ModelConfig& config() const { return cfg_; }
  // Replaces the ablation switches / S / N; d must stay the same.
  void set_config(const ModelConfig& cfg);

  diff::ParamRegistry& params() { return params_; }
  const diff::ParamRegistry& params() const { return params_; }
  const CgatParams& ids() const { return ids_; }

  std::size_t user_count() const { return user_count_; }
  std::size_t item_count() const { return item_entity_.size(); }
  EntityId item_entity(ItemId item) const { return item_entity_.at(item.index()); }
  diff::CheckpointHeader checkpoint_header() const;

 private:
  ModelConfig cfg_;
  std::size_t user_count_;
  std::vector<EntityId> item_entity_;
  diff::ParamRegistry params_;
  CgatParams ids_;
};

// Sampled inputs for scoring one item: S local neighbors of its entity and
// the entity's frozen non-local context.
struct ItemSample {
  ItemId item;
  std::vector<Neighbor> neighbors;
  std::span<const EntityId> nonlocal;
};

ItemSample sample_item(const KnowledgeGraph& kg, const WalkCache& cache, ItemId item,
                       std::size_t S, RngStream& rng);

// Builds CGAT expressions on a tape. User-independent pieces (relation
// fusion, attention keys, non-local embeddings) are shared across calls on
// the same tape.
class CgatForward {
 public:
  CgatForward(CgatModel& model, diff::Tape& tape);

  diff::Tape& tape() { return tape_; }
  CgatModel& model() { return model_; }

  // e_rt = (e_r || e_t) W0
  diff::Var relation_fuse(RelationId r, EntityId t);
  // Same value, cached apart from the recommendation path so the KG loss
  // accumulates gradients in one order whatever the ablation settings.
  diff::Var kg_relation_fuse(RelationId r, EntityId t);
  // m_u = ReLU(e_u W1_user + b1_user), or ones without user attention.
  diff::Var user_preference(UserId u);
  // alpha over the sampled neighbors, 1 x S.
  diff::Var user_attention(UserId u, EntityId h, std::span<const Neighbor> sampled);
  // c_h^l = tanh((e_h || sum alpha e_t) W2 + b2)
  diff::Var local_embedding(UserId u, EntityId h, std::span<const Neighbor> sampled);
  // c_h^g = tanh((e_h || GRU(reversed context)) W2 + b2)
  diff::Var nonlocal_embedding(EntityId h, std::span<const EntityId> context);
  // Gated fusion of local and non-local context, honoring ablations.
  diff::Var kg_context(UserId u, EntityId h, std::span<const Neighbor> sampled,
                       std::span<const EntityId> context);
  // q_i = (e_i || c_i), 1 x 2d.
  diff::Var contextualized_item(UserId u, const ItemSample& item);
  // beta over the history, 1 x N.
  diff::Var interaction_weights(diff::Var q_target, std::span<const diff::Var> q_history);
  // p_u = (e_u || ReLU((e_u || sum beta q_j) W3 + b3)), 1 x 2d.
  diff::Var interaction_context(UserId u, diff::Var q_target, std::span<const diff::Var> q_history);
  // y_ui = p_u q_i^T, 1 x 1.
  diff::Var score(UserId u, diff::Var q_target, std::span<const diff::Var> q_history);
  diff::Var score(UserId u, const ItemSample& target, std::span<const ItemSample> history);

 private:
  diff::Var param(diff::ParamId id) { return tape_.param(id); }
  diff::Var entity(EntityId e) { return tape_.param_row(model_.ids().entity_embedding, e.index()); }
  diff::Var attention_key(EntityId h, const Neighbor& n);
  diff::Var fuse(std::unordered_map<std::uint64_t, diff::Var>& cache, RelationId r, EntityId t);

  struct Key {
    std::uint32_t h, r, t;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const;
  };
  struct CachedItem {
    std::vector<Neighbor> neighbors;
    diff::Var q;
  };

  CgatModel& model_;
  diff::Tape& tape_;
  std::size_t d_;
  std::optional<diff::GruWeights> gru_;
  std::unordered_map<std::uint64_t, diff::Var> fused_;
  std::unordered_map<std::uint64_t, diff::Var> kg_fused_;
  std::unordered_map<Key, diff::Var, KeyHash> keys_;
  // q per (user, item); an item must keep one neighbor sample per tape.
  std::unordered_map<std::uint64_t, CachedItem> items_;
  std::unordered_map<std::uint32_t, diff::Var> preferences_;
  std::map<std::vector<std::uint32_t>, diff::Var> nonlocal_;
};

}  // namespace cgat
