#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cgat/eval.hpp"
#include "cgat/model.hpp"

namespace cgat {

// Neighbor samples and histories held fixed for a whole evaluation, so
// every candidate of a user is scored against the same contexts.
struct EvalContexts {
  std::vector<std::vector<Neighbor>> item_neighbors;  // by ItemId, S each
  std::vector<std::vector<ItemId>> user_history;      // by UserId, N or empty
};

EvalContexts sample_eval_contexts(const KnowledgeGraph& kg, const InteractionStore& store,
                                  std::size_t S, std::size_t N, std::uint64_t seed);

ItemSample eval_item_sample(const EvalContexts& ctx, const WalkCache& cache, ItemId item);

// Forward-only CGAT scorer over a parameter snapshot taken at construction.
// User-independent terms are precomputed per item; results agree with the
// tape forward up to floating-point reassociation.
class CgatScorer : public UserScorer {
 public:
  CgatScorer(const CgatModel& model, const WalkCache& cache, EvalContexts contexts);

  void score(UserId user, std::span<const ItemId> candidates, std::span<double> out) const override;
  double score_one(UserId user, ItemId item) const;

 private:
  struct UserState {
    std::vector<double> e_u;      // d
    std::vector<double> m_u;      // d
    std::vector<double> base;     // e_u W3[0:d] + b3, d
    std::vector<double> hist_p;   // N x d, q_j W3[d:3d]
    std::vector<double> hist_w;   // N, q_j . w[2d:4d]
    std::size_t history = 0;
  };

  UserState user_state(UserId user) const;
  // Writes q_i = (e_i || c_i) for `user` into q (2d).
  void item_vector(const UserState& st, ItemId item, std::span<double> q) const;
  double score_with(const UserState& st, ItemId item, std::span<double> q,
                    std::span<double> beta, std::span<double> c_u) const;

  std::size_t d_, S_;
  bool use_local_, use_nonlocal_, user_attention_;
  EvalContexts contexts_;
  std::vector<double> user_emb_;    // |U| x d
  std::vector<double> item_emb_;    // |I| x d, e_i rows
  std::vector<double> keys_;        // |I| x S x d, attention keys
  std::vector<double> tails_;       // |I| x S x d, e_t W2[d:2d]
  std::vector<double> local_base_;  // |I| x d, e_h W2[0:d] + b2
  std::vector<double> nonlocal_;    // |I| x d, c^g
  std::vector<double> gate_;        // d
  std::vector<double> w1_user_, b1_user_, w3_, b3_, w_;
  double b_ = 0.0;
};

}  // namespace cgat
