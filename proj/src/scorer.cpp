#include "cgat/scorer.hpp"

#include <algorithm>
#include <cmath>

#include "cgat/errors.hpp"

namespace cgat {

using diff::Tensor;

EvalContexts sample_eval_contexts(const KnowledgeGraph& kg, const InteractionStore& store,
                                  std::size_t S, std::size_t N, std::uint64_t seed) {
  EvalContexts ctx;
  const std::uint64_t item_seed = derive_seed(seed, "eval-neighbors");
  const std::uint64_t user_seed = derive_seed(seed, "eval-history");
  ctx.item_neighbors.reserve(kg.item_count());
  for (std::size_t i = 0; i < kg.item_count(); ++i) {
    RngStream rng(item_seed ^ i);
    ctx.item_neighbors.push_back(sample_local_neighbors(kg, kg.item_entity(ItemId(i)), S, rng));
  }
  ctx.user_history.reserve(store.user_count());
  for (std::size_t u = 0; u < store.user_count(); ++u) {
    RngStream rng(user_seed ^ u);
    ctx.user_history.push_back(sample_history(store, UserId(u), std::nullopt, N, rng));
  }
  return ctx;
}

ItemSample eval_item_sample(const EvalContexts& ctx, const WalkCache& cache, ItemId item) {
  return {item, ctx.item_neighbors.at(item.index()), cache.context(item)};
}

namespace {

// out[c] += sum_k x[k] * w(row0 + k, c)
void vec_mat(const double* x, std::size_t n, const Tensor& w, std::size_t row0, double* out) {
  const std::size_t cols = w.cols();
  for (std::size_t k = 0; k < n; ++k) {
    const double xk = x[k];
    const double* row = w.data().data() + (row0 + k) * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += xk * row[c];
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

void softmax_inplace(std::span<double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    total += x;
  }
  for (double& x : v) x /= total;
}

std::vector<double> flat(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

CgatScorer::CgatScorer(const CgatModel& model, const WalkCache& cache, EvalContexts contexts)
    : d_(model.config().d),
      S_(model.config().S),
      use_local_(!model.config().disable_local),
      use_nonlocal_(!model.config().disable_nonlocal),
      user_attention_(!model.config().disable_user_attention),
      contexts_(std::move(contexts)) {
  const auto& cfg = model.config();
  const auto& ids = model.ids();
  const auto& p = model.params();
  const std::size_t n_items = model.item_count();
  if (contexts_.item_neighbors.size() != n_items || cache.item_count() != n_items ||
      contexts_.user_history.size() != model.user_count()) {
    throw ContractError("scorer contexts do not match the model");
  }
  for (const auto& nb : contexts_.item_neighbors) {
    if (nb.size() != S_) throw ContractError("scorer neighbor samples must have size S");
  }

  user_emb_ = flat(p.value(ids.user_embedding));
  w1_user_ = flat(p.value(ids.w1_user));
  b1_user_ = flat(p.value(ids.b1_user));
  w3_ = flat(p.value(ids.w3));
  b3_ = flat(p.value(ids.b3));
  w_ = flat(p.value(ids.w));
  b_ = p.value(ids.b)[0];

  gate_.resize(d_);
  for (std::size_t k = 0; k < d_; ++k) {
    const double om = p.value(ids.omega)[k];
    gate_[k] = cfg.gate_override ? *cfg.gate_override
               : om >= 0.0       ? 1.0 / (1.0 + std::exp(-om))
                                 : std::exp(om) / (1.0 + std::exp(om));
  }

  const Tensor& entities = p.value(ids.entity_embedding);
  const Tensor& w2 = p.value(ids.w2);
  const Tensor& b2 = p.value(ids.b2);
  item_emb_.assign(n_items * d_, 0.0);
  keys_.assign(n_items * S_ * d_, 0.0);
  tails_.assign(n_items * S_ * d_, 0.0);
  local_base_.assign(n_items * d_, 0.0);
  nonlocal_.assign(n_items * d_, 0.0);

  // A forward-only tape never writes to the registry.
  auto& mutable_model = const_cast<CgatModel&>(model);
  for (std::size_t i = 0; i < n_items; ++i) {
    const ItemId item(i);
    const EntityId h = model.item_entity(item);
    const auto e_h = entities.row_span(h.index());
    std::copy(e_h.begin(), e_h.end(), item_emb_.begin() + i * d_);

    diff::Tape tape(&mutable_model.params());
    CgatForward fwd(mutable_model, tape);
    if (use_nonlocal_) {
      const auto c_g = fwd.nonlocal_embedding(h, cache.context(item)).value().data();
      std::copy(c_g.begin(), c_g.end(), nonlocal_.begin() + i * d_);
    }
    if (!use_local_) continue;
    double* base = local_base_.data() + i * d_;
    std::copy(b2.data().begin(), b2.data().end(), base);
    vec_mat(e_h.data(), d_, w2, 0, base);
    const auto& nb = contexts_.item_neighbors[i];
    diff::Var e_h_var = tape.param_row(ids.entity_embedding, h.index());
    diff::Var w1 = tape.param(ids.w1);
    diff::Var b1 = tape.param(ids.b1);
    for (std::size_t s = 0; s < S_; ++s) {
      diff::Var e_rt = fwd.relation_fuse(nb[s].relation, nb[s].entity);
      const auto key = diff::tanh(diff::affine(diff::concat(e_h_var, e_rt), w1, b1)).value().data();
      std::copy(key.begin(), key.end(), keys_.begin() + (i * S_ + s) * d_);
      vec_mat(entities.row_span(nb[s].entity.index()).data(), d_, w2, d_,
              tails_.data() + (i * S_ + s) * d_);
    }
  }
}

CgatScorer::UserState CgatScorer::user_state(UserId user) const {
  UserState st;
  const double* e_u = user_emb_.data() + user.index() * d_;
  st.e_u.assign(e_u, e_u + d_);
  st.m_u.assign(d_, 1.0);
  if (user_attention_) {
    std::copy(b1_user_.begin(), b1_user_.end(), st.m_u.begin());
    for (std::size_t k = 0; k < d_; ++k) {
      for (std::size_t c = 0; c < d_; ++c) st.m_u[c] += e_u[k] * w1_user_[k * d_ + c];
    }
    for (double& v : st.m_u) v = std::max(v, 0.0);
  }
  st.base = b3_;
  for (std::size_t k = 0; k < d_; ++k) {
    for (std::size_t c = 0; c < d_; ++c) st.base[c] += e_u[k] * w3_[k * d_ + c];
  }
  const auto& hist = contexts_.user_history.at(user.index());
  st.history = hist.size();
  st.hist_p.assign(st.history * d_, 0.0);
  st.hist_w.assign(st.history, 0.0);
  std::vector<double> q(2 * d_);
  for (std::size_t j = 0; j < st.history; ++j) {
    item_vector(st, hist[j], q);
    double* pj = st.hist_p.data() + j * d_;
    for (std::size_t k = 0; k < 2 * d_; ++k) {
      const double* row = w3_.data() + (d_ + k) * d_;
      for (std::size_t c = 0; c < d_; ++c) pj[c] += q[k] * row[c];
    }
    st.hist_w[j] = dot(q.data(), w_.data() + 2 * d_, 2 * d_);
  }
  return st;
}

void CgatScorer::item_vector(const UserState& st, ItemId item, std::span<double> q) const {
  const std::size_t i = item.index();
  std::copy_n(item_emb_.data() + i * d_, d_, q.begin());
  double* c = q.data() + d_;
  const double* global = nonlocal_.data() + i * d_;
  if (!use_local_) {
    std::copy_n(global, d_, c);
    return;
  }
  double alpha[64];
  std::vector<double> alpha_heap;
  double* a = alpha;
  if (S_ > 64) {
    alpha_heap.resize(S_);
    a = alpha_heap.data();
  }
  for (std::size_t s = 0; s < S_; ++s) a[s] = dot(keys_.data() + (i * S_ + s) * d_, st.m_u.data(), d_);
  softmax_inplace({a, S_});
  std::copy_n(local_base_.data() + i * d_, d_, c);
  for (std::size_t s = 0; s < S_; ++s) {
    const double* t = tails_.data() + (i * S_ + s) * d_;
    for (std::size_t k = 0; k < d_; ++k) c[k] += a[s] * t[k];
  }
  for (std::size_t k = 0; k < d_; ++k) c[k] = std::tanh(c[k]);
  if (!use_nonlocal_) return;
  for (std::size_t k = 0; k < d_; ++k) c[k] = gate_[k] * c[k] + (1.0 - gate_[k]) * global[k];
}

double CgatScorer::score_with(const UserState& st, ItemId item, std::span<double> q,
                              std::span<double> beta, std::span<double> c_u) const {
  item_vector(st, item, q);
  std::copy(st.base.begin(), st.base.end(), c_u.begin());
  if (st.history > 0) {
    const double target = dot(q.data(), w_.data(), 2 * d_);
    for (std::size_t j = 0; j < st.history; ++j) beta[j] = std::tanh(target + st.hist_w[j] + b_);
    softmax_inplace(beta.first(st.history));
    for (std::size_t j = 0; j < st.history; ++j) {
      const double* pj = st.hist_p.data() + j * d_;
      for (std::size_t k = 0; k < d_; ++k) c_u[k] += beta[j] * pj[k];
    }
  }
  double y = dot(st.e_u.data(), q.data(), d_);
  for (std::size_t k = 0; k < d_; ++k) y += std::max(c_u[k], 0.0) * q[d_ + k];
  if (!std::isfinite(y)) throw NumericError("non-finite score");
  return y;
}

void CgatScorer::score(UserId user, std::span<const ItemId> candidates,
                       std::span<double> out) const {
  if (candidates.size() != out.size()) throw ContractError("score: size mismatch");
  const UserState st = user_state(user);
  std::vector<double> q(2 * d_), beta(st.history), c_u(d_);
  for (std::size_t n = 0; n < candidates.size(); ++n) {
    out[n] = score_with(st, candidates[n], q, beta, c_u);
  }
}

double CgatScorer::score_one(UserId user, ItemId item) const {
  double out = 0.0;
  score(user, {&item, 1}, {&out, 1});
  return out;
}

}  // namespace cgat
