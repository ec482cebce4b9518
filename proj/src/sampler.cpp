#include "cgat/sampler.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <thread>
#include <unordered_map>

#include "cgat/binary_io.hpp"
#include "cgat/errors.hpp"

namespace cgat {

void WalkConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 0.5)) throw InputError("gamma must lie in (0, 0.5)");
  if (num_walks == 0 || walk_length == 0 || context_size == 0) {
    throw InputError("M, L and the context size must be positive");
  }
}

namespace {

// Draws `count` distinct positions of [0, n) by a partial Fisher-Yates pass.
std::vector<std::size_t> draw_distinct(std::size_t n, std::size_t count, RngStream& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(idx[i], idx[i + rng.uniform_index(n - i)]);
  }
  idx.resize(count);
  return idx;
}

// `count` values from `pool`: distinct when the pool is large enough,
// otherwise with replacement.
template <typename T>
std::vector<T> draw_from_pool(const std::vector<T>& pool, std::size_t count, RngStream& rng) {
  std::vector<T> out;
  out.reserve(count);
  if (pool.size() >= count) {
    for (std::size_t i : draw_distinct(pool.size(), count, rng)) out.push_back(pool[i]);
  } else {
    for (std::size_t i = 0; i < count; ++i) out.push_back(pool[rng.uniform_index(pool.size())]);
  }
  return out;
}

}  // namespace

std::vector<Neighbor> sample_local_neighbors(const KnowledgeGraph& kg, EntityId h,
                                             std::size_t count, RngStream& rng) {
  if (count == 0) throw ContractError("neighbor sample size must be positive");
  const auto ctx = kg.neighbors(h);
  if (ctx.empty()) return std::vector<Neighbor>(count, Neighbor{kg.self_relation(), h});
  return draw_from_pool(std::vector<Neighbor>(ctx.begin(), ctx.end()), count, rng);
}

EntityId walk_step(const KnowledgeGraph& kg, std::optional<EntityId> prev, EntityId cur,
                   double gamma, RngStream& rng) {
  const auto candidates = kg.neighbor_entities(cur);
  if (candidates.empty()) return cur;
  if (!prev) return candidates[rng.uniform_index(candidates.size())];

  double total = 0.0;
  std::vector<double> weights(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const EntityId c = candidates[i];
    const bool close = c == *prev || kg.adjacent(*prev, c);
    weights[i] = close ? gamma : 1.0 - gamma;
    total += weights[i];
  }
  double u = rng.uniform01() * total;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (u < weights[i]) return candidates[i];
    u -= weights[i];
  }
  return candidates.back();
}

std::vector<std::vector<EntityId>> run_walks(const KnowledgeGraph& kg, EntityId root,
                                             const WalkConfig& cfg, RngStream& rng) {
  std::vector<std::vector<EntityId>> walks(cfg.num_walks);
  for (auto& path : walks) {
    path.reserve(cfg.walk_length);
    std::optional<EntityId> prev;
    EntityId cur = root;
    for (std::size_t k = 0; k < cfg.walk_length; ++k) {
      const EntityId next = walk_step(kg, prev, cur, cfg.gamma, rng);
      path.push_back(next);
      prev = cur;
      cur = next;
    }
  }
  return walks;
}

std::vector<EntityId> rank_by_frequency(const std::vector<std::vector<EntityId>>& walks,
                                        EntityId root, std::size_t size) {
  std::unordered_map<EntityId, std::size_t> counts;
  for (const auto& path : walks) {
    for (EntityId e : path) {
      if (e != root) ++counts[e];
    }
  }
  std::vector<std::pair<EntityId, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<EntityId> out;
  for (std::size_t i = 0; i < ranked.size() && i < size; ++i) out.push_back(ranked[i].first);
  return out;
}

std::vector<EntityId> nonlocal_context(const KnowledgeGraph& kg, EntityId root,
                                       const WalkConfig& cfg, RngStream& rng) {
  return rank_by_frequency(run_walks(kg, root, cfg, rng), root, cfg.context_size);
}

WalkCache::WalkCache(WalkConfig cfg, std::uint64_t seed,
                     std::vector<std::vector<EntityId>> contexts)
    : cfg_(cfg), seed_(seed), contexts_(std::move(contexts)) {}

namespace {
constexpr char kCacheMagic[5] = "CGWC";
constexpr std::uint32_t kCacheVersion = 1;
}  // namespace

void WalkCache::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  binio::write_magic(out, kCacheMagic);
  binio::write_le<std::uint32_t>(out, kCacheVersion);
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(contexts_.size()));
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(cfg_.context_size));
  binio::write_le<std::uint64_t>(out, seed_);
  binio::write_f64(out, cfg_.gamma);
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(cfg_.num_walks));
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(cfg_.walk_length));
  for (std::size_t i = 0; i < contexts_.size(); ++i) {
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(i));
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(contexts_[i].size()));
    for (EntityId e : contexts_[i]) binio::write_le<std::uint32_t>(out, e.value);
  }
  if (!out) throw InputError("failed writing " + path.string());
}

WalkCache WalkCache::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  binio::expect_magic(in, kCacheMagic, "walk cache");
  if (binio::read_le<std::uint32_t>(in) != kCacheVersion) {
    throw InputError("unsupported walk cache version in " + path.string());
  }
  const auto items = binio::read_le<std::uint32_t>(in);
  WalkConfig cfg;
  cfg.context_size = binio::read_le<std::uint32_t>(in);
  const auto seed = binio::read_le<std::uint64_t>(in);
  cfg.gamma = binio::read_f64(in);
  cfg.num_walks = binio::read_le<std::uint32_t>(in);
  cfg.walk_length = binio::read_le<std::uint32_t>(in);
  std::vector<std::vector<EntityId>> contexts(items);
  for (std::uint32_t i = 0; i < items; ++i) {
    if (binio::read_le<std::uint32_t>(in) != i) throw InputError("walk cache items out of order");
    const auto len = binio::read_le<std::uint32_t>(in);
    if (len > cfg.context_size) throw InputError("walk cache entry longer than context size");
    contexts[i].reserve(len);
    for (std::uint32_t k = 0; k < len; ++k) {
      contexts[i].emplace_back(binio::read_le<std::uint32_t>(in));
    }
  }
  return WalkCache(cfg, seed, std::move(contexts));
}

WalkCache build_walk_cache(const KnowledgeGraph& kg, const WalkConfig& cfg, std::uint64_t seed,
                           std::size_t workers) {
  cfg.validate();
  const std::size_t n = kg.item_count();
  std::vector<std::vector<EntityId>> contexts(n);
  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      RngStream rng(seed ^ static_cast<std::uint64_t>(i));
      contexts[i] = nonlocal_context(kg, kg.item_entity(ItemId(i)), cfg, rng);
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    run_range(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      if (begin < end) pool.emplace_back(run_range, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  for (auto& ctx : contexts) ctx.shrink_to_fit();
  return WalkCache(cfg, seed, std::move(contexts));
}

std::vector<BprTuple> sample_bpr_batch(const InteractionStore& store, std::size_t n_neg,
                                       RngStream& rng) {
  const std::size_t n_items = store.item_count();
  std::vector<BprTuple> out;
  out.reserve(store.interactions(Split::Train).size() * n_neg);
  std::vector<bool> warned(store.user_count(), false);
  std::vector<ItemId> drawn;
  std::vector<ItemId> pool;
  for (const Interaction& x : store.interactions(Split::Train)) {
    const auto positives = store.positives(Split::Train, x.user);
    const std::size_t available = n_items - positives.size();
    if (available == 0) {
      if (!warned[x.user.index()]) {
        std::cerr << "warning: user " << x.user.value
                  << " has interacted with every item; no negatives can be drawn\n";
        warned[x.user.index()] = true;
      }
      continue;
    }
    drawn.clear();
    if (available >= n_neg && positives.size() * 2 <= n_items) {
      while (drawn.size() < n_neg) {
        const ItemId cand(rng.uniform_index(n_items));
        if (std::binary_search(positives.begin(), positives.end(), cand)) continue;
        if (std::find(drawn.begin(), drawn.end(), cand) != drawn.end()) continue;
        drawn.push_back(cand);
      }
    } else {
      pool.clear();
      for (std::size_t i = 0; i < n_items; ++i) {
        if (!std::binary_search(positives.begin(), positives.end(), ItemId(i))) {
          pool.emplace_back(i);
        }
      }
      drawn = draw_from_pool(pool, n_neg, rng);
    }
    for (ItemId neg : drawn) out.push_back({x.user, x.item, neg});
  }
  return out;
}

std::vector<KgTuple> sample_kg_negatives(const KnowledgeGraph& kg, RngStream& rng) {
  const std::size_t n = kg.entity_count();
  std::vector<KgTuple> out;
  out.reserve(kg.triples().size());
  std::vector<EntityId> pool;
  for (const Triple& t : kg.triples()) {
    const auto near = kg.neighbor_entities(t.head);
    const bool self_adjacent = std::binary_search(near.begin(), near.end(), t.head);
    const std::size_t excluded = near.size() + (self_adjacent ? 0 : 1);
    if (excluded >= n) continue;
    auto allowed = [&](EntityId e) {
      return e != t.head && !std::binary_search(near.begin(), near.end(), e);
    };
    EntityId corrupted;
    if (excluded * 2 <= n) {
      do {
        corrupted = EntityId(rng.uniform_index(n));
      } while (!allowed(corrupted));
    } else {
      pool.clear();
      for (std::size_t e = 0; e < n; ++e) {
        if (allowed(EntityId(e))) pool.emplace_back(e);
      }
      corrupted = pool[rng.uniform_index(pool.size())];
    }
    out.push_back({t.head, t.relation, t.tail, corrupted});
  }
  return out;
}

std::vector<ItemId> sample_history(const InteractionStore& store, UserId user,
                                   std::optional<ItemId> exclude, std::size_t count,
                                   RngStream& rng) {
  std::vector<ItemId> pool;
  for (ItemId i : store.positives(Split::Train, user)) {
    if (!exclude || i != *exclude) pool.push_back(i);
  }
  if (pool.empty() || count == 0) return {};
  return draw_from_pool(pool, count, rng);
}

}  // namespace cgat
