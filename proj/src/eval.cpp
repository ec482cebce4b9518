#include "cgat/eval.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "cgat/errors.hpp"
#include "cgat/rng.hpp"
#include "tsv.hpp"

namespace cgat {

void EvalConfig::validate() const {
  if (ks.empty()) throw InputError("at least one K is required");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == 0) throw InputError("K values must be positive");
    if (i > 0 && ks[i] <= ks[i - 1]) throw InputError("K values must be strictly increasing");
  }
  if (split == Split::Train) throw InputError("evaluation split must be valid or test");
  if (policy == CandidatePolicy::Sampled && sampled_negatives == 0) {
    throw InputError("sampled evaluation needs at least one negative");
  }
}

const MetricTriple& EvalReport::at(std::size_t k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return metrics[i];
  }
  throw ContractError(fmt::format("report has no K = {}", k));
}

std::string EvalReport::to_text() const {
  std::string out = fmt::format("# users\t{}\n", users);
  const std::string_view name = split_name(split);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    out += fmt::format("{}\t{}\tprecision\t{}\n", name, ks[i], metrics[i].precision);
    out += fmt::format("{}\t{}\trecall\t{}\n", name, ks[i], metrics[i].recall);
    out += fmt::format("{}\t{}\thit_ratio\t{}\n", name, ks[i], metrics[i].hit_ratio);
  }
  return out;
}

EvalReport EvalReport::parse(const std::string& text) {
  EvalReport r;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_tabs(line);
    if (f.size() == 2 && f[0] == "# users") {
      r.users = detail::parse_index(f[1], "<report>", lineno);
      continue;
    }
    if (f.size() != 4) throw ParseError("<report>", lineno, "expected 4 fields");
    r.split = parse_split(f[0]);
    const std::size_t k = detail::parse_index(f[1], "<report>", lineno);
    if (r.ks.empty() || r.ks.back() != k) {
      r.ks.push_back(k);
      r.metrics.emplace_back();
    }
    const double v = detail::parse_double(f[3], "<report>", lineno);
    if (f[2] == "precision") r.metrics.back().precision = v;
    else if (f[2] == "recall") r.metrics.back().recall = v;
    else if (f[2] == "hit_ratio") r.metrics.back().hit_ratio = v;
    else throw ParseError("<report>", lineno, "unknown metric");
  }
  return r;
}

std::vector<ItemId> rank_items(std::span<const ItemId> candidates, std::span<const double> scores,
                               std::size_t limit) {
  if (candidates.size() != scores.size()) throw ContractError("rank_items: size mismatch");
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto before = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates[a] < candidates[b];
  };
  const std::size_t n = std::min(limit, order.size());
  std::partial_sort(order.begin(), order.begin() + n, order.end(), before);
  std::vector<ItemId> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(candidates[order[i]]);
  return out;
}

std::vector<ItemId> candidate_items(const InteractionStore& store, UserId user, Split split,
                                    bool include_valid) {
  const auto train = store.positives(Split::Train, user);
  const bool skip_valid = split == Split::Test && !include_valid;
  const auto valid = skip_valid ? store.positives(Split::Valid, user) : std::span<const ItemId>{};
  std::vector<ItemId> out;
  out.reserve(store.item_count());
  for (std::size_t i = 0; i < store.item_count(); ++i) {
    const ItemId item(i);
    if (std::binary_search(train.begin(), train.end(), item)) continue;
    if (std::binary_search(valid.begin(), valid.end(), item)) continue;
    out.push_back(item);
  }
  return out;
}

MetricTriple metrics_for_user(std::span<const ItemId> ranked, std::span<const ItemId> positives,
                              std::size_t k) {
  if (positives.empty()) throw ContractError("metrics_for_user: no positives");
  if (k == 0) throw ContractError("metrics_for_user: K must be positive");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
    if (std::binary_search(positives.begin(), positives.end(), ranked[i])) ++hits;
  }
  return {static_cast<double>(hits) / static_cast<double>(k),
          static_cast<double>(hits) / static_cast<double>(positives.size()),
          hits > 0 ? 1.0 : 0.0};
}

namespace {

std::vector<ItemId> sampled_candidates(const InteractionStore& store, UserId user,
                                       const EvalConfig& cfg) {
  std::vector<ItemId> out(store.positives(cfg.split, user).begin(),
                          store.positives(cfg.split, user).end());
  std::vector<ItemId> pool;
  for (std::size_t i = 0; i < store.item_count(); ++i) {
    const ItemId item(i);
    if (!store.contains(Split::Train, user, item) && !store.contains(Split::Valid, user, item) &&
        !store.contains(Split::Test, user, item)) {
      pool.push_back(item);
    }
  }
  RngStream rng(derive_seed(cfg.seed, "eval-candidates") ^ user.value);
  const std::size_t take = std::min(cfg.sampled_negatives, pool.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(pool[i], pool[i + rng.uniform_index(pool.size() - i)]);
    out.push_back(pool[i]);
  }
  return out;
}

}  // namespace

EvalReport evaluate(const UserScorer& scorer, const InteractionStore& store,
                    const EvalConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n_users = store.user_count();
  const std::size_t max_k = cfg.ks.back();
  std::vector<std::vector<MetricTriple>> per_user(n_users);

  auto run_user = [&](std::size_t u) {
    const UserId user(u);
    const auto positives = store.positives(cfg.split, user);
    if (positives.empty()) return;
    const auto candidates = cfg.policy == CandidatePolicy::Full
                                ? candidate_items(store, user, cfg.split,
                                                  cfg.include_valid_in_candidates)
                                : sampled_candidates(store, user, cfg);
    std::vector<double> scores(candidates.size());
    scorer.score(user, candidates, scores);
    const auto ranked = rank_items(candidates, scores, max_k);
    auto& row = per_user[u];
    for (std::size_t k : cfg.ks) row.push_back(metrics_for_user(ranked, positives, k));
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, n_users));
  if (workers == 1) {
    for (std::size_t u = 0; u < n_users; ++u) run_user(u);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t u = w; u < n_users; u += workers) run_user(u);
      });
    }
    for (auto& t : pool) t.join();
  }

  EvalReport report;
  report.split = cfg.split;
  report.ks = cfg.ks;
  report.metrics.assign(cfg.ks.size(), MetricTriple{});
  for (const auto& row : per_user) {
    if (row.empty()) continue;
    ++report.users;
    for (std::size_t i = 0; i < row.size(); ++i) {
      report.metrics[i].precision += row[i].precision;
      report.metrics[i].recall += row[i].recall;
      report.metrics[i].hit_ratio += row[i].hit_ratio;
    }
  }
  if (report.users > 0) {
    const double n = static_cast<double>(report.users);
    for (auto& m : report.metrics) {
      m.precision /= n;
      m.recall /= n;
      m.hit_ratio /= n;
    }
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace cgat
