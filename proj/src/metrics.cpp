// SPDX-License-Identifier: Apache-2.0
#include "calrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace calrec {
namespace {

void check_depth(const RankedList& ranked, int n) {
  if (n < 1) throw std::invalid_argument("evaluation depth must be >= 1");
  if (ranked.items.size() < static_cast<std::size_t>(n)) {
    throw std::runtime_error("list shorter than evaluation depth");
  }
}

// Realized distributions of every prefix 1..n, raw (unsmoothed).
std::vector<Distribution> prefix_distributions(const RankedList& ranked,
                                               const UniversePtr& universe,
                                               int n,
                                               const ItemCatalog& catalog) {
  std::vector<WeightedItem> prefix;
  prefix.reserve(static_cast<std::size_t>(n));
  std::vector<Distribution> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const auto& item = ranked.items[static_cast<std::size_t>(k)];
    auto it = catalog.find(item.item_id);
    if (it == catalog.end()) {
      throw std::invalid_argument("item missing from catalog: " +
                                  item.item_id);
    }
    prefix.push_back({&it->second, item.predicted_weight});
    out.push_back(realized_distribution(prefix, universe));
  }
  return out;
}

}  // namespace

double average_precision(const RankedList& ranked,
                         const std::set<std::string>& relevant, int n) {
  check_depth(ranked, n);
  if (relevant.empty()) return 0.0;
  double acc = 0.0;
  int hits = 0;
  for (int k = 1; k <= n; ++k) {
    if (relevant.count(ranked.items[static_cast<std::size_t>(k - 1)].item_id)) {
      ++hits;
      acc += static_cast<double>(hits) / static_cast<double>(k);
    }
  }
  double denom = static_cast<double>(
      std::min<std::size_t>(static_cast<std::size_t>(n), relevant.size()));
  return acc / denom;
}

double ace(const RankedList& ranked, const Distribution& p,
           const EvaluationConfig& cfg, const ItemCatalog& catalog) {
  check_depth(ranked, cfg.n);
  auto prefixes = prefix_distributions(ranked, p.universe, cfg.n, catalog);
  const std::size_t g_count = p.probs.size();
  double acc = 0.0;
  for (const auto& q : prefixes) {
    Distribution qs = smooth(q, p, cfg.smoothing);
    double gap = 0.0;
    for (std::size_t g = 0; g < g_count; ++g) {
      gap += std::abs(p.probs[g] - qs.probs[g]);
    }
    acc += gap / static_cast<double>(g_count);
  }
  return acc / static_cast<double>(cfg.n);
}

double rmc(const RankedList& ranked, const Distribution& p,
           const EvaluationConfig& cfg, const ItemCatalog& catalog) {
  check_depth(ranked, cfg.n);
  auto prefixes = prefix_distributions(ranked, p.universe, cfg.n, catalog);
  double acc = 0.0;
  for (const auto& q : prefixes) {
    acc += miscalibration(cfg.eval_divergence, p, q, cfg.smoothing);
  }
  return acc / static_cast<double>(cfg.n);
}

SystemEvaluation aggregate(
    const std::vector<std::vector<UserEvaluation>>& repetitions) {
  if (repetitions.empty()) {
    throw std::invalid_argument("empty evaluation input");
  }
  SystemEvaluation out;
  for (const auto& rep : repetitions) {
    if (rep.empty()) throw std::invalid_argument("empty evaluation input");
    double ap = 0.0, ace_sum = 0.0, rmc_sum = 0.0;
    for (const auto& u : rep) {
      ap += u.ap;
      ace_sum += u.ace;
      rmc_sum += u.rmc;
    }
    double n = static_cast<double>(rep.size());
    out.map_mean += ap / n;
    out.mace_mean += ace_sum / n;
    out.mrmc_mean += rmc_sum / n;
  }
  double reps = static_cast<double>(repetitions.size());
  out.map_mean /= reps;
  out.mace_mean /= reps;
  out.mrmc_mean /= reps;
  return out;
}

}  // namespace calrec
