// SPDX-License-Identifier: Apache-2.0
#include "calrec/tradeoff.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "calrec/util/csv.hpp"

namespace calrec {

Balance balance_from_string(const std::string& name) {
  if (name == "lin") return Balance::lin;
  if (name == "log") return Balance::log;
  throw std::invalid_argument("unknown balance: " + name);
}

std::string to_string(Balance balance) {
  return balance == Balance::lin ? "lin" : "log";
}

LambdaPolicy LambdaPolicy::parse(const std::string& token) {
  LambdaPolicy policy;
  policy.label = token;
  if (token == "var") {
    policy.kind = Kind::var;
  } else if (token == "cgr") {
    policy.kind = Kind::cgr;
  } else {
    policy.kind = Kind::constant;
    try {
      policy.value = parse_double(token, "lambda value");
    } catch (const std::exception&) {
      throw std::invalid_argument("bad lambda token: " + token);
    }
    if (policy.value < 0.0 || policy.value > 1.0) {
      throw std::invalid_argument("lambda outside [0,1]: " + token);
    }
  }
  return policy;
}

double relevance_sum(std::span<const CandidateItem> list_items) {
  double acc = 0.0;
  for (const auto& item : list_items) acc += item.predicted_weight;
  return acc;
}

double item_bias(std::span<const double> weights_on_item,
                 const BiasParams& bp) {
  if (bp.alpha_b <= 0.0) throw std::invalid_argument("alpha_b must be > 0");
  double acc = 0.0;
  for (double w : weights_on_item) acc += w - bp.mu;
  return acc / (bp.alpha_b + static_cast<double>(weights_on_item.size()));
}

double user_bias(std::span<const CandidateItem> list_items,
                 const BiasParams& bp) {
  if (bp.sigma <= 0.0) throw std::invalid_argument("sigma must be > 0");
  double acc = 0.0;
  for (const auto& item : list_items) {
    acc += item.predicted_weight - bp.mu - bp.item_bias_of(item.item_id);
  }
  return acc / (bp.sigma + static_cast<double>(list_items.size()));
}

namespace {

Distribution realized_of(std::span<const CandidateItem> list_items,
                         const UniversePtr& universe,
                         const ItemCatalog& catalog) {
  std::vector<WeightedItem> weighted;
  weighted.reserve(list_items.size());
  for (const auto& item : list_items) {
    auto it = catalog.find(item.item_id);
    if (it == catalog.end()) {
      throw std::invalid_argument("item missing from catalog: " +
                                  item.item_id);
    }
    weighted.push_back({&it->second, item.predicted_weight});
  }
  return realized_distribution(weighted, universe);
}

}  // namespace

double tradeoff_lin(double lambda_u, std::span<const CandidateItem> list_items,
                    const Distribution& p, const TradeOffSpec& spec,
                    const ItemCatalog& catalog) {
  if (lambda_u < 0.0 || lambda_u > 1.0) {
    throw std::invalid_argument("lambda outside [0,1]");
  }
  Distribution q = realized_of(list_items, p.universe, catalog);
  double f = miscalibration(spec.divergence, p, q, spec.smoothing);
  return (1.0 - lambda_u) * relevance_sum(list_items) - lambda_u * f;
}

double signed_log_damp(double t, double log_base) {
  double sign = t > 0.0 ? 1.0 : t < 0.0 ? -1.0 : 0.0;
  return sign * std::log(std::abs(t) + 1.0) / std::log(log_base);
}

double tradeoff_log(double lambda_u, std::span<const CandidateItem> list_items,
                    const Distribution& p, const TradeOffSpec& spec,
                    const BiasParams& bp, const ItemCatalog& catalog) {
  double t = tradeoff_lin(lambda_u, list_items, p, spec, catalog);
  return signed_log_damp(t, spec.log_base) + user_bias(list_items, bp);
}

BiasParams compute_bias_params(const InteractionTable& train, double alpha_b,
                               double sigma) {
  BiasParams bp;
  bp.alpha_b = alpha_b;
  bp.sigma = sigma;
  if (train.interactions.empty()) {
    throw std::invalid_argument("empty train table");
  }
  double total = 0.0;
  for (const auto& x : train.interactions) total += x.weight;
  bp.mu = total / static_cast<double>(train.interactions.size());

  std::map<std::string, std::vector<double>> weights;
  for (const auto& x : train.interactions) {
    weights[x.item_id].push_back(x.weight);
  }
  for (const auto& [item_id, w] : weights) {
    bp.item_bias.emplace(item_id, item_bias(w, bp));
  }
  return bp;
}

}  // namespace calrec
