// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <numbers>
#include <span>
#include <string>

#include "calrec/candidates.hpp"
#include "calrec/dataset.hpp"
#include "calrec/distribution.hpp"
#include "calrec/divergence.hpp"

namespace calrec {

enum class Balance { lin, log };

Balance balance_from_string(const std::string& name);
std::string to_string(Balance balance);

struct LambdaPolicy {
  enum class Kind { constant, var, cgr };
  Kind kind = Kind::constant;
  double value = 0.0;   // constant kind only
  std::string label;    // config token, used in file names and reports

  static LambdaPolicy parse(const std::string& token);
};

struct TradeOffSpec {
  Balance balance = Balance::lin;
  DivergenceKind divergence = DivergenceKind::kl;
  LambdaPolicy lambda;
  SmoothingParams smoothing;
  double log_base = std::numbers::e;
};

struct BiasParams {
  double mu = 0.0;        // global mean of train weights
  double alpha_b = 0.01;  // item bias damping
  double sigma = 0.01;    // list bias damping
  std::map<std::string, double> item_bias;

  // 0 for items unseen in training.
  double item_bias_of(const std::string& item_id) const {
    auto it = item_bias.find(item_id);
    return it == item_bias.end() ? 0.0 : it->second;
  }
};

using ItemCatalog = std::map<std::string, ItemGenres>;

// Sum of predicted weights of the list; 0 when empty.
double relevance_sum(std::span<const CandidateItem> list_items);

// sum(w - mu) / (alpha_b + count); 0 for an empty weight list.
double item_bias(std::span<const double> weights_on_item,
                 const BiasParams& bp);

// sum over the list of (predicted_weight - mu - b_i) / (sigma + list size).
double user_bias(std::span<const CandidateItem> list_items,
                 const BiasParams& bp);

// (1 - lambda) * relevance_sum - lambda * miscalibration of the list's
// realized distribution against p.
double tradeoff_lin(double lambda_u, std::span<const CandidateItem> list_items,
                    const Distribution& p, const TradeOffSpec& spec,
                    const ItemCatalog& catalog);

// sign(t) * log(|t| + 1), the odd damping applied to the linear trade-off;
// sign(0) is 0.
double signed_log_damp(double t, double log_base);

// signed_log_damp of the linear trade-off, plus the user bias of the list.
// The log base defaults to e.
double tradeoff_log(double lambda_u, std::span<const CandidateItem> list_items,
                    const Distribution& p, const TradeOffSpec& spec,
                    const BiasParams& bp, const ItemCatalog& catalog);

// mu and per-item biases from a train table.
BiasParams compute_bias_params(const InteractionTable& train, double alpha_b,
                               double sigma);

}  // namespace calrec
