// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <set>
#include <string>
#include <vector>

#include "calrec/distribution.hpp"
#include "calrec/divergence.hpp"
#include "calrec/selector.hpp"

namespace calrec {

struct EvaluationConfig {
  int n = 10;
  DivergenceKind eval_divergence = DivergenceKind::kl;
  SmoothingParams smoothing;
};

struct UserEvaluation {
  std::string user_id;
  double ap = 0.0;
  double ace = 0.0;
  double rmc = 0.0;
};

// Per-system averages: over users within a repetition, then over
// repetitions.
struct SystemEvaluation {
  double map_mean = 0.0;
  double mace_mean = 0.0;
  double mrmc_mean = 0.0;
};

// AP@n with relevance = membership in `relevant`, normalized by
// min(n, |relevant|); 0 when nothing is relevant.
double average_precision(const RankedList& ranked,
                         const std::set<std::string>& relevant, int n);

// Mean over prefixes 1..n of the mean absolute gap between the target and
// the smoothed realized distribution of the prefix.
double ace(const RankedList& ranked, const Distribution& p,
           const EvaluationConfig& cfg, const ItemCatalog& catalog);

// Mean over prefixes 1..n of the configured divergence between the target
// and the prefix's realized distribution.
double rmc(const RankedList& ranked, const Distribution& p,
           const EvaluationConfig& cfg, const ItemCatalog& catalog);

// Mean over users within each repetition, then mean over repetitions.
SystemEvaluation aggregate(
    const std::vector<std::vector<UserEvaluation>>& repetitions);

}  // namespace calrec
