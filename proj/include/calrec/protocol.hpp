// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "calrec/metrics.hpp"

namespace calrec {

// One system combination. The divergence and balance labels are uppercased
// in display labels, e.g. "CHI-LOG-SVD++".
struct SystemId {
  std::string recommender;
  std::string divergence;
  std::string balance;
  std::string lambda;  // may be empty when the axis is not in play

  std::string label() const;       // DIVERGENCE-BALANCE-recommender
  std::string full_label() const;  // label plus the lambda token, if any
};

// cce and cmc are the calibration-error and miscalibration coefficients;
// s is their sum and must equal it within 1e-12.
struct ProtocolRow {
  SystemId system;
  double cce = 0.0;
  double cmc = 0.0;
  double s = 0.0;
};

// mace_mean / map_mean.
double cce(const SystemEvaluation& eval);

// mrmc_mean / map_mean.
double cmc(const SystemEvaluation& eval);

double performance(double cce_value, double cmc_value);

// The row with minimal s; ties broken by lexicographic label, then lambda.
SystemId decide(const std::vector<ProtocolRow>& rows);

// Report renderers for the decision stage.
std::string decision_csv(const std::vector<ProtocolRow>& rows);
std::string decision_table(const std::vector<ProtocolRow>& rows);
std::string winner_line(const std::vector<ProtocolRow>& rows);

}  // namespace calrec
