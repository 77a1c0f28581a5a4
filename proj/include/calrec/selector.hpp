// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "calrec/candidates.hpp"
#include "calrec/distribution.hpp"
#include "calrec/tradeoff.hpp"

namespace calrec {

// One selection instance: choose n of the candidates to maximize the
// trade-off objective for this user.
struct SelectionProblem {
  const CandidateList* candidates = nullptr;
  const Distribution* p = nullptr;
  TradeOffSpec spec;
  const BiasParams* bias = nullptr;
  int n = 10;
  double lambda_u = 0.0;
  const ItemCatalog* catalog = nullptr;
};

// Final list in selection order (rank 1 first) with the objective value
// reached after each step.
struct RankedList {
  std::string user_id;
  std::vector<CandidateItem> items;
  std::vector<double> objective_trace;
};

struct BruteForceResult {
  std::vector<std::string> best_subset;  // item ids, sorted
  double best_value = 0.0;
};

// Greedy construction: each step appends the remaining candidate whose
// addition maximizes the objective of the grown prefix, ties broken by
// higher predicted weight then ascending item id.
RankedList greedy_select(const SelectionProblem& prob);

// Exhaustive maximum over all size-n subsets. Guarded to at most 20
// candidates and n <= 5; the objective is a set function, so subset order
// does not matter. Ties resolved by lexicographic item-id tuple.
BruteForceResult brute_force_select(const SelectionProblem& prob);

// Replays the greedy argmax for every step of rank_list and checks that
// each appended item attains the maximum under the tie-break.
bool greedy_step_certificate(const SelectionProblem& prob,
                             const RankedList& rank_list);

// Reference objective of a list under the problem's trade-off, computed
// from scratch.
double objective_value(const SelectionProblem& prob,
                       std::span<const CandidateItem> list_items);

}  // namespace calrec
