// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace calrec {

struct CandidateItem {
  std::string item_id;
  double predicted_weight = 0.0;
};

// Descending predicted_weight, ties by ascending item_id.
inline bool candidate_before(const CandidateItem& a, const CandidateItem& b) {
  if (a.predicted_weight != b.predicted_weight) {
    return a.predicted_weight > b.predicted_weight;
  }
  return a.item_id < b.item_id;
}

// Per-user scored candidates, strictly ordered by candidate_before, free of
// duplicates and of the user's train items.
struct CandidateList {
  std::string user_id;
  std::vector<CandidateItem> items;
};

}  // namespace calrec
