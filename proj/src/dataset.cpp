// SPDX-License-Identifier: Apache-2.0
#include "calrec/dataset.hpp"

#include <algorithm>

namespace calrec {

std::vector<const RawInteraction*> InteractionTable::interactions_of(
    const std::string& user_id) const {
  auto lo = std::lower_bound(
      interactions.begin(), interactions.end(), user_id,
      [](const RawInteraction& a, const std::string& u) { return a.user_id < u; });
  std::vector<const RawInteraction*> out;
  for (auto it = lo; it != interactions.end() && it->user_id == user_id; ++it) {
    out.push_back(&*it);
  }
  return out;
}

}  // namespace calrec
