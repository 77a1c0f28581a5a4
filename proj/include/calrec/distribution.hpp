// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "calrec/dataset.hpp"

namespace calrec {

// Shared, immutable genre index. Distributions over the same universe are
// aligned vectors, so divergences reduce to elementwise loops.
class GenreUniverse {
 public:
  explicit GenreUniverse(std::vector<std::string> sorted_labels);

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  // Index of a label; throws if the label is unknown.
  std::size_t index_of(const std::string& genre) const;

 private:
  std::vector<std::string> labels_;
  std::map<std::string, std::size_t> index_;
};

using UniversePtr = std::shared_ptr<const GenreUniverse>;

// Probability mass over the genre universe. `probs` sums to 1 within 1e-9;
// `raw` keeps the pre-normalization values for inspection.
struct Distribution {
  UniversePtr universe;
  std::vector<double> probs;
  std::vector<double> raw;

  double prob(const std::string& genre) const {
    return probs[universe->index_of(genre)];
  }
};

struct SmoothingParams {
  double alpha = 0.01;
};

// (item, weight) pair feeding a genre distribution; the weight is an
// observed w or a predicted one.
struct WeightedItem {
  const ItemGenres* item = nullptr;
  double weight = 0.0;
};

// 1/|genres(item)| when g is one of the item's genres, else 0.
double genre_prob(const ItemGenres& item, const std::string& genre);

// Per genre, raw(g) = sum over items with g of w * genre_prob / sum over
// those items of w, then renormalized so the masses form a distribution.
Distribution target_distribution(std::span<const WeightedItem> prefs,
                                 const UniversePtr& universe);

// Same construction over a recommendation list with predicted weights.
Distribution realized_distribution(std::span<const WeightedItem> list_items,
                                   const UniversePtr& universe);

// q_smoothed(g) = (1 - alpha) * q(g) + alpha * p(g).
Distribution smooth(const Distribution& q, const Distribution& p,
                    const SmoothingParams& s);

// 1 minus the population variance of p around the uniform center point.
double lambda_var(const Distribution& p);

// Fraction of the universe touched by the user's preferred genres.
double lambda_cgr(const std::set<std::string>& prefs_genres,
                  const GenreUniverse& universe);

}  // namespace calrec
