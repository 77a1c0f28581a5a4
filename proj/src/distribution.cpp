// SPDX-License-Identifier: Apache-2.0
#include "calrec/distribution.hpp"

#include <algorithm>
#include <stdexcept>

namespace calrec {

GenreUniverse::GenreUniverse(std::vector<std::string> sorted_labels)
    : labels_(std::move(sorted_labels)) {
  if (!std::is_sorted(labels_.begin(), labels_.end())) {
    std::sort(labels_.begin(), labels_.end());
  }
  labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
  for (std::size_t i = 0; i < labels_.size(); ++i) index_.emplace(labels_[i], i);
}

std::size_t GenreUniverse::index_of(const std::string& genre) const {
  auto it = index_.find(genre);
  if (it == index_.end()) {
    throw std::invalid_argument("genre outside universe: " + genre);
  }
  return it->second;
}

double genre_prob(const ItemGenres& item, const std::string& genre) {
  if (item.genres.empty()) {
    throw std::invalid_argument("item without genres: " + item.item_id);
  }
  bool has = std::binary_search(item.genres.begin(), item.genres.end(), genre);
  return has ? 1.0 / static_cast<double>(item.genres.size()) : 0.0;
}

namespace {

Distribution weighted_genre_distribution(std::span<const WeightedItem> items,
                                         const UniversePtr& universe) {
  if (!universe) throw std::invalid_argument("null genre universe");
  const std::size_t g_count = universe->size();
  std::vector<double> num(g_count, 0.0);
  std::vector<double> den(g_count, 0.0);
  for (const auto& wi : items) {
    if (!wi.item) throw std::invalid_argument("null item in weighted list");
    if (wi.item->genres.empty()) {
      throw std::invalid_argument("item without genres: " + wi.item->item_id);
    }
    double share = wi.weight / static_cast<double>(wi.item->genres.size());
    for (const auto& g : wi.item->genres) {
      std::size_t gi = universe->index_of(g);
      num[gi] += share;
      den[gi] += wi.weight;
    }
  }
  Distribution d;
  d.universe = universe;
  d.raw.resize(g_count, 0.0);
  double total = 0.0;
  for (std::size_t gi = 0; gi < g_count; ++gi) {
    if (den[gi] > 0.0) d.raw[gi] = num[gi] / den[gi];
    total += d.raw[gi];
  }
  if (total <= 0.0) throw std::runtime_error("user has no genre mass");
  d.probs.resize(g_count);
  for (std::size_t gi = 0; gi < g_count; ++gi) d.probs[gi] = d.raw[gi] / total;
  return d;
}

}  // namespace

Distribution target_distribution(std::span<const WeightedItem> prefs,
                                 const UniversePtr& universe) {
  return weighted_genre_distribution(prefs, universe);
}

Distribution realized_distribution(std::span<const WeightedItem> list_items,
                                   const UniversePtr& universe) {
  return weighted_genre_distribution(list_items, universe);
}

Distribution smooth(const Distribution& q, const Distribution& p,
                    const SmoothingParams& s) {
  if (q.probs.size() != p.probs.size()) {
    throw std::invalid_argument("smooth: mismatched universes");
  }
  if (s.alpha < 0.0 || s.alpha > 1.0) {
    throw std::invalid_argument("smoothing alpha outside [0,1]");
  }
  Distribution out;
  out.universe = q.universe;
  out.probs.resize(q.probs.size());
  for (std::size_t i = 0; i < q.probs.size(); ++i) {
    out.probs[i] = (1.0 - s.alpha) * q.probs[i] + s.alpha * p.probs[i];
  }
  out.raw = out.probs;
  return out;
}

double lambda_var(const Distribution& p) {
  const std::size_t g_count = p.probs.size();
  if (g_count == 0) throw std::invalid_argument("empty distribution");
  double mp = 0.0;
  for (double v : p.probs) mp += v;
  mp /= static_cast<double>(g_count);
  double acc = 0.0;
  for (double v : p.probs) acc += (v - mp) * (v - mp);
  return 1.0 - acc / static_cast<double>(g_count);
}

double lambda_cgr(const std::set<std::string>& prefs_genres,
                  const GenreUniverse& universe) {
  if (universe.size() == 0) throw std::invalid_argument("empty genre universe");
  for (const auto& g : prefs_genres) universe.index_of(g);
  return static_cast<double>(prefs_genres.size()) /
         static_cast<double>(universe.size());
}

}  // namespace calrec
