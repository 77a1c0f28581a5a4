// SPDX-License-Identifier: Apache-2.0
#include "calrec/selector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace calrec {
namespace {

// Maintains the genre mass sums, relevance sum, and bias sum of the grown
// prefix so that scoring prefix-plus-candidate costs one pass over the
// genre universe instead of a rebuild of the whole list.
class PrefixEvaluator {
 public:
  explicit PrefixEvaluator(const SelectionProblem& prob) : prob_(prob) {
    if (!prob.candidates || !prob.p || !prob.bias || !prob.catalog) {
      throw std::invalid_argument("incomplete selection problem");
    }
    if (prob.candidates->items.empty()) {
      throw std::invalid_argument("empty candidate list");
    }
    if (prob.n < 1) throw std::invalid_argument("selection size must be >= 1");
    if (prob.lambda_u < 0.0 || prob.lambda_u > 1.0) {
      throw std::invalid_argument("lambda outside [0,1]");
    }
    const std::size_t g_count = prob.p->probs.size();
    num_.assign(g_count, 0.0);
    den_.assign(g_count, 0.0);
    raw_.assign(g_count, 0.0);
    scratch_.assign(g_count, 0.0);
    for (const auto& item : prob.candidates->items) {
      auto it = prob.catalog->find(item.item_id);
      if (it == prob.catalog->end()) {
        throw std::invalid_argument("item missing from catalog: " +
                                    item.item_id);
      }
      Cand c;
      c.item = &item;
      c.weight = item.predicted_weight;
      c.share = c.weight / static_cast<double>(it->second.genres.size());
      for (const auto& g : it->second.genres) {
        c.genre_idx.push_back(prob.p->universe->index_of(g));
      }
      c.bias_term =
          c.weight - prob.bias->mu - prob.bias->item_bias_of(item.item_id);
      cands_.push_back(std::move(c));
    }
  }

  std::size_t candidate_count() const { return cands_.size(); }
  const CandidateItem& item(std::size_t ci) const { return *cands_[ci].item; }

  // Objective of the current prefix extended with candidate ci.
  double evaluate(std::size_t ci) const {
    const Cand& c = cands_[ci];
    std::copy(raw_.begin(), raw_.end(), scratch_.begin());
    double total = raw_total_;
    for (std::size_t t = 0; t < c.genre_idx.size(); ++t) {
      std::size_t g = c.genre_idx[t];
      double den = den_[g] + c.weight;
      double updated = den > 0.0 ? (num_[g] + c.share) / den : 0.0;
      total += updated - scratch_[g];
      scratch_[g] = updated;
    }
    if (total <= 0.0) throw std::runtime_error("user has no genre mass");

    const auto& p = prob_.p->probs;
    const double alpha = prob_.spec.smoothing.alpha;
    double f = 0.0;
    switch (prob_.spec.divergence) {
      case DivergenceKind::kl:
        for (std::size_t g = 0; g < p.size(); ++g) {
          if (p[g] <= 0.0) continue;
          double q = (1.0 - alpha) * (scratch_[g] / total) + alpha * p[g];
          if (q <= 0.0) throw std::runtime_error("unsmoothed zero support");
          f += p[g] * std::log2(p[g] / q);
        }
        break;
      case DivergenceKind::he:
        for (std::size_t g = 0; g < p.size(); ++g) {
          double d = std::sqrt(p[g]) - std::sqrt(scratch_[g] / total);
          f += d * d;
        }
        f = std::sqrt(2.0 * f);
        break;
      case DivergenceKind::chi:
        for (std::size_t g = 0; g < p.size(); ++g) {
          double q = (1.0 - alpha) * (scratch_[g] / total) + alpha * p[g];
          if (q <= 0.0) {
            if (p[g] <= 0.0) continue;
            throw std::runtime_error("unsmoothed zero support");
          }
          double d = p[g] - q;
          f += d * d / q;
        }
        break;
    }

    double lambda = prob_.lambda_u;
    double t = (1.0 - lambda) * (sim_sum_ + c.weight) - lambda * f;
    if (prob_.spec.balance == Balance::lin) return t;
    double bias = (bias_sum_ + c.bias_term) /
                  (prob_.bias->sigma + static_cast<double>(len_ + 1));
    return signed_log_damp(t, prob_.spec.log_base) + bias;
  }

  void commit(std::size_t ci) {
    const Cand& c = cands_[ci];
    for (std::size_t t = 0; t < c.genre_idx.size(); ++t) {
      std::size_t g = c.genre_idx[t];
      num_[g] += c.share;
      den_[g] += c.weight;
      double updated = den_[g] > 0.0 ? num_[g] / den_[g] : 0.0;
      raw_total_ += updated - raw_[g];
      raw_[g] = updated;
    }
    sim_sum_ += c.weight;
    bias_sum_ += c.bias_term;
    ++len_;
  }

 private:
  struct Cand {
    const CandidateItem* item = nullptr;
    double weight = 0.0;
    double share = 0.0;  // weight / genre count
    double bias_term = 0.0;
    std::vector<std::size_t> genre_idx;
  };

  const SelectionProblem& prob_;
  std::vector<Cand> cands_;
  std::vector<double> num_, den_, raw_;
  mutable std::vector<double> scratch_;
  double raw_total_ = 0.0;
  double sim_sum_ = 0.0;
  double bias_sum_ = 0.0;
  std::size_t len_ = 0;
};

// Candidates are stored in (higher weight, ascending id) order, so the
// first strict maximum realizes the documented tie-break.
std::size_t argmax_step(const PrefixEvaluator& ev,
                        const std::vector<bool>& taken, double* best_value) {
  std::size_t best = ev.candidate_count();
  double best_obj = 0.0;
  for (std::size_t ci = 0; ci < ev.candidate_count(); ++ci) {
    if (taken[ci]) continue;
    double obj = ev.evaluate(ci);
    if (best == ev.candidate_count() || obj > best_obj) {
      best = ci;
      best_obj = obj;
    }
  }
  *best_value = best_obj;
  return best;
}

}  // namespace

RankedList greedy_select(const SelectionProblem& prob) {
  PrefixEvaluator ev(prob);
  const std::size_t m =
      std::min<std::size_t>(static_cast<std::size_t>(prob.n),
                            ev.candidate_count());
  RankedList out;
  out.user_id = prob.candidates->user_id;
  out.items.reserve(m);
  out.objective_trace.reserve(m);
  std::vector<bool> taken(ev.candidate_count(), false);
  for (std::size_t rank = 0; rank < m; ++rank) {
    double value = 0.0;
    std::size_t best = argmax_step(ev, taken, &value);
    taken[best] = true;
    out.items.push_back(ev.item(best));
    out.objective_trace.push_back(value);
    ev.commit(best);
  }
  return out;
}

double objective_value(const SelectionProblem& prob,
                       std::span<const CandidateItem> list_items) {
  if (prob.spec.balance == Balance::lin) {
    return tradeoff_lin(prob.lambda_u, list_items, *prob.p, prob.spec,
                        *prob.catalog);
  }
  return tradeoff_log(prob.lambda_u, list_items, *prob.p, prob.spec,
                      *prob.bias, *prob.catalog);
}

BruteForceResult brute_force_select(const SelectionProblem& prob) {
  if (!prob.candidates || prob.candidates->items.empty()) {
    throw std::invalid_argument("empty candidate list");
  }
  const std::size_t size = prob.candidates->items.size();
  const std::size_t m =
      std::min<std::size_t>(static_cast<std::size_t>(prob.n), size);
  if (size > 20 || m > 5) {
    throw std::invalid_argument("instance too large for brute force");
  }

  std::vector<std::size_t> pick(m);
  for (std::size_t i = 0; i < m; ++i) pick[i] = i;
  BruteForceResult best;
  bool have_best = false;
  std::vector<CandidateItem> subset(m);
  while (true) {
    for (std::size_t i = 0; i < m; ++i) {
      subset[i] = prob.candidates->items[pick[i]];
    }
    double value = objective_value(prob, subset);
    std::vector<std::string> ids;
    ids.reserve(m);
    for (const auto& item : subset) ids.push_back(item.item_id);
    std::sort(ids.begin(), ids.end());
    if (!have_best || value > best.best_value ||
        (value == best.best_value && ids < best.best_subset)) {
      best.best_value = value;
      best.best_subset = std::move(ids);
      have_best = true;
    }
    // Next index combination in lexicographic order.
    std::size_t pos = m;
    while (pos > 0 && pick[pos - 1] == size - (m - pos) - 1) --pos;
    if (pos == 0) break;
    ++pick[pos - 1];
    for (std::size_t i = pos; i < m; ++i) pick[i] = pick[i - 1] + 1;
  }
  return best;
}

bool greedy_step_certificate(const SelectionProblem& prob,
                             const RankedList& rank_list) {
  PrefixEvaluator ev(prob);
  const std::size_t m =
      std::min<std::size_t>(static_cast<std::size_t>(prob.n),
                            ev.candidate_count());
  if (rank_list.items.size() != m || rank_list.objective_trace.size() != m) {
    return false;
  }
  std::vector<bool> taken(ev.candidate_count(), false);
  for (std::size_t rank = 0; rank < m; ++rank) {
    double value = 0.0;
    std::size_t best = argmax_step(ev, taken, &value);
    if (ev.item(best).item_id != rank_list.items[rank].item_id) return false;
    if (value != rank_list.objective_trace[rank]) return false;
    taken[best] = true;
    ev.commit(best);
  }
  return true;
}

}  // namespace calrec
