// SPDX-License-Identifier: Apache-2.0
#include "calrec/recommend.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "calrec/util/csv.hpp"
#include "calrec/util/rng.hpp"

namespace calrec {

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "user_knn") return Algorithm::user_knn;
  if (name == "item_knn") return Algorithm::item_knn;
  if (name == "slope_one") return Algorithm::slope_one;
  if (name == "funk_svd") return Algorithm::funk_svd;
  if (name == "external") return Algorithm::external;
  throw std::invalid_argument("unknown algorithm: " + name);
}

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::user_knn: return "user_knn";
    case Algorithm::item_knn: return "item_knn";
    case Algorithm::slope_one: return "slope_one";
    case Algorithm::funk_svd: return "funk_svd";
    case Algorithm::external: return "external";
  }
  throw std::logic_error("unreachable algorithm");
}

Similarity similarity_from_string(const std::string& name) {
  if (name == "msd") return Similarity::msd;
  if (name == "pearson") return Similarity::pearson;
  throw std::invalid_argument("unknown similarity: " + name);
}

namespace {

// Integer-indexed view of a train table.
struct Index {
  std::vector<std::string> user_ids;  // sorted
  std::vector<std::string> item_ids;  // sorted
  std::map<std::string, int> user_of;
  std::map<std::string, int> item_of;
  // Ratings grouped by user (pairs (item,w), item-sorted) and by item
  // (pairs (user,w), user-sorted).
  std::vector<std::vector<std::pair<int, double>>> by_user;
  std::vector<std::vector<std::pair<int, double>>> by_item;
  double global_mean = 0.0;
  std::vector<double> user_mean;

  explicit Index(const InteractionTable& table) {
    if (table.interactions.empty()) {
      throw std::invalid_argument("empty train table");
    }
    for (const auto& x : table.interactions) {
      user_of.emplace(x.user_id, 0);
      item_of.emplace(x.item_id, 0);
    }
    for (auto& [id, idx] : user_of) {
      idx = static_cast<int>(user_ids.size());
      user_ids.push_back(id);
    }
    for (auto& [id, idx] : item_of) {
      idx = static_cast<int>(item_ids.size());
      item_ids.push_back(id);
    }
    by_user.resize(user_ids.size());
    by_item.resize(item_ids.size());
    double total = 0.0;
    for (const auto& x : table.interactions) {
      int u = user_of[x.user_id];
      int i = item_of[x.item_id];
      by_user[u].emplace_back(i, x.weight);
      by_item[i].emplace_back(u, x.weight);
      total += x.weight;
    }
    for (auto& row : by_user) std::sort(row.begin(), row.end());
    for (auto& row : by_item) std::sort(row.begin(), row.end());
    global_mean = total / static_cast<double>(table.interactions.size());
    user_mean.resize(user_ids.size());
    for (std::size_t u = 0; u < by_user.size(); ++u) {
      double s = 0.0;
      for (const auto& [i, w] : by_user[u]) s += w;
      user_mean[u] = s / static_cast<double>(by_user[u].size());
    }
  }

  int require_user(const std::string& user_id) const {
    auto it = user_of.find(user_id);
    if (it == user_of.end()) {
      throw std::runtime_error("unknown user: " + user_id);
    }
    return it->second;
  }

  int item_or_minus1(const std::string& item_id) const {
    auto it = item_of.find(item_id);
    return it == item_of.end() ? -1 : it->second;
  }
};

// Pairwise similarities between the entities co-occurring inside each
// group: pass ratings grouped by item to relate users, grouped by user to
// relate items.
std::vector<std::vector<double>> similarity_matrix(
    const std::vector<std::vector<std::pair<int, double>>>& groups,
    std::size_t n, Similarity kind) {
  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
  if (kind == Similarity::msd) {
    std::vector<std::vector<double>> ssd(n, std::vector<double>(n, 0.0));
    std::vector<std::vector<int>> freq(n, std::vector<int>(n, 0));
    for (const auto& group : groups) {
      for (std::size_t a = 0; a < group.size(); ++a) {
        for (std::size_t b = a + 1; b < group.size(); ++b) {
          auto [ia, wa] = group[a];
          auto [ib, wb] = group[b];
          double d = (wa - wb) * (wa - wb);
          ssd[ia][ib] += d;
          ++freq[ia][ib];
        }
      }
    }
    for (std::size_t a = 0; a < n; ++a) {
      sim[a][a] = 1.0;
      for (std::size_t b = a + 1; b < n; ++b) {
        if (freq[a][b] == 0) continue;
        double msd = ssd[a][b] / static_cast<double>(freq[a][b]);
        sim[a][b] = sim[b][a] = 1.0 / (msd + 1.0);
      }
    }
    return sim;
  }

  // Pearson correlation over co-rated entries, means taken on the shared
  // support.
  struct Acc {
    double prods = 0, si = 0, sj = 0, sqi = 0, sqj = 0;
    int freq = 0;
  };
  std::vector<std::vector<Acc>> acc(n, std::vector<Acc>(n));
  for (const auto& group : groups) {
    for (std::size_t a = 0; a < group.size(); ++a) {
      for (std::size_t b = a + 1; b < group.size(); ++b) {
        auto [ia, wa] = group[a];
        auto [ib, wb] = group[b];
        Acc& c = acc[ia][ib];
        c.prods += wa * wb;
        c.si += wa;
        c.sj += wb;
        c.sqi += wa * wa;
        c.sqj += wb * wb;
        ++c.freq;
      }
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    sim[a][a] = 1.0;
    for (std::size_t b = a + 1; b < n; ++b) {
      const Acc& c = acc[a][b];
      if (c.freq == 0) continue;
      double fn = static_cast<double>(c.freq);
      double num = c.prods - c.si * c.sj / fn;
      double den = std::sqrt((c.sqi - c.si * c.si / fn) *
                             (c.sqj - c.sj * c.sj / fn));
      if (den > 0.0) sim[a][b] = sim[b][a] = num / den;
    }
  }
  return sim;
}

double clamp_to(double v, const RecommenderConfig& cfg) {
  return std::min(cfg.rating_max, std::max(cfg.rating_min, v));
}

class KnnModel : public TrainedModel {
 public:
  KnnModel(const InteractionTable& table, const RecommenderConfig& cfg)
      : cfg_(cfg), index_(table), user_based_(cfg.algorithm == Algorithm::user_knn) {
    if (cfg.k_neighbors < 1) throw std::invalid_argument("k_neighbors must be >= 1");
    sim_ = user_based_
               ? similarity_matrix(index_.by_item, index_.user_ids.size(),
                                   cfg.similarity)
               : similarity_matrix(index_.by_user, index_.item_ids.size(),
                                   cfg.similarity);
  }

  double predict(const std::string& user_id,
                 const std::string& item_id) const override {
    int u = index_.require_user(user_id);
    int i = index_.item_or_minus1(item_id);
    if (i < 0) return clamp_to(index_.global_mean, cfg_);
    // Usable neighbors carry positive similarity; the k strongest vote
    // with similarity-weighted means.
    std::vector<std::pair<double, double>> neighbors;  // (sim, weight)
    if (user_based_) {
      const auto& sims = sim_[static_cast<std::size_t>(u)];
      for (const auto& [v, w] : index_.by_item[static_cast<std::size_t>(i)]) {
        if (v != u && sims[static_cast<std::size_t>(v)] > 0.0) {
          neighbors.emplace_back(sims[static_cast<std::size_t>(v)], w);
        }
      }
    } else {
      const auto& sims = sim_[static_cast<std::size_t>(i)];
      for (const auto& [j, w] : index_.by_user[static_cast<std::size_t>(u)]) {
        if (j != i && sims[static_cast<std::size_t>(j)] > 0.0) {
          neighbors.emplace_back(sims[static_cast<std::size_t>(j)], w);
        }
      }
    }
    if (neighbors.empty()) return clamp_to(index_.global_mean, cfg_);
    std::size_t k = std::min<std::size_t>(neighbors.size(),
                                          static_cast<std::size_t>(cfg_.k_neighbors));
    std::partial_sort(neighbors.begin(), neighbors.begin() + static_cast<long>(k),
                      neighbors.end(), [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second > b.second;
                      });
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      num += neighbors[t].first * neighbors[t].second;
      den += neighbors[t].first;
    }
    return clamp_to(num / den, cfg_);
  }

 private:
  RecommenderConfig cfg_;
  Index index_;
  bool user_based_;
  std::vector<std::vector<double>> sim_;
};

class SlopeOneModel : public TrainedModel {
 public:
  SlopeOneModel(const InteractionTable& table, const RecommenderConfig& cfg)
      : cfg_(cfg), index_(table) {
    std::size_t n = index_.item_ids.size();
    dev_.assign(n, std::vector<double>(n, 0.0));
    cnt_.assign(n, std::vector<int>(n, 0));
    for (const auto& row : index_.by_user) {
      for (std::size_t a = 0; a < row.size(); ++a) {
        for (std::size_t b = 0; b < row.size(); ++b) {
          if (a == b) continue;
          auto [ia, wa] = row[a];
          auto [ib, wb] = row[b];
          dev_[static_cast<std::size_t>(ia)][static_cast<std::size_t>(ib)] += wa - wb;
          ++cnt_[static_cast<std::size_t>(ia)][static_cast<std::size_t>(ib)];
        }
      }
    }
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (cnt_[a][b]) dev_[a][b] /= static_cast<double>(cnt_[a][b]);
      }
    }
  }

  double predict(const std::string& user_id,
                 const std::string& item_id) const override {
    int u = index_.require_user(user_id);
    int i = index_.item_or_minus1(item_id);
    double mean = index_.user_mean[static_cast<std::size_t>(u)];
    if (i < 0) return clamp_to(mean, cfg_);
    double acc = 0.0;
    int used = 0;
    for (const auto& [j, w] : index_.by_user[static_cast<std::size_t>(u)]) {
      if (j == i) continue;
      if (cnt_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] > 0) {
        acc += dev_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        ++used;
      }
    }
    if (used == 0) return clamp_to(mean, cfg_);
    return clamp_to(mean + acc / static_cast<double>(used), cfg_);
  }

 private:
  RecommenderConfig cfg_;
  Index index_;
  std::vector<std::vector<double>> dev_;
  std::vector<std::vector<int>> cnt_;
};

class FunkSvdModel : public TrainedModel {
 public:
  FunkSvdModel(const InteractionTable& table, const RecommenderConfig& cfg)
      : cfg_(cfg), index_(table) {
    if (cfg.factors < 1) throw std::invalid_argument("factors must be >= 1");
    if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    const std::size_t nu = index_.user_ids.size();
    const std::size_t ni = index_.item_ids.size();
    const std::size_t f = static_cast<std::size_t>(cfg.factors);
    bu_.assign(nu, 0.0);
    bi_.assign(ni, 0.0);
    pu_.assign(nu * f, 0.0);
    qi_.assign(ni * f, 0.0);
    SplitMix rng(mix_seed(cfg.seed, fnv1a64("funk_svd")));
    for (auto& v : pu_) v = rng.gaussian(0.0, 0.1);
    for (auto& v : qi_) v = rng.gaussian(0.0, 0.1);

    // Plain SGD over the ratings in a fixed order, one pass per epoch.
    struct Triplet { int u, i; double w; };
    std::vector<Triplet> ratings;
    for (std::size_t u = 0; u < nu; ++u) {
      for (const auto& [i, w] : index_.by_user[u]) {
        ratings.push_back({static_cast<int>(u), i, w});
      }
    }
    const double lr = cfg.learn_rate;
    const double reg = cfg.reg;
    epoch_mae_.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      for (const auto& r : ratings) {
        double* pu = &pu_[static_cast<std::size_t>(r.u) * f];
        double* qi = &qi_[static_cast<std::size_t>(r.i) * f];
        double dot = 0.0;
        for (std::size_t x = 0; x < f; ++x) dot += pu[x] * qi[x];
        double err = r.w - (index_.global_mean +
                            bu_[static_cast<std::size_t>(r.u)] +
                            bi_[static_cast<std::size_t>(r.i)] + dot);
        bu_[static_cast<std::size_t>(r.u)] +=
            lr * (err - reg * bu_[static_cast<std::size_t>(r.u)]);
        bi_[static_cast<std::size_t>(r.i)] +=
            lr * (err - reg * bi_[static_cast<std::size_t>(r.i)]);
        for (std::size_t x = 0; x < f; ++x) {
          double puf = pu[x];
          pu[x] += lr * (err * qi[x] - reg * puf);
          qi[x] += lr * (err * puf - reg * qi[x]);
        }
      }
      double abs_err = 0.0;
      for (const auto& r : ratings) {
        abs_err += std::abs(r.w - clamp_to(score(r.u, r.i), cfg_));
      }
      epoch_mae_.push_back(abs_err / static_cast<double>(ratings.size()));
    }
  }

  double predict(const std::string& user_id,
                 const std::string& item_id) const override {
    int u = index_.require_user(user_id);
    int i = index_.item_or_minus1(item_id);
    if (i < 0) {
      return clamp_to(index_.global_mean + bu_[static_cast<std::size_t>(u)],
                      cfg_);
    }
    return clamp_to(score(u, i), cfg_);
  }

 private:
  double score(int u, int i) const {
    const std::size_t f = static_cast<std::size_t>(cfg_.factors);
    const double* pu = &pu_[static_cast<std::size_t>(u) * f];
    const double* qi = &qi_[static_cast<std::size_t>(i) * f];
    double dot = 0.0;
    for (std::size_t x = 0; x < f; ++x) dot += pu[x] * qi[x];
    return index_.global_mean + bu_[static_cast<std::size_t>(u)] +
           bi_[static_cast<std::size_t>(i)] + dot;
  }

  RecommenderConfig cfg_;
  Index index_;
  std::vector<double> bu_, bi_, pu_, qi_;
};

}  // namespace

std::unique_ptr<TrainedModel> train(const InteractionTable& train_table,
                                    const RecommenderConfig& cfg) {
  if (cfg.rating_min >= cfg.rating_max) {
    throw std::invalid_argument("rating bounds must satisfy min < max");
  }
  switch (cfg.algorithm) {
    case Algorithm::user_knn:
    case Algorithm::item_knn:
      return std::make_unique<KnnModel>(train_table, cfg);
    case Algorithm::slope_one:
      return std::make_unique<SlopeOneModel>(train_table, cfg);
    case Algorithm::funk_svd:
      return std::make_unique<FunkSvdModel>(train_table, cfg);
    case Algorithm::external:
      throw std::invalid_argument("external recommender has nothing to train");
  }
  throw std::logic_error("unreachable algorithm");
}

CandidateList candidates(const TrainedModel& model, const std::string& user_id,
                         const InteractionTable& catalog,
                         const std::set<std::string>& train_items_of_user,
                         int n) {
  if (n < 1) throw std::invalid_argument("candidate count must be >= 1");
  CandidateList list;
  list.user_id = user_id;
  list.items.reserve(catalog.items.size());
  for (const auto& [item_id, genres] : catalog.items) {
    if (train_items_of_user.count(item_id)) continue;
    list.items.push_back({item_id, model.predict(user_id, item_id)});
  }
  std::sort(list.items.begin(), list.items.end(), candidate_before);
  if (list.items.size() > static_cast<std::size_t>(n)) {
    list.items.resize(static_cast<std::size_t>(n));
  }
  return list;
}

std::map<std::string, CandidateList> load_external_predictions(
    const std::string& path, int candidate_size,
    const InteractionTable& catalog) {
  if (candidate_size < 1) {
    throw std::invalid_argument("candidate_size must be >= 1");
  }
  std::vector<std::size_t> lines;
  auto rows = read_delimited(path, ',', '\0', &lines);
  if (rows.empty()) throw std::runtime_error("empty file: " + path);
  if (rows[0] != std::vector<std::string>{"user_id", "item_id",
                                          "predicted_weight"}) {
    throw std::runtime_error("bad header in " + path);
  }
  std::map<std::string, CandidateList> lists;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    std::string context = path + " line " + std::to_string(lines[r]);
    if (row.size() != 3) throw std::runtime_error("malformed row at " + context);
    double w = parse_double(row[2], context);
    if (!std::isfinite(w)) {
      throw std::runtime_error("non-finite predicted weight at " + context);
    }
    if (!catalog.items.count(row[1])) {
      throw std::runtime_error("item absent from genre catalog at " + context +
                               ": " + row[1]);
    }
    if (!seen.emplace(row[0], row[1]).second) {
      throw std::runtime_error("duplicate prediction at " + context + ": " +
                               row[0] + "," + row[1]);
    }
    auto& list = lists[row[0]];
    list.user_id = row[0];
    list.items.push_back({row[1], w});
  }
  for (auto& [user, list] : lists) {
    std::sort(list.items.begin(), list.items.end(), candidate_before);
    if (list.items.size() > static_cast<std::size_t>(candidate_size)) {
      list.items.resize(static_cast<std::size_t>(candidate_size));
    }
  }
  return lists;
}

}  // namespace calrec
