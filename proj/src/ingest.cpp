// SPDX-License-Identifier: Apache-2.0
#include "calrec/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include "calrec/util/csv.hpp"
#include "calrec/util/rng.hpp"

namespace calrec {
namespace {

void require_header(const std::vector<std::string>& row,
                    const std::vector<std::string>& expected,
                    const std::string& path) {
  if (row.size() < expected.size()) {
    throw std::runtime_error("bad header in " + path);
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (row[i] != expected[i]) {
      throw std::runtime_error("bad header in " + path + ": expected '" +
                               expected[i] + "', got '" + row[i] + "'");
    }
  }
}

std::string line_context(const std::string& path, std::size_t line) {
  return path + " line " + std::to_string(line);
}

std::vector<std::string> parse_genre_field(const std::string& field) {
  std::vector<std::string> genres;
  std::string cur;
  for (char c : field) {
    if (c == '|') {
      if (!cur.empty()) genres.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) genres.push_back(cur);
  std::sort(genres.begin(), genres.end());
  genres.erase(std::unique(genres.begin(), genres.end()), genres.end());
  return genres;
}

}  // namespace

RawDataset load_movielens(const std::string& ratings_path,
                          const std::string& movies_path) {
  std::vector<std::size_t> lines;
  auto ratings = read_delimited(ratings_path, ',', '\0', &lines);
  if (ratings.empty()) throw std::runtime_error("empty file: " + ratings_path);
  require_header(ratings[0], {"userId", "movieId", "rating", "timestamp"},
                 ratings_path);
  std::vector<RawInteraction> interactions;
  interactions.reserve(ratings.size() - 1);
  for (std::size_t i = 1; i < ratings.size(); ++i) {
    const auto& row = ratings[i];
    if (row.size() != 4) {
      throw std::runtime_error("malformed row at " +
                               line_context(ratings_path, lines[i]));
    }
    double w = parse_double(row[2], line_context(ratings_path, lines[i]));
    if (!std::isfinite(w) || w < 0) {
      throw std::runtime_error("invalid rating at " +
                               line_context(ratings_path, lines[i]));
    }
    interactions.push_back({row[0], row[1], w});
  }

  auto movies = read_delimited(movies_path, ',', '\0', &lines);
  if (movies.empty()) throw std::runtime_error("empty file: " + movies_path);
  require_header(movies[0], {"movieId", "title", "genres"}, movies_path);
  std::vector<ItemGenres> items;
  for (std::size_t i = 1; i < movies.size(); ++i) {
    const auto& row = movies[i];
    if (row.size() != 3) {
      throw std::runtime_error("malformed row at " +
                               line_context(movies_path, lines[i]));
    }
    if (row[2].empty() || row[2] == "(no genres listed)") continue;
    items.push_back({row[0], parse_genre_field(row[2])});
  }
  return {std::move(interactions), std::move(items)};
}

RawDataset load_tasteprofile(const std::string& triplets_path,
                             const std::string& annotations_path) {
  std::vector<std::size_t> lines;
  auto triplets = read_delimited(triplets_path, '\t', '\0', &lines);
  std::vector<RawInteraction> interactions;
  interactions.reserve(triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& row = triplets[i];
    if (row.size() != 3) {
      throw std::runtime_error("malformed row at " +
                               line_context(triplets_path, lines[i]));
    }
    double w = parse_double(row[2], line_context(triplets_path, lines[i]));
    if (!std::isfinite(w) || w < 0) {
      throw std::runtime_error("invalid play count at " +
                               line_context(triplets_path, lines[i]));
    }
    interactions.push_back({row[0], row[1], w});
  }

  auto annotations = read_delimited(annotations_path, '\t', '#', &lines);
  std::vector<ItemGenres> items;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& row = annotations[i];
    if (row.size() < 2 || row.size() > 3) {
      throw std::runtime_error("malformed row at " +
                               line_context(annotations_path, lines[i]));
    }
    std::vector<std::string> genres(row.begin() + 1, row.end());
    genres.erase(std::remove(genres.begin(), genres.end(), std::string()),
                 genres.end());
    if (genres.empty()) {
      throw std::runtime_error("empty genre annotation at " +
                               line_context(annotations_path, lines[i]));
    }
    std::sort(genres.begin(), genres.end());
    genres.erase(std::unique(genres.begin(), genres.end()), genres.end());
    items.push_back({row[0], std::move(genres)});
  }
  return {std::move(interactions), std::move(items)};
}

RawDataset load_generic_csv(const std::string& interactions_path,
                            const std::string& genres_path) {
  std::vector<std::size_t> lines;
  auto rows = read_delimited(interactions_path, ',', '\0', &lines);
  if (rows.empty()) {
    throw std::runtime_error("empty file: " + interactions_path);
  }
  require_header(rows[0], {"user_id", "item_id", "weight"}, interactions_path);
  std::vector<RawInteraction> interactions;
  interactions.reserve(rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 3) {
      throw std::runtime_error("malformed row at " +
                               line_context(interactions_path, lines[i]));
    }
    double w = parse_double(row[2], line_context(interactions_path, lines[i]));
    if (!std::isfinite(w) || w < 0) {
      throw std::runtime_error("invalid weight at " +
                               line_context(interactions_path, lines[i]));
    }
    interactions.push_back({row[0], row[1], w});
  }

  auto genre_rows = read_delimited(genres_path, ',', '\0', &lines);
  if (genre_rows.empty()) throw std::runtime_error("empty file: " + genres_path);
  require_header(genre_rows[0], {"item_id", "genres"}, genres_path);
  std::vector<ItemGenres> items;
  for (std::size_t i = 1; i < genre_rows.size(); ++i) {
    const auto& row = genre_rows[i];
    if (row.size() != 2) {
      throw std::runtime_error("malformed row at " +
                               line_context(genres_path, lines[i]));
    }
    auto genres = parse_genre_field(row[1]);
    if (genres.empty()) {
      throw std::runtime_error("empty genre field at " +
                               line_context(genres_path, lines[i]));
    }
    items.push_back({row[0], std::move(genres)});
  }
  return {std::move(interactions), std::move(items)};
}

InteractionTable preprocess(const RawDataset& raw, const PreprocessConfig& cfg,
                            Domain domain) {
  std::map<std::string, ItemGenres> catalog;
  for (const auto& item : raw.second) {
    if (item.genres.empty()) continue;
    auto [it, inserted] = catalog.emplace(item.item_id, item);
    if (!inserted) {
      throw std::runtime_error("duplicate genre entry for item " +
                               item.item_id);
    }
  }

  double weight_cut = domain == Domain::movie  ? cfg.rating_cut
                      : domain == Domain::song ? cfg.min_play_count
                                               : 0.0;
  std::vector<RawInteraction> kept;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& x : raw.first) {
    if (!catalog.count(x.item_id)) continue;
    if (domain != Domain::generic && x.weight < weight_cut) continue;
    if (!seen.emplace(x.user_id, x.item_id).second) {
      throw std::runtime_error("duplicate interaction for user " + x.user_id +
                               ", item " + x.item_id);
    }
    kept.push_back(x);
  }

  bool changed = true;
  while (changed) {
    changed = false;
    std::map<std::string, int> item_count;
    for (const auto& x : kept) ++item_count[x.item_id];
    std::vector<RawInteraction> next;
    next.reserve(kept.size());
    for (auto& x : kept) {
      if (item_count[x.item_id] >= cfg.min_item_interactions) {
        next.push_back(std::move(x));
      } else {
        changed = true;
      }
    }
    kept = std::move(next);

    std::map<std::string, int> user_count;
    for (const auto& x : kept) ++user_count[x.user_id];
    next.clear();
    for (auto& x : kept) {
      if (user_count[x.user_id] >= cfg.min_profile_size) {
        next.push_back(std::move(x));
      } else {
        changed = true;
      }
    }
    kept = std::move(next);
  }

  if (kept.empty()) throw std::runtime_error("dataset exhausted by filters");

  InteractionTable table;
  std::set<std::string> users;
  std::set<std::string> surviving_items;
  for (const auto& x : kept) {
    users.insert(x.user_id);
    surviving_items.insert(x.item_id);
  }
  table.users.assign(users.begin(), users.end());
  std::set<std::string> genres;
  for (const auto& id : surviving_items) {
    auto it = catalog.find(id);
    table.items.emplace(id, it->second);
    genres.insert(it->second.genres.begin(), it->second.genres.end());
  }
  table.genre_universe.assign(genres.begin(), genres.end());
  table.interactions = std::move(kept);
  std::sort(table.interactions.begin(), table.interactions.end(),
            [](const RawInteraction& a, const RawInteraction& b) {
              return std::tie(a.user_id, a.item_id) <
                     std::tie(b.user_id, b.item_id);
            });
  return table;
}

SplitDataset split(const InteractionTable& table, const PreprocessConfig& cfg) {
  if (cfg.train_fraction <= 0.0 || cfg.train_fraction >= 1.0) {
    throw std::invalid_argument("train_fraction must be in (0,1)");
  }
  SplitDataset ds;
  ds.seed = cfg.seed;
  ds.train.items = table.items;
  ds.test.items = table.items;
  ds.train.genre_universe = table.genre_universe;
  ds.test.genre_universe = table.genre_universe;

  std::set<std::string> test_users;
  for (const auto& user : table.users) {
    auto rows = table.interactions_of(user);
    std::vector<const RawInteraction*> shuffled(rows.begin(), rows.end());
    SplitMix rng(mix_seed(cfg.seed, fnv1a64(user)));
    deterministic_shuffle(shuffled, rng);
    std::size_t n_train = static_cast<std::size_t>(
        std::floor(cfg.train_fraction * static_cast<double>(shuffled.size())));
    if (n_train == 0) {
      throw std::invalid_argument("split would leave user '" + user +
                                  "' with an empty train fold");
    }
    for (std::size_t i = 0; i < shuffled.size(); ++i) {
      auto& fold = i < n_train ? ds.train : ds.test;
      fold.interactions.push_back(*shuffled[i]);
      if (i >= n_train) test_users.insert(user);
    }
  }
  ds.train.users = table.users;
  ds.test.users.assign(test_users.begin(), test_users.end());
  auto by_user_item = [](const RawInteraction& a, const RawInteraction& b) {
    return std::tie(a.user_id, a.item_id) < std::tie(b.user_id, b.item_id);
  };
  std::sort(ds.train.interactions.begin(), ds.train.interactions.end(),
            by_user_item);
  std::sort(ds.test.interactions.begin(), ds.test.interactions.end(),
            by_user_item);
  return ds;
}

void save_table(const InteractionTable& table,
                const std::string& interactions_path,
                const std::string& genres_path) {
  std::string out = "user_id,item_id,weight\n";
  for (const auto& x : table.interactions) {
    out += join_csv({x.user_id, x.item_id, format_double(x.weight)});
    out.push_back('\n');
  }
  write_text_file(interactions_path, out);

  std::string genres = "item_id,genres\n";
  for (const auto& [id, item] : table.items) {
    std::string field;
    for (std::size_t i = 0; i < item.genres.size(); ++i) {
      if (i) field.push_back('|');
      field += item.genres[i];
    }
    genres += join_csv({id, field});
    genres.push_back('\n');
  }
  write_text_file(genres_path, genres);
}

void save_split_manifest(const SplitDataset& ds, const std::string& path) {
  std::string out = "user_id,item_id,fold\n";
  std::size_t ti = 0;
  // Both folds are sorted by (user, item); merge them so the manifest is
  // sorted the same way.
  std::size_t si = 0;
  const auto& tr = ds.train.interactions;
  const auto& te = ds.test.interactions;
  while (ti < tr.size() || si < te.size()) {
    bool take_train;
    if (ti == tr.size()) {
      take_train = false;
    } else if (si == te.size()) {
      take_train = true;
    } else {
      take_train = std::tie(tr[ti].user_id, tr[ti].item_id) <
                   std::tie(te[si].user_id, te[si].item_id);
    }
    const RawInteraction& x = take_train ? tr[ti++] : te[si++];
    out += join_csv({x.user_id, x.item_id, take_train ? "train" : "test"});
    out.push_back('\n');
  }
  write_text_file(path, out);
}

SplitDataset load_split(const std::string& interactions_path,
                        const std::string& genres_path,
                        const std::string& manifest_path) {
  auto raw = load_generic_csv(interactions_path, genres_path);
  std::map<std::pair<std::string, std::string>, bool> fold;
  auto rows = read_delimited(manifest_path);
  if (rows.empty()) throw std::runtime_error("empty file: " + manifest_path);
  require_header(rows[0], {"user_id", "item_id", "fold"}, manifest_path);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 3 || (row[2] != "train" && row[2] != "test")) {
      throw std::runtime_error("malformed row at " +
                               line_context(manifest_path, i + 1));
    }
    fold[{row[0], row[1]}] = row[2] == "train";
  }

  std::map<std::string, ItemGenres> catalog;
  std::set<std::string> genres;
  for (auto& item : raw.second) {
    genres.insert(item.genres.begin(), item.genres.end());
    catalog.emplace(item.item_id, std::move(item));
  }

  SplitDataset ds;
  ds.train.items = catalog;
  ds.test.items = catalog;
  ds.train.genre_universe.assign(genres.begin(), genres.end());
  ds.test.genre_universe = ds.train.genre_universe;
  std::set<std::string> train_users, test_users;
  for (auto& x : raw.first) {
    auto it = fold.find({x.user_id, x.item_id});
    if (it == fold.end()) {
      throw std::runtime_error("interaction missing from split manifest: " +
                               x.user_id + "," + x.item_id);
    }
    if (it->second) {
      train_users.insert(x.user_id);
      ds.train.interactions.push_back(std::move(x));
    } else {
      test_users.insert(x.user_id);
      ds.test.interactions.push_back(std::move(x));
    }
  }
  ds.train.users.assign(train_users.begin(), train_users.end());
  ds.test.users.assign(test_users.begin(), test_users.end());
  auto by_user_item = [](const RawInteraction& a, const RawInteraction& b) {
    return std::tie(a.user_id, a.item_id) < std::tie(b.user_id, b.item_id);
  };
  std::sort(ds.train.interactions.begin(), ds.train.interactions.end(),
            by_user_item);
  std::sort(ds.test.interactions.begin(), ds.test.interactions.end(),
            by_user_item);
  return ds;
}

}  // namespace calrec
