// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace calrec {

// One (user, item, weight) triple; weight is a rating or a play count.
struct RawInteraction {
  std::string user_id;
  std::string item_id;
  double weight = 0.0;
};

// Genre labels of one item, kept sorted and unique. Items without genres
// never leave ingest.
struct ItemGenres {
  std::string item_id;
  std::vector<std::string> genres;
};

enum class Domain { movie, song, generic };

struct PreprocessConfig {
  double rating_cut = 4.0;
  int min_profile_size = 30;
  int min_item_interactions = 3;
  double min_play_count = 3.0;
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
};

// The preprocessed dataset: interactions plus the genre catalog they
// reference. `genre_universe` is the sorted union over surviving items.
struct InteractionTable {
  std::vector<std::string> users;                 // sorted
  std::map<std::string, ItemGenres> items;        // item_id -> genres
  std::vector<RawInteraction> interactions;       // sorted (user_id, item_id)
  std::vector<std::string> genre_universe;        // sorted

  // Interactions of one user, in item_id order. Empty if the user is absent.
  std::vector<const RawInteraction*> interactions_of(
      const std::string& user_id) const;
};

// Per-user train/test partition. Both folds share the full item catalog and
// genre universe so every distribution lives on one universe.
struct SplitDataset {
  InteractionTable train;
  InteractionTable test;
  std::uint64_t seed = 0;
};

}  // namespace calrec
