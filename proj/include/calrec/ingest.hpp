// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "calrec/dataset.hpp"

namespace calrec {

using RawDataset =
    std::pair<std::vector<RawInteraction>, std::vector<ItemGenres>>;

// Ratings CSV `userId,movieId,rating,timestamp` plus movies CSV
// `movieId,title,genres` with pipe-separated genres. Movies whose genre
// field is empty or `(no genres listed)` are omitted.
RawDataset load_movielens(const std::string& ratings_path,
                          const std::string& movies_path);

// Tab-separated play-count triplets `user<TAB>song<TAB>count` plus a
// tab-separated annotation file `song<TAB>genre[<TAB>genre2]` where lines
// starting with `#` are comments. Unannotated songs are dropped later, at
// preprocess, when genre-less items are removed.
RawDataset load_tasteprofile(const std::string& triplets_path,
                             const std::string& annotations_path);

// Canonical interchange pair: `user_id,item_id,weight` and
// `item_id,genres` with pipe-separated genres. An empty genre field is an
// error here, unlike the dataset-specific loaders.
RawDataset load_generic_csv(const std::string& interactions_path,
                            const std::string& genres_path);

// Cleaning rules, applied in a fixed order: drop genre-less items; apply
// the domain weight cut; iterate the item/user support thresholds to a
// fixed point; build the genre universe from surviving items.
InteractionTable preprocess(const RawDataset& raw, const PreprocessConfig& cfg,
                            Domain domain);

// Per-user split: interactions are shuffled by a generator keyed on
// (cfg.seed, user_id), the first floor(train_fraction * n) go to train.
// Independent of user iteration order and of input interaction order.
SplitDataset split(const InteractionTable& table, const PreprocessConfig& cfg);

// Persistence as the interchange pair plus a fold manifest
// `user_id,item_id,fold` with fold in {train,test}.
void save_table(const InteractionTable& table,
                const std::string& interactions_path,
                const std::string& genres_path);
void save_split_manifest(const SplitDataset& ds, const std::string& path);
SplitDataset load_split(const std::string& interactions_path,
                        const std::string& genres_path,
                        const std::string& manifest_path);

}  // namespace calrec
