#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_set>
#include <vector>

#include "adamct/model.hpp"
#include "adamct/rng.hpp"

namespace adamct {

struct Interaction {
  std::string user;
  std::string item;
  std::int64_t timestamp = 0;
};

struct IngestOptions {
  char delimiter = ',';
  bool header = false;
  double malformed_threshold = 0.01;  // fraction of bad rows tolerated
};

struct DatasetStats {
  Index interactions = 0;
  Index num_users = 0;
  Index num_items = 0;
  double avg_len_user = 0.0;
  double avg_len_item = 0.0;
  double sparsity = 0.0;  // 1 - interactions / (users * items)

  std::string to_json() const;
};

// Users and items are densely indexed in first-appearance order over the
// retained data; item IDs are 1-based with 0 reserved for padding.
struct Dataset {
  std::vector<std::string> user_names;           // user index -> external ID
  std::vector<std::string> item_names;           // item ID -> external ID, [0] unused
  std::vector<std::vector<ItemId>> sequences;    // per user, chronological
  DatasetStats stats;

  Index num_users() const { return sequences.size(); }
  Index num_items() const { return item_names.empty() ? 0 : item_names.size() - 1; }
};

enum class SplitRole { kTrain, kValid, kTest };

struct SplitExample {
  Index user = 0;
  std::vector<ItemId> input;
  ItemId target = 0;
  SplitRole role = SplitRole::kTrain;
};

struct Splits {
  std::vector<SplitExample> train;
  std::vector<SplitExample> valid;
  std::vector<SplitExample> test;
};

struct Batch {
  Index size = 0;
  Index max_len = 0;
  std::vector<ItemId> items;              // [size x max_len], left-padded
  std::vector<std::uint8_t> valid_mask;   // [size x max_len]
  std::vector<ItemId> targets;            // [size]
  std::vector<Index> users;               // [size]
  std::vector<ItemId> negatives;          // [size x negatives_per_user], eval only
  Index negatives_per_user = 0;

  std::span<const ItemId> items_row(Index i) const {
    return {items.data() + i * max_len, max_len};
  }
  std::span<const std::uint8_t> mask_row(Index i) const {
    return {valid_mask.data() + i * max_len, max_len};
  }
  std::span<const ItemId> negatives_row(Index i) const {
    return {negatives.data() + i * negatives_per_user, negatives_per_user};
  }
};

// Parses delimited (user, item, timestamp) rows. Malformed rows are counted
// and reported; exceeding the threshold is a DataError naming line numbers.
std::vector<Interaction> ingest_interactions(std::istream& in,
                                             const IngestOptions& opts = {});
std::vector<Interaction> ingest_interactions_file(const std::string& path,
                                                  const IngestOptions& opts = {});

// Groups by user, stable-sorts by timestamp, drops users with fewer than
// five interactions, then assigns dense IDs over what is left.
Dataset build_sequences(const std::vector<Interaction>& interactions);

// test  = (items[0..n-2] -> items[n-1])
// valid = (items[0..n-3] -> items[n-2])
// train = (items[0..n-4] -> items[n-3]); with sliding_window, every prefix
// of the train region becomes an example.
Splits split_leave_one_out(const Dataset& dataset, bool sliding_window = false);

struct Padded {
  std::vector<ItemId> items;
  std::vector<std::uint8_t> valid_mask;
};

// Keeps the most recent max_len items and left-pads with the padding ID.
Padded pad_truncate(std::span<const ItemId> prefix, Index max_len);

// `count` distinct items drawn uniformly from [1, num_items] minus the
// history and the target. DataError if not enough eligible items exist.
std::vector<ItemId> sample_negatives(const std::unordered_set<ItemId>& history,
                                     ItemId target, Index num_items, Index count,
                                     RngState& rng);

std::vector<Batch> make_batches(std::span<const SplitExample> examples,
                                Index batch_size, Index max_len, bool shuffle,
                                RngState& rng);

enum class SyntheticPattern { kCyclic, kMarkov, kUniform };

struct SyntheticSpec {
  Index num_users = 200;
  Index num_items = 50;
  SyntheticPattern pattern = SyntheticPattern::kCyclic;
  Index min_len = 8;
  Index max_len = 20;
  // Row-stochastic [num_items x num_items] table, required for kMarkov.
  std::vector<std::vector<double>> markov_table;
};

Dataset generate_synthetic(const SyntheticSpec& spec, RngState& rng);

}  // namespace adamct
