#include "adamct/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace adamct {

std::string DatasetStats::to_json() const {
  nlohmann::json j;
  j["interactions"] = interactions;
  j["users"] = num_users;
  j["items"] = num_items;
  j["avg_len_user"] = avg_len_user;
  j["avg_len_item"] = avg_len_item;
  j["sparsity"] = sparsity;
  return j.dump(2);
}

std::vector<Interaction> ingest_interactions(std::istream& in,
                                             const IngestOptions& opts) {
  std::vector<Interaction> out;
  std::vector<Index> bad_lines;
  std::string line;
  Index line_no = 0;
  Index data_rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && opts.header) {
      continue;
    }
    if (line.empty()) {
      continue;
    }
    ++data_rows;

    std::array<std::string, 3> fields;
    Index field = 0;
    std::string cur;
    bool ok = true;
    for (char c : line) {
      if (c == opts.delimiter) {
        if (field >= 3) {
          ok = false;
          break;
        }
        fields[field++] = cur;
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (ok && field == 2) {
      fields[2] = cur;
    } else {
      ok = false;
    }

    std::int64_t ts = 0;
    if (ok) {
      try {
        std::size_t used = 0;
        ts = std::stoll(fields[2], &used);
        ok = used == fields[2].size() && !fields[0].empty() && !fields[1].empty();
      } catch (const std::logic_error&) {
        ok = false;
      }
    }
    if (!ok) {
      bad_lines.push_back(line_no);
      continue;
    }
    out.push_back({fields[0], fields[1], ts});
  }

  if (!bad_lines.empty() &&
      static_cast<double>(bad_lines.size()) >
          opts.malformed_threshold * static_cast<double>(data_rows)) {
    std::ostringstream os;
    os << "ingest: " << bad_lines.size() << " of " << data_rows
       << " rows malformed (threshold " << opts.malformed_threshold
       << "); lines:";
    const Index shown = std::min<Index>(bad_lines.size(), 20);
    for (Index i = 0; i < shown; ++i) os << " " << bad_lines[i];
    if (bad_lines.size() > shown) os << " ...";
    throw DataError(os.str());
  }
  return out;
}

std::vector<Interaction> ingest_interactions_file(const std::string& path,
                                                  const IngestOptions& opts) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("ingest: cannot open '" + path + "'");
  }
  return ingest_interactions(in, opts);
}

Dataset build_sequences(const std::vector<Interaction>& interactions) {
  if (interactions.empty()) {
    throw DataError("build_sequences: no interactions");
  }

  // Group per user in input order; dense user order = first appearance.
  std::unordered_map<std::string, Index> user_of;
  std::vector<std::string> user_names;
  struct Row {
    std::int64_t ts;
    std::string item;
  };
  std::vector<std::vector<Row>> rows;
  for (const Interaction& it : interactions) {
    auto [pos, inserted] = user_of.try_emplace(it.user, user_names.size());
    if (inserted) {
      user_names.push_back(it.user);
      rows.emplace_back();
    }
    rows[pos->second].push_back({it.timestamp, it.item});
  }

  // Chronological order; stable sort keeps input order on timestamp ties.
  for (auto& r : rows) {
    std::stable_sort(r.begin(), r.end(),
                     [](const Row& a, const Row& b) { return a.ts < b.ts; });
  }

  Dataset ds;
  ds.item_names.push_back("");  // padding slot
  std::unordered_map<std::string, ItemId> item_of;
  Index interactions_kept = 0;
  for (Index u = 0; u < rows.size(); ++u) {
    if (rows[u].size() < 5) {
      continue;  // 5-core user filter
    }
    ds.user_names.push_back(user_names[u]);
    std::vector<ItemId> seq;
    seq.reserve(rows[u].size());
    for (const Row& r : rows[u]) {
      auto [pos, inserted] =
          item_of.try_emplace(r.item, static_cast<ItemId>(ds.item_names.size()));
      if (inserted) {
        ds.item_names.push_back(r.item);
      }
      seq.push_back(pos->second);
    }
    interactions_kept += seq.size();
    ds.sequences.push_back(std::move(seq));
  }

  if (ds.sequences.empty()) {
    throw DataError("build_sequences: no user kept after the 5-core filter");
  }

  ds.stats.interactions = interactions_kept;
  ds.stats.num_users = ds.num_users();
  ds.stats.num_items = ds.num_items();
  ds.stats.avg_len_user =
      static_cast<double>(interactions_kept) / static_cast<double>(ds.num_users());
  ds.stats.avg_len_item =
      static_cast<double>(interactions_kept) / static_cast<double>(ds.num_items());
  ds.stats.sparsity = 1.0 - static_cast<double>(interactions_kept) /
                                (static_cast<double>(ds.num_users()) *
                                 static_cast<double>(ds.num_items()));
  return ds;
}

Splits split_leave_one_out(const Dataset& dataset, bool sliding_window) {
  Splits s;
  for (Index u = 0; u < dataset.num_users(); ++u) {
    const auto& seq = dataset.sequences[u];
    const Index n = seq.size();
    if (n < 5) {
      throw DataError("split: user " + std::to_string(u) +
                      " has fewer than five interactions");
    }
    s.test.push_back({u,
                      {seq.begin(), seq.begin() + (n - 1)},
                      seq[n - 1],
                      SplitRole::kTest});
    s.valid.push_back({u,
                       {seq.begin(), seq.begin() + (n - 2)},
                       seq[n - 2],
                       SplitRole::kValid});
    if (sliding_window) {
      for (Index j = 1; j + 2 < n; ++j) {
        s.train.push_back({u,
                           {seq.begin(), seq.begin() + j},
                           seq[j],
                           SplitRole::kTrain});
      }
    } else {
      s.train.push_back({u,
                         {seq.begin(), seq.begin() + (n - 3)},
                         seq[n - 3],
                         SplitRole::kTrain});
    }
  }
  return s;
}

Padded pad_truncate(std::span<const ItemId> prefix, Index max_len) {
  if (prefix.empty()) {
    throw DataError("pad_truncate: empty prefix");
  }
  Padded p;
  p.items.assign(max_len, kPadItem);
  p.valid_mask.assign(max_len, 0);
  const Index keep = std::min<Index>(prefix.size(), max_len);
  const Index src_start = prefix.size() - keep;
  const Index dst_start = max_len - keep;
  for (Index i = 0; i < keep; ++i) {
    p.items[dst_start + i] = prefix[src_start + i];
    p.valid_mask[dst_start + i] = 1;
  }
  return p;
}

std::vector<ItemId> sample_negatives(const std::unordered_set<ItemId>& history,
                                     ItemId target, Index num_items, Index count,
                                     RngState& rng) {
  Index excluded = history.count(target) ? history.size() : history.size() + 1;
  // History entries outside the catalog (or padding) do not shrink the pool.
  for (ItemId h : history) {
    if (h < 1 || static_cast<Index>(h) > num_items) --excluded;
  }
  if (num_items < excluded || num_items - excluded < count) {
    throw DataError("sample_negatives: only " +
                    std::to_string(num_items - std::min(num_items, excluded)) +
                    " eligible items for " + std::to_string(count) +
                    " negatives; use a smaller count");
  }

  std::unordered_set<ItemId> chosen;
  std::vector<ItemId> out;
  out.reserve(count);
  while (out.size() < count) {
    const ItemId cand =
        static_cast<ItemId>(rng.uniform_below(num_items)) + 1;
    if (cand == target || history.count(cand) || chosen.count(cand)) {
      continue;
    }
    chosen.insert(cand);
    out.push_back(cand);
  }
  return out;
}

std::vector<Batch> make_batches(std::span<const SplitExample> examples,
                                Index batch_size, Index max_len, bool shuffle,
                                RngState& rng) {
  if (batch_size == 0) {
    throw ConfigError("make_batches: batch size must be >= 1");
  }
  std::vector<Index> order(examples.size());
  for (Index i = 0; i < order.size(); ++i) order[i] = i;
  if (shuffle) {
    for (Index i = order.size(); i > 1; --i) {
      const Index j = rng.uniform_below(i);
      std::swap(order[i - 1], order[j]);
    }
  }

  std::vector<Batch> batches;
  for (Index start = 0; start < order.size(); start += batch_size) {
    const Index size = std::min<Index>(batch_size, order.size() - start);
    Batch b;
    b.size = size;
    b.max_len = max_len;
    b.items.assign(size * max_len, kPadItem);
    b.valid_mask.assign(size * max_len, 0);
    b.targets.resize(size);
    b.users.resize(size);
    for (Index i = 0; i < size; ++i) {
      const SplitExample& ex = examples[order[start + i]];
      const Padded p = pad_truncate(ex.input, max_len);
      std::copy(p.items.begin(), p.items.end(), b.items.begin() + i * max_len);
      std::copy(p.valid_mask.begin(), p.valid_mask.end(),
                b.valid_mask.begin() + i * max_len);
      b.targets[i] = ex.target;
      b.users[i] = ex.user;
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

Dataset generate_synthetic(const SyntheticSpec& spec, RngState& rng) {
  if (spec.num_items < 5) {
    throw ConfigError("synthetic: num_items must be >= 5");
  }
  if (spec.min_len < 5 || spec.min_len > spec.max_len) {
    throw ConfigError("synthetic: need 5 <= min_len <= max_len");
  }
  if (spec.pattern == SyntheticPattern::kMarkov) {
    if (spec.markov_table.size() != spec.num_items) {
      throw ConfigError("synthetic: markov table must have one row per item");
    }
    for (Index r = 0; r < spec.markov_table.size(); ++r) {
      const auto& row = spec.markov_table[r];
      if (row.size() != spec.num_items) {
        throw ConfigError("synthetic: markov row " + std::to_string(r) +
                          " has wrong width");
      }
      double total = 0.0;
      for (double v : row) {
        if (v < 0.0) {
          throw ConfigError("synthetic: markov row " + std::to_string(r) +
                            " has a negative entry");
        }
        total += v;
      }
      if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("synthetic: markov row " + std::to_string(r) +
                          " sums to " + std::to_string(total) + ", not 1");
      }
    }
  }

  const auto draw_from_row = [&](const std::vector<double>& row) {
    const double u = rng.uniform01();
    double acc = 0.0;
    for (Index j = 0; j < row.size(); ++j) {
      acc += row[j];
      if (u < acc) {
        return static_cast<ItemId>(j + 1);
      }
    }
    return static_cast<ItemId>(row.size());
  };

  Dataset ds;
  ds.item_names.push_back("");
  for (Index i = 1; i <= spec.num_items; ++i) {
    ds.item_names.push_back("i" + std::to_string(i));
  }
  Index interactions = 0;
  for (Index u = 0; u < spec.num_users; ++u) {
    ds.user_names.push_back("u" + std::to_string(u));
    const Index len = static_cast<Index>(rng.uniform_int(
        static_cast<std::int64_t>(spec.min_len),
        static_cast<std::int64_t>(spec.max_len)));
    std::vector<ItemId> seq;
    seq.reserve(len);
    switch (spec.pattern) {
      case SyntheticPattern::kCyclic: {
        const Index start = rng.uniform_below(spec.num_items);  // 0-based
        for (Index t = 0; t < len; ++t) {
          seq.push_back(static_cast<ItemId>((start + t) % spec.num_items) + 1);
        }
        break;
      }
      case SyntheticPattern::kMarkov: {
        ItemId cur = static_cast<ItemId>(rng.uniform_below(spec.num_items)) + 1;
        seq.push_back(cur);
        for (Index t = 1; t < len; ++t) {
          cur = draw_from_row(spec.markov_table[cur - 1]);
          seq.push_back(cur);
        }
        break;
      }
      case SyntheticPattern::kUniform: {
        for (Index t = 0; t < len; ++t) {
          seq.push_back(static_cast<ItemId>(rng.uniform_below(spec.num_items)) + 1);
        }
        break;
      }
    }
    interactions += seq.size();
    ds.sequences.push_back(std::move(seq));
  }

  ds.stats.interactions = interactions;
  ds.stats.num_users = ds.num_users();
  ds.stats.num_items = spec.num_items;
  ds.stats.avg_len_user =
      static_cast<double>(interactions) / static_cast<double>(ds.num_users());
  ds.stats.avg_len_item =
      static_cast<double>(interactions) / static_cast<double>(spec.num_items);
  ds.stats.sparsity = 1.0 - static_cast<double>(interactions) /
                                (static_cast<double>(ds.num_users()) *
                                 static_cast<double>(spec.num_items));
  return ds;
}

}  // namespace adamct
