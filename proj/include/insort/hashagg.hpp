#pragma once

#include <bit>
#include <cmath>
#include <optional>
#include <unordered_map>
#include <vector>

#include "insort/runstore.hpp"
#include "insort/source.hpp"

namespace insort {

struct HashAggConfig {
  std::size_t memory_rows = 100000;
  std::size_t page_rows = 100;
  std::size_t max_fanout = 0;  // 0 means memory_rows / page_rows
  bool hybrid = true;
  // Known distinct-key count. Without it the operator starts in memory and
  // partitions the whole table once it overflows.
  std::optional<double> output_estimate;
  int max_level = 8;

  std::size_t fanout() const { return max_fanout ? max_fanout : memory_rows / page_rows; }

  void validate() const {
    if (page_rows == 0) throw InvalidInput("page_rows must be positive");
    if (memory_rows <= page_rows) throw InvalidInput("memory must exceed one page");
    if (fanout() < 2) throw InvalidInput("fan-out must be at least 2");
    if (output_estimate && *output_estimate <= 0) throw InvalidInput("output estimate must be positive");
  }
};

// Number of spilled partitions that lets the rest of the output stay resident.
inline std::size_t hybrid_fanout(double output_rows, double memory_rows, double page_rows) {
  if (output_rows <= 0) throw InvalidInput("output size must be positive");
  if (memory_rows <= page_rows) throw InvalidInput("memory must exceed one page");
  double f = std::ceil((output_rows - memory_rows) / (memory_rows - page_rows));
  return f > 0 ? static_cast<std::size_t>(f) : 0;
}

struct Partition {
  std::size_t partition_id = 0;
  int level = 0;
  std::size_t bucket = 0;
  RunMeta run;
  std::uint64_t row_count = 0;
};

struct HashAggResult {
  std::vector<Row> output;
  MetricsLedger ledger;
  std::size_t partitions = 0;
  int deepest_level = 0;
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_key(const Key& k) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (const auto& v : k) {
    std::uint64_t x = std::holds_alternative<std::int64_t>(v)
                          ? static_cast<std::uint64_t>(std::get<std::int64_t>(v))
                          : std::hash<std::string>{}(std::get<std::string>(v));
    h = mix64(h ^ x);
  }
  return h;
}

// 32 bits of the hash for one partitioning level; consecutive levels start
// 8 bits apart.
inline std::uint32_t hash_slice(std::uint64_t h, int level) {
  return static_cast<std::uint32_t>(std::rotr(h, 8 * level));
}

class RunSource : public RowSource {
 public:
  RunSource(const RunMeta& run, RunStore& store, const Schema& s, MetricsLedger& ledger)
      : cursor_(run, store, s, ledger) {}
  bool next(Row& out) override {
    if (!cursor_.peek()) return false;
    out = cursor_.take();
    return true;
  }

 private:
  RunCursor cursor_;
};

class HashAggregator {
 public:
  HashAggregator(const HashAggConfig& cfg, const Schema& s, RunStore& store, HashAggResult& res)
      : cfg_(cfg), schema_(s), store_(store), res_(res) {}

  void process(RowSource& input, int level, std::optional<double> estimate) {
    if (level > cfg_.max_level) throw ResourceError("hash partitioning exceeded the recursion limit");
    res_.deepest_level = std::max(res_.deepest_level, level);
    MetricsLedger& L = res_.ledger;
    const double M = static_cast<double>(cfg_.memory_rows);
    const double P = static_cast<double>(cfg_.page_rows);
    const std::size_t F = cfg_.fanout();

    // Predictive split: f spilled partitions plus a resident share of the hash
    // space sized to what the table can hold.
    std::size_t f = 0;
    double resident_share = 1.0;
    if (estimate && *estimate > M) {
      f = cfg_.hybrid ? std::min(hybrid_fanout(*estimate, M, P), F) : F;
      double capacity = M - static_cast<double>(f) * P;
      resident_share = f == F ? 0.0 : std::clamp(capacity / *estimate, 0.0, 1.0);
    }
    std::size_t capacity = cfg_.memory_rows - (f == F ? cfg_.memory_rows : f * cfg_.page_rows);
    std::uint64_t resident_limit = static_cast<std::uint64_t>(std::ldexp(resident_share, 32));

    std::vector<Row> table;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets;
    std::vector<RunWriter> parts;
    auto open_parts = [&](std::size_t n) {
      parts.reserve(n);
      for (std::size_t i = 0; i < n; ++i) parts.emplace_back(store_, schema_, cfg_.page_rows, L, level + 1, false);
    };
    if (f) open_parts(f);

    // Maps a slice onto one of the open partitions; slices of the resident
    // share land here only after the table filled up.
    auto route = [&](std::uint32_t slice) {
      std::uint64_t n = parts.size();
      if (slice < resident_limit) return static_cast<std::size_t>(std::uint64_t{slice} * n >> 32);
      std::uint64_t span = (std::uint64_t{1} << 32) - resident_limit;
      return static_cast<std::size_t>((slice - resident_limit) * n / span);
    };

    Row row;
    while (input.next(row)) {
      ++L.hash_computations;
      L.column_value_accesses += schema_.arity();
      std::uint64_t h = hash_key(row.key);
      std::uint32_t slice = hash_slice(h, level);
      if (slice < resident_limit) {
        auto& chain = buckets[h];
        bool hit = false;
        for (std::uint32_t idx : chain) {
          if (compare_rows(table[idx], row, schema_, L).order == 0) {
            absorb(table[idx].state, row.state);
            hit = true;
            break;
          }
        }
        if (hit) continue;
        if (table.size() < capacity) {
          chain.push_back(static_cast<std::uint32_t>(table.size()));
          row.ovc = {};
          table.push_back(std::move(row));
          continue;
        }
        if (chain.empty()) buckets.erase(h);
        if (parts.empty()) {
          // Overflow without a usable estimate: give all memory to output
          // buffers and route the table out with the rest of the input.
          open_parts(F);
          f = F;
          resident_limit = 0;
          capacity = 0;
          for (auto& r : table) parts[route(hash_slice(hash_key(r.key), level))].add(std::move(r));
          table.clear();
          buckets.clear();
        }
      }
      parts[route(slice)].add(std::move(row));
    }

    double resident = static_cast<double>(table.size());
    for (auto& r : table) res_.output.push_back(std::move(r));
    table.clear();

    std::vector<Partition> spilled;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (parts[i].rows() == 0) {
        store_.drop_run(parts[i].run_id());
        continue;
      }
      Partition p;
      p.partition_id = res_.partitions++;
      p.level = level + 1;
      p.bucket = i;
      p.row_count = parts[i].rows();
      p.run = parts[i].finish();
      spilled.push_back(std::move(p));
    }
    parts.clear();

    std::optional<double> child;
    if (estimate && f) child = std::max(1.0, (*estimate - resident) / static_cast<double>(f));
    for (auto& p : spilled) {
      RunSource src(p.run, store_, schema_, L);
      process(src, level + 1, child);
      store_.drop_run(p.run.run_id);
    }
  }

 private:
  const HashAggConfig& cfg_;
  const Schema& schema_;
  RunStore& store_;
  HashAggResult& res_;
};

}  // namespace detail

// Hash aggregation with recursive, optionally hybrid, partitioning. Output is
// unordered.
inline HashAggResult hash_execute(RowSource& input, const HashAggConfig& cfg, const Schema& schema,
                                  RunStore& store) {
  cfg.validate();
  HashAggResult res;
  detail::HashAggregator agg(cfg, schema, store, res);
  agg.process(input, 0, cfg.output_estimate);
  return res;
}

}  // namespace insort
