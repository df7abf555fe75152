#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "insort/core.hpp"
#include "insort/sortagg.hpp"

namespace insort::bench {

enum class Distribution { uniform, zipf, unique_first_column, diff_last_column_only, table3_stream };

inline const char* distribution_name(Distribution d) {
  switch (d) {
    case Distribution::uniform: return "uniform";
    case Distribution::zipf: return "zipf";
    case Distribution::unique_first_column: return "unique_first_column";
    case Distribution::diff_last_column_only: return "diff_last_column_only";
    case Distribution::table3_stream: return "table3_stream";
  }
  return "?";
}

inline Distribution parse_distribution(const std::string& s) {
  for (Distribution d : {Distribution::uniform, Distribution::zipf, Distribution::unique_first_column,
                         Distribution::diff_last_column_only, Distribution::table3_stream})
    if (s == distribution_name(d)) return d;
  throw InvalidInput("unknown distribution: " + s);
}

struct GeneratorSpec {
  std::uint64_t rows = 1000;
  std::uint64_t distinct = 100;
  Distribution distribution = Distribution::uniform;
  double zipf_s = 1.0;
  int columns = 1;
  std::int64_t domain = std::int64_t{1} << 31;
  std::uint64_t seed = 1;
};

// Key columns k0.., plus count, sum, min and max over one measure.
inline Schema bench_schema(const GeneratorSpec& g) {
  return Schema::ints(g.columns, g.domain,
                      {{"cnt", AggregateKind::count, 0},
                       {"sum_m", AggregateKind::sum, 0},
                       {"min_m", AggregateKind::min, 0},
                       {"max_m", AggregateKind::max, 0}});
}

// The seven-row stream of the offset-value coding illustration (domain 100,
// four columns).
inline std::vector<Key> table3_keys() {
  std::vector<std::vector<std::int64_t>> raw = {{5, 7, 3, 9}, {5, 7, 3, 12}, {5, 8, 4, 6}, {5, 9, 2, 7},
                                                {5, 9, 2, 7}, {5, 9, 3, 4},  {5, 9, 3, 7}};
  std::vector<Key> out;
  for (const auto& r : raw) out.push_back(Key(r.begin(), r.end()));
  return out;
}

namespace detail {

inline double domain_product(int columns, std::int64_t domain, double cap) {
  double p = 1;
  for (int i = 0; i < columns && p < cap; ++i) p *= static_cast<double>(domain);
  return p;
}

inline Key key_from_index(std::uint64_t idx, int columns, std::int64_t domain) {
  Key k(columns);
  for (int c = columns - 1; c >= 0; --c) {
    k[c] = static_cast<std::int64_t>(idx % static_cast<std::uint64_t>(domain));
    idx /= static_cast<std::uint64_t>(domain);
  }
  return k;
}

// `n` distinct keys in random order.
inline std::vector<Key> distinct_keys(const GeneratorSpec& g, std::mt19937_64& rng) {
  const int K = g.columns;
  const std::uint64_t D = static_cast<std::uint64_t>(g.domain);
  std::vector<Key> keys;
  keys.reserve(g.distinct);
  switch (g.distribution) {
    case Distribution::unique_first_column: {
      if (static_cast<double>(g.distinct) > static_cast<double>(g.domain))
        throw InvalidInput("first-column domain too small for the distinct count");
      std::uniform_int_distribution<std::uint64_t> any(0, D - 1);
      std::unordered_set<std::uint64_t> firsts;
      while (firsts.size() < g.distinct) firsts.insert(any(rng));
      std::vector<std::uint64_t> fv(firsts.begin(), firsts.end());
      std::sort(fv.begin(), fv.end());
      std::shuffle(fv.begin(), fv.end(), rng);
      for (auto f : fv) {
        Key k(K);
        k[0] = static_cast<std::int64_t>(f);
        for (int c = 1; c < K; ++c) k[c] = static_cast<std::int64_t>(any(rng));
        keys.push_back(std::move(k));
      }
      return keys;
    }
    case Distribution::diff_last_column_only: {
      if (static_cast<double>(g.distinct) > static_cast<double>(g.domain))
        throw InvalidInput("last-column domain too small for the distinct count");
      std::uniform_int_distribution<std::uint64_t> any(0, D - 1);
      Key prefix(K);
      for (int c = 0; c < K; ++c) prefix[c] = static_cast<std::int64_t>(any(rng));
      std::unordered_set<std::uint64_t> lasts;
      while (lasts.size() < g.distinct) lasts.insert(any(rng));
      std::vector<std::uint64_t> lv(lasts.begin(), lasts.end());
      std::sort(lv.begin(), lv.end());
      std::shuffle(lv.begin(), lv.end(), rng);
      for (auto l : lv) {
        Key k = prefix;
        k[K - 1] = static_cast<std::int64_t>(l);
        keys.push_back(std::move(k));
      }
      return keys;
    }
    default: break;
  }
  double space = domain_product(K, g.domain, 1e18);
  if (space < 4.0 * static_cast<double>(g.distinct)) {
    // small key space: sample indices without replacement
    std::vector<std::uint64_t> idx(static_cast<std::size_t>(space));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::uint64_t i = 0; i < g.distinct; ++i) keys.push_back(key_from_index(idx[i], K, g.domain));
    return keys;
  }
  std::uniform_int_distribution<std::uint64_t> any(0, D - 1);
  std::set<Key, KeyLess> seen;
  while (keys.size() < g.distinct) {
    Key k(K);
    for (int c = 0; c < K; ++c) k[c] = static_cast<std::int64_t>(any(rng));
    if (seen.insert(k).second) keys.push_back(std::move(k));
  }
  return keys;
}

}  // namespace detail

// Exactly `rows` rows over exactly `distinct` keys, deterministic in the seed.
// Uniform spreads the surplus rows evenly; zipf draws them by rank.
inline std::vector<Row> generate(const GeneratorSpec& g, const Schema& schema) {
  if (g.columns < 1 || g.columns > 64) throw InvalidInput("columns must be in [1, 64]");
  if (g.domain < 1) throw InvalidInput("domain must be positive");
  std::vector<Row> rows;
  std::mt19937_64 rng(g.seed);
  std::uniform_int_distribution<std::int64_t> measure(0, 999);
  auto make = [&](const Key& k) {
    Row r;
    r.key = k;
    r.state = AggregateState::from_input(schema, {measure(rng)});
    return r;
  };

  if (g.distribution == Distribution::table3_stream) {
    if (g.columns != 4 || g.domain != 100) throw InvalidInput("table3_stream needs 4 columns of domain 100");
    for (const auto& k : table3_keys()) rows.push_back(make(k));
    return rows;
  }
  if (g.distinct < 1 || g.distinct > g.rows) throw InvalidInput("need 1 <= distinct <= rows");
  if (detail::domain_product(g.columns, g.domain, 1e18) < static_cast<double>(g.distinct))
    throw InvalidInput("key domains cannot hold the distinct count");

  std::vector<Key> keys = detail::distinct_keys(g, rng);
  std::vector<std::uint32_t> ids;
  ids.reserve(g.rows);
  for (std::uint64_t i = 0; i < g.distinct; ++i) ids.push_back(static_cast<std::uint32_t>(i));
  std::uint64_t extra = g.rows - g.distinct;
  if (g.distribution == Distribution::zipf) {
    std::vector<double> w(g.distinct);
    for (std::uint64_t i = 0; i < g.distinct; ++i) w[i] = 1.0 / std::pow(static_cast<double>(i + 1), g.zipf_s);
    std::discrete_distribution<std::uint32_t> pick(w.begin(), w.end());
    for (std::uint64_t i = 0; i < extra; ++i) ids.push_back(pick(rng));
  } else {
    for (std::uint64_t i = 0; i < extra; ++i) ids.push_back(static_cast<std::uint32_t>(i % g.distinct));
  }
  std::shuffle(ids.begin(), ids.end(), rng);
  rows.reserve(ids.size());
  for (auto id : ids) rows.push_back(make(keys[id]));
  return rows;
}

}  // namespace insort::bench
