#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "insort/core.hpp"
#include "insort/hashagg.hpp"

namespace insort::bench {

// Oracle: ordered map from key to folded state.
inline std::vector<Row> reference_aggregate(const std::vector<Row>& input) {
  std::map<Key, AggregateState, KeyLess> groups;
  for (const auto& r : input) {
    auto [it, fresh] = groups.try_emplace(r.key, r.state);
    if (!fresh) absorb(it->second, r.state);
  }
  std::vector<Row> out;
  out.reserve(groups.size());
  for (auto& [k, st] : groups) out.push_back(Row{k, st, {}});
  return out;
}

// In-stream aggregation over input already sorted on the key.
inline std::vector<Row> stream_aggregate(const std::vector<Row>& sorted) {
  std::vector<Row> out;
  for (const auto& r : sorted) {
    if (!out.empty()) {
      int c = compare_keys(out.back().key, r.key);
      if (c > 0) throw OrderingViolation("stream aggregation needs sorted input");
      if (c == 0) {
        absorb(out.back().state, r.state);
        continue;
      }
    }
    out.push_back(Row{r.key, r.state, {}});
  }
  return out;
}

// In-memory sort followed by in-stream aggregation.
inline std::vector<Row> sort_then_dedup(std::vector<Row> input) {
  std::stable_sort(input.begin(), input.end(),
                   [](const Row& a, const Row& b) { return compare_keys(a.key, b.key) < 0; });
  return stream_aggregate(input);
}

// Order-independent fingerprint of an aggregated output.
inline std::uint64_t checksum(const std::vector<Row>& rows) {
  std::uint64_t sum = 0, x = 0;
  for (const auto& r : rows) {
    std::uint64_t h = insort::detail::hash_key(r.key);
    for (const auto& a : r.state.acc) {
      h = insort::detail::mix64(h ^ static_cast<std::uint64_t>(a.count));
      h = insort::detail::mix64(h ^ static_cast<std::uint64_t>(a.sum));
      h = insort::detail::mix64(h ^ static_cast<std::uint64_t>(a.min));
      h = insort::detail::mix64(h ^ static_cast<std::uint64_t>(a.max));
    }
    sum += h;
    x ^= insort::detail::mix64(h);
  }
  return insort::detail::mix64(sum ^ (x * 0x9e3779b97f4a7c15ULL) ^ rows.size());
}

// Exact multiset equality, ignoring order.
inline bool same_groups(std::vector<Row> a, std::vector<Row> b) {
  if (a.size() != b.size()) return false;
  auto less = [](const Row& x, const Row& y) { return compare_keys(x.key, y.key) < 0; };
  std::sort(a.begin(), a.end(), less);
  std::sort(b.begin(), b.end(), less);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (compare_keys(a[i].key, b[i].key) != 0 || !(a[i].state == b[i].state)) return false;
  return true;
}

}  // namespace insort::bench
