#pragma once

#include <random>
#include <vector>

#include "insort/core.hpp"

namespace insort::test {

inline Row int_row(const Schema& s, std::vector<std::int64_t> k, std::int64_t measure = 0) {
  Row r;
  r.key = Key(k.begin(), k.end());
  r.state = AggregateState::from_input(s, {measure});
  return r;
}

inline std::vector<Row> random_rows(const Schema& s, std::size_t n, std::int64_t domain, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> v(0, domain - 1);
  std::vector<Row> rows;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::int64_t> k(s.arity());
    for (auto& x : k) x = v(rng);
    rows.push_back(int_row(s, k, v(rng)));
  }
  return rows;
}

}  // namespace insort::test
