#pragma once

#include <cmath>
#include <random>
#include <string>

#include "insort/bench/scenario.hpp"
#include "insort/memindex.hpp"

namespace insort::test {

// A random feasible scenario for sortagg or hashagg with at most `max_rows`
// input rows.
inline bench::Scenario random_scenario(std::mt19937_64& rng, std::uint64_t max_rows) {
  std::uniform_real_distribution<double> u(0, 1);
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  bench::Scenario sc;
  sc.data.seed = rng();
  sc.data.distribution = static_cast<bench::Distribution>(pick(4));
  sc.data.columns = 1 + pick(5);
  const std::int64_t domains[] = {3, 10, 1000, std::int64_t{1} << 31};
  sc.data.domain = domains[pick(4)];
  sc.data.zipf_s = 0.5 + u(rng);
  sc.data.rows = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::pow(static_cast<double>(max_rows), 0.6 + 0.4 * u(rng))));
  double space = bench::detail::domain_product(sc.data.columns, sc.data.domain, 1e18);
  if (sc.data.distribution == bench::Distribution::unique_first_column ||
      sc.data.distribution == bench::Distribution::diff_last_column_only)
    space = static_cast<double>(sc.data.domain);
  double cap = std::min(static_cast<double>(sc.data.rows), space);
  sc.data.distinct = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::pow(cap, 0.3 + 0.7 * u(rng))));
  sc.name = "random-" + std::to_string(sc.data.seed % 100000);

  sc.op = pick(2) ? bench::Operator::sortagg : bench::Operator::hashagg;
  sc.page_rows = 1 + pick(20);
  sc.memory_rows = sc.page_rows * (2 + pick(20)) + pick(static_cast<int>(sc.page_rows));
  sc.fanin = pick(3) == 0 ? 2 + pick(4) : 0;
  sc.mode = pick(2) ? RunGenMode::replacement_selection : RunGenMode::read_sort_write;
  sc.strategy = pick(2) ? MergeStrategy::wide : MergeStrategy::traditional;
  sc.ovc = pick(2);
  sc.ovc_cache = pick(2);
  sc.interpolation = pick(4) == 0;
  sc.hash_early_aggregation = pick(4) == 0;
  sc.batch_rows = pick(2) ? 1 : 1 + pick(300);
  sc.hybrid = pick(2);
  sc.known_output = pick(2);
  // hash partitioning stops at level 8; keep the required depth well below it
  auto fan = [&] { return static_cast<double>(sc.fanin ? sc.fanin : sc.memory_rows / sc.page_rows); };
  while (sc.op == bench::Operator::hashagg &&
         std::pow(fan(), 6) * static_cast<double>(sc.memory_rows) < static_cast<double>(sc.data.distinct))
    sc.memory_rows *= 2;
  return sc;
}

// Keys in the order an ordered index emits them, with or without codes.
inline std::vector<Key> index_order(const std::vector<Row>& input, const Schema& s, bool ovc) {
  IndexOptions opt;
  opt.ovc = ovc;
  OrderedIndex idx(s, input.size() + 1, opt);
  MetricsLedger l;
  for (Row r : input) idx.insert_or_aggregate(r, l);
  std::vector<Key> out;
  for (auto& r : idx.drain_current()) out.push_back(std::move(r.key));
  return out;
}

}  // namespace insort::test
