#pragma once

#include <unordered_map>
#include <vector>

#include "insort/bench/generator.hpp"
#include "insort/hashagg.hpp"
#include "insort/sortagg.hpp"

namespace insort::bench {

struct IntersectInputs {
  std::vector<Row> left;
  std::vector<Row> right;
};

// Two inputs of `g.rows` rows and `g.distinct` keys each; half of each side's
// keys also occur on the other side.
inline IntersectInputs intersect_inputs(const GeneratorSpec& g, const Schema& schema) {
  GeneratorSpec pool = g;
  pool.distribution = Distribution::uniform;
  pool.distinct = g.distinct + g.distinct / 2;
  pool.rows = pool.distinct;
  std::vector<Row> keys = generate(pool, schema);
  auto side = [&](std::size_t first, std::uint64_t seed) {
    std::vector<Row> out;
    out.reserve(g.rows);
    for (std::uint64_t i = 0; i < g.rows; ++i) out.push_back(keys[first + i % g.distinct]);
    std::mt19937_64 rng(seed);
    std::shuffle(out.begin(), out.end(), rng);
    return out;
  };
  return {side(0, g.seed + 1), side(g.distinct / 2, g.seed + 2)};
}

struct IntersectPlanResult {
  std::vector<Key> matches;  // sorted
  MetricsLedger ledger;
};

// Sort plan: in-sort aggregation on both sides, then a merge join over the two
// sorted outputs.
inline IntersectPlanResult sort_intersect(const IntersectInputs& in, const SortAggConfig& cfg, const Schema& s,
                                          RunStore& store) {
  VectorSource a(in.left), b(in.right);
  SortAggResult ra = execute(a, cfg, s, store);
  SortAggResult rb = execute(b, cfg, s, store);
  IntersectPlanResult res;
  res.ledger += ra.ledger;
  res.ledger += rb.ledger;
  std::size_t i = 0, j = 0;
  while (i < ra.output.size() && j < rb.output.size()) {
    int c = compare_rows(ra.output[i], rb.output[j], s, res.ledger).order;
    if (c == 0) {
      res.matches.push_back(ra.output[i].key);
      ++i;
      ++j;
    } else if (c < 0) {
      ++i;
    } else {
      ++j;
    }
  }
  return res;
}

// Hash plan: hash aggregation on both sides, then a grace hash join that
// partitions both distinct outputs whenever the build side exceeds memory.
inline IntersectPlanResult hash_intersect(const IntersectInputs& in, const HashAggConfig& cfg, const Schema& s,
                                          RunStore& store) {
  VectorSource a(in.left), b(in.right);
  HashAggResult ra = hash_execute(a, cfg, s, store);
  HashAggResult rb = hash_execute(b, cfg, s, store);
  IntersectPlanResult res;
  res.ledger += ra.ledger;
  res.ledger += rb.ledger;
  MetricsLedger& L = res.ledger;

  auto join = [&](const std::vector<Row>& build, const std::vector<Row>& probe) {
    std::unordered_multimap<std::uint64_t, const Row*> table;
    for (const auto& r : build) {
      ++L.hash_computations;
      L.column_value_accesses += s.arity();
      table.emplace(insort::detail::hash_key(r.key), &r);
    }
    for (const auto& r : probe) {
      ++L.hash_computations;
      L.column_value_accesses += s.arity();
      auto [lo, hi] = table.equal_range(insort::detail::hash_key(r.key));
      for (auto it = lo; it != hi; ++it)
        if (compare_rows(*it->second, r, s, L).order == 0) {
          res.matches.push_back(r.key);
          break;
        }
    }
  };

  if (ra.output.size() <= cfg.memory_rows) {
    join(ra.output, rb.output);
  } else {
    const std::size_t F = cfg.fanout();
    if (ra.output.size() > F * cfg.memory_rows) throw ResourceError("join build side needs recursive partitioning");
    auto partition = [&](std::vector<Row>& rows) {
      std::vector<RunWriter> parts;
      for (std::size_t i = 0; i < F; ++i) parts.emplace_back(store, s, cfg.page_rows, L, 1, false);
      for (auto& r : rows) {
        ++L.hash_computations;
        L.column_value_accesses += s.arity();
        std::uint32_t slice = insort::detail::hash_slice(insort::detail::hash_key(r.key), 0);
        parts[static_cast<std::size_t>(std::uint64_t{slice} * F >> 32)].add(std::move(r));
      }
      std::vector<std::optional<RunMeta>> metas;
      for (auto& p : parts) {
        if (p.rows() == 0) {
          store.drop_run(p.run_id());
          metas.emplace_back();
        } else {
          metas.emplace_back(p.finish());
        }
      }
      return metas;
    };
    auto load = [&](const std::optional<RunMeta>& m) {
      std::vector<Row> rows;
      if (!m) return rows;
      RunCursor c(*m, store, s, L);
      while (c.peek()) rows.push_back(c.take());
      store.drop_run(m->run_id);
      return rows;
    };
    auto pa = partition(ra.output);
    auto pb = partition(rb.output);
    for (std::size_t i = 0; i < F; ++i) join(load(pa[i]), load(pb[i]));
  }
  std::sort(res.matches.begin(), res.matches.end(), KeyLess{});
  return res;
}

}  // namespace insort::bench
