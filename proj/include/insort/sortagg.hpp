#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <unordered_map>

#include "insort/loser_tree.hpp"
#include "insort/memindex.hpp"
#include "insort/ovc.hpp"
#include "insort/runstore.hpp"
#include "insort/source.hpp"

namespace insort {

enum class RunGenMode { read_sort_write, replacement_selection };
enum class MergeStrategy { wide, traditional };

struct SortAggConfig {
  std::size_t memory_rows = 100000;
  std::size_t page_rows = 100;
  std::size_t max_fanin = 0;  // 0 means memory_rows / page_rows
  RunGenMode mode = RunGenMode::read_sort_write;
  MergeStrategy strategy = MergeStrategy::wide;
  bool ovc = true;
  bool ovc_cache = false;
  bool interpolation = false;
  // hash table instead of the ordered index during run generation, sorted at
  // each flush (read-sort-write only)
  bool hash_early_aggregation = false;
  std::size_t batch_rows = 256;

  std::size_t fanin() const { return max_fanin ? max_fanin : memory_rows / page_rows; }

  void validate() const {
    if (page_rows == 0) throw InvalidInput("page_rows must be positive");
    if (memory_rows < 2 * page_rows) throw InvalidInput("memory must hold at least two pages");
    if (fanin() < 2) throw InvalidInput("fan-in must be at least 2");
    if (batch_rows == 0) throw InvalidInput("batch_rows must be positive");
  }

  IndexOptions index_options() const {
    IndexOptions o;
    o.ovc = ovc;
    o.ovc_cache = ovc && ovc_cache;
    o.interpolation = interpolation;
    return o;
  }
};

struct RunGenerationResult {
  std::vector<RunMeta> runs;
  std::vector<Row> residual;  // whole output when nothing spilled
  std::uint64_t rows_in = 0;
  std::uint64_t probes = 0;
  std::uint64_t absorbed = 0;
  double resident_at_probe = 0;  // summed over probes

  // Distinct-count estimate from the hit rate: a probe finds its key with
  // probability resident / O.
  double output_estimate() const {
    std::uint64_t spilled = 0, largest = 0;
    for (const auto& r : runs) {
      spilled += r.row_count;
      largest = std::max(largest, r.row_count);
    }
    double upper = static_cast<double>(spilled + residual.size());
    double est = absorbed ? resident_at_probe / static_cast<double>(absorbed) : upper;
    return std::clamp(est, static_cast<double>(largest), std::max(upper, 1.0));
  }
};

namespace detail {

inline void sort_batch(std::vector<Row>& batch, const RowComparator& cmp, MetricsLedger& ledger) {
  std::vector<Row*> ptr(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) ptr[i] = &batch[i];
  std::sort(ptr.begin(), ptr.end(), [&](Row* a, Row* b) { return cmp(*a, *b, ledger) < 0; });
  std::vector<Row> out;
  out.reserve(batch.size());
  for (Row* p : ptr) {
    if (!out.empty() && cmp(out.back(), *p, ledger) == 0) {
      absorb(out.back().state, p->state);
    } else {
      out.push_back(std::move(*p));
    }
  }
  batch.swap(out);
}

struct KeyHash {
  std::size_t operator()(const Key& k) const {
    std::size_t h = 0x9e3779b97f4a7c15ULL;
    for (const auto& v : k) {
      std::size_t x = std::visit([](const auto& y) { return std::hash<std::decay_t<decltype(y)>>{}(y); }, v);
      h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};
struct KeyEq {
  bool operator()(const Key& a, const Key& b) const { return compare_keys(a, b) == 0; }
};

}  // namespace detail

// Input phase: every distinct batch key is absorbed into the index or inserted;
// a full index spills either all of itself (read-sort-write) or one page from
// the low end of the current generation (replacement selection).
inline RunGenerationResult run_generation(RowSource& input, const SortAggConfig& cfg, const Schema& schema,
                                          OrderedIndex& index, RunStore& store, MetricsLedger& ledger) {
  cfg.validate();
  RunGenerationResult res;
  const std::size_t P = cfg.page_rows;
  const bool rs = cfg.mode == RunGenMode::replacement_selection;
  std::optional<RunWriter> open;

  auto spill = [&] {
    if (!rs) {
      auto rows = index.evict_range(index.current_rows());
      res.runs.push_back(write_run(std::move(rows), P, store, schema, ledger, 0));
      return;
    }
    if (index.current_rows() == 0) {
      if (open) {
        res.runs.push_back(open->finish());
        open.reset();
      }
      index.advance_generation();
    }
    if (!open) open.emplace(store, schema, P, ledger, 0);
    for (auto& r : index.evict_range(P)) open->add(std::move(r));
  };

  std::vector<Row> batch;
  batch.reserve(cfg.batch_rows);
  Row row;
  bool more = true;
  while (more) {
    batch.clear();
    while (batch.size() < cfg.batch_rows && (more = input.next(row))) {
      if (!schema.conforms(row.key)) throw InvalidInput("input row does not match schema");
      row.ovc = {};
      batch.push_back(std::move(row));
    }
    res.rows_in += batch.size();
    if (batch.size() > 1) detail::sort_batch(batch, index.comparator(), ledger);
    for (auto& r : batch) {
      ++res.probes;
      res.resident_at_probe += static_cast<double>(index.resident_rows());
      while (true) {
        InsertResult ir = index.insert_or_aggregate(r, ledger);
        if (ir == InsertResult::absorbed) ++res.absorbed;
        if (ir != InsertResult::needs_eviction) break;
        spill();
      }
    }
  }

  if (res.runs.empty() && !open) {
    res.residual = index.drain_current();
    return res;
  }
  if (!rs) {
    if (index.current_rows()) res.runs.push_back(write_run(index.drain_current(), P, store, schema, ledger, 0));
    return res;
  }
  if (index.current_rows()) {
    if (!open) open.emplace(store, schema, P, ledger, 0);
    for (auto& r : index.drain_current()) open->add(std::move(r));
  }
  if (open) res.runs.push_back(open->finish());
  if (index.next_rows()) {
    index.advance_generation();
    res.runs.push_back(write_run(index.drain_current(), P, store, schema, ledger, 0));
  }
  return res;
}

// Read-sort-write run generation with a hash table absorbing duplicates.
inline RunGenerationResult hash_run_generation(RowSource& input, const SortAggConfig& cfg, const Schema& schema,
                                               RunStore& store, MetricsLedger& ledger) {
  cfg.validate();
  RunGenerationResult res;
  std::unordered_map<Key, Row, detail::KeyHash, detail::KeyEq> table;
  table.reserve(cfg.memory_rows);
  const auto k = static_cast<std::uint64_t>(schema.arity());
  auto flush = [&] {
    std::vector<Row> rows;
    rows.reserve(table.size());
    for (auto& [_, r] : table) rows.push_back(std::move(r));
    table.clear();
    std::sort(rows.begin(), rows.end(), [&](const Row& a, const Row& b) { return compare_rows(a, b, schema, ledger).order < 0; });
    return rows;
  };
  Row row;
  while (input.next(row)) {
    if (!schema.conforms(row.key)) throw InvalidInput("input row does not match schema");
    ++res.rows_in;
    ++res.probes;
    res.resident_at_probe += static_cast<double>(table.size());
    ++ledger.hash_computations;
    ledger.column_value_accesses += k;
    auto it = table.find(row.key);
    if (it != table.end()) {
      ++ledger.row_comparisons;
      ledger.column_value_accesses += 2 * k;
      absorb(it->second.state, row.state);
      ++res.absorbed;
      continue;
    }
    if (table.size() >= cfg.memory_rows) res.runs.push_back(write_run(flush(), cfg.page_rows, store, schema, ledger, 0));
    Key key = row.key;
    table.emplace(std::move(key), std::move(row));
  }
  if (res.runs.empty()) {
    res.residual = flush();
  } else if (!table.empty()) {
    res.runs.push_back(write_run(flush(), cfg.page_rows, store, schema, ledger, 0));
  }
  return res;
}

enum class StepKind { traditional, wide };

struct MergeStep {
  StepKind kind = StepKind::traditional;
  std::vector<std::uint64_t> inputs;
  double expected_output = 0;
  bool final = false;
};

struct MergePlan {
  std::vector<MergeStep> steps;
  int levels = 0;  // traditional levels before the final step

  std::size_t traditional_steps() const {
    return static_cast<std::size_t>(std::count_if(steps.begin(), steps.end(), [](const MergeStep& s) { return s.kind == StepKind::traditional && !s.final; }));
  }
  std::size_t wide_steps() const {
    return static_cast<std::size_t>(std::count_if(steps.begin(), steps.end(), [](const MergeStep& s) { return s.kind == StepKind::wide; }));
  }
};

namespace detail {

struct PlannedRun {
  std::uint64_t id;
  double rows;
  int level;
};

// Picks the next step for the given surviving runs, or nothing when no runs remain.
inline std::optional<MergeStep> next_step(std::vector<PlannedRun>& pool, double o_est, const SortAggConfig& cfg,
                                          bool first_intermediate) {
  if (pool.empty()) return std::nullopt;
  std::stable_sort(pool.begin(), pool.end(), [](const PlannedRun& a, const PlannedRun& b) { return a.rows < b.rows; });
  const std::size_t F = cfg.fanin();
  const std::size_t R = pool.size();
  double total = 0;
  for (const auto& r : pool) total += r.rows;
  MergeStep s;
  auto all_inputs = [&] {
    for (const auto& r : pool) s.inputs.push_back(r.id);
  };
  if (R == 1) {
    s.kind = cfg.strategy == MergeStrategy::wide ? StepKind::wide : StepKind::traditional;
    s.final = true;
    s.expected_output = std::min(total, o_est);
    all_inputs();
    return s;
  }
  if (R <= F && (cfg.strategy == MergeStrategy::traditional || total < o_est)) {
    s.kind = StepKind::traditional;
    s.final = true;
    s.expected_output = std::min(total, o_est);
    all_inputs();
    return s;
  }
  if (cfg.strategy == MergeStrategy::wide) {
    double smallest = 0;
    for (std::size_t i = 0; i < std::min(F, R); ++i) smallest += pool[i].rows;
    if (smallest >= o_est) {
      s.kind = StepKind::wide;
      s.final = true;
      s.expected_output = o_est;
      all_inputs();
      return s;
    }
  }
  std::size_t fan = F;
  if (cfg.strategy == MergeStrategy::traditional && first_intermediate) fan = 2 + (R - 2) % (F - 1);
  double in = 0;
  for (std::size_t i = 0; i < fan; ++i) {
    in += pool[i].rows;
    s.inputs.push_back(pool[i].id);
  }
  s.kind = StepKind::traditional;
  s.expected_output = std::min(in, o_est);
  return s;
}

inline void apply_step(std::vector<PlannedRun>& pool, const MergeStep& s, std::uint64_t out_id) {
  int level = 0;
  std::erase_if(pool, [&](const PlannedRun& r) {
    bool hit = std::find(s.inputs.begin(), s.inputs.end(), r.id) != s.inputs.end();
    if (hit) level = std::max(level, r.level);
    return hit;
  });
  pool.push_back({out_id, s.expected_output, level + 1});
}

}  // namespace detail

inline MergePlan plan_merge(const std::vector<RunMeta>& runs, double output_estimate, const SortAggConfig& cfg) {
  cfg.validate();
  MergePlan plan;
  std::vector<detail::PlannedRun> pool;
  for (const auto& r : runs) pool.push_back({r.run_id, static_cast<double>(r.row_count), r.level});
  std::uint64_t synthetic = std::uint64_t{1} << 62;
  bool first = true;
  while (auto s = detail::next_step(pool, output_estimate, cfg, first)) {
    first = false;
    plan.steps.push_back(*s);
    if (s->final) break;
    detail::apply_step(pool, *s, synthetic++);
  }
  int lv = 0;
  for (const auto& r : pool) lv = std::max(lv, r.level);
  plan.levels = lv;
  return plan;
}

struct NeedsPreliminaryMerge : std::runtime_error {
  std::vector<std::uint64_t> smallest_runs;
  explicit NeedsPreliminaryMerge(std::vector<std::uint64_t> ids)
      : std::runtime_error("wide merge index overflow; merge the smallest runs first"), smallest_runs(std::move(ids)) {}
};

using RowSink = std::function<void(Row&&)>;

// Merges at most F runs with a tree of losers, aggregating equal neighbours.
inline void traditional_merge(const std::vector<RunMeta>& inputs, const SortAggConfig& cfg, const Schema& schema,
                              RunStore& store, MetricsLedger& ledger, const RowSink& sink) {
  if (inputs.size() > cfg.fanin()) throw ContractViolation("merge fan-in exceeds F");
  const int K = schema.arity();
  const bool ovc = cfg.ovc;
  const bool cache = cfg.ovc && cfg.ovc_cache;
  const std::size_t n = inputs.size();
  std::vector<RunCursor> cursors;
  cursors.reserve(n);
  for (const auto& r : inputs) cursors.emplace_back(r, store, schema, ledger);
  std::vector<Row> cur(n);
  std::vector<OffsetValueCode> code(n);

  auto wins = [&](std::size_t a, std::size_t b) {
    if (ovc) {
      CodedComparison c = compare_with_codes(cur[a], code[a], cur[b], code[b], schema, ledger, cache);
      bool aw = c.result.order < 0 || (c.result.order == 0 && a < b);
      code[aw ? b : a] = c.loser_code;
      return aw;
    }
    Comparison c = compare_rows(cur[a], cur[b], schema, ledger);
    return c.order < 0 || (c.order == 0 && a < b);
  };
  LoserTree tree(n, wins);
  for (std::size_t i = 0; i < n; ++i) {
    if (cursors[i].peek()) {
      cur[i] = cursors[i].take();
      if (ovc) code[i] = encode_first(cur[i], OvcDirection::ascending, schema, ledger, cache);
    } else {
      tree.mark_exhausted(i);
    }
  }
  tree.build();
  std::optional<Row> pending;
  for (long w; (w = tree.winner()) >= 0;) {
    auto wi = static_cast<std::size_t>(w);
    bool dup = false;
    if (pending) dup = ovc ? code[wi].offset >= K : compare_rows(cur[wi], *pending, schema, ledger).order == 0;
    if (dup) {
      absorb(pending->state, cur[wi].state);
    } else {
      if (pending) sink(std::move(*pending));
      pending = std::move(cur[wi]);
    }
    if (cursors[wi].peek()) {
      cur[wi] = cursors[wi].take();
      if (ovc) code[wi] = encode(cur[wi], *pending, OvcDirection::ascending, schema, ledger, cache);
      tree.replace_winner();
    } else {
      tree.exhaust_winner();
    }
  }
  if (pending) sink(std::move(*pending));
}

inline RunMeta traditional_merge_step(const std::vector<RunMeta>& inputs, const SortAggConfig& cfg, const Schema& schema,
                                      RunStore& store, MetricsLedger& ledger) {
  int level = 0;
  for (const auto& r : inputs) level = std::max(level, r.level);
  RunWriter w(store, schema, cfg.page_rows, ledger, level + 1);
  traditional_merge(inputs, cfg, schema, store, ledger, [&](Row&& r) { w.add(std::move(r)); });
  ++ledger.merge_steps;
  return w.finish();
}

// Final merge over any number of runs: one shared input buffer, pages consumed
// in forecast order, rows aggregated in the index and emitted once final.
inline void wide_merge(const std::vector<RunMeta>& inputs, const SortAggConfig& cfg, const Schema& schema,
                       RunStore& store, MetricsLedger& ledger, const RowSink& sink) {
  cfg.validate();
  const std::size_t n = inputs.size();
  OrderedIndex index(schema, cfg.memory_rows - 2 * cfg.page_rows, cfg.index_options());
  std::vector<Key> highest(n);
  std::vector<std::size_t> next_page(n, 0);
  // columns of each forecast key already read, for the cache mode
  std::vector<std::uint64_t> touched(n, 0);
  const bool cache = cfg.ovc && cfg.ovc_cache;
  for (std::size_t i = 0; i < n; ++i) highest[i] = inputs[i].min_key;

  auto read = [&](std::size_t run, std::size_t col) {
    std::uint64_t bit = col < 64 ? (std::uint64_t{1} << col) : 0;
    if (!cache || bit == 0 || !(touched[run] & bit)) {
      ++ledger.column_value_accesses;
      touched[run] |= bit;
    }
  };
  auto wins = [&](std::size_t a, std::size_t b) {
    ++ledger.row_comparisons;
    int c = 0;
    for (std::size_t col = 0; col < highest[a].size() && c == 0; ++col) {
      read(a, col);
      read(b, col);
      c = compare_values(highest[a][col], highest[b][col]);
    }
    return c < 0 || (c == 0 && a < b);
  };
  LoserTree forecast(n, wins);
  for (std::size_t i = 0; i < n; ++i)
    if (inputs[i].page_count == 0) forecast.mark_exhausted(i);
  forecast.build();

  for (long w; (w = forecast.winner()) >= 0;) {
    auto wi = static_cast<std::size_t>(w);
    RunPage page = read_page(inputs[wi], next_page[wi]++, store, schema, ledger);
    for (auto& r : page.rows) {
      if (index.insert_or_aggregate(r, ledger) == InsertResult::needs_eviction) {
        std::vector<RunMeta> sorted = inputs;
        std::sort(sorted.begin(), sorted.end(), [](const RunMeta& a, const RunMeta& b) { return a.row_count < b.row_count; });
        std::vector<std::uint64_t> ids;
        for (std::size_t i = 0; i < std::min(cfg.fanin(), sorted.size()); ++i) ids.push_back(sorted[i].run_id);
        throw NeedsPreliminaryMerge(std::move(ids));
      }
    }
    if (page.high_key) {
      highest[wi] = std::move(*page.high_key);
      touched[wi] = 0;
    }
    if (next_page[wi] < inputs[wi].page_count) {
      forecast.replace_winner();
    } else {
      forecast.exhaust_winner();
    }
    long top = forecast.winner();
    if (top >= 0) {
      for (auto& r : index.pop_finalized_below(highest[static_cast<std::size_t>(top)])) sink(std::move(r));
    }
  }
  for (auto& r : index.drain_current()) sink(std::move(r));
  ++ledger.merge_steps;
}

struct SortAggResult {
  std::vector<Row> output;
  MetricsLedger ledger;
  MergePlan initial_plan;    // as planned right after run generation
  MergePlan executed;        // steps actually run
  std::size_t initial_runs = 0;
  std::uint64_t initial_run_rows = 0;
  double output_estimate = 0;
  int preliminary_merges = 0;
};

namespace detail {

// Solves D = O * (1 - prod(1 - s_i / O)) for O: the distinct count implied by a
// merge of runs of sizes s_i that produced D distinct keys.
inline std::optional<double> distinct_from_merge(const std::vector<double>& sizes, double out) {
  double total = std::accumulate(sizes.begin(), sizes.end(), 0.0);
  double largest = *std::max_element(sizes.begin(), sizes.end());
  if (out >= total * (1 - 1e-6) || out <= largest) return std::nullopt;
  auto f = [&](double o) {
    double p = 1;
    for (double s : sizes) p *= std::max(0.0, 1 - s / o);
    return o * (1 - p);
  };
  double lo = largest, hi = largest * 2;
  while (f(hi) < out && hi < 1e18) hi *= 2;
  for (int i = 0; i < 200; ++i) {
    double mid = (lo + hi) / 2;
    (f(mid) < out ? lo : hi) = mid;
  }
  return (lo + hi) / 2;
}

}  // namespace detail

// The whole operator: run generation, traditional levels while runs are small,
// then one wide step (or a final traditional step).
inline SortAggResult execute(RowSource& input, const SortAggConfig& cfg, const Schema& schema, RunStore& store) {
  cfg.validate();
  SortAggResult res;
  MetricsLedger& ledger = res.ledger;
  RunGenerationResult gen;
  if (cfg.hash_early_aggregation) {
    gen = hash_run_generation(input, cfg, schema, store, ledger);
  } else {
    OrderedIndex index(schema, cfg.memory_rows, cfg.index_options(), cfg.mode == RunGenMode::replacement_selection);
    gen = run_generation(input, cfg, schema, index, store, ledger);
  }
  res.initial_runs = gen.runs.size();
  for (const auto& r : gen.runs) res.initial_run_rows += r.row_count;
  if (gen.runs.empty()) {
    res.output = std::move(gen.residual);
    return res;
  }

  double o_est = gen.output_estimate();
  std::vector<RunMeta> runs = gen.runs;
  res.initial_plan = plan_merge(runs, o_est, cfg);
  const int retry_limit = res.initial_plan.levels + 2;
  auto by_id = [&](const std::vector<std::uint64_t>& ids) {
    std::vector<RunMeta> sel;
    for (auto id : ids)
      for (const auto& r : runs)
        if (r.run_id == id) sel.push_back(r);
    return sel;
  };
  auto replace = [&](const std::vector<RunMeta>& used, const RunMeta& out) {
    std::erase_if(runs, [&](const RunMeta& r) {
      return std::any_of(used.begin(), used.end(), [&](const RunMeta& u) { return u.run_id == r.run_id; });
    });
    for (const auto& u : used) store.drop_run(u.run_id);
    runs.push_back(out);
  };
  auto premerge = [&](const std::vector<RunMeta>& in) {
    RunMeta out = traditional_merge_step(in, cfg, schema, store, ledger);
    std::vector<double> sizes;
    for (const auto& r : in) sizes.push_back(static_cast<double>(r.row_count));
    if (auto est = detail::distinct_from_merge(sizes, static_cast<double>(out.row_count))) o_est = *est;
    o_est = std::max(o_est, static_cast<double>(out.row_count));
    replace(in, out);
  };

  auto sink = [&](Row&& r) { res.output.push_back(std::move(r)); };
  // once wide merging keeps overflowing, the rest runs as a traditional merge
  SortAggConfig plan_cfg = cfg;
  bool first = true;
  while (true) {
    std::vector<detail::PlannedRun> pool;
    for (const auto& r : runs) pool.push_back({r.run_id, static_cast<double>(r.row_count), r.level});
    auto step = detail::next_step(pool, o_est, plan_cfg, first);
    first = false;
    if (!step) break;
    std::vector<RunMeta> in = by_id(step->inputs);
    int top_level = 0;
    for (const auto& r : in) top_level = std::max(top_level, r.level);
    if (!step->final) {
      res.executed.steps.push_back(*step);
      premerge(in);
      continue;
    }
    if (step->kind == StepKind::traditional) {
      res.executed.steps.push_back(*step);
      traditional_merge(in, cfg, schema, store, ledger, sink);
      ++ledger.merge_steps;
    } else {
      try {
        wide_merge(in, cfg, schema, store, ledger, sink);
        res.executed.steps.push_back(*step);
      } catch (const NeedsPreliminaryMerge& e) {
        res.output.clear();
        if (++res.preliminary_merges > retry_limit || in.size() <= cfg.fanin()) {
          plan_cfg.strategy = MergeStrategy::traditional;
          first = true;
          continue;
        }
        MergeStep pre;
        pre.inputs = e.smallest_runs;
        std::vector<RunMeta> small = by_id(pre.inputs);
        double total = 0;
        for (const auto& r : small) total += static_cast<double>(r.row_count);
        pre.expected_output = std::min(total, o_est);
        res.executed.steps.push_back(pre);
        premerge(small);
        // the failed attempt proves the estimate was too low for these runs
        double largest = 0;
        for (const auto& r : runs) largest = std::max(largest, static_cast<double>(r.row_count));
        o_est = std::max(o_est, largest);
        continue;
      }
    }
    res.executed.levels = top_level;
    ledger.merge_levels = static_cast<std::uint64_t>(top_level) + 1;
    break;
  }
  res.output_estimate = o_est;
  return res;
}

}  // namespace insort
