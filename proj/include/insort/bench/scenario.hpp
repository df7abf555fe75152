#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "insort/bench/generator.hpp"
#include "insort/bench/intersect.hpp"
#include "insort/bench/reference.hpp"
#include "insort/bench/report.hpp"
#include "insort/costmodel.hpp"
#include "insort/hashagg.hpp"
#include "insort/sortagg.hpp"

namespace insort::bench {

enum class Operator { sortagg, hashagg, sort_then_dedup, intersect };

inline const char* operator_name(Operator o) {
  switch (o) {
    case Operator::sortagg: return "sortagg";
    case Operator::hashagg: return "hashagg";
    case Operator::sort_then_dedup: return "sort_then_dedup";
    case Operator::intersect: return "intersect";
  }
  return "?";
}

inline Operator parse_operator(const std::string& s) {
  for (Operator o : {Operator::sortagg, Operator::hashagg, Operator::sort_then_dedup, Operator::intersect})
    if (s == operator_name(o)) return o;
  throw InvalidInput("unknown operator: " + s);
}

enum class Bound { near, at_most, at_least };

// A metric check: near means |measured - value| <= tolerance * value.
struct Expectation {
  std::string metric;
  Bound bound = Bound::near;
  double value = 0;
  double tolerance = 0;
};

struct Scenario {
  std::string name = "scenario";
  GeneratorSpec data;
  Operator op = Operator::sortagg;
  std::size_t memory_rows = 1000;
  std::size_t page_rows = 10;
  std::size_t fanin = 0;
  RunGenMode mode = RunGenMode::replacement_selection;
  MergeStrategy strategy = MergeStrategy::wide;
  bool ovc = true;
  bool ovc_cache = false;
  bool interpolation = false;
  bool hash_early_aggregation = false;
  std::size_t batch_rows = 256;
  bool hybrid = true;
  bool known_output = false;  // hash operators receive the true distinct count
  std::vector<Expectation> expectations;
  std::string sweep_key;
  std::vector<std::string> sweep_values;

  SortAggConfig sort_config() const {
    SortAggConfig c;
    c.memory_rows = memory_rows;
    c.page_rows = page_rows;
    c.max_fanin = fanin;
    c.mode = mode;
    c.strategy = strategy;
    c.ovc = ovc;
    c.ovc_cache = ovc_cache;
    c.interpolation = interpolation;
    c.hash_early_aggregation = hash_early_aggregation;
    c.batch_rows = batch_rows;
    return c;
  }

  HashAggConfig hash_config() const {
    HashAggConfig c;
    c.memory_rows = memory_rows;
    c.page_rows = page_rows;
    c.max_fanout = fanin;
    c.hybrid = hybrid;
    if (known_output) c.output_estimate = static_cast<double>(data.distinct);
    return c;
  }
};

namespace detail {

inline bool parse_flag(const std::string& v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw InvalidInput("not a flag: " + v);
}

inline RunGenMode parse_mode(const std::string& v) {
  if (v == "read_sort_write") return RunGenMode::read_sort_write;
  if (v == "replacement_selection") return RunGenMode::replacement_selection;
  throw InvalidInput("unknown run generation mode: " + v);
}

inline MergeStrategy parse_strategy(const std::string& v) {
  if (v == "wide") return MergeStrategy::wide;
  if (v == "traditional") return MergeStrategy::traditional;
  throw InvalidInput("unknown merge strategy: " + v);
}

inline std::uint64_t parse_count(const std::string& v) {
  double d = std::stod(v);
  if (d < 0 || d != std::floor(d)) throw InvalidInput("not a row count: " + v);
  return static_cast<std::uint64_t>(d);
}

inline Expectation parse_expectation(const std::string& metric, const std::string& text) {
  std::istringstream is(text);
  std::string first;
  is >> first;
  Expectation e;
  e.metric = metric;
  if (first == "<=" || first == ">=") {
    e.bound = first == "<=" ? Bound::at_most : Bound::at_least;
    if (!(is >> e.value)) throw InvalidInput("missing bound for " + metric);
  } else {
    e.value = std::stod(first);
    if (!(is >> e.tolerance)) e.tolerance = 0;
  }
  return e;
}

}  // namespace detail

inline void apply_overrides(boost::property_tree::ptree& pt, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidInput("override must be section.key=value: " + s);
    pt.put(s.substr(0, eq), s.substr(eq + 1));
  }
}

inline Scenario scenario_from_tree(const boost::property_tree::ptree& pt) {
  Scenario sc;
  auto str = [&](const char* path, const std::string& def) { return pt.get<std::string>(path, def); };
  auto has = [&](const char* path) { return static_cast<bool>(pt.get_optional<std::string>(path)); };
  sc.name = str("scenario.name", sc.name);
  sc.op = parse_operator(str("scenario.operator", "sortagg"));

  sc.data.rows = detail::parse_count(str("data.rows", "1000"));
  sc.data.distinct = detail::parse_count(str("data.distinct", "100"));
  sc.data.distribution = parse_distribution(str("data.distribution", "uniform"));
  sc.data.zipf_s = std::stod(str("data.zipf_s", "1.0"));
  sc.data.columns = static_cast<int>(detail::parse_count(str("data.columns", "1")));
  sc.data.domain = static_cast<std::int64_t>(detail::parse_count(str("data.domain", "2147483648")));
  sc.data.seed = detail::parse_count(str("data.seed", "1"));

  sc.memory_rows = detail::parse_count(str("config.memory_rows", "1000"));
  sc.page_rows = detail::parse_count(str("config.page_rows", "10"));
  sc.fanin = detail::parse_count(str("config.fanin", "0"));
  sc.mode = detail::parse_mode(str("config.mode", "replacement_selection"));
  sc.strategy = detail::parse_strategy(str("config.strategy", "wide"));
  sc.ovc = detail::parse_flag(str("config.ovc", "on"));
  sc.ovc_cache = detail::parse_flag(str("config.ovc_cache", "off"));
  sc.interpolation = detail::parse_flag(str("config.interpolation", "off"));
  sc.hash_early_aggregation = detail::parse_flag(str("config.hash_early_aggregation", "off"));
  sc.batch_rows = detail::parse_count(str("config.batch_rows", "256"));
  sc.hybrid = detail::parse_flag(str("config.hybrid", "on"));
  sc.known_output = detail::parse_flag(str("config.known_output", "off"));

  if (auto ex = pt.get_child_optional("expect"))
    for (const auto& [metric, v] : *ex) sc.expectations.push_back(detail::parse_expectation(metric, v.data()));
  if (has("sweep.key")) {
    sc.sweep_key = str("sweep.key", "");
    std::string list = str("sweep.values", "");
    std::istringstream is(list);
    for (std::string item; std::getline(is, item, ',');) {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      if (!item.empty()) sc.sweep_values.push_back(item);
    }
    if (sc.sweep_values.empty()) throw InvalidInput("sweep needs values");
  }
  return sc;
}

inline boost::property_tree::ptree read_scenario_tree(const std::string& path) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(path, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InvalidInput(std::string("bad scenario file: ") + e.what());
  }
  return pt;
}

inline Scenario load_scenario(const std::string& path, const std::vector<std::string>& sets = {}) {
  auto pt = read_scenario_tree(path);
  apply_overrides(pt, sets);
  return scenario_from_tree(pt);
}

// Model prediction matching the operator configuration.
inline model::ModelParams model_params(const Scenario& sc) {
  model::ModelParams p;
  p.I = static_cast<double>(sc.data.rows);
  p.O = static_cast<double>(sc.data.distinct);
  p.M = static_cast<double>(sc.memory_rows);
  p.P = static_cast<double>(sc.page_rows);
  p.F = static_cast<double>(sc.fanin);
  const bool rs = sc.mode == RunGenMode::replacement_selection;
  switch (sc.op) {
    case Operator::hashagg:
      p.method = model::Method::hash_partitioning;
      p.hybrid = sc.hybrid && sc.known_output;
      break;
    case Operator::sort_then_dedup: p.method = model::Method::sort_separate_agg; break;
    default:
      if (sc.strategy == MergeStrategy::traditional) {
        p.method = model::Method::sort_traditional_early_agg;
        p.replacement_selection = rs;
      } else {
        p.method = rs ? model::Method::new_in_sort_replacement_selection : model::Method::new_in_sort;
      }
  }
  return p;
}

struct ScenarioOutcome {
  ReportRow row;
  bool correct = true;
  bool expectations_met = true;
  double seconds = 0;
};

inline void put_ledger(ReportRow& row, const MetricsLedger& l) {
  row.set("row_comparisons", l.row_comparisons);
  row.set("ovc_decided_comparisons", l.ovc_decided_comparisons);
  row.set("column_value_accesses", l.column_value_accesses);
  row.set("hash_computations", l.hash_computations);
  row.set("rows_spilled", l.rows_spilled);
  row.set("rows_read_back", l.rows_read_back);
  row.set("pages_written", l.pages_written);
  row.set("pages_read", l.pages_read);
  row.set("merge_steps", l.merge_steps);
  row.set("merge_levels", l.merge_levels);
}

inline std::unique_ptr<RunStore> make_store(bool simulated, const std::string& dir, const std::string& name) {
  if (simulated) return std::make_unique<SimulatedStore>();
  return std::make_unique<FileStore>(std::filesystem::path(dir) / name);
}

inline bool check(const Expectation& e, double measured) {
  switch (e.bound) {
    case Bound::at_most: return measured <= e.value;
    case Bound::at_least: return measured >= e.value;
    case Bound::near: return std::abs(measured - e.value) <= e.tolerance * std::abs(e.value);
  }
  return false;
}

// Generates the input, runs the operator, verifies it against the reference
// aggregation and evaluates the expectations.
inline ScenarioOutcome run_scenario(const Scenario& sc, bool simulated = true, const std::string& store_dir = "") {
  ScenarioOutcome out;
  ReportRow& row = out.row;
  Schema schema = bench_schema(sc.data);
  auto store = make_store(simulated, store_dir.empty() ? "insort_store" : store_dir, sc.name);

  row.set("scenario", sc.name);
  row.set("operator", operator_name(sc.op));
  row.set("distribution", distribution_name(sc.data.distribution));
  row.set("I", sc.data.rows);
  row.set("O", sc.data.distinct);
  row.set("K", sc.data.columns);
  row.set("M", static_cast<std::uint64_t>(sc.memory_rows));
  row.set("P", static_cast<std::uint64_t>(sc.page_rows));
  row.set("F", static_cast<std::uint64_t>(sc.fanin ? sc.fanin : sc.memory_rows / sc.page_rows));
  row.set("mode", sc.mode == RunGenMode::replacement_selection ? "replacement_selection" : "read_sort_write");
  row.set("strategy", sc.strategy == MergeStrategy::wide ? "wide" : "traditional");
  row.set("ovc", sc.ovc);
  row.set("seed", sc.data.seed);

  std::vector<std::pair<std::string, double>> metrics;
  auto metric = [&](const std::string& n, double v) { metrics.emplace_back(n, v); };
  auto start = std::chrono::steady_clock::now();

  if (sc.op == Operator::intersect) {
    IntersectInputs in = intersect_inputs(sc.data, schema);
    auto sp = sort_intersect(in, sc.sort_config(), schema, *store);
    HashAggConfig hc = sc.hash_config();
    hc.output_estimate = static_cast<double>(sc.data.distinct);
    auto hp = hash_intersect(in, hc, schema, *store);
    std::vector<Row> ref_l = reference_aggregate(in.left), ref_r = reference_aggregate(in.right);
    std::vector<Key> expected;
    std::size_t i = 0, j = 0;
    while (i < ref_l.size() && j < ref_r.size()) {
      int c = compare_keys(ref_l[i].key, ref_r[j].key);
      if (c == 0) {
        expected.push_back(ref_l[i].key);
        ++i, ++j;
      } else {
        (c < 0 ? i : j)++;
      }
    }
    auto same = [](const std::vector<Key>& a, const std::vector<Key>& b) {
      if (a.size() != b.size()) return false;
      for (std::size_t k = 0; k < a.size(); ++k)
        if (compare_keys(a[k], b[k]) != 0) return false;
      return true;
    };
    out.correct = same(sp.matches, expected) && same(hp.matches, expected);
    row.set("matches", static_cast<std::uint64_t>(expected.size()));
    put_ledger(row, sp.ledger);
    row.set("hash_plan_rows_spilled", hp.ledger.rows_spilled);
    double ratio = sp.ledger.rows_spilled ? static_cast<double>(hp.ledger.rows_spilled) /
                                                static_cast<double>(sp.ledger.rows_spilled)
                                          : 0.0;
    row.set("spill_ratio", ratio);
    metric("rows_spilled", static_cast<double>(sp.ledger.rows_spilled));
    metric("hash_plan_rows_spilled", static_cast<double>(hp.ledger.rows_spilled));
    metric("spill_ratio", ratio);
  } else {
    std::vector<Row> input = generate(sc.data, schema);
    std::vector<Row> ref = reference_aggregate(input);
    std::vector<Row> result;
    MetricsLedger ledger;
    if (sc.op == Operator::sortagg) {
      VectorSource src(input);
      SortAggResult r = execute(src, sc.sort_config(), schema, *store);
      ledger = r.ledger;
      // sorted output is part of the contract
      for (std::size_t i = 1; i < r.output.size(); ++i)
        if (compare_keys(r.output[i - 1].key, r.output[i].key) >= 0) out.correct = false;
      result = std::move(r.output);
      row.set("initial_runs", static_cast<std::uint64_t>(r.initial_runs));
      row.set("initial_run_rows", r.initial_run_rows);
      row.set("planned_traditional_steps", static_cast<std::uint64_t>(r.initial_plan.traditional_steps()));
      row.set("planned_wide_steps", static_cast<std::uint64_t>(r.initial_plan.wide_steps()));
      row.set("preliminary_merges", r.preliminary_merges);
      row.set("output_estimate", std::round(r.output_estimate));
      metric("initial_runs", static_cast<double>(r.initial_runs));
      metric("initial_run_rows", static_cast<double>(r.initial_run_rows));
      metric("planned_traditional_steps", static_cast<double>(r.initial_plan.traditional_steps()));
      metric("planned_wide_steps", static_cast<double>(r.initial_plan.wide_steps()));
      metric("preliminary_merges", r.preliminary_merges);
    } else if (sc.op == Operator::hashagg) {
      VectorSource src(input);
      HashAggResult r = hash_execute(src, sc.hash_config(), schema, *store);
      ledger = r.ledger;
      result = std::move(r.output);
      row.set("partitions", static_cast<std::uint64_t>(r.partitions));
      metric("partitions", static_cast<double>(r.partitions));
    } else {
      result = sort_then_dedup(input);
    }
    std::uint64_t got = checksum(result), want = checksum(ref);
    out.correct = out.correct && got == want && same_groups(result, ref);
    put_ledger(row, ledger);
    row.set("output_rows", static_cast<std::uint64_t>(result.size()));
    row.set("checksum", got);
    row.set("reference_checksum", want);
    metric("output_rows", static_cast<double>(result.size()));
    metric("row_comparisons", static_cast<double>(ledger.row_comparisons));
    metric("ovc_decided_comparisons", static_cast<double>(ledger.ovc_decided_comparisons));
    metric("column_value_accesses", static_cast<double>(ledger.column_value_accesses));
    metric("hash_computations", static_cast<double>(ledger.hash_computations));
    metric("rows_spilled", static_cast<double>(ledger.rows_spilled));
    metric("rows_read_back", static_cast<double>(ledger.rows_read_back));
    metric("pages_written", static_cast<double>(ledger.pages_written));
    metric("pages_read", static_cast<double>(ledger.pages_read));
    metric("merge_steps", static_cast<double>(ledger.merge_steps));
    metric("merge_levels", static_cast<double>(ledger.merge_levels));
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (sc.op != Operator::intersect && sc.data.distribution != Distribution::table3_stream) {
    model::ModelParams mp = model_params(sc);
    row.set("model_method", model::method_name(mp.method));
    row.set("predicted_spill", std::round(model::spill_volume(mp)));
    row.set("predicted_rungen_spill", std::round(model::predicted_rungen_spill(mp)));
  }
  row.set("correct", out.correct);

  std::string failed;
  for (const auto& e : sc.expectations) {
    auto it = std::find_if(metrics.begin(), metrics.end(), [&](const auto& m) { return m.first == e.metric; });
    if (it == metrics.end()) throw InvalidInput("unknown metric in expectation: " + e.metric);
    if (!check(e, it->second)) failed += (failed.empty() ? "" : ";") + e.metric;
  }
  out.expectations_met = failed.empty();
  row.set("expectations", sc.expectations.empty() ? "none" : (failed.empty() ? "pass" : "fail:" + failed));
  return out;
}

// One scenario per sweep value, with the swept setting applied as an override.
inline std::vector<ScenarioOutcome> run_sweep(const boost::property_tree::ptree& base, bool simulated = true,
                                              const std::string& store_dir = "") {
  Scenario head = scenario_from_tree(base);
  std::vector<ScenarioOutcome> out;
  if (head.sweep_key.empty()) {
    out.push_back(run_scenario(head, simulated, store_dir));
    return out;
  }
  for (const auto& v : head.sweep_values) {
    auto pt = base;
    pt.put(head.sweep_key, v);
    Scenario sc = scenario_from_tree(pt);
    sc.name = head.name + "[" + head.sweep_key + "=" + v + "]";
    out.push_back(run_scenario(sc, simulated, store_dir));
  }
  return out;
}

}  // namespace insort::bench
