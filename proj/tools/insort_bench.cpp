#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "insort/bench/scenario.hpp"

using namespace insort;
using namespace insort::bench;

namespace {

struct CommonOptions {
  std::string scenario;
  std::vector<std::string> sets;
  std::string memory_rows, page_rows, op, mode, ovc, seed;
  std::string out;
  std::string store_dir = "insort_store";
  bool simulated = false;

  void attach(CLI::App* app) {
    app->add_option("--scenario", scenario, "scenario file (INI)");
    app->add_option("--set", sets, "override, section.key=value")->take_all();
    app->add_option("--memory-rows", memory_rows, "memory budget in rows");
    app->add_option("--page-rows", page_rows, "page capacity in rows");
    app->add_option("--operator", op, "sortagg | hashagg | sort_then_dedup | intersect");
    app->add_option("--mode", mode, "read_sort_write | replacement_selection");
    app->add_option("--ovc", ovc, "on | off");
    app->add_option("--seed", seed, "generator seed");
    app->add_option("--out", out, "CSV report path (stdout when empty)");
    app->add_option("--store-dir", store_dir, "directory for spill files");
    app->add_flag("--simulated-store", simulated, "keep spilled pages in memory");
  }

  boost::property_tree::ptree tree() const {
    boost::property_tree::ptree pt;
    if (!scenario.empty()) pt = read_scenario_tree(scenario);
    std::vector<std::string> all;
    if (!memory_rows.empty()) all.push_back("config.memory_rows=" + memory_rows);
    if (!page_rows.empty()) all.push_back("config.page_rows=" + page_rows);
    if (!op.empty()) all.push_back("scenario.operator=" + op);
    if (!mode.empty()) all.push_back("config.mode=" + mode);
    if (!ovc.empty()) all.push_back("config.ovc=" + ovc);
    if (!seed.empty()) all.push_back("data.seed=" + seed);
    all.insert(all.end(), sets.begin(), sets.end());
    apply_overrides(pt, all);
    return pt;
  }
};

void write_rows(const std::vector<ReportRow>& rows, const std::string& out) {
  if (out.empty()) {
    write_csv(rows, std::cout);
  } else {
    emit_report(rows, out);
  }
}

int report(const std::vector<ScenarioOutcome>& outcomes, const std::string& out) {
  std::vector<ReportRow> rows;
  bool ok = true;
  for (const auto& o : outcomes) {
    rows.push_back(o.row);
    std::cerr << *o.row.get("scenario") << ": " << (o.correct ? "correct" : "WRONG OUTPUT") << ", expectations "
              << *o.row.get("expectations") << ", " << o.seconds << " s\n";
    ok = ok && o.correct && o.expectations_met;
  }
  write_rows(rows, out);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spill, comparison and column-access benchmarks for sort- and hash-based aggregation"};
  app.require_subcommand(1);

  CommonOptions run_opt, sweep_opt, gen_opt;
  auto* run = app.add_subcommand("run", "run one scenario");
  run_opt.attach(run);
  auto* sweep = app.add_subcommand("sweep", "run a scenario once per [sweep] value");
  sweep_opt.attach(sweep);
  auto* gen = app.add_subcommand("generate", "write a scenario's input rows as CSV");
  gen_opt.attach(gen);

  auto* mdl = app.add_subcommand("model", "analytical spill predictions as CSV");
  std::vector<std::string> methods;
  double I = 1e6, O = 1e4, M = 1e3, P = 10, F = 0;
  bool rs = false, hybrid = false, curves = false;
  int decades = 6, per_decade = 10;
  std::string model_out;
  mdl->add_option("--method", methods, "methods (default: all)");
  mdl->add_option("--input-rows", I, "I");
  mdl->add_option("--output-rows", O, "O");
  mdl->add_option("--memory-rows", M, "M");
  mdl->add_option("--page-rows", P, "P");
  mdl->add_option("--fanin", F, "F (default M/P)");
  mdl->add_flag("--replacement-selection", rs, "runs of 2M for the sort methods");
  mdl->add_flag("--hybrid", hybrid, "hybrid hash partitioning");
  mdl->add_flag("--curves", curves, "sweep O from I downwards (hybrid hash, new in-sort, traditional)");
  mdl->add_option("--decades", decades, "decades swept by --curves");
  mdl->add_option("--points-per-decade", per_decade, "points per decade for --curves");
  mdl->add_option("--out", model_out, "CSV path (stdout when empty)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      Scenario sc = scenario_from_tree(run_opt.tree());
      return report({run_scenario(sc, run_opt.simulated, run_opt.store_dir)}, run_opt.out);
    }
    if (*sweep) return report(run_sweep(sweep_opt.tree(), sweep_opt.simulated, sweep_opt.store_dir), sweep_opt.out);
    if (*gen) {
      Scenario sc = scenario_from_tree(gen_opt.tree());
      Schema schema = bench_schema(sc.data);
      std::vector<Row> rows = generate(sc.data, schema);
      std::ofstream file;
      if (!gen_opt.out.empty()) {
        file.open(gen_opt.out, std::ios::binary | std::ios::trunc);
        if (!file) throw ResourceError("cannot open " + gen_opt.out);
      }
      std::ostream& os = gen_opt.out.empty() ? std::cout : file;
      for (int c = 0; c < schema.arity(); ++c) os << schema.keys()[c].name << ",";
      os << "m\n";
      for (const auto& r : rows) {
        for (const auto& v : r.key) os << std::get<std::int64_t>(v) << ",";
        os << r.state.acc.at(1).sum << "\n";
      }
      return 0;
    }
    std::vector<ReportRow> rows;
    if (curves) {
      double fan = F > 0 ? F : std::floor(M / P);
      for (const auto& c : model::reduction_sweep(I, M, P, fan, decades, per_decade)) {
        ReportRow r;
        r.set("O", c.O);
        r.set("reduction", I / c.O);
        r.set("hybrid_hash", c.hybrid_hash);
        r.set("new_in_sort", c.new_in_sort);
        r.set("traditional_early_agg", c.traditional);
        r.set("optimized_merge_term", c.optimized_merge_term);
        rows.push_back(r);
      }
    } else {
      if (methods.empty())
        for (auto m : {model::Method::hash_partitioning, model::Method::sort_separate_agg,
                       model::Method::sort_traditional_early_agg, model::Method::new_in_sort,
                       model::Method::new_in_sort_replacement_selection})
          methods.push_back(model::method_name(m));
      for (const auto& name : methods) {
        model::ModelParams p{I, O, M, P, F, model::parse_method(name), rs, hybrid};
        ReportRow r;
        r.set("method", name);
        r.set("I", I);
        r.set("O", O);
        r.set("M", M);
        r.set("P", P);
        r.set("F", p.fanin());
        r.set("predicted_spill_rows", model::spill_volume(p));
        rows.push_back(r);
      }
    }
    write_rows(rows, model_out);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
