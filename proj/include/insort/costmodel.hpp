#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include "insort/core.hpp"

namespace insort::model {

enum class Method {
  hash_partitioning,
  sort_separate_agg,
  sort_traditional_early_agg,
  new_in_sort,
  new_in_sort_replacement_selection,
};

inline const char* method_name(Method m) {
  switch (m) {
    case Method::hash_partitioning: return "hash_partitioning";
    case Method::sort_separate_agg: return "sort_separate_agg";
    case Method::sort_traditional_early_agg: return "sort_traditional_early_agg";
    case Method::new_in_sort: return "new_in_sort";
    case Method::new_in_sort_replacement_selection: return "new_in_sort_replacement_selection";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::hash_partitioning, Method::sort_separate_agg, Method::sort_traditional_early_agg,
                   Method::new_in_sort, Method::new_in_sort_replacement_selection})
    if (s == method_name(m)) return m;
  throw InvalidInput("unknown method: " + s);
}

struct ModelParams {
  double I = 0;
  double O = 0;
  double M = 0;
  double P = 1;
  double F = 0;  // 0 means floor(M / P)
  Method method = Method::new_in_sort;
  // runs of 2M for the sort methods without their own replacement-selection variant
  bool replacement_selection = false;
  // hash: memory split between a resident table and partition buffers
  bool hybrid = false;

  double fanin() const { return F > 0 ? F : std::floor(M / P); }
  bool uses_replacement_selection() const {
    return replacement_selection || method == Method::new_in_sort_replacement_selection;
  }

  void validate() const {
    if (O < 1 || I < O) throw InvalidInput("need 1 <= O <= I");
    if (P < 1 || M < P) throw InvalidInput("need M >= P >= 1");
    if (fanin() < 2) throw InvalidInput("fan-in must be at least 2");
  }
};

// Smallest L >= 0 with base * F^L >= target.
inline double levels_to_cover(double target, double base, double F) {
  double L = 0;
  for (double c = base; c < target; c *= F) ++L;
  return L;
}

inline double log_f(double x, double F) { return std::log(x) / std::log(F); }

inline bool needs_spill(const ModelParams& p) {
  p.validate();
  switch (p.method) {
    case Method::hash_partitioning:
    case Method::new_in_sort:
    case Method::new_in_sort_replacement_selection: return p.O > p.M;
    case Method::sort_separate_agg:
    case Method::sort_traditional_early_agg: return p.I > p.M;
  }
  return true;
}

// Run generation followed by full merge levels while F runs stay below the
// output size, then intermediate steps that each write at most O rows, the
// first one with the smallest fan-in that leaves every later step full.
inline double traditional_schedule(double I, double O, double M, double F, bool rs) {
  if (I <= M) return 0;
  double s = rs ? 2 * M : M;
  double R = std::ceil(I / s);
  double spill = 0;
  double volume = std::min(I, R * std::min(s, O));
  spill += volume;
  s = std::min(s, O);
  while (R > F && s * F < O) {
    R = std::ceil(R / F);
    s = std::min(s * F, O);
    volume = std::min(volume, R * s);
    spill += volume;
  }
  if (R <= F) return spill;
  double steps = std::ceil((R - 1) / (F - 1)) - 1;
  std::priority_queue<double, std::vector<double>, std::greater<>> runs;
  for (double i = 0; i < R; ++i) runs.push(s);
  for (double k = 0; k < steps; ++k) {
    double fan = k == 0 ? 2 + std::fmod(R - 2, F - 1) : F;
    double sum = 0;
    for (double j = 0; j < fan; ++j) {
      sum += runs.top();
      runs.pop();
    }
    double out = std::min(sum, O);
    spill += out;
    runs.push(out);
  }
  return spill;
}

// Hybrid hash aggregation: a resident share of the output absorbs its input,
// deeper recursion adds one full pass per level.
inline double hybrid_hash_spill(double I, double O, double M, double P, double F) {
  if (O <= M) return 0;
  if (O <= F * M) {
    double f = std::min(F, std::ceil((O - M) / (M - P)));
    double resident = std::max(0.0, M - f * P);
    return I * (1 - resident / O);
  }
  return I + hybrid_hash_spill(I, O / F, M, P, F);
}

// Early aggregation into runs of about 2M plus one wide merge once F runs of
// twice memory cover the output.
inline double new_in_sort_curve(double I, double O, double M, double P, double F) {
  if (O <= M) return 0;
  if (O <= F * M) return hybrid_hash_spill(I, O, M, P, F);
  if (O <= 2 * F * M) return M + (1 - M / O) * I;
  return I + new_in_sort_curve(I, O / F, M, P, F);
}

// Whole levels of runs of `s` rows growing F-fold per level; early aggregation
// caps every run at O rows.
inline double early_agg_levels(double I, double O, double s, double F) {
  double levels = std::max(1.0, levels_to_cover(O, s, F));
  double R = std::ceil(I / s);
  double volume = I;
  double spill = 0;
  for (double l = 0; l < levels; ++l) {
    volume = std::min(volume, R * std::min(s, O));
    spill += volume;
    R = std::ceil(R / F);
    s *= F;
  }
  return spill;
}

// Discrete prediction with whole levels.
inline double spill_volume(const ModelParams& p) {
  if (!needs_spill(p)) return 0;
  const double F = p.fanin();
  const bool rs = p.uses_replacement_selection();
  switch (p.method) {
    case Method::hash_partitioning:
      if (p.hybrid) return hybrid_hash_spill(p.I, p.O, p.M, p.P, F);
      return levels_to_cover(p.O, p.M, F) * p.I;
    case Method::sort_separate_agg:
      return (rs ? std::max(1.0, levels_to_cover(p.I, 2 * p.M, F)) : levels_to_cover(p.I, p.M, F)) * p.I;
    case Method::sort_traditional_early_agg: return traditional_schedule(p.I, p.O, p.M, F, rs);
    case Method::new_in_sort:
    case Method::new_in_sort_replacement_selection: return early_agg_levels(p.I, p.O, rs ? 2 * p.M : p.M, F);
  }
  return 0;
}

// Real-valued level counts, for curves.
inline double spill_volume_real(const ModelParams& p) {
  if (!needs_spill(p)) return 0;
  const double F = p.fanin();
  const bool rs = p.uses_replacement_selection();
  switch (p.method) {
    case Method::hash_partitioning: return log_f(p.O / p.M, F) * p.I;
    case Method::sort_separate_agg: return (rs ? log_f(1 + p.I / (2 * p.M), F) : log_f(p.I / p.M, F)) * p.I;
    case Method::sort_traditional_early_agg:
      return std::max(0.0, log_f(p.O / p.M, F)) * p.I + (p.I - p.O) / (F - 1);
    case Method::new_in_sort:
    case Method::new_in_sort_replacement_selection:
      return (rs ? log_f(1 + p.O / (2 * p.M), F) : log_f(p.O / p.M, F)) * p.I;
  }
  return 0;
}

// Total size of the initial runs when early aggregation fills memory first and
// then absorbs the resident share of the remaining input.
inline double predicted_rungen_spill(const ModelParams& p) {
  if (p.O <= p.M) return 0;
  return p.M + (1 - p.M / p.O) * p.I;
}

enum class AccessScenario { single_group, all_distinct };

struct AccessBounds {
  double sort_low = 0;
  double sort_high = 0;
  double hash = 0;
};

inline AccessBounds column_access_bounds(double N, double K, AccessScenario sc, bool cache) {
  if (N < 1 || K < 1) throw InvalidInput("need N, K >= 1");
  if (sc == AccessScenario::single_group) {
    double s = cache ? N * K : 2 * N * K;
    return {s, s, 3 * N * K};
  }
  return {cache ? N : 2 * N, cache ? N * K : 2 * N * K, N * K};
}

struct CurvePoint {
  double O = 0;
  double hybrid_hash = 0;
  double new_in_sort = 0;
  double traditional = 0;
  double optimized_merge_term = 0;
};

// Spill volumes over output sizes from I down by `decades` powers of ten.
inline std::vector<CurvePoint> reduction_sweep(double I, double M, double P, double F, int decades,
                                               int points_per_decade) {
  std::vector<CurvePoint> out;
  int n = decades * points_per_decade;
  for (int i = 0; i <= n; ++i) {
    double O = std::round(I / std::pow(10.0, static_cast<double>(i) / points_per_decade));
    O = std::max(1.0, O);
    if (!out.empty() && out.back().O == O) continue;
    CurvePoint c;
    c.O = O;
    c.hybrid_hash = hybrid_hash_spill(I, O, M, P, F);
    c.new_in_sort = new_in_sort_curve(I, O, M, P, F);
    c.traditional = traditional_schedule(I, O, M, F, false);
    c.optimized_merge_term = (I - O) / (F - 1);
    out.push_back(c);
  }
  return out;
}

}  // namespace insort::model
