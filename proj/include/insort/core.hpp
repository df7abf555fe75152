#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

namespace insort {

struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct OrderingViolation : std::logic_error {
  using std::logic_error::logic_error;
};
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};
struct Corruption : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Value = std::variant<std::int64_t, std::string>;
using Key = std::vector<Value>;

enum class ColumnType { int64, utf8 };

struct KeyColumn {
  std::string name;
  ColumnType type = ColumnType::int64;
  // integer values live in [0, domain)
  std::int64_t domain = std::int64_t{1} << 31;
};

enum class AggregateKind { count, sum, min, max, avg };

struct AggregateSpec {
  std::string name;
  AggregateKind kind = AggregateKind::count;
  int input = 0;  // index into the row's measure values
};

class Schema {
 public:
  Schema() = default;
  Schema(std::vector<KeyColumn> keys, std::vector<AggregateSpec> aggs)
      : keys_(std::move(keys)), aggs_(std::move(aggs)) {
    if (keys_.empty()) throw InvalidInput("schema needs at least one key column");
    std::unordered_set<std::string> seen;
    for (const auto& c : keys_) {
      if (!seen.insert(c.name).second) throw InvalidInput("duplicate column name: " + c.name);
      if (c.type == ColumnType::int64 && c.domain <= 0) throw InvalidInput("bad domain for " + c.name);
    }
    for (const auto& a : aggs_) {
      if (!seen.insert(a.name).second) throw InvalidInput("duplicate column name: " + a.name);
      if (a.input < 0) throw InvalidInput("bad aggregate input for " + a.name);
    }
    for (const auto& c : keys_)
      if (c.type == ColumnType::int64) domain_ = std::max(domain_, c.domain);
  }

  // all-int64 key of arity k with a shared domain, plus the given aggregates
  static Schema ints(int k, std::int64_t domain, std::vector<AggregateSpec> aggs = {{"cnt", AggregateKind::count, 0}}) {
    std::vector<KeyColumn> cols;
    for (int i = 0; i < k; ++i) cols.push_back({"k" + std::to_string(i), ColumnType::int64, domain});
    return Schema(std::move(cols), std::move(aggs));
  }

  int arity() const { return static_cast<int>(keys_.size()); }
  const std::vector<KeyColumn>& keys() const { return keys_; }
  const std::vector<AggregateSpec>& aggregates() const { return aggs_; }
  std::int64_t ovc_domain() const { return domain_; }
  bool is_string(int col) const { return keys_[col].type == ColumnType::utf8; }

  bool conforms(const Key& k) const {
    if (static_cast<int>(k.size()) != arity()) return false;
    for (int i = 0; i < arity(); ++i) {
      if (is_string(i) != std::holds_alternative<std::string>(k[i])) return false;
    }
    return true;
  }

 private:
  std::vector<KeyColumn> keys_;
  std::vector<AggregateSpec> aggs_;
  std::int64_t domain_ = 1;
};

struct Accumulator {
  AggregateKind kind = AggregateKind::count;
  std::int64_t count = 0;
  std::int64_t sum = 0;
  std::int64_t min = std::numeric_limits<std::int64_t>::max();
  std::int64_t max = std::numeric_limits<std::int64_t>::min();

  friend bool operator==(const Accumulator&, const Accumulator&) = default;
};

struct AggregateState {
  std::vector<Accumulator> acc;

  static AggregateState from_input(const Schema& s, const std::vector<std::int64_t>& measures) {
    AggregateState st;
    st.acc.reserve(s.aggregates().size());
    for (const auto& a : s.aggregates()) {
      if (a.kind != AggregateKind::count && a.input >= static_cast<int>(measures.size()))
        throw InvalidInput("missing measure for aggregate " + a.name);
      std::int64_t v = a.input < static_cast<int>(measures.size()) ? measures[a.input] : 0;
      st.acc.push_back({a.kind, 1, v, v, v});
    }
    return st;
  }

  // finalized output value of aggregate i; avg is returned as a double
  double output(std::size_t i) const {
    const auto& a = acc.at(i);
    switch (a.kind) {
      case AggregateKind::count: return static_cast<double>(a.count);
      case AggregateKind::sum: return static_cast<double>(a.sum);
      case AggregateKind::min: return static_cast<double>(a.min);
      case AggregateKind::max: return static_cast<double>(a.max);
      case AggregateKind::avg: return a.count ? static_cast<double>(a.sum) / static_cast<double>(a.count) : 0.0;
    }
    return 0.0;
  }

  friend bool operator==(const AggregateState&, const AggregateState&) = default;
};

// Adds b into a.
inline void absorb(AggregateState& a, const AggregateState& b) {
  if (a.acc.size() != b.acc.size()) throw InvalidInput("aggregate layouts differ");
  for (std::size_t i = 0; i < a.acc.size(); ++i) {
    auto& x = a.acc[i];
    const auto& y = b.acc[i];
    if (x.kind != y.kind) throw InvalidInput("aggregate kinds differ");
    x.count += y.count;
    x.sum += y.sum;
    x.min = std::min(x.min, y.min);
    x.max = std::max(x.max, y.max);
  }
}

inline AggregateState merge_states(const AggregateState& a, const AggregateState& b) {
  AggregateState r = a;
  absorb(r, b);
  return r;
}

// Codes already known for a row. root_code is relative to the "minus infinity"
// base; touched marks columns whose values have been read, for the cache mode.
struct OvcCache {
  bool has_root = false;
  std::uint64_t root_code = 0;
  std::uint64_t touched = 0;
};

struct Row {
  Key key;
  AggregateState state;
  OvcCache ovc;
};

struct MetricsLedger {
  std::uint64_t row_comparisons = 0;
  std::uint64_t ovc_decided_comparisons = 0;
  std::uint64_t column_value_accesses = 0;
  std::uint64_t hash_computations = 0;
  std::uint64_t rows_spilled = 0;
  std::uint64_t rows_read_back = 0;
  std::uint64_t pages_written = 0;
  std::uint64_t pages_read = 0;
  std::uint64_t merge_steps = 0;
  std::uint64_t merge_levels = 0;

  MetricsLedger& operator+=(const MetricsLedger& o) {
    row_comparisons += o.row_comparisons;
    ovc_decided_comparisons += o.ovc_decided_comparisons;
    column_value_accesses += o.column_value_accesses;
    hash_computations += o.hash_computations;
    rows_spilled += o.rows_spilled;
    rows_read_back += o.rows_read_back;
    pages_written += o.pages_written;
    pages_read += o.pages_read;
    merge_steps += o.merge_steps;
    merge_levels += o.merge_levels;
    return *this;
  }
  friend bool operator==(const MetricsLedger&, const MetricsLedger&) = default;
};

inline int compare_values(const Value& a, const Value& b) {
  if (a.index() != b.index()) throw InvalidInput("column type mismatch");
  if (const auto* x = std::get_if<std::int64_t>(&a)) {
    std::int64_t y = std::get<std::int64_t>(b);
    return *x < y ? -1 : (*x > y ? 1 : 0);
  }
  int c = std::get<std::string>(a).compare(std::get<std::string>(b));
  return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

struct Comparison {
  int order = 0;   // -1, 0, +1
  int offset = 0;  // first differing column, arity when equal
};

// With cache on, a column access is charged only the first time a row's column
// is read; otherwise every read is charged.
inline void charge(Row& r, int col, MetricsLedger& ledger, bool cache) {
  if (!cache) {
    ++ledger.column_value_accesses;
    return;
  }
  std::uint64_t bit = col < 64 ? (std::uint64_t{1} << col) : 0;
  if (bit == 0 || !(r.ovc.touched & bit)) {
    ++ledger.column_value_accesses;
    r.ovc.touched |= bit;
  }
}

// Column-by-column comparison starting at column `from`, which the caller knows
// to be equal before that point.
inline Comparison compare_from(Row& a, Row& b, int from, int k, MetricsLedger& ledger, bool cache) {
  for (int i = from; i < k; ++i) {
    charge(a, i, ledger, cache);
    charge(b, i, ledger, cache);
    int c = compare_values(a.key[i], b.key[i]);
    if (c != 0) return {c, i};
  }
  return {0, k};
}

inline Comparison compare_rows(const Row& a, const Row& b, const Schema& schema, MetricsLedger& ledger) {
  if (!schema.conforms(a.key) || !schema.conforms(b.key)) throw InvalidInput("row does not match schema");
  ++ledger.row_comparisons;
  const int k = schema.arity();
  for (int i = 0; i < k; ++i) {
    ledger.column_value_accesses += 2;
    int c = compare_values(a.key[i], b.key[i]);
    if (c != 0) return {c, i};
  }
  return {0, k};
}

// Plain lexicographic key order, no accounting.
inline int compare_keys(const Key& a, const Key& b) {
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    int c = compare_values(a[i], b[i]);
    if (c) return c;
  }
  return a.size() < b.size() ? -1 : (a.size() > b.size() ? 1 : 0);
}

struct KeyLess {
  bool operator()(const Key& a, const Key& b) const { return compare_keys(a, b) < 0; }
};

}  // namespace insort
