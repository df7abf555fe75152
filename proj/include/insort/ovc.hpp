#pragma once

#include "insort/core.hpp"

namespace insort {

enum class OvcDirection { descending, ascending };

struct OffsetValueCode {
  std::uint64_t code = 0;
  int offset = 0;
  OvcDirection direction = OvcDirection::ascending;
  // identifies the base row; 0 means unknown and is never checked
  std::uint64_t base_tag = 0;

  friend bool operator==(const OffsetValueCode&, const OffsetValueCode&) = default;
};

inline constexpr std::uint64_t kMinusInfinityTag = 1;

namespace detail {

inline std::uint64_t value_component(const Row& r, int offset, const Schema& s) {
  if (s.is_string(offset)) return 0;  // strings are compared directly, never coded
  std::int64_t v = std::get<std::int64_t>(r.key[offset]);
  if (v < 0 || v >= s.ovc_domain()) throw InvalidInput("key value outside the declared domain");
  return static_cast<std::uint64_t>(v);
}

}  // namespace detail

inline OffsetValueCode make_code(const Row& r, int offset, OvcDirection dir, const Schema& s,
                                 std::uint64_t base_tag = 0) {
  const auto k = static_cast<std::uint64_t>(s.arity());
  const auto d = static_cast<std::uint64_t>(s.ovc_domain());
  OffsetValueCode c{0, offset, dir, base_tag};
  if (offset >= s.arity()) {
    c.code = dir == OvcDirection::descending ? k * d : 0;
    return c;
  }
  std::uint64_t v = detail::value_component(r, offset, s);
  auto off = static_cast<std::uint64_t>(offset);
  c.code = dir == OvcDirection::descending ? off * d + (d - v) : (k - off) * d + v;
  return c;
}

// Code of `row` relative to `base`, which must not sort after it.
inline OffsetValueCode encode(Row& row, Row& base, OvcDirection dir, const Schema& s, MetricsLedger& ledger,
                              bool cache = false) {
  Comparison c = compare_from(base, row, 0, s.arity(), ledger, cache);
  if (c.order > 0) throw OrderingViolation("row sorts before its base");
  return make_code(row, c.offset, dir, s);
}

// Code relative to the minus-infinity sentinel: offset 0, one column read.
inline OffsetValueCode encode_first(Row& row, OvcDirection dir, const Schema& s, MetricsLedger& ledger,
                                    bool cache = false) {
  charge(row, 0, ledger, cache);
  return make_code(row, 0, dir, s, kMinusInfinityTag);
}

// Caches and returns the ascending code against minus infinity.
inline std::uint64_t root_code(Row& row, const Schema& s, MetricsLedger& ledger, bool cache) {
  if (!row.ovc.has_root) {
    row.ovc.root_code = encode_first(row, OvcDirection::ascending, s, ledger, cache).code;
    row.ovc.has_root = true;
  }
  return row.ovc.root_code;
}

struct CodedComparison {
  Comparison result;
  bool a_wins = true;            // a sorts first; ties go to a
  OffsetValueCode loser_code;    // loser re-encoded against the winner
};

// Both codes must share a base. Unequal codes decide without touching columns;
// equal codes resume the column scan at the shared offset.
inline CodedComparison compare_with_codes(Row& a, const OffsetValueCode& ca, Row& b, const OffsetValueCode& cb,
                                          const Schema& s, MetricsLedger& ledger, bool cache = false) {
  if (ca.direction != cb.direction) throw ContractViolation("codes use different directions");
  if (ca.base_tag && cb.base_tag && ca.base_tag != cb.base_tag)
    throw ContractViolation("codes are relative to different base rows");
  ++ledger.row_comparisons;
  const bool asc = ca.direction == OvcDirection::ascending;
  if (ca.code != cb.code) {
    ++ledger.ovc_decided_comparisons;
    bool a_first = asc ? ca.code < cb.code : ca.code > cb.code;
    int off = std::min(ca.offset, cb.offset);
    if (a_first) return {{-1, off}, true, cb};
    return {{1, off}, false, ca};
  }
  int from = std::min(ca.offset, cb.offset);
  if (from < s.arity() && !s.is_string(from) && ca.offset == cb.offset) ++from;  // equal code, equal value
  Comparison c = compare_from(a, b, from, s.arity(), ledger, cache);
  if (c.order == 0) c.offset = s.arity();
  bool a_first = c.order <= 0;
  Row& loser = a_first ? b : a;
  OffsetValueCode lc = make_code(loser, c.offset, ca.direction, s);
  lc.base_tag = 0;
  return {c, a_first, lc};
}

}  // namespace insort
