#include <gtest/gtest.h>

#include <algorithm>

#include "helpers.hpp"
#include "insort/core.hpp"

using namespace insort;
using insort::test::int_row;

TEST(Schema, RejectsEmptyAndDuplicateNames) {
  EXPECT_THROW(Schema({}, {}), InvalidInput);
  EXPECT_THROW(Schema({{"a"}, {"a"}}, {}), InvalidInput);
  EXPECT_THROW(Schema({{"a"}}, {{"a", AggregateKind::count, 0}}), InvalidInput);
  Schema s = Schema::ints(3, 10);
  EXPECT_EQ(s.arity(), 3);
  EXPECT_EQ(s.ovc_domain(), 10);
}

TEST(CompareRows, SharedPrefixCase) {
  Schema s = Schema::ints(4, 100);
  MetricsLedger l;
  Comparison c = compare_rows(int_row(s, {5, 7, 3, 9}), int_row(s, {5, 7, 3, 12}), s, l);
  EXPECT_EQ(c.order, -1);
  EXPECT_EQ(c.offset, 3);
  EXPECT_EQ(l.column_value_accesses, 8u);
  EXPECT_EQ(l.row_comparisons, 1u);
}

TEST(CompareRows, EqualKeys) {
  Schema s = Schema::ints(4, 100);
  MetricsLedger l;
  Comparison c = compare_rows(int_row(s, {5, 9, 2, 7}), int_row(s, {5, 9, 2, 7}), s, l);
  EXPECT_EQ(c.order, 0);
  EXPECT_EQ(c.offset, 4);
  EXPECT_EQ(l.column_value_accesses, 8u);
}

TEST(CompareRows, SchemaMismatchIsInvalidInput) {
  Schema s = Schema::ints(2, 100);
  Schema t = Schema::ints(3, 100);
  MetricsLedger l;
  EXPECT_THROW(compare_rows(int_row(t, {1, 2, 3}), int_row(t, {1, 2, 3}), s, l), InvalidInput);
  Row str = int_row(s, {1, 2});
  str.key[1] = std::string("x");
  EXPECT_THROW(compare_rows(str, int_row(s, {1, 2}), s, l), InvalidInput);
}

TEST(CompareRows, StringsCompareBytewise) {
  Schema s({{"a", ColumnType::int64, 10}, {"b", ColumnType::utf8}}, {{"cnt", AggregateKind::count, 0}});
  Row a, b;
  a.key = {std::int64_t{1}, std::string("B")};
  b.key = {std::int64_t{1}, std::string("a")};
  MetricsLedger l;
  EXPECT_EQ(compare_rows(a, b, s, l).order, -1);
}

// naive oracle: scan columns until the first difference
TEST(CompareRows, AgreesWithNaiveOracle) {
  Schema s = Schema::ints(4, 3);
  auto rows = insort::test::random_rows(s, 300, 3, 11);
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const Row& a = rows[i];
    const Row& b = rows[i + 1];
    int off = 0, order = 0;
    for (; off < 4; ++off) {
      auto x = std::get<std::int64_t>(a.key[off]), y = std::get<std::int64_t>(b.key[off]);
      if (x != y) {
        order = x < y ? -1 : 1;
        break;
      }
    }
    MetricsLedger l;
    Comparison c = compare_rows(a, b, s, l);
    EXPECT_EQ(c.order, order);
    EXPECT_EQ(c.offset, off);
    EXPECT_EQ(l.column_value_accesses, order == 0 ? 8u : 2u * (off + 1));
  }
}

TEST(MergeStates, CountsAndAverages) {
  Schema s({{"k"}}, {{"c", AggregateKind::count, 0}, {"a", AggregateKind::avg, 0}});
  AggregateState x = AggregateState::from_input(s, {10});
  absorb(x, AggregateState::from_input(s, {0}));
  absorb(x, AggregateState::from_input(s, {5}));
  AggregateState y = AggregateState::from_input(s, {5});
  AggregateState m = merge_states(x, y);
  EXPECT_EQ(m.acc[0].count, 4);
  EXPECT_EQ(m.acc[1].sum, 20);
  EXPECT_DOUBLE_EQ(m.output(1), 5.0);
}

TEST(MergeStates, KindMismatchIsInvalidInput) {
  Schema s({{"k"}}, {{"c", AggregateKind::count, 0}});
  Schema t({{"k"}}, {{"c", AggregateKind::sum, 0}});
  EXPECT_THROW(merge_states(AggregateState::from_input(s, {1}), AggregateState::from_input(t, {1})), InvalidInput);
}

TEST(MergeStates, EveryPermutationFoldsToTheSameState) {
  Schema s({{"k"}}, {{"c", AggregateKind::count, 0},
                     {"s", AggregateKind::sum, 0},
                     {"lo", AggregateKind::min, 0},
                     {"hi", AggregateKind::max, 0}});
  std::vector<std::int64_t> vals = {7, -3, 12, 0, 5, 5};
  std::vector<int> idx = {0, 1, 2, 3, 4, 5};
  std::optional<AggregateState> first;
  do {
    AggregateState st = AggregateState::from_input(s, {vals[idx[0]]});
    for (std::size_t i = 1; i < idx.size(); ++i) st = merge_states(st, AggregateState::from_input(s, {vals[idx[i]]}));
    if (!first) first = st;
    EXPECT_EQ(st, *first);
  } while (std::next_permutation(idx.begin(), idx.end()));
  EXPECT_EQ(first->acc[0].count, 6);
  EXPECT_EQ(first->acc[1].sum, 26);
  EXPECT_EQ(first->acc[2].min, -3);
  EXPECT_EQ(first->acc[3].max, 12);
}

TEST(MergeStates, AssociativeOverRandomTrees) {
  Schema s({{"k"}}, {{"s", AggregateKind::sum, 0}, {"hi", AggregateKind::max, 0}});
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::int64_t> v(-100, 100);
  for (int t = 0; t < 200; ++t) {
    auto a = AggregateState::from_input(s, {v(rng)});
    auto b = AggregateState::from_input(s, {v(rng)});
    auto c = AggregateState::from_input(s, {v(rng)});
    EXPECT_EQ(merge_states(merge_states(a, b), c), merge_states(a, merge_states(b, c)));
    EXPECT_EQ(merge_states(a, b), merge_states(b, a));
  }
}

TEST(Ledger, AddsFieldwise) {
  MetricsLedger a, b;
  a.rows_spilled = 3;
  b.rows_spilled = 4;
  b.merge_steps = 1;
  a += b;
  EXPECT_EQ(a.rows_spilled, 7u);
  EXPECT_EQ(a.merge_steps, 1u);
}
