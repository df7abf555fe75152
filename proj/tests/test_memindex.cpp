#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "helpers.hpp"
#include "insort/bench/reference.hpp"
#include "insort/memindex.hpp"

using namespace insort;
using insort::test::int_row;

namespace {

std::vector<std::int64_t> firsts(const std::vector<Row>& rows) {
  std::vector<std::int64_t> out;
  for (const auto& r : rows) out.push_back(std::get<std::int64_t>(r.key[0]));
  return out;
}

}  // namespace

TEST(OrderedIndex, DuplicateIsAbsorbed) {
  Schema s = Schema::ints(2, 10);
  OrderedIndex idx(s, 10);
  MetricsLedger l;
  Row a = int_row(s, {1, 2}), b = int_row(s, {1, 2});
  EXPECT_EQ(idx.insert_or_aggregate(a, l), InsertResult::inserted);
  EXPECT_EQ(idx.insert_or_aggregate(b, l), InsertResult::absorbed);
  EXPECT_EQ(idx.resident_rows(), 1u);
  auto rows = idx.drain_current();
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].state.acc[0].count, 2);
}

TEST(OrderedIndex, FullIndexReportsEvictionWithoutChange) {
  Schema s = Schema::ints(1, 100);
  OrderedIndex idx(s, 2);
  MetricsLedger l;
  Row a = int_row(s, {1}), b = int_row(s, {2}), c = int_row(s, {3}), d = int_row(s, {1});
  idx.insert_or_aggregate(a, l);
  idx.insert_or_aggregate(b, l);
  EXPECT_EQ(idx.insert_or_aggregate(c, l), InsertResult::needs_eviction);
  EXPECT_EQ(std::get<std::int64_t>(c.key[0]), 3);  // row left intact
  EXPECT_EQ(idx.resident_rows(), 2u);
  EXPECT_EQ(idx.insert_or_aggregate(d, l), InsertResult::absorbed);
}

TEST(OrderedIndex, EvictRangeTakesTheLowEnd) {
  Schema s = Schema::ints(1, 1000);
  OrderedIndex idx(s, 200);
  MetricsLedger l;
  for (int k = 100; k >= 1; --k) {
    Row r = int_row(s, {k});
    idx.insert_or_aggregate(r, l);
  }
  auto out = idx.evict_range(10);
  EXPECT_EQ(firsts(out), (std::vector<std::int64_t>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
  ASSERT_TRUE(idx.cursor());
  EXPECT_EQ(std::get<std::int64_t>((*idx.cursor())[0]), 10);
  EXPECT_EQ(idx.resident_rows(), 90u);
  EXPECT_THROW(idx.evict_range(0), InvalidInput);
}

TEST(OrderedIndex, FullFlushMatchesReference) {
  Schema s = Schema::ints(3, 6);
  auto rows = insort::test::random_rows(s, 5000, 6, 17);
  OrderedIndex idx(s, 1000);
  MetricsLedger l;
  for (auto r : rows) ASSERT_NE(idx.insert_or_aggregate(r, l), InsertResult::needs_eviction);
  EXPECT_TRUE(idx.sorted());
  auto drained = idx.drain_current();
  auto ref = bench::reference_aggregate(rows);
  ASSERT_EQ(drained.size(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    EXPECT_EQ(compare_keys(drained[i].key, ref[i].key), 0);
    EXPECT_EQ(drained[i].state, ref[i].state);
  }
}

TEST(OrderedIndex, KeysBelowCursorWaitForTheNextGeneration) {
  Schema s = Schema::ints(1, 1000);
  OrderedIndex idx(s, 100, {}, true);
  MetricsLedger l;
  for (int k : {10, 20, 30, 40}) {
    Row r = int_row(s, {k});
    idx.insert_or_aggregate(r, l);
  }
  EXPECT_EQ(firsts(idx.evict_range(2)), (std::vector<std::int64_t>{10, 20}));
  Row low = int_row(s, {15}), high = int_row(s, {35}), again = int_row(s, {20});
  EXPECT_EQ(idx.insert_or_aggregate(low, l), InsertResult::inserted);
  EXPECT_EQ(idx.insert_or_aggregate(high, l), InsertResult::inserted);
  EXPECT_EQ(idx.insert_or_aggregate(again, l), InsertResult::inserted);
  EXPECT_EQ(idx.next_rows(), 2u);
  EXPECT_EQ(firsts(idx.evict_range(10)), (std::vector<std::int64_t>{30, 35, 40}));
  idx.advance_generation();
  EXPECT_EQ(idx.generation(), 1u);
  EXPECT_EQ(firsts(idx.drain_current()), (std::vector<std::int64_t>{15, 20}));
}

// Two-bucket model: keys at or below the cursor go to the next generation.
TEST(OrderedIndex, ReplacementSelectionAgreesWithTwoBucketModel) {
  Schema s = Schema::ints(1, 500);
  auto rows = insort::test::random_rows(s, 20000, 500, 23);
  OrderedIndex idx(s, 64, {}, true);
  MetricsLedger l;
  std::set<std::int64_t> cur, nxt;
  std::int64_t cursor = -1;  // keys are non-negative, so -1 means no cursor
  for (auto& r : rows) {
    std::int64_t k = std::get<std::int64_t>(r.key[0]);
    bool to_next = k <= cursor;
    auto& bucket = to_next ? nxt : cur;
    InsertResult res = idx.insert_or_aggregate(r, l);
    if (bucket.count(k)) {
      ASSERT_EQ(res, InsertResult::absorbed);
      continue;
    }
    if (cur.size() + nxt.size() < 64) {
      ASSERT_EQ(res, InsertResult::inserted);
      bucket.insert(k);
      continue;
    }
    ASSERT_EQ(res, InsertResult::needs_eviction);
    if (cur.empty()) {
      idx.advance_generation();
      std::swap(cur, nxt);
      cursor = -1;
    } else {
      auto out = idx.evict_range(4);
      std::vector<std::int64_t> want;
      while (want.size() < 4 && !cur.empty()) {
        want.push_back(*cur.begin());
        cur.erase(cur.begin());
      }
      ASSERT_EQ(firsts(out), want);
      cursor = want.back();
    }
  }
}

TEST(OrderedIndex, PopFinalizedBelow) {
  Schema s = Schema::ints(1, 100);
  OrderedIndex idx(s, 10);
  MetricsLedger l;
  for (int k : {9, 2, 5}) {
    Row r = int_row(s, {k});
    idx.insert_or_aggregate(r, l);
  }
  EXPECT_TRUE(idx.pop_finalized_below(std::nullopt).empty());
  EXPECT_EQ(firsts(idx.pop_finalized_below(Key{std::int64_t{6}})), (std::vector<std::int64_t>{2, 5}));
  EXPECT_TRUE(idx.pop_finalized_below(Key{std::int64_t{9}}).empty());  // strict
  EXPECT_EQ(idx.resident_rows(), 1u);
}

TEST(OrderedIndex, AbsorbedFractionMatchesMemoryOverOutput) {
  const std::int64_t O = 10000;
  const std::size_t M = 1000;
  Schema s = Schema::ints(1, O);
  OrderedIndex idx(s, M, {}, true);
  MetricsLedger l;
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::int64_t> key(0, O - 1);
  std::size_t probes = 0, absorbed = 0;
  for (int i = 0; i < 1000000; ++i) {
    Row r = int_row(s, {key(rng)});
    bool full = idx.resident_rows() == M;
    InsertResult res = idx.insert_or_aggregate(r, l);
    while (res == InsertResult::needs_eviction) {
      if (idx.current_rows() == 0) {
        idx.advance_generation();
      } else {
        idx.evict_range(1);
      }
      res = idx.insert_or_aggregate(r, l);
    }
    if (full) {
      ++probes;
      absorbed += res == InsertResult::absorbed;
    }
  }
  double frac = static_cast<double>(absorbed) / static_cast<double>(probes);
  EXPECT_NEAR(frac, 0.1, 0.003);
}

TEST(OrderedIndex, ComparisonsPerInsertStayNearLogSize) {
  Schema s = Schema::ints(1, std::int64_t{1} << 40);
  const std::size_t M = 65536;
  for (bool interp : {false, true}) {
    IndexOptions opt;
    opt.interpolation = interp;
    OrderedIndex idx(s, M, opt);
    MetricsLedger total;
    auto rows = insort::test::random_rows(s, M, std::int64_t{1} << 40, 41);
    std::size_t worst_excess = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      MetricsLedger l;
      idx.insert_or_aggregate(rows[i], l);
      std::size_t bound = i ? static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(i)))) : 0;
      if (l.row_comparisons > bound) worst_excess = std::max<std::size_t>(worst_excess, l.row_comparisons - bound);
      total += l;
    }
    EXPECT_TRUE(idx.sorted());
    double per = static_cast<double>(total.row_comparisons) / static_cast<double>(M);
    if (!interp) {
      EXPECT_LE(worst_excess, 4u);
      EXPECT_LE(per, std::log2(static_cast<double>(M)) + 1);
    } else {
      EXPECT_LT(per, std::log2(static_cast<double>(M)));
    }
  }
}

TEST(OrderedIndex, OvcAndPlainComparisonsBuildTheSameOrder) {
  Schema s = Schema::ints(3, 5);
  auto rows = insort::test::random_rows(s, 3000, 5, 8);
  std::vector<std::vector<Row>> results;
  for (bool ovc : {false, true}) {
    IndexOptions opt;
    opt.ovc = ovc;
    OrderedIndex idx(s, 1000, opt);
    MetricsLedger l;
    for (auto r : rows) idx.insert_or_aggregate(r, l);
    results.push_back(idx.drain_current());
  }
  ASSERT_EQ(results[0].size(), results[1].size());
  for (std::size_t i = 0; i < results[0].size(); ++i) {
    EXPECT_EQ(compare_keys(results[0][i].key, results[1][i].key), 0);
    EXPECT_EQ(results[0][i].state, results[1][i].state);
  }
}

TEST(OrderedIndex, SmallNodesSplitAndDrainInOrder) {
  Schema s = Schema::ints(1, 100000);
  IndexOptions opt;
  opt.node_capacity = 4;
  OrderedIndex idx(s, 5000, opt);
  MetricsLedger l;
  auto rows = insort::test::random_rows(s, 4000, 100000, 3);
  for (auto r : rows) idx.insert_or_aggregate(r, l);
  EXPECT_TRUE(idx.sorted());
  auto half = idx.evict_range(idx.resident_rows() / 2);
  auto rest = idx.drain_current();
  half.insert(half.end(), rest.begin(), rest.end());
  auto ref = bench::reference_aggregate(rows);
  ASSERT_EQ(half.size(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_EQ(compare_keys(half[i].key, ref[i].key), 0);
}
