#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "insort/ovc.hpp"

namespace insort {

struct IndexOptions {
  bool ovc = true;             // decide comparisons on cached codes where possible
  bool ovc_cache = false;      // charge each row column at most once
  bool interpolation = false;  // interpolation search on an integer first column
  std::size_t node_capacity = 64;
};

// Comparison policy shared by the index and by batch pre-sorting.
class RowComparator {
 public:
  RowComparator(const Schema& s, IndexOptions opt) : schema_(&s), opt_(opt) {}

  int operator()(Row& a, Row& b, MetricsLedger& ledger) const {
    ++ledger.row_comparisons;
    const int k = schema_->arity();
    int from = 0;
    if (opt_.ovc) {
      std::uint64_t ca = root_code(a, *schema_, ledger, opt_.ovc_cache);
      std::uint64_t cb = root_code(b, *schema_, ledger, opt_.ovc_cache);
      if (ca != cb) {
        ++ledger.ovc_decided_comparisons;
        return ca < cb ? -1 : 1;
      }
      if (!schema_->is_string(0)) from = 1;
    }
    return compare_from(a, b, from, k, ledger, opt_.ovc_cache).order;
  }

  const Schema& schema() const { return *schema_; }
  const IndexOptions& options() const { return opt_; }

 private:
  const Schema* schema_;
  IndexOptions opt_;
};

// B+-tree holding one generation. Deletion only ever happens at the low end.
class BTree {
 public:
  BTree(const RowComparator& cmp) : cmp_(&cmp) { clear(); }

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  // Returns the resident row with an equal key, if any. With `insert` set and no
  // match, the row is moved into the tree.
  Row* find_or_insert(Row& row, MetricsLedger& ledger, bool insert) {
    path_.clear();
    Node* n = root_.get();
    while (!n->leaf) {
      std::size_t c = child_for(*n, row, ledger);
      path_.push_back({n, c});
      n = n->kids[c].get();
    }
    auto [pos, found] = leaf_search(*n, row, ledger);
    if (found) return &n->rows[pos];
    if (!insert) return nullptr;
    if (n->start > 0) {
      n->rows.erase(n->rows.begin(), n->rows.begin() + static_cast<long>(n->start));
      pos -= n->start;
      n->start = 0;
    }
    n->rows.insert(n->rows.begin() + static_cast<long>(pos), std::move(row));
    ++size_;
    Row* placed = nullptr;
    if (n->rows.size() > cmp_->options().node_capacity) {
      placed = split_leaf(n, pos);
    } else {
      placed = &n->rows[pos];
    }
    return placed;
  }

  const Row* front() const {
    if (empty()) return nullptr;
    return &first_->rows[first_->start];
  }

  Row pop_front() {
    Node* leaf = first_;
    Row r = std::move(leaf->rows[leaf->start]);
    ++leaf->start;
    --size_;
    if (leaf->start == leaf->rows.size()) drop_first_leaf();
    return r;
  }

  template <class F>
  void for_each(F&& f) const {
    for (const Node* n = first_; n; n = n->next)
      for (std::size_t i = n->start; i < n->rows.size(); ++i) f(n->rows[i]);
  }

  void clear() {
    root_ = std::make_unique<Node>();
    root_->leaf = true;
    first_ = root_.get();
    size_ = 0;
  }

  int height() const {
    int h = 1;
    for (const Node* n = root_.get(); !n->leaf; n = n->kids[0].get()) ++h;
    return h;
  }

 private:
  struct Node {
    bool leaf = true;
    std::vector<Row> rows;   // leaf entries, live from `start`
    std::size_t start = 0;
    std::vector<Row> seps;   // internal: seps[i] is the lowest key under kids[i+1]
    std::vector<std::unique_ptr<Node>> kids;
    Node* next = nullptr;
  };

  // First position in [lo, hi) whose probe result says the target lies at or
  // before it. `probe(i)` compares the target with entry i.
  template <class Probe, class First>
  std::size_t search(std::size_t lo, std::size_t hi, Probe probe, First first_col, bool& equal) const {
    equal = false;
    const bool interp = cmp_->options().interpolation && !cmp_->schema().is_string(0);
    while (lo < hi) {
      std::size_t mid = lo + (hi - lo) / 2;
      if (interp && hi - lo > 2) {
        auto [t, a, b] = first_col(lo, hi - 1);
        if (b > a) {
          double f = (static_cast<double>(t) - static_cast<double>(a)) / (static_cast<double>(b) - static_cast<double>(a));
          f = std::clamp(f, 0.0, 1.0);
          mid = lo + static_cast<std::size_t>(f * static_cast<double>(hi - 1 - lo));
        }
      }
      int c = probe(mid);
      if (c == 0) {
        equal = true;
        return mid;
      }
      if (c < 0) hi = mid; else lo = mid + 1;
    }
    return lo;
  }

  std::size_t child_for(Node& n, Row& row, MetricsLedger& ledger) const {
    bool eq = false;
    auto probe = [&](std::size_t i) { return (*cmp_)(row, n.seps[i], ledger); };
    auto col = [&](std::size_t a, std::size_t b) { return first_column(row, n.seps[a], n.seps[b], ledger); };
    std::size_t i = search(0, n.seps.size(), probe, col, eq);
    return eq ? i + 1 : i;
  }

  std::pair<std::size_t, bool> leaf_search(Node& n, Row& row, MetricsLedger& ledger) const {
    bool eq = false;
    auto probe = [&](std::size_t i) { return (*cmp_)(row, n.rows[i], ledger); };
    auto col = [&](std::size_t a, std::size_t b) { return first_column(row, n.rows[a], n.rows[b], ledger); };
    std::size_t i = search(n.start, n.rows.size(), probe, col, eq);
    return {i, eq};
  }

  std::tuple<std::int64_t, std::int64_t, std::int64_t> first_column(Row& t, Row& a, Row& b, MetricsLedger& ledger) const {
    bool cache = cmp_->options().ovc_cache;
    charge(t, 0, ledger, cache);
    charge(a, 0, ledger, cache);
    charge(b, 0, ledger, cache);
    return {std::get<std::int64_t>(t.key[0]), std::get<std::int64_t>(a.key[0]), std::get<std::int64_t>(b.key[0])};
  }

  static Row separator_of(const Row& r) {
    Row s;
    s.key = r.key;
    s.ovc = r.ovc;
    return s;
  }

  Row* split_leaf(Node* leaf, std::size_t pos) {
    auto right = std::make_unique<Node>();
    right->leaf = true;
    std::size_t half = leaf->rows.size() / 2;
    right->rows.assign(std::make_move_iterator(leaf->rows.begin() + static_cast<long>(half)),
                       std::make_move_iterator(leaf->rows.end()));
    leaf->rows.resize(half);
    right->next = leaf->next;
    leaf->next = right.get();
    Row* placed = pos < half ? &leaf->rows[pos] : &right->rows[pos - half];
    Row sep = separator_of(right->rows.front());
    insert_up(std::move(sep), std::move(right));
    return placed;
  }

  void insert_up(Row sep, std::unique_ptr<Node> right) {
    while (true) {
      if (path_.empty()) {
        auto root = std::make_unique<Node>();
        root->leaf = false;
        root->kids.push_back(std::move(root_));
        root->kids.push_back(std::move(right));
        root->seps.push_back(std::move(sep));
        root_ = std::move(root);
        return;
      }
      auto [parent, c] = path_.back();
      path_.pop_back();
      parent->seps.insert(parent->seps.begin() + static_cast<long>(c), std::move(sep));
      parent->kids.insert(parent->kids.begin() + static_cast<long>(c) + 1, std::move(right));
      if (parent->kids.size() <= cmp_->options().node_capacity) return;
      auto sib = std::make_unique<Node>();
      sib->leaf = false;
      std::size_t half = parent->kids.size() / 2;
      Row up = std::move(parent->seps[half - 1]);
      sib->seps.assign(std::make_move_iterator(parent->seps.begin() + static_cast<long>(half)),
                       std::make_move_iterator(parent->seps.end()));
      sib->kids.assign(std::make_move_iterator(parent->kids.begin() + static_cast<long>(half)),
                       std::make_move_iterator(parent->kids.end()));
      parent->seps.resize(half - 1);
      parent->kids.resize(half);
      sep = std::move(up);
      right = std::move(sib);
    }
  }

  void drop_first_leaf() {
    if (root_->leaf) {
      root_->rows.clear();
      root_->start = 0;
      return;
    }
    Node* next = first_->next;
    std::vector<Node*> chain;
    for (Node* n = root_.get(); !n->leaf; n = n->kids[0].get()) chain.push_back(n);
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      Node* p = *it;
      p->kids.erase(p->kids.begin());
      if (!p->seps.empty()) p->seps.erase(p->seps.begin());
      if (!p->kids.empty()) break;
    }
    if (size_ == 0 || root_->kids.empty()) {
      clear();
      return;
    }
    while (!root_->leaf && root_->kids.size() == 1) {
      auto only = std::move(root_->kids[0]);
      root_ = std::move(only);
    }
    first_ = next;
  }

  const RowComparator* cmp_;
  std::unique_ptr<Node> root_;
  Node* first_ = nullptr;
  std::size_t size_ = 0;
  std::vector<std::pair<Node*, std::size_t>> path_;
};

enum class InsertResult { absorbed, inserted, needs_eviction };

// Ordered in-memory index with a row budget. In replacement-selection mode a
// second generation collects keys that arrive below the eviction cursor.
class OrderedIndex {
 public:
  OrderedIndex(const Schema& schema, std::size_t budget, IndexOptions opt = {}, bool replacement_selection = false)
      : cmp_(schema, opt), budget_(budget), rs_(replacement_selection) {
    cur_ = std::make_unique<BTree>(cmp_);
    nxt_ = std::make_unique<BTree>(cmp_);
  }

  std::size_t budget() const { return budget_; }
  void set_budget(std::size_t b) { budget_ = b; }
  std::size_t resident_rows() const { return cur_->size() + nxt_->size(); }
  std::size_t current_rows() const { return cur_->size(); }
  std::size_t next_rows() const { return nxt_->size(); }
  std::uint64_t generation() const { return generation_; }
  const std::optional<Key>& cursor() const { return cursor_; }
  const RowComparator& comparator() const { return cmp_; }

  // One descent finds either the match or the insertion point. On
  // `needs_eviction` the row is left untouched.
  InsertResult insert_or_aggregate(Row& row, MetricsLedger& ledger) {
    BTree& t = target(row, ledger);
    const std::size_t before = t.size();
    Row* hit = t.find_or_insert(row, ledger, resident_rows() < budget_);
    if (t.size() != before) return InsertResult::inserted;
    if (!hit) return InsertResult::needs_eviction;
    absorb(hit->state, row.state);
    return InsertResult::absorbed;
  }

  // Removes up to `target_rows` rows from the low end of the current generation.
  std::vector<Row> evict_range(std::size_t target_rows) {
    if (target_rows == 0) throw InvalidInput("eviction target must be positive");
    std::vector<Row> out;
    out.reserve(std::min(target_rows, cur_->size()));
    while (out.size() < target_rows && !cur_->empty()) out.push_back(cur_->pop_front());
    if (!out.empty()) {
      cursor_ = out.back().key;
      cursor_touched_ = out.back().ovc.touched;
    }
    return out;
  }

  // Every current-generation row with a key strictly below the watermark; an
  // empty watermark means minus infinity.
  std::vector<Row> pop_finalized_below(const std::optional<Key>& watermark) {
    std::vector<Row> out;
    if (!watermark) return out;
    while (!cur_->empty() && compare_keys(cur_->front()->key, *watermark) < 0) out.push_back(cur_->pop_front());
    return out;
  }

  std::vector<Row> drain_current() {
    std::vector<Row> out;
    out.reserve(cur_->size());
    while (!cur_->empty()) out.push_back(cur_->pop_front());
    return out;
  }

  // Starts the next run: the waiting generation becomes current.
  void advance_generation() {
    std::swap(cur_, nxt_);
    nxt_->clear();
    cursor_.reset();
    ++generation_;
  }

  bool sorted() const {
    bool ok = true;
    const Key* prev = nullptr;
    cur_->for_each([&](const Row& r) {
      if (prev && compare_keys(*prev, r.key) >= 0) ok = false;
      prev = &r.key;
    });
    return ok;
  }

 private:
  BTree& target(Row& row, MetricsLedger& ledger) {
    if (!rs_ || !cursor_) return *cur_;
    // keys at or below the cursor were already written for this run
    ++ledger.row_comparisons;
    const int k = cmp_.schema().arity();
    const bool cache = cmp_.options().ovc_cache;
    int c = 0;
    for (int i = 0; i < k && c == 0; ++i) {
      charge(row, i, ledger, cache);
      // the cursor keeps the touched columns of the row it was copied from
      std::uint64_t bit = i < 64 ? (std::uint64_t{1} << i) : 0;
      if (!cache || bit == 0 || !(cursor_touched_ & bit)) {
        ++ledger.column_value_accesses;
        cursor_touched_ |= bit;
      }
      c = compare_values(row.key[i], (*cursor_)[i]);
    }
    return c > 0 ? *cur_ : *nxt_;
  }

  RowComparator cmp_;
  std::size_t budget_;
  bool rs_;
  std::unique_ptr<BTree> cur_;
  std::unique_ptr<BTree> nxt_;
  std::optional<Key> cursor_;
  std::uint64_t cursor_touched_ = 0;
  std::uint64_t generation_ = 0;
};

}  // namespace insort
