#pragma once

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "insort/core.hpp"

namespace insort {

using Bytes = std::vector<std::uint8_t>;

namespace wire {

inline void put_u32(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_i64(Bytes& b, std::int64_t v) {
  auto u = static_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t n) : p_(p), end_(p + n) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p_[i]) << (8 * i);
    p_ += 4;
    return v;
  }
  std::int64_t i64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p_[i]) << (8 * i);
    p_ += 8;
    return static_cast<std::int64_t>(v);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p_), n);
    p_ += n;
    return s;
  }
  bool done() const { return p_ == end_; }

 private:
  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end_ - p_) < n) throw Corruption("truncated page");
  }
  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

inline void put_key(Bytes& b, const Key& k, const Schema& s) {
  for (int i = 0; i < s.arity(); ++i) {
    if (s.is_string(i)) {
      const auto& str = std::get<std::string>(k[i]);
      put_u32(b, static_cast<std::uint32_t>(str.size()));
      b.insert(b.end(), str.begin(), str.end());
    } else {
      put_i64(b, std::get<std::int64_t>(k[i]));
    }
  }
}

inline Key get_key(Reader& r, const Schema& s) {
  Key k;
  k.reserve(static_cast<std::size_t>(s.arity()));
  for (int i = 0; i < s.arity(); ++i) {
    if (s.is_string(i)) {
      std::uint32_t n = r.u32();
      k.emplace_back(r.str(n));
    } else {
      k.emplace_back(r.i64());
    }
  }
  return k;
}

inline void put_row(Bytes& b, const Row& row, const Schema& s) {
  put_key(b, row.key, s);
  for (const auto& a : row.state.acc) {
    put_i64(b, a.count);
    put_i64(b, a.sum);
    put_i64(b, a.min);
    put_i64(b, a.max);
  }
}

inline Row get_row(Reader& r, const Schema& s) {
  Row row;
  row.key = get_key(r, s);
  row.state.acc.reserve(s.aggregates().size());
  for (const auto& spec : s.aggregates()) {
    Accumulator a;
    a.kind = spec.kind;
    a.count = r.i64();
    a.sum = r.i64();
    a.min = r.i64();
    a.max = r.i64();
    row.state.acc.push_back(a);
  }
  return row;
}

}  // namespace wire

struct RunPage {
  std::optional<Key> high_key;  // absent for unsorted partition pages
  std::vector<Row> rows;
};

// Page layout: row_count u32 | byte_length u32 | crc32 u32 | payload.
// Payload: high-key column count u32, high key, then the rows back to back.
inline Bytes encode_page(const std::vector<Row>& rows, const Schema& s, bool sorted) {
  Bytes payload;
  if (sorted && !rows.empty()) {
    wire::put_u32(payload, static_cast<std::uint32_t>(s.arity()));
    wire::put_key(payload, rows.back().key, s);
  } else {
    wire::put_u32(payload, 0);
  }
  for (const auto& r : rows) wire::put_row(payload, r, s);
  Bytes page;
  page.reserve(payload.size() + 12);
  wire::put_u32(page, static_cast<std::uint32_t>(rows.size()));
  wire::put_u32(page, static_cast<std::uint32_t>(payload.size()));
  auto crc = static_cast<std::uint32_t>(::crc32(0L, payload.data(), static_cast<uInt>(payload.size())));
  wire::put_u32(page, crc);
  page.insert(page.end(), payload.begin(), payload.end());
  return page;
}

inline RunPage decode_page(const Bytes& page, const Schema& s) {
  if (page.size() < 12) throw Corruption("page shorter than its header");
  wire::Reader h(page.data(), 12);
  std::uint32_t count = h.u32();
  std::uint32_t len = h.u32();
  std::uint32_t crc = h.u32();
  if (len != page.size() - 12) throw Corruption("page length mismatch");
  const std::uint8_t* body = page.data() + 12;
  if (static_cast<std::uint32_t>(::crc32(0L, body, len)) != crc) throw Corruption("page checksum mismatch");
  wire::Reader r(body, len);
  RunPage out;
  std::uint32_t cols = r.u32();
  if (cols != 0) {
    if (cols != static_cast<std::uint32_t>(s.arity())) throw Corruption("high key arity mismatch");
    out.high_key = wire::get_key(r, s);
  }
  out.rows.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) out.rows.push_back(wire::get_row(r, s));
  if (!r.done()) throw Corruption("trailing bytes in page");
  return out;
}

class RunStore {
 public:
  virtual ~RunStore() = default;
  virtual std::uint64_t create_run() = 0;
  virtual void append_page(std::uint64_t run, Bytes page) = 0;
  virtual Bytes read_page(std::uint64_t run, std::size_t index) = 0;
  virtual std::size_t page_count(std::uint64_t run) const = 0;
  virtual void drop_run(std::uint64_t run) = 0;
};

class SimulatedStore : public RunStore {
 public:
  std::uint64_t create_run() override {
    runs_[next_];
    return next_++;
  }
  void append_page(std::uint64_t run, Bytes page) override { runs_.at(run).push_back(std::move(page)); }
  Bytes read_page(std::uint64_t run, std::size_t index) override { return runs_.at(run).at(index); }
  std::size_t page_count(std::uint64_t run) const override { return runs_.at(run).size(); }
  void drop_run(std::uint64_t run) override { runs_.erase(run); }

  // test hook: direct access to stored bytes
  Bytes& raw_page(std::uint64_t run, std::size_t index) { return runs_.at(run).at(index); }

 private:
  std::unordered_map<std::uint64_t, std::vector<Bytes>> runs_;
  std::uint64_t next_ = 1;
};

// One file per run inside `dir`; page offsets are kept in memory.
class FileStore : public RunStore {
 public:
  explicit FileStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }
  ~FileStore() override {
    for (auto& [id, _] : offsets_) {
      std::error_code ec;
      std::filesystem::remove(path(id), ec);
    }
  }

  std::uint64_t create_run() override {
    std::uint64_t id = next_++;
    std::ofstream f(path(id), std::ios::binary | std::ios::trunc);
    if (!f) throw ResourceError("cannot create run file " + path(id).string());
    offsets_[id] = {0};
    return id;
  }
  void append_page(std::uint64_t run, Bytes page) override {
    auto& offs = offsets_.at(run);
    std::ofstream f(path(run), std::ios::binary | std::ios::app);
    f.write(reinterpret_cast<const char*>(page.data()), static_cast<std::streamsize>(page.size()));
    if (!f) throw ResourceError("write failed for " + path(run).string());
    offs.push_back(offs.back() + page.size());
  }
  Bytes read_page(std::uint64_t run, std::size_t index) override {
    const auto& offs = offsets_.at(run);
    if (index + 1 >= offs.size()) throw InvalidInput("page index out of range");
    std::ifstream f(path(run), std::ios::binary);
    f.seekg(static_cast<std::streamoff>(offs[index]));
    Bytes b(offs[index + 1] - offs[index]);
    f.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size()));
    if (!f) throw ResourceError("read failed for " + path(run).string());
    return b;
  }
  std::size_t page_count(std::uint64_t run) const override { return offsets_.at(run).size() - 1; }
  void drop_run(std::uint64_t run) override {
    std::error_code ec;
    std::filesystem::remove(path(run), ec);
    offsets_.erase(run);
  }

 private:
  std::filesystem::path path(std::uint64_t id) const { return dir_ / ("run_" + std::to_string(id) + ".bin"); }
  std::filesystem::path dir_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> offsets_;
  std::uint64_t next_ = 1;
};

struct RunMeta {
  std::uint64_t run_id = 0;
  std::uint64_t row_count = 0;
  std::size_t page_count = 0;
  Key min_key;
  Key max_key;
  int level = 0;
};

// Streams rows into pages of at most `page_rows` rows.
class RunWriter {
 public:
  RunWriter(RunStore& store, const Schema& s, std::size_t page_rows, MetricsLedger& ledger, int level = 0,
            bool sorted = true)
      : store_(&store), schema_(&s), page_rows_(page_rows), ledger_(&ledger), sorted_(sorted) {
    if (page_rows_ == 0) throw InvalidInput("page capacity must be positive");
    meta_.run_id = store.create_run();
    meta_.level = level;
    buf_.reserve(page_rows_);
  }

  void add(Row row) {
    if (sorted_) {
      const Key* prev = !buf_.empty() ? &buf_.back().key : (meta_.row_count ? &meta_.max_key : nullptr);
      if (prev && compare_keys(*prev, row.key) >= 0) throw OrderingViolation("run rows must be strictly ascending");
      if (meta_.row_count == 0 && buf_.empty()) meta_.min_key = row.key;
    }
    buf_.push_back(std::move(row));
    if (buf_.size() == page_rows_) flush();
  }

  std::uint64_t rows() const { return meta_.row_count + buf_.size(); }
  std::uint64_t run_id() const { return meta_.run_id; }

  RunMeta finish() {
    flush();
    if (meta_.row_count == 0) {
      store_->drop_run(meta_.run_id);
      throw InvalidInput("a run needs at least one row");
    }
    return meta_;
  }

 private:
  void flush() {
    if (buf_.empty()) return;
    store_->append_page(meta_.run_id, encode_page(buf_, *schema_, sorted_));
    ++ledger_->pages_written;
    ledger_->rows_spilled += buf_.size();
    meta_.row_count += buf_.size();
    ++meta_.page_count;
    if (sorted_) meta_.max_key = buf_.back().key;
    buf_.clear();
  }

  RunStore* store_;
  const Schema* schema_;
  std::size_t page_rows_;
  MetricsLedger* ledger_;
  bool sorted_;
  RunMeta meta_;
  std::vector<Row> buf_;
};

inline RunMeta write_run(std::vector<Row> rows, std::size_t page_rows, RunStore& store, const Schema& s,
                         MetricsLedger& ledger, int level = 0) {
  RunWriter w(store, s, page_rows, ledger, level);
  for (auto& r : rows) w.add(std::move(r));
  return w.finish();
}

inline RunPage read_page(const RunMeta& run, std::size_t page_index, RunStore& store, const Schema& s,
                         MetricsLedger& ledger) {
  if (page_index >= run.page_count) throw InvalidInput("page index out of range");
  RunPage p = decode_page(store.read_page(run.run_id, page_index), s);
  ++ledger.pages_read;
  ledger.rows_read_back += p.rows.size();
  return p;
}

// Sequential row cursor over a run, one page buffered at a time.
class RunCursor {
 public:
  RunCursor(const RunMeta& run, RunStore& store, const Schema& s, MetricsLedger& ledger)
      : run_(run), store_(&store), schema_(&s), ledger_(&ledger) {}

  Row* peek() {
    if (pos_ < page_.rows.size()) return &page_.rows[pos_];
    if (next_page_ >= run_.page_count) return nullptr;
    page_ = read_page(run_, next_page_++, *store_, *schema_, *ledger_);
    pos_ = 0;
    return page_.rows.empty() ? nullptr : &page_.rows[0];
  }
  Row take() { return std::move(page_.rows[pos_++]); }

 private:
  RunMeta run_;
  RunStore* store_;
  const Schema* schema_;
  MetricsLedger* ledger_;
  RunPage page_;
  std::size_t pos_ = 0;
  std::size_t next_page_ = 0;
};

}  // namespace insort
