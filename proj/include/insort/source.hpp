#pragma once

#include <vector>

#include "insort/core.hpp"

namespace insort {

class RowSource {
 public:
  virtual ~RowSource() = default;
  virtual bool next(Row& out) = 0;
};

class VectorSource : public RowSource {
 public:
  explicit VectorSource(const std::vector<Row>& rows) : rows_(&rows) {}
  bool next(Row& out) override {
    if (pos_ >= rows_->size()) return false;
    out = (*rows_)[pos_++];
    return true;
  }

 private:
  const std::vector<Row>* rows_;
  std::size_t pos_ = 0;
};

}  // namespace insort
