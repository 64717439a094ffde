#pragma once

#include "irml/core.hpp"

#include <vector>

namespace irml {

// Binary labelled instances, one per row, labels in {-1, +1}.
struct LabeledDataset {
  RowMatrix x;
  std::vector<int> y;

  [[nodiscard]] std::ptrdiff_t size() const { return x.rows(); }
  [[nodiscard]] std::ptrdiff_t dim() const { return x.cols(); }
  [[nodiscard]] auto row(std::ptrdiff_t i) const { return x.row(i).transpose(); }

  [[nodiscard]] std::vector<std::ptrdiff_t> indices_of(int label) const {
    std::vector<std::ptrdiff_t> out;
    for (std::ptrdiff_t i = 0; i < size(); ++i) {
      if (y[static_cast<std::size_t>(i)] == label) out.push_back(i);
    }
    return out;
  }

  [[nodiscard]] LabeledDataset subset(const std::vector<std::ptrdiff_t>& idx) const {
    LabeledDataset out;
    out.x.resize(static_cast<std::ptrdiff_t>(idx.size()), dim());
    out.y.reserve(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out.x.row(static_cast<std::ptrdiff_t>(k)) = x.row(idx[k]);
      out.y.push_back(y[static_cast<std::size_t>(idx[k])]);
    }
    return out;
  }

  void validate() const {
    if (static_cast<std::size_t>(x.rows()) != y.size()) {
      throw UsageError("LabeledDataset: row count and label count differ");
    }
    for (int label : y) {
      if (label != -1 && label != 1) throw UsageError("LabeledDataset: labels must be -1 or +1");
    }
    if (!x.allFinite()) throw DataError("LabeledDataset: non-finite feature value");
  }
};

}  // namespace irml
