#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "temcgl/matrix.hpp"

namespace temcgl {

/// Compressed sparse row operator. Column indices are sorted within each row.
struct CsrMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<NodeId> col;
  std::vector<double> val;

  std::size_t nnz() const { return col.size(); }

  double at(std::size_t r, std::size_t c) const {
    for (std::size_t j = row_ptr[r]; j < row_ptr[r + 1]; ++j) {
      if (col[j] == c) return val[j];
      if (col[j] > c) break;
    }
    return 0.0;
  }

  Matrix to_dense() const {
    Matrix d(n_rows, n_cols);
    for (std::size_t r = 0; r < n_rows; ++r) {
      for (std::size_t j = row_ptr[r]; j < row_ptr[r + 1]; ++j) d(r, col[j]) = val[j];
    }
    return d;
  }
};

/// out = A * x. Each output entry accumulates in stored nonzero order, so a
/// row whose nonzeros are reproduced elsewhere reproduces its result bit for bit.
inline Matrix spmm(const CsrMatrix& a, const Matrix& x) {
  if (a.n_cols != x.rows()) {
    throw std::invalid_argument("spmm: operator has " + std::to_string(a.n_cols) +
                                " columns but dense operand has " + std::to_string(x.rows()) +
                                " rows");
  }
  Matrix out(a.n_rows, x.cols());
  const std::size_t d = x.cols();
  for (std::size_t r = 0; r < a.n_rows; ++r) {
    double* dst = out.row(r).data();
    for (std::size_t j = a.row_ptr[r]; j < a.row_ptr[r + 1]; ++j) {
      const double w = a.val[j];
      const double* src = x.row(a.col[j]).data();
      for (std::size_t k = 0; k < d; ++k) dst[k] += w * src[k];
    }
  }
  return out;
}

}  // namespace temcgl
