#pragma once

#include <cstddef>
#include <tuple>
#include <vector>

namespace dhcn {

/// Compressed-sparse-row matrix. Immutable after construction; no explicit
/// zeros are stored and column indices are strictly increasing within a row.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr;  // length rows + 1
  std::vector<std::size_t> col_idx;
  std::vector<double> vals;

  std::size_t nnz() const { return vals.size(); }

  using Triplet = std::tuple<std::size_t, std::size_t, double>;

  /// Build from (row, col, value) triplets. Triplets are sorted, duplicates
  /// summed, and exact zeros dropped.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);

  static SparseMatrix identity(std::size_t n);

  SparseMatrix transposed() const;

  /// diag(factors) * this — scales row i by factors[i].
  SparseMatrix scaled_rows(const std::vector<double>& factors) const;

  std::vector<double> row_sums() const;

  /// Dense row-major copy, for oracles and debug output.
  std::vector<double> densify() const;

  /// Throws ContractError if any CSR invariant is violated.
  void validate() const;
};

/// Sparse-sparse product a*b with deterministic row-major accumulation.
SparseMatrix spgemm(const SparseMatrix& a, const SparseMatrix& b);

}  // namespace dhcn
