#include "dhcn/sparse.hpp"

#include <algorithm>

#include "dhcn/common.hpp"

namespace dhcn {

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& [r, c, v] : triplets) {
    (void)v;
    if (r >= rows || c >= cols)
      throw ContractError("sparse triplet (" + std::to_string(r) + "," + std::to_string(c) +
                          ") outside " + shape_str(rows, cols));
  }
  std::sort(triplets.begin(), triplets.end(),
            [](const auto& a, const auto& b) {
              return std::get<0>(a) != std::get<0>(b) ? std::get<0>(a) < std::get<0>(b)
                                                      : std::get<1>(a) < std::get<1>(b);
            });

  SparseMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.row_ptr.assign(rows + 1, 0);
  std::size_t i = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    while (i < triplets.size() && std::get<0>(triplets[i]) == r) {
      std::size_t c = std::get<1>(triplets[i]);
      double sum = 0.0;
      while (i < triplets.size() && std::get<0>(triplets[i]) == r && std::get<1>(triplets[i]) == c) {
        sum += std::get<2>(triplets[i]);
        ++i;
      }
      if (sum != 0.0) {
        m.col_idx.push_back(c);
        m.vals.push_back(sum);
      }
    }
    m.row_ptr[r + 1] = m.vals.size();
  }
  return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  SparseMatrix m;
  m.rows = m.cols = n;
  m.row_ptr.resize(n + 1);
  m.col_idx.resize(n);
  m.vals.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    m.row_ptr[i] = i;
    m.col_idx[i] = i;
  }
  m.row_ptr[n] = n;
  return m;
}

SparseMatrix SparseMatrix::transposed() const {
  SparseMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.row_ptr.assign(cols + 1, 0);
  t.col_idx.resize(nnz());
  t.vals.resize(nnz());
  for (std::size_t k = 0; k < nnz(); ++k) t.row_ptr[col_idx[k] + 1]++;
  for (std::size_t r = 0; r < cols; ++r) t.row_ptr[r + 1] += t.row_ptr[r];
  std::vector<std::size_t> next(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      std::size_t pos = next[col_idx[k]]++;
      t.col_idx[pos] = r;  // source rows visited in order, so columns stay sorted
      t.vals[pos] = vals[k];
    }
  }
  return t;
}

SparseMatrix SparseMatrix::scaled_rows(const std::vector<double>& factors) const {
  if (factors.size() != rows)
    throw ShapeError("scaled_rows: factor count " + std::to_string(factors.size()) +
                     " != rows " + std::to_string(rows));
  SparseMatrix out = *this;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) out.vals[k] = vals[k] * factors[r];
  return out;
}

std::vector<double> SparseMatrix::row_sums() const {
  std::vector<double> sums(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) sums[r] += vals[k];
  return sums;
}

std::vector<double> SparseMatrix::densify() const {
  std::vector<double> d(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) d[r * cols + col_idx[k]] = vals[k];
  return d;
}

void SparseMatrix::validate() const {
  if (row_ptr.size() != rows + 1) throw ContractError("csr: row_ptr length != rows + 1");
  if (row_ptr.front() != 0 || row_ptr.back() != nnz())
    throw ContractError("csr: row_ptr endpoints do not bracket stored entries");
  if (col_idx.size() != vals.size()) throw ContractError("csr: col_idx/vals length mismatch");
  for (std::size_t r = 0; r < rows; ++r) {
    if (row_ptr[r] > row_ptr[r + 1]) throw ContractError("csr: row_ptr not nondecreasing");
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      if (col_idx[k] >= cols) throw ContractError("csr: column index out of range");
      if (k > row_ptr[r] && col_idx[k] <= col_idx[k - 1])
        throw ContractError("csr: columns not strictly increasing in row " + std::to_string(r));
      if (vals[k] == 0.0) throw ContractError("csr: explicit zero stored");
    }
  }
}

SparseMatrix spgemm(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.cols != b.rows)
    throw ShapeError("spgemm: inner dimensions mismatch (" + shape_str(a.rows, a.cols) +
                     " vs " + shape_str(b.rows, b.cols) + ")");
  SparseMatrix out;
  out.rows = a.rows;
  out.cols = b.cols;
  out.row_ptr.assign(a.rows + 1, 0);

  std::vector<double> acc(b.cols, 0.0);
  std::vector<std::size_t> touched;
  std::vector<char> seen(b.cols, 0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    touched.clear();
    for (std::size_t ka = a.row_ptr[i]; ka < a.row_ptr[i + 1]; ++ka) {
      std::size_t k = a.col_idx[ka];
      double av = a.vals[ka];
      for (std::size_t kb = b.row_ptr[k]; kb < b.row_ptr[k + 1]; ++kb) {
        std::size_t j = b.col_idx[kb];
        if (!seen[j]) {
          seen[j] = 1;
          touched.push_back(j);
        }
        acc[j] += av * b.vals[kb];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::size_t j : touched) {
      if (acc[j] != 0.0) {
        out.col_idx.push_back(j);
        out.vals.push_back(acc[j]);
      }
      acc[j] = 0.0;
      seen[j] = 0;
    }
    out.row_ptr[i + 1] = out.vals.size();
  }
  return out;
}

}  // namespace dhcn
