#include "dhcn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dhcn/common.hpp"
#include "dhcn/rng.hpp"

namespace dhcn {

namespace {

enum { kAdd = 0, kSub = 1, kMul = 2 };
enum { kTanh = 0, kSigmoid = 1 };

// Flat indexer for one operand against the output shape. Supports the exact
// broadcast set: full shape, 1xC row, Rx1 column.
struct Indexer {
  std::size_t row_stride;
  std::size_t col_stride;
  std::size_t at(std::size_t i, std::size_t j) const { return i * row_stride + j * col_stride; }
};

Indexer make_indexer(std::size_t r, std::size_t c, std::size_t out_r, std::size_t out_c,
                     const char* op) {
  if (r == out_r && c == out_c) return {c, 1};
  if (r == 1 && c == out_c) return {0, 1};
  if (r == out_r && c == 1) return {1, 0};
  throw ShapeError(std::string(op) + ": operand " + shape_str(r, c) +
                   " not broadcastable to " + shape_str(out_r, out_c));
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  node_->rows = rows;
  node_->cols = cols;
  node_->values.assign(rows * cols, fill);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows,
                         bool requires_grad) {
  std::size_t r = rows.size();
  std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Tensor t(r, c, 0.0, requires_grad);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("from_rows: ragged initializer");
    for (double v : row) t.node_->values[i++] = v;
  }
  return t;
}

Tensor Tensor::from_values(std::size_t rows, std::size_t cols, std::vector<double> values,
                           bool requires_grad) {
  if (values.size() != rows * cols)
    throw ShapeError("from_values: " + std::to_string(values.size()) + " values for shape " +
                     shape_str(rows, cols));
  Tensor t(rows, cols, 0.0, requires_grad);
  t.node_->values = std::move(values);
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t.node_->values[i * n + i] = 1.0;
  return t;
}

Tensor Tensor::random_uniform(std::size_t rows, std::size_t cols, double lo, double hi, Rng& rng,
                              bool requires_grad) {
  Tensor t(rows, cols, 0.0, requires_grad);
  for (auto& v : t.node_->values) v = rng.uniform(lo, hi);
  return t;
}

double Tensor::operator()(std::size_t r, std::size_t c) const {
  if (r >= rows() || c >= cols())
    throw ContractError("tensor index (" + std::to_string(r) + "," + std::to_string(c) +
                        ") outside " + shape_str(rows(), cols()));
  return node_->values[r * cols() + c];
}

double& Tensor::operator()(std::size_t r, std::size_t c) {
  if (r >= rows() || c >= cols())
    throw ContractError("tensor index (" + std::to_string(r) + "," + std::to_string(c) +
                        ") outside " + shape_str(rows(), cols()));
  return node_->values[r * cols() + c];
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1)
    throw ContractError("item(): tensor is " + shape_str(rows(), cols()) + ", expected 1x1");
  return node_->values[0];
}

const std::vector<double>& Tensor::grad() const {
  if (node_->grad.empty())
    throw ContractError("gradient not populated; run backward() first");
  return node_->grad;
}

std::vector<double>& Tensor::mutable_grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->values.size(), 0.0);
  return node_->grad;
}

void check_finite(const Tensor& t, const char* where) {
  for (double v : t.values())
    if (!std::isfinite(v))
      throw ContractError(std::string(where) + ": non-finite value produced");
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tensor Tape::alloc_output(std::size_t rows, std::size_t cols, bool requires_grad) {
  Tensor out(rows, cols, 0.0, recording_ && requires_grad);
  if (out.requires_grad()) outputs_.push_back(out);
  return out;
}

void Tape::push_backward(std::function<void()> rule) {
  if (recording_) records_.push_back(std::move(rule));
}

const std::vector<double>* Tape::grad_if_any(const Tensor& t) {
  return t.node_->grad.empty() ? nullptr : &t.node_->grad;
}

std::vector<double>& Tape::grad_buffer(const Tensor& t) {
  if (t.node_->grad.empty()) t.node_->grad.assign(t.node_->values.size(), 0.0);
  return t.node_->grad;
}

void Tape::accumulate_grad(const Tensor& t, std::size_t index, double delta) {
  grad_buffer(t)[index] += delta;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1)
    throw ContractError("backward: loss must be a 1x1 tensor");
  // Intermediate (op-output) grads are scratch space for one replay; leaves
  // keep accumulating, so a second backward adds the same gradient again.
  for (Tensor& t : outputs_) t.zero_grad();
  grad_buffer(loss)[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions mismatch (" + shape_str(a.rows(), a.cols()) +
                     " vs " + shape_str(b.rows(), b.cols()) + ")");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = alloc_output(m, n, a.requires_grad() || b.requires_grad());
  const double* av = a.values().data();
  const double* bv = b.values().data();
  double* ov = out.values().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) ov[i * n + j] += aip * bv[p * n + j];
    }

  if (out.requires_grad())
    push_backward([a, b, out, m, k, n]() {
      const auto* dout = grad_if_any(out);
      if (!dout) return;
      const double* dov = dout->data();
      if (a.requires_grad()) {
        double* da = grad_buffer(a).data();
        const double* bv = b.values().data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += dov[i * n + j] * bv[p * n + j];
            da[i * k + p] += acc;
          }
      }
      if (b.requires_grad()) {
        double* db = grad_buffer(b).data();
        const double* av = a.values().data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) db[p * n + j] += aip * dov[i * n + j];
          }
      }
    });
  return out;
}

Tensor Tape::sparse_matmul(const SparseMatrix& s, const Tensor& d) {
  if (s.cols != d.rows())
    throw ShapeError("sparse_matmul: inner dimensions mismatch (" + shape_str(s.rows, s.cols) +
                     " vs " + shape_str(d.rows(), d.cols()) + ")");
  const std::size_t n = d.cols();
  Tensor out = alloc_output(s.rows, n, d.requires_grad());
  const double* dv = d.values().data();
  double* ov = out.values().data();
  for (std::size_t r = 0; r < s.rows; ++r)
    for (std::size_t k = s.row_ptr[r]; k < s.row_ptr[r + 1]; ++k) {
      const std::size_t c = s.col_idx[k];
      const double v = s.vals[k];
      for (std::size_t j = 0; j < n; ++j) ov[r * n + j] += v * dv[c * n + j];
    }

  if (out.requires_grad())
    push_backward([&s, d, out, n]() {
      const auto* dout = grad_if_any(out);
      if (!dout) return;
      const double* dov = dout->data();
      double* dd = grad_buffer(d).data();
      for (std::size_t r = 0; r < s.rows; ++r)
        for (std::size_t k = s.row_ptr[r]; k < s.row_ptr[r + 1]; ++k) {
          const std::size_t c = s.col_idx[k];
          const double v = s.vals[k];
          for (std::size_t j = 0; j < n; ++j) dd[c * n + j] += v * dov[r * n + j];
        }
    });
  return out;
}

Tensor Tape::binary_elementwise(const Tensor& a, const Tensor& b, int kind) {
  static const char* names[] = {"add", "sub", "mul"};
  const char* op = names[kind];
  const std::size_t out_r = std::max(a.rows(), b.rows());
  const std::size_t out_c = std::max(a.cols(), b.cols());
  if ((a.rows() != out_r || a.cols() != out_c) && (b.rows() != out_r || b.cols() != out_c))
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.rows(), a.cols()) +
                     " vs " + shape_str(b.rows(), b.cols()));
  const Indexer ia = make_indexer(a.rows(), a.cols(), out_r, out_c, op);
  const Indexer ib = make_indexer(b.rows(), b.cols(), out_r, out_c, op);

  Tensor out = alloc_output(out_r, out_c, a.requires_grad() || b.requires_grad());
  const double* av = a.values().data();
  const double* bv = b.values().data();
  double* ov = out.values().data();
  for (std::size_t i = 0; i < out_r; ++i)
    for (std::size_t j = 0; j < out_c; ++j) {
      const double x = av[ia.at(i, j)], y = bv[ib.at(i, j)];
      ov[i * out_c + j] = kind == kAdd ? x + y : kind == kSub ? x - y : x * y;
    }

  if (out.requires_grad())
    push_backward([a, b, out, ia, ib, out_r, out_c, kind]() {
      const auto* dout = grad_if_any(out);
      if (!dout) return;
      const double* dov = dout->data();
      const double* av = a.values().data();
      const double* bv = b.values().data();
      if (a.requires_grad()) {
        double* da = grad_buffer(a).data();
        for (std::size_t i = 0; i < out_r; ++i)
          for (std::size_t j = 0; j < out_c; ++j) {
            const double g = dov[i * out_c + j];
            da[ia.at(i, j)] += kind == kMul ? g * bv[ib.at(i, j)] : g;
          }
      }
      if (b.requires_grad()) {
        double* db = grad_buffer(b).data();
        for (std::size_t i = 0; i < out_r; ++i)
          for (std::size_t j = 0; j < out_c; ++j) {
            const double g = dov[i * out_c + j];
            db[ib.at(i, j)] += kind == kAdd   ? g
                               : kind == kSub ? -g
                                              : g * av[ia.at(i, j)];
          }
      }
    });
  return out;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, kAdd); }
Tensor Tape::sub(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, kSub); }
Tensor Tape::mul(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, kMul); }

Tensor Tape::unary_map(const Tensor& x, int kind) {
  Tensor out = alloc_output(x.rows(), x.cols(), x.requires_grad());
  const double* xv = x.values().data();
  double* ov = out.values().data();
  const std::size_t sz = x.size();
  for (std::size_t i = 0; i < sz; ++i)
    ov[i] = kind == kTanh ? std::tanh(xv[i]) : 1.0 / (1.0 + std::exp(-xv[i]));

  if (out.requires_grad())
    push_backward([x, out, sz, kind]() {
      const auto* dout = grad_if_any(out);
      if (!dout) return;
      double* dx = grad_buffer(x).data();
      const double* yv = out.values().data();
      const double* dov = dout->data();
      for (std::size_t i = 0; i < sz; ++i) {
        const double y = yv[i];
        dx[i] += dov[i] * (kind == kTanh ? 1.0 - y * y : y * (1.0 - y));
      }
    });
  return out;
}

Tensor Tape::tanh(const Tensor& x) { return unary_map(x, kTanh); }
Tensor Tape::sigmoid(const Tensor& x) { return unary_map(x, kSigmoid); }

Tensor Tape::softmax_rows(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out = alloc_output(m, n, x.requires_grad());
  const double* xv = x.values().data();
  double* ov = out.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    double mx = xv[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xv[i * n + j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = std::exp(xv[i * n + j] - mx);
      ov[i * n + j] = e;
      sum += e;
    }
    for (std::size_t j = 0; j < n; ++j) ov[i * n + j] /= sum;
  }

  if (out.requires_grad())
    push_backward([x, out, m, n]() {
      const auto* dout = grad_if_any(out);
      if (!dout) return;
      double* dx = grad_buffer(x).data();
      const double* yv = out.values().data();
      const double* dov = dout->data();
      for (std::size_t i = 0; i < m; ++i) {
        double inner = 0.0;
        for (std::size_t j = 0; j < n; ++j) inner += dov[i * n + j] * yv[i * n + j];
        for (std::size_t j = 0; j < n; ++j)
          dx[i * n + j] += yv[i * n + j] * (dov[i * n + j] - inner);
      }
    });
  return out;
}

Tensor Tape::transpose(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out = alloc_output(n, m, x.requires_grad());
  const double* xv = x.values().data();
  double* ov = out.values().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) ov[j * m + i] = xv[i * n + j];

  if (out.requires_grad())
    push_backward([x, out, m, n]() {
      const auto* dout = grad_if_any(out);
      if (!dout) return;
      double* dx = grad_buffer(x).data();
      const double* dov = dout->data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += dov[j * m + i];
    });
  return out;
}

Tensor Tape::gather_rows(const Tensor& x, std::vector<std::size_t> indices) {
  const std::size_t n = x.cols();
  for (std::size_t idx : indices)
    if (idx >= x.rows())
      throw ContractError("gather_rows: index " + std::to_string(idx) + " outside " +
                          std::to_string(x.rows()) + " rows");
  Tensor out = alloc_output(indices.size(), n, x.requires_grad());
  const double* xv = x.values().data();
  double* ov = out.values().data();
  for (std::size_t k = 0; k < indices.size(); ++k)
    for (std::size_t j = 0; j < n; ++j) ov[k * n + j] = xv[indices[k] * n + j];

  if (out.requires_grad())
    push_backward([x, out, indices = std::move(indices), n]() {
      const auto* dout = grad_if_any(out);
      if (!dout) return;
      double* dx = grad_buffer(x).data();
      const double* dov = dout->data();
      for (std::size_t k = 0; k < indices.size(); ++k)
        for (std::size_t j = 0; j < n; ++j) dx[indices[k] * n + j] += dov[k * n + j];
    });
  return out;
}

Tensor Tape::concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows())
    throw ShapeError("concat_cols: row counts differ (" + shape_str(a.rows(), a.cols()) + " vs " +
                     shape_str(b.rows(), b.cols()) + ")");
  const std::size_t m = a.rows(), ca = a.cols(), cb = b.cols();
  Tensor out = alloc_output(m, ca + cb, a.requires_grad() || b.requires_grad());
  const double* av = a.values().data();
  const double* bv = b.values().data();
  double* ov = out.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < ca; ++j) ov[i * (ca + cb) + j] = av[i * ca + j];
    for (std::size_t j = 0; j < cb; ++j) ov[i * (ca + cb) + ca + j] = bv[i * cb + j];
  }

  if (out.requires_grad())
    push_backward([a, b, out, m, ca, cb]() {
      const auto* dout = grad_if_any(out);
      if (!dout) return;
      const double* dov = dout->data();
      if (a.requires_grad()) {
        double* da = grad_buffer(a).data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < ca; ++j) da[i * ca + j] += dov[i * (ca + cb) + j];
      }
      if (b.requires_grad()) {
        double* db = grad_buffer(b).data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < cb; ++j) db[i * cb + j] += dov[i * (ca + cb) + ca + j];
      }
    });
  return out;
}

Tensor Tape::concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  const std::size_t n = parts.front().cols();
  std::size_t total = 0;
  bool needs_grad = false;
  for (const Tensor& p : parts) {
    if (p.cols() != n)
      throw ShapeError("concat_rows: column counts differ (" + std::to_string(n) + " vs " +
                       std::to_string(p.cols()) + ")");
    total += p.rows();
    needs_grad = needs_grad || p.requires_grad();
  }
  Tensor out = alloc_output(total, n, needs_grad);
  double* ov = out.values().data();
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    std::copy(p.values().begin(), p.values().end(), ov + offset * n);
    offset += p.rows();
  }

  if (out.requires_grad())
    push_backward([parts, out, n]() {
      const auto* dout = grad_if_any(out);
      if (!dout) return;
      const double* dov = dout->data();
      std::size_t offset = 0;
      for (const Tensor& p : parts) {
        if (p.requires_grad()) {
          double* dp = grad_buffer(p).data();
          for (std::size_t i = 0; i < p.size(); ++i) dp[i] += dov[offset * n + i];
        }
        offset += p.rows();
      }
    });
  return out;
}

Tensor Tape::mean_rows(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  if (m == 0) throw ContractError("mean_rows: empty tensor");
  Tensor out = alloc_output(1, n, x.requires_grad());
  const double* xv = x.values().data();
  double* ov = out.values().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) ov[j] += xv[i * n + j];
  for (std::size_t j = 0; j < n; ++j) ov[j] /= static_cast<double>(m);

  if (out.requires_grad())
    push_backward([x, out, m, n]() {
      const auto* dout = grad_if_any(out);
      if (!dout) return;
      double* dx = grad_buffer(x).data();
      const double* dov = dout->data();
      const double inv = 1.0 / static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dx[i * n + j] += dov[j] * inv;
    });
  return out;
}

Tensor Tape::sum(const Tensor& x) {
  Tensor out = alloc_output(1, 1, x.requires_grad());
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  out.values()[0] = acc;

  if (out.requires_grad())
    push_backward([x, out]() {
      const auto* dout = grad_if_any(out);
      if (!dout) return;
      const double g = (*dout)[0];
      double* dx = grad_buffer(x).data();
      for (std::size_t i = 0; i < x.size(); ++i) dx[i] += g;
    });
  return out;
}

Tensor Tape::scale(const Tensor& x, double k) {
  Tensor out = alloc_output(x.rows(), x.cols(), x.requires_grad());
  const double* xv = x.values().data();
  double* ov = out.values().data();
  for (std::size_t i = 0; i < x.size(); ++i) ov[i] = k * xv[i];

  if (out.requires_grad())
    push_backward([x, out, k]() {
      const auto* dout = grad_if_any(out);
      if (!dout) return;
      double* dx = grad_buffer(x).data();
      const double* dov = dout->data();
      for (std::size_t i = 0; i < x.size(); ++i) dx[i] += k * dov[i];
    });
  return out;
}

Tensor Tape::rowwise_dot(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("rowwise_dot: shapes differ (" + shape_str(a.rows(), a.cols()) + " vs " +
                     shape_str(b.rows(), b.cols()) + ")");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = alloc_output(m, 1, a.requires_grad() || b.requires_grad());
  const double* av = a.values().data();
  const double* bv = b.values().data();
  double* ov = out.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += av[i * n + j] * bv[i * n + j];
    ov[i] = acc;
  }

  if (out.requires_grad())
    push_backward([a, b, out, m, n]() {
      const auto* dout = grad_if_any(out);
      if (!dout) return;
      const double* dov = dout->data();
      const double* av = a.values().data();
      const double* bv = b.values().data();
      if (a.requires_grad()) {
        double* da = grad_buffer(a).data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) da[i * n + j] += dov[i] * bv[i * n + j];
      }
      if (b.requires_grad()) {
        double* db = grad_buffer(b).data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) db[i * n + j] += dov[i] * av[i * n + j];
      }
    });
  return out;
}

Tensor Tape::permute(const Tensor& x, const std::vector<std::size_t>& row_perm,
                     const std::vector<std::size_t>& col_perm) {
  const std::size_t m = x.rows(), n = x.cols();
  if (row_perm.size() != m || col_perm.size() != n)
    throw ShapeError("permute: permutation sizes (" + std::to_string(row_perm.size()) + "," +
                     std::to_string(col_perm.size()) + ") do not match " + shape_str(m, n));
  Tensor out = alloc_output(m, n, x.requires_grad());
  const double* xv = x.values().data();
  double* ov = out.values().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) ov[i * n + j] = xv[row_perm[i] * n + col_perm[j]];

  if (out.requires_grad())
    push_backward([x, out, row_perm, col_perm, m, n]() {
      const auto* dout = grad_if_any(out);
      if (!dout) return;
      double* dx = grad_buffer(x).data();
      const double* dov = dout->data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          dx[row_perm[i] * n + col_perm[j]] += dov[i * n + j];
    });
  return out;
}

}  // namespace dhcn
