#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "dhcn/sparse.hpp"

namespace dhcn {

class Rng;

/// Dense 2-D grid of 64-bit floats with an optional gradient slot.
///
/// A Tensor is a cheap handle (shared storage) to a node that may sit on a
/// Tape. Values are mutable through the handle for setup and optimizer
/// updates; once a tensor has been fed to a recorded op, mutating it
/// invalidates the tape, so parameter updates happen strictly between steps.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0, bool requires_grad = false);

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows,
                          bool requires_grad = false);
  static Tensor from_values(std::size_t rows, std::size_t cols, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor identity(std::size_t n);
  /// Entries drawn uniformly from [lo, hi) in row-major order.
  static Tensor random_uniform(std::size_t rows, std::size_t cols, double lo, double hi,
                               Rng& rng, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t size() const { return node_->values.size(); }

  double operator()(std::size_t r, std::size_t c) const;
  double& operator()(std::size_t r, std::size_t c);
  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& values() { return node_->values; }

  /// Value of a 1x1 tensor.
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Accumulated gradient; throws if backward never reached this tensor.
  const std::vector<double>& grad() const;
  std::vector<double>& mutable_grad();
  void zero_grad() { node_->grad.clear(); }

  /// True when both handles point at the same storage.
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend class Tape;
  struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    bool requires_grad = false;
    std::vector<double> grad;  // empty until touched by backward
  };
  std::shared_ptr<Node> node_;
};

/// Reverse-mode tape over matrix-granular operations.
///
/// Ops append their backward rules in execution order, which is already a
/// topological order of the data flow. backward() replays the rules in
/// reverse and accumulates into the grad slot of every tensor that
/// requires_grad and is reachable from the loss. Repeated backward calls
/// accumulate; a fresh tape is expected per training step.
///
/// A tape and its tensors belong to one thread. Construct with
/// recording=false for forward-only evaluation: no rules are recorded and
/// outputs do not require grad.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t recorded_ops() const { return records_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and replays all backward rules in reverse.
  /// loss must be 1x1.
  void backward(const Tensor& loss);

  // -- core ops -------------------------------------------------------------

  Tensor matmul(const Tensor& a, const Tensor& b);
  /// s * d with the sparse operator held constant; gradient flows into d only.
  /// The backward rule keeps a reference to s (copying a large operator per
  /// op would dwarf the multiply), so s must outlive the tape.
  Tensor sparse_matmul(const SparseMatrix& s, const Tensor& d);

  // Elementwise arithmetic with limited broadcasting: equal shapes, or a
  // 1xN row / Mx1 column against an MxN matrix (either operand side).
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);

  Tensor tanh(const Tensor& x);
  Tensor sigmoid(const Tensor& x);
  /// Row-wise softmax with max subtraction.
  Tensor softmax_rows(const Tensor& x);

  Tensor transpose(const Tensor& x);
  /// Row k of the output is row indices[k] of x; backward scatter-adds.
  Tensor gather_rows(const Tensor& x, std::vector<std::size_t> indices);
  Tensor concat_cols(const Tensor& a, const Tensor& b);
  Tensor concat_rows(const std::vector<Tensor>& parts);
  /// Mean across rows -> 1 x cols.
  Tensor mean_rows(const Tensor& x);
  /// Sum of all entries -> 1x1.
  Tensor sum(const Tensor& x);
  Tensor scale(const Tensor& x, double k);
  /// Per-row dot product of two equal-shape matrices -> rows x 1.
  Tensor rowwise_dot(const Tensor& a, const Tensor& b);
  /// out[i][j] = x[row_perm[i]][col_perm[j]].
  Tensor permute(const Tensor& x, const std::vector<std::size_t>& row_perm,
                 const std::vector<std::size_t>& col_perm);

  // -- extension points for fused ops (losses) ------------------------------

  /// Fresh output tensor; requires_grad only when recording and requested.
  Tensor alloc_output(std::size_t rows, std::size_t cols, bool requires_grad);
  /// Appends a backward rule. Dropped when not recording.
  void push_backward(std::function<void()> rule);

  /// Gradient of `t` if backward has populated it, else nullptr.
  static const std::vector<double>* grad_if_any(const Tensor& t);
  /// grad(t) += delta for matching index range; allocates zeros on demand.
  static void accumulate_grad(const Tensor& t, std::size_t index, double delta);
  static std::vector<double>& grad_buffer(const Tensor& t);

 private:
  Tensor binary_elementwise(const Tensor& a, const Tensor& b, int kind);
  Tensor unary_map(const Tensor& x, int kind);

  std::vector<std::function<void()>> records_;
  std::vector<Tensor> outputs_;  // op results; their grads are per-replay scratch
  bool recording_;
};

/// Finite-check helper: throws ContractError when t holds NaN or Inf.
void check_finite(const Tensor& t, const char* where);

}  // namespace dhcn
