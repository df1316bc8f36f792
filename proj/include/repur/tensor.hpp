#pragma once

#include <Eigen/Core>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace repur {

using Index = Eigen::Index;
/// Row-major so that flattened (batch, seq) rows are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Rank 1..3 shape. Data is stored as a rows() x cols() matrix where cols()
/// is the last dimension and rows() the product of the leading ones.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<Index> dims);
  explicit Shape(std::vector<Index> dims);

  std::size_t rank() const { return dims_.size(); }
  Index operator[](std::size_t axis) const { return dims_.at(axis); }
  const std::vector<Index>& dims() const { return dims_; }
  Index numel() const;
  Index rows() const;
  Index cols() const { return dims_.empty() ? 1 : dims_.back(); }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<Index> dims_;
};

namespace detail {
struct Node {
  Shape shape;
  Matrix value;
  Matrix grad;  // empty until a gradient reaches the node
  bool requires_grad = false;
};
}  // namespace detail

/// Shared handle to a value (and, when differentiable, its gradient).
/// Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, Matrix value, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  /// Rank-2 tensor shaped like the matrix.
  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  /// Zero matrix of the value's shape when no gradient has arrived.
  Matrix grad() const;
  void zero_grad() { node_->grad.resize(0, 0); }
  double item() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Records differentiable operations executed on this thread while alive.
/// Without an active tape, ops compute values only.
class GradTape {
 public:
  using BackwardFn = std::function<void(const Matrix& grad_out)>;

  GradTape();
  ~GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  static GradTape* active();
  void record(std::shared_ptr<detail::Node> out, BackwardFn fn);
  std::size_t size() const { return entries_.size(); }

  /// Accumulates d(loss)/d(leaf) into every requires_grad leaf by walking the
  /// recorded ops in reverse, then clears the tape. Throws if loss is not a
  /// scalar or was not produced on this tape.
  void backward(const Tensor& loss);

 private:
  struct Entry {
    std::shared_ptr<detail::Node> out;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
  GradTape* previous_;
};

/// backward() on the active tape.
void backward(const Tensor& loss);

// Differentiable operations. Shape errors throw std::invalid_argument naming
// the offending shapes.

/// (m,k)x(k,n), (B,T,k)x(k,n) or batched (B,T,k)x(B,k,n).
Tensor matmul(const Tensor& a, const Tensor& b);
/// Elementwise; b may also be a single row broadcast over a's rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
Tensor relu(const Tensor& x);
/// axis -1 (last) or, for rank-2 inputs, 0.
Tensor softmax(const Tensor& x, int axis = -1);
/// Softmax over the last axis where mask==false entries get exactly zero
/// weight; fully masked rows become all-zero.
Tensor masked_softmax(const Tensor& x, const Mask& keep);
/// Normalizes the last axis to zero mean, unit variance (no affine part).
Tensor layer_norm(const Tensor& x, double eps = 1e-5);
/// Gathers rows of a (V, D) table; out_dims are the id layout, e.g. {B, T}.
Tensor embedding_lookup(const Tensor& table, std::span<const int> ids, std::vector<Index> id_dims);
/// Swaps the last two axes (per batch for rank 3).
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
/// axis 0 or the last axis.
Tensor slice(const Tensor& x, int axis, Index start, Index length);
Tensor concat(std::span<const Tensor> parts, int axis);
/// Mean negative log-likelihood over rows whose target != ignore_index.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_index);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng);

}  // namespace repur
