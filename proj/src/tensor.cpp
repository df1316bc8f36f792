#include "repur/tensor.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace repur {

namespace {

thread_local GradTape* g_active_tape = nullptr;

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + a.str() + " and " + b.str());
}

void accumulate(const Tensor& t, const Matrix& g) {
  if (!t.requires_grad()) return;
  auto& node = *t.node();
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

// Builds the output tensor and, if any input is differentiable and a tape is
// active, records its backward rule.
Tensor make_result(Shape shape, Matrix value, std::initializer_list<Tensor> inputs, GradTape::BackwardFn fn) {
  GradTape* tape = GradTape::active();
  bool needs_grad = false;
  if (tape) {
    for (const auto& t : inputs) needs_grad = needs_grad || t.requires_grad();
  }
  Tensor out(std::move(shape), std::move(value), needs_grad);
  if (needs_grad) tape->record(out.node(), std::move(fn));
  return out;
}

Index normalize_axis(const Tensor& x, int axis, const std::string& op) {
  const auto rank = static_cast<int>(x.shape().rank());
  const int a = axis < 0 ? axis + rank : axis;
  if (a != 0 && a != rank - 1) {
    throw std::invalid_argument(op + ": axis " + std::to_string(axis) + " unsupported for shape " + x.shape().str());
  }
  return a;
}

Matrix softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

Matrix softmax_backward(const Matrix& y, const Matrix& g) {
  Eigen::VectorXd dots = (g.array() * y.array()).rowwise().sum();
  return (y.array() * (g.array().colwise() - dots.array())).matrix();
}

}  // namespace

// ---------------------------------------------------------------- Shape

Shape::Shape(std::initializer_list<Index> dims) : Shape(std::vector<Index>(dims)) {}

Shape::Shape(std::vector<Index> dims) : dims_(std::move(dims)) {
  if (dims_.empty() || dims_.size() > 3) throw std::invalid_argument("tensor rank must be 1, 2 or 3");
  for (Index d : dims_)
    if (d < 0) throw std::invalid_argument("negative dimension in shape " + str());
}

Index Shape::numel() const {
  return std::accumulate(dims_.begin(), dims_.end(), Index{1}, std::multiplies<>());
}

Index Shape::rows() const {
  if (dims_.empty()) return 1;
  return std::accumulate(dims_.begin(), dims_.end() - 1, Index{1}, std::multiplies<>());
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? ", " : "") << dims_[i];
  os << ')';
  return os.str();
}

// ---------------------------------------------------------------- Tensor

Tensor::Tensor(Shape shape, Matrix value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  if (value.rows() != shape.rows() || value.cols() != shape.cols()) {
    throw std::invalid_argument("tensor value is " + std::to_string(value.rows()) + "x" +
                                std::to_string(value.cols()) + " but shape is " + shape.str());
  }
  node_->shape = std::move(shape);
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  Matrix value = Matrix::Zero(shape.rows(), shape.cols());
  return Tensor(std::move(shape), std::move(value), requires_grad);
}

Tensor Tensor::constant(Matrix value) {
  Shape shape{value.rows(), value.cols()};
  return Tensor(std::move(shape), std::move(value), false);
}

Tensor Tensor::parameter(Matrix value) {
  Shape shape{value.rows(), value.cols()};
  return Tensor(std::move(shape), std::move(value), true);
}

Matrix Tensor::grad() const {
  if (has_grad()) return node_->grad;
  return Matrix::Zero(node_->value.rows(), node_->value.cols());
}

double Tensor::item() const {
  if (node_->value.size() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape().str());
  return node_->value(0, 0);
}

// ---------------------------------------------------------------- GradTape

GradTape::GradTape() : previous_(g_active_tape) { g_active_tape = this; }

GradTape::~GradTape() { g_active_tape = previous_; }

GradTape* GradTape::active() { return g_active_tape; }

void GradTape::record(std::shared_ptr<detail::Node> out, BackwardFn fn) {
  entries_.push_back(Entry{std::move(out), std::move(fn)});
}

void GradTape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.value().size() != 1) {
    throw std::invalid_argument("backward() needs a scalar loss, got shape " +
                                (loss.defined() ? loss.shape().str() : std::string("<undefined>")));
  }
  if (entries_.empty() || !loss.requires_grad()) {
    throw std::logic_error("backward(): loss was not recorded on the active tape");
  }
  loss.node()->grad = Matrix::Ones(1, 1);
  // Entries are in execution order, so reverse order visits every node after
  // all of its consumers.
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->out->grad.size() == 0) continue;
    it->fn(it->out->grad);
    if (it->out != loss.node()) it->out->grad.resize(0, 0);
  }
  entries_.clear();
}

void backward(const Tensor& loss) {
  GradTape* tape = GradTape::active();
  if (!tape) throw std::logic_error("backward() called without an active GradTape");
  tape->backward(loss);
}

// ---------------------------------------------------------------- ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.rank() == 2 && (sa.rank() == 2 || sa.rank() == 3)) {
    if (sa.cols() != sb[0]) shape_error("matmul", sa, sb);
    std::vector<Index> dims = sa.dims();
    dims.back() = sb[1];
    Matrix value = a.value() * b.value();
    return make_result(Shape(dims), std::move(value), {a, b}, [a, b](const Matrix& g) {
      if (a.requires_grad()) accumulate(a, g * b.value().transpose());
      if (b.requires_grad()) accumulate(b, a.value().transpose() * g);
    });
  }
  if (sa.rank() == 3 && sb.rank() == 3) {
    if (sa[0] != sb[0] || sa[2] != sb[1]) shape_error("matmul", sa, sb);
    const Index batch = sa[0], m = sa[1], k = sa[2], n = sb[2];
    Matrix value(batch * m, n);
    for (Index i = 0; i < batch; ++i) {
      value.middleRows(i * m, m).noalias() = a.value().middleRows(i * m, m) * b.value().middleRows(i * k, k);
    }
    return make_result(Shape{batch, m, n}, std::move(value), {a, b}, [a, b, batch, m, k](const Matrix& g) {
      const Index n = g.cols();
      if (a.requires_grad()) {
        Matrix ga(batch * m, k);
        for (Index i = 0; i < batch; ++i) {
          ga.middleRows(i * m, m).noalias() = g.middleRows(i * m, m) * b.value().middleRows(i * k, k).transpose();
        }
        accumulate(a, ga);
      }
      if (b.requires_grad()) {
        Matrix gb(batch * k, n);
        for (Index i = 0; i < batch; ++i) {
          gb.middleRows(i * k, k).noalias() = a.value().middleRows(i * m, m).transpose() * g.middleRows(i * m, m);
        }
        accumulate(b, gb);
      }
    });
  }
  shape_error("matmul", sa, sb);
}

namespace {

enum class Broadcast { none, row };

Broadcast check_elementwise(const std::string& op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::none;
  if (b.value().rows() == 1 && b.value().cols() == a.value().cols() && b.shape().numel() == b.shape().cols()) {
    return Broadcast::row;
  }
  shape_error(op, a.shape(), b.shape());
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast mode = check_elementwise("add", a, b);
  Matrix value = mode == Broadcast::none ? Matrix(a.value() + b.value())
                                         : Matrix(a.value().rowwise() + b.value().row(0));
  return make_result(a.shape(), std::move(value), {a, b}, [a, b, mode](const Matrix& g) {
    accumulate(a, g);
    if (b.requires_grad()) accumulate(b, mode == Broadcast::none ? g : Matrix(g.colwise().sum()));
  });
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast mode = check_elementwise("mul", a, b);
  Matrix value = mode == Broadcast::none
                     ? Matrix(a.value().cwiseProduct(b.value()))
                     : Matrix((a.value().array().rowwise() * b.value().row(0).array()).matrix());
  return make_result(a.shape(), std::move(value), {a, b}, [a, b, mode](const Matrix& g) {
    if (mode == Broadcast::none) {
      if (a.requires_grad()) accumulate(a, g.cwiseProduct(b.value()));
      if (b.requires_grad()) accumulate(b, g.cwiseProduct(a.value()));
    } else {
      if (a.requires_grad()) accumulate(a, (g.array().rowwise() * b.value().row(0).array()).matrix());
      if (b.requires_grad()) accumulate(b, Matrix(g.cwiseProduct(a.value()).colwise().sum()));
    }
  });
}

Tensor scale(const Tensor& x, double s) {
  return make_result(x.shape(), x.value() * s, {x}, [x, s](const Matrix& g) { accumulate(x, g * s); });
}

Tensor relu(const Tensor& x) {
  Matrix value = x.value().cwiseMax(0.0);
  return make_result(x.shape(), std::move(value), {x}, [x](const Matrix& g) {
    accumulate(x, (x.value().array() > 0.0).select(g, 0.0).matrix());
  });
}

Tensor softmax(const Tensor& x, int axis) {
  const Index a = normalize_axis(x, axis, "softmax");
  if (a == static_cast<Index>(x.shape().rank()) - 1) {
    Matrix y = softmax_rows(x.value());
    Matrix y_saved = y;
    return make_result(x.shape(), std::move(y), {x}, [x, y_saved](const Matrix& g) {
      accumulate(x, softmax_backward(y_saved, g));
    });
  }
  if (x.shape().rank() != 2) throw std::invalid_argument("softmax: axis 0 needs a rank-2 tensor, got " + x.shape().str());
  return transpose(softmax(transpose(x), -1));
}

Tensor masked_softmax(const Tensor& x, const Mask& keep) {
  if (keep.rows() != x.value().rows() || keep.cols() != x.value().cols()) {
    throw std::invalid_argument("masked_softmax: mask is " + std::to_string(keep.rows()) + "x" +
                                std::to_string(keep.cols()) + " but scores are " + x.shape().str());
  }
  const Matrix& v = x.value();
  Matrix y = Matrix::Zero(v.rows(), v.cols());
  for (Index r = 0; r < v.rows(); ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < v.cols(); ++c)
      if (keep(r, c)) m = std::max(m, v(r, c));
    if (m == -std::numeric_limits<double>::infinity()) continue;
    double total = 0.0;
    for (Index c = 0; c < v.cols(); ++c) {
      if (!keep(r, c)) continue;
      y(r, c) = std::exp(v(r, c) - m);
      total += y(r, c);
    }
    y.row(r) /= total;
  }
  Matrix y_saved = y;
  return make_result(x.shape(), std::move(y), {x}, [x, y_saved](const Matrix& g) {
    accumulate(x, softmax_backward(y_saved, g));
  });
}

Tensor layer_norm(const Tensor& x, double eps) {
  const Matrix& v = x.value();
  const Index n = v.cols();
  Eigen::VectorXd mu = v.rowwise().mean();
  Matrix centered = v.colwise() - mu;
  Eigen::VectorXd inv_std = ((centered.array().square().rowwise().sum() / static_cast<double>(n)) + eps).rsqrt();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  Matrix xhat_saved = xhat;
  return make_result(x.shape(), std::move(xhat), {x}, [x, xhat_saved, inv_std, n](const Matrix& g) {
    Eigen::VectorXd g_mean = g.rowwise().mean();
    Eigen::VectorXd gx_mean = (g.array() * xhat_saved.array()).rowwise().sum() / static_cast<double>(n);
    Matrix dx = (g.array().colwise() - g_mean.array()) - xhat_saved.array().colwise() * gx_mean.array();
    dx = dx.array().colwise() * inv_std.array();
    accumulate(x, dx);
  });
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> ids, std::vector<Index> id_dims) {
  if (table.shape().rank() != 2) throw std::invalid_argument("embedding table must be rank 2, got " + table.shape().str());
  Index count = 1;
  for (Index d : id_dims) count *= d;
  if (count != static_cast<Index>(ids.size())) {
    throw std::invalid_argument("embedding_lookup: " + std::to_string(ids.size()) + " ids do not fill the id layout");
  }
  const Index vocab = table.shape()[0];
  const Index dim = table.shape()[1];
  Matrix value(count, dim);
  for (Index r = 0; r < count; ++r) {
    const int id = ids[static_cast<std::size_t>(r)];
    if (id < 0 || id >= vocab) {
      throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(vocab));
    }
    value.row(r) = table.value().row(id);
  }
  id_dims.push_back(dim);
  std::vector<int> saved(ids.begin(), ids.end());
  return make_result(Shape(std::move(id_dims)), std::move(value), {table}, [table, saved](const Matrix& g) {
    Matrix gt = Matrix::Zero(table.value().rows(), table.value().cols());
    for (std::size_t r = 0; r < saved.size(); ++r) gt.row(saved[r]) += g.row(static_cast<Index>(r));
    accumulate(table, gt);
  });
}

Tensor transpose(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.rank() == 2) {
    Matrix value = x.value().transpose();
    return make_result(Shape{s[1], s[0]}, std::move(value), {x}, [x](const Matrix& g) {
      accumulate(x, g.transpose());
    });
  }
  if (s.rank() == 3) {
    const Index batch = s[0], m = s[1], n = s[2];
    Matrix value(batch * n, m);
    for (Index i = 0; i < batch; ++i) value.middleRows(i * n, n) = x.value().middleRows(i * m, m).transpose();
    return make_result(Shape{batch, n, m}, std::move(value), {x}, [x, batch, m, n](const Matrix& g) {
      Matrix gx(batch * m, n);
      for (Index i = 0; i < batch; ++i) gx.middleRows(i * m, m) = g.middleRows(i * n, n).transpose();
      accumulate(x, gx);
    });
  }
  throw std::invalid_argument("transpose needs rank 2 or 3, got " + s.str());
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape.numel() != x.shape().numel()) shape_error("reshape", x.shape(), shape);
  Matrix value = Eigen::Map<const Matrix>(x.value().data(), shape.rows(), shape.cols());
  return make_result(std::move(shape), std::move(value), {x}, [x](const Matrix& g) {
    accumulate(x, Eigen::Map<const Matrix>(g.data(), x.value().rows(), x.value().cols()));
  });
}

Tensor slice(const Tensor& x, int axis, Index start, Index length) {
  const Index a = normalize_axis(x, axis, "slice");
  const Shape& s = x.shape();
  if (start < 0 || length < 0 || start + length > s[static_cast<std::size_t>(a)]) {
    throw std::invalid_argument("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                                ") out of range for axis " + std::to_string(a) + " of " + s.str());
  }
  std::vector<Index> dims = s.dims();
  dims[static_cast<std::size_t>(a)] = length;
  if (a == static_cast<Index>(s.rank()) - 1) {
    Matrix value = x.value().middleCols(start, length);
    return make_result(Shape(dims), std::move(value), {x}, [x, start, length](const Matrix& g) {
      Matrix gx = Matrix::Zero(x.value().rows(), x.value().cols());
      gx.middleCols(start, length) = g;
      accumulate(x, gx);
    });
  }
  const Index stride = x.value().rows() / s[0];  // rows per leading index
  Matrix value = x.value().middleRows(start * stride, length * stride);
  return make_result(Shape(dims), std::move(value), {x}, [x, start, length, stride](const Matrix& g) {
    Matrix gx = Matrix::Zero(x.value().rows(), x.value().cols());
    gx.middleRows(start * stride, length * stride) = g;
    accumulate(x, gx);
  });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat of zero tensors");
  const Tensor& first = parts.front();
  const Index a = normalize_axis(first, axis, "concat");
  const bool last_axis = a == static_cast<Index>(first.shape().rank()) - 1;
  std::vector<Index> dims = first.shape().dims();
  Index total = 0;
  for (const auto& p : parts) {
    if (p.shape().rank() != first.shape().rank()) shape_error("concat", first.shape(), p.shape());
    for (std::size_t d = 0; d < dims.size(); ++d) {
      if (static_cast<Index>(d) != a && p.shape()[d] != first.shape()[d]) shape_error("concat", first.shape(), p.shape());
    }
    total += p.shape()[static_cast<std::size_t>(a)];
  }
  dims[static_cast<std::size_t>(a)] = total;
  Shape out_shape(dims);
  Matrix value(out_shape.rows(), out_shape.cols());
  std::vector<std::pair<Index, Index>> spans;  // offset/extent in storage
  Index offset = 0;
  for (const auto& p : parts) {
    const Index extent = last_axis ? p.value().cols() : p.value().rows();
    if (last_axis) {
      value.middleCols(offset, extent) = p.value();
    } else {
      value.middleRows(offset, extent) = p.value();
    }
    spans.emplace_back(offset, extent);
    offset += extent;
  }
  GradTape* tape = GradTape::active();
  bool needs_grad = false;
  if (tape)
    for (const auto& p : parts) needs_grad = needs_grad || p.requires_grad();
  Tensor out(std::move(out_shape), std::move(value), needs_grad);
  if (needs_grad) {
    std::vector<Tensor> saved(parts.begin(), parts.end());
    tape->record(out.node(), [saved, spans, last_axis](const Matrix& g) {
      for (std::size_t i = 0; i < saved.size(); ++i) {
        if (!saved[i].requires_grad()) continue;
        auto [off, ext] = spans[i];
        accumulate(saved[i], last_axis ? Matrix(g.middleCols(off, ext)) : Matrix(g.middleRows(off, ext)));
      }
    });
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_index) {
  const Matrix& v = logits.value();
  if (static_cast<Index>(targets.size()) != v.rows()) {
    throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                                logits.shape().str());
  }
  Matrix probs = softmax_rows(v);
  double total = 0.0;
  Index count = 0;
  for (Index r = 0; r < v.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t == ignore_index) continue;
    if (t < 0 || t >= v.cols()) throw std::out_of_range("cross_entropy: target " + std::to_string(t) + " out of range");
    const double m = v.row(r).maxCoeff();
    const double lse = m + std::log((v.row(r).array() - m).exp().sum());
    total += lse - v(r, t);
    ++count;
  }
  Matrix value(1, 1);
  value(0, 0) = count ? total / static_cast<double>(count) : 0.0;
  std::vector<int> saved(targets.begin(), targets.end());
  return make_result(Shape{1, 1}, std::move(value), {logits},
                     [logits, probs, saved, ignore_index, count](const Matrix& g) {
                       if (count == 0) return;
                       Matrix gx = probs;
                       for (Index r = 0; r < gx.rows(); ++r) {
                         const int t = saved[static_cast<std::size_t>(r)];
                         if (t == ignore_index) {
                           gx.row(r).setZero();
                         } else {
                           gx(r, t) -= 1.0;
                         }
                       }
                       accumulate(logits, gx * (g(0, 0) / static_cast<double>(count)));
                     });
}

Tensor sum(const Tensor& x) {
  Matrix value(1, 1);
  value(0, 0) = x.value().sum();
  return make_result(Shape{1, 1}, std::move(value), {x}, [x](const Matrix& g) {
    accumulate(x, Matrix::Constant(x.value().rows(), x.value().cols(), g(0, 0)));
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw std::invalid_argument("dropout probability must be below 1");
  std::bernoulli_distribution keep(1.0 - p);
  Matrix factor(x.value().rows(), x.value().cols());
  const double s = 1.0 / (1.0 - p);
  for (Index i = 0; i < factor.size(); ++i) factor.data()[i] = keep(rng) ? s : 0.0;
  Matrix value = x.value().cwiseProduct(factor);
  return make_result(x.shape(), std::move(value), {x}, [x, factor](const Matrix& g) {
    accumulate(x, g.cwiseProduct(factor));
  });
}

}  // namespace repur
