#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "catfill/error.hpp"
#include "catfill/nd/tensor.hpp"

namespace catfill::nd {

/// Reverse-mode gradient tape over small dense vectors.
///
/// Every node owns a contiguous slot in a single value arena; parameters live
/// outside the tape and are referenced by handle, so large matrices are never
/// copied. Registered parameters keep their binding across clear(); nodes do
/// not. backward() walks the nodes in exact reverse creation order and
/// accumulates (+=) into the bound gradient tensors, which lets a caller sum
/// per-sample gradients over a batch without extra buffers.
class Tape {
 public:
  struct Var {
    std::uint32_t id = 0;
  };
  struct Param {
    std::uint32_t id = 0;
  };

  Param register_param(const Tensor& value, Tensor& grad) {
    if (!value.same_shape(grad))
      throw ShapeError("Tape::register_param: gradient shape " + grad.shape_string() +
                       " differs from value shape " + value.shape_string());
    params_.push_back({&value, &grad});
    return Param{static_cast<std::uint32_t>(params_.size() - 1)};
  }

  std::size_t param_count() const { return params_.size(); }
  std::size_t node_count() const { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    values_.clear();
    grads_.clear();
  }

  void clear_params() {
    clear();
    params_.clear();
  }

  Var constant(std::span<const double> values) {
    const auto v = push(Op::Constant, values.size());
    std::copy(values.begin(), values.end(), out(v));
    return v;
  }

  Var scalar(double value) { return constant(std::span<const double>(&value, 1)); }

  /// The whole parameter tensor, flattened row-major.
  Var param(Param p) {
    const Tensor& t = *params_.at(p.id).value;
    const auto v = push(Op::ParamCopy, t.size());
    node(v).param = p.id;
    std::copy(t.values().begin(), t.values().end(), out(v));
    return v;
  }

  /// One row of a parameter matrix. When frozen_first_row is set, row 0 reads
  /// as the constant zero vector whatever is stored there, and never receives
  /// gradient.
  Var gather_row(Param p, std::size_t row, bool frozen_first_row = false) {
    const Tensor& t = *params_.at(p.id).value;
    require(row < t.rows(), "Tape::gather_row: row " + std::to_string(row) + " out of range " +
                                t.shape_string());
    const auto v = push(Op::GatherRow, t.cols());
    auto& n = node(v);
    n.param = p.id;
    n.aux = static_cast<std::uint32_t>(row);
    n.flag = frozen_first_row;
    if (frozen_first_row && row == 0) return v;  // arena slot is already zero
    const auto src = t.row(row);
    std::copy(src.begin(), src.end(), out(v));
    return v;
  }

  Var matvec(Param w, Var x) {
    const Tensor& m = *params_.at(w.id).value;
    require(m.cols() == size(x), "Tape::matvec: matrix " + m.shape_string() +
                                     " cannot multiply vector of length " +
                                     std::to_string(size(x)));
    const auto v = push(Op::MatVec, m.rows(), x);
    node(v).param = w.id;
    const double* xs = in(x);
    double* ys = out(v);
    const std::size_t cols = m.cols();
    const double* wd = m.values().data();
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const double* wr = wd + i * cols;
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) s += wr[j] * xs[j];
      ys[i] = s;
    }
    return v;
  }

  Var add(Var a, Var b) { return binary(Op::Add, a, b); }
  Var mul(Var a, Var b) { return binary(Op::Mul, a, b); }

  Var tanh(Var x) {
    const auto v = push(Op::Tanh, size(x), x);
    const double* xs = in(x);
    double* ys = out(v);
    for (std::size_t i = 0, n = size(x); i < n; ++i) ys[i] = std::tanh(xs[i]);
    return v;
  }

  Var sigmoid(Var x) {
    const auto v = push(Op::Sigmoid, size(x), x);
    const double* xs = in(x);
    double* ys = out(v);
    for (std::size_t i = 0, n = size(x); i < n; ++i) ys[i] = nd::sigmoid(xs[i]);
    return v;
  }

  Var slice(Var x, std::size_t offset, std::size_t length) {
    require(offset + length <= size(x), "Tape::slice: range exceeds operand");
    const auto v = push(Op::Slice, length, x);
    node(v).aux = static_cast<std::uint32_t>(offset);
    const double* xs = in(x) + offset;
    std::copy(xs, xs + length, out(v));
    return v;
  }

  /// alpha * x + beta, elementwise.
  Var affine(Var x, double alpha, double beta) {
    const auto v = push(Op::Affine, size(x), x);
    node(v).alpha = alpha;
    const double* xs = in(x);
    double* ys = out(v);
    for (std::size_t i = 0, n = size(x); i < n; ++i) ys[i] = alpha * xs[i] + beta;
    return v;
  }

  Var scale(Var x, double alpha) { return affine(x, alpha, 0.0); }

  /// Scalar cosine similarity; 0 when either norm is below min_norm.
  Var cosine(Var a, Var b, double min_norm = 1e-12) {
    require(size(a) == size(b), "Tape::cosine: length mismatch");
    const auto v = push(Op::Cosine, 1, a, b);
    node(v).alpha = min_norm;
    const std::span<const double> av(in(a), size(a));
    const std::span<const double> bv(in(b), size(b));
    const double na = nd::norm(av);
    const double nb = nd::norm(bv);
    out(v)[0] = (na < min_norm || nb < min_norm) ? 0.0 : nd::dot(av, bv) / (na * nb);
    return v;
  }

  /// (1 - s) * a + s * b with scalar s.
  Var lerp(Var a, Var b, Var s) {
    require(size(a) == size(b), "Tape::lerp: length mismatch");
    require(size(s) == 1, "Tape::lerp: weight must be scalar");
    const auto v = push(Op::Lerp, size(a), a, b, s);
    const double w = in(s)[0];
    const double* as = in(a);
    const double* bs = in(b);
    double* ys = out(v);
    for (std::size_t i = 0, n = size(a); i < n; ++i) ys[i] = (1.0 - w) * as[i] + w * bs[i];
    return v;
  }

  Var softmax(Var x) {
    const auto v = push(Op::Softmax, size(x), x);
    const auto probs = nd::softmax({in(x), size(x)});
    std::copy(probs.begin(), probs.end(), out(v));
    return v;
  }

  /// -log(max(p[index], floor)).
  Var neg_log_pick(Var probs, std::size_t index, double floor = 1e-30) {
    require(index < size(probs), "Tape::neg_log_pick: index out of range");
    const auto v = push(Op::NegLogPick, 1, probs);
    auto& n = node(v);
    n.aux = static_cast<std::uint32_t>(index);
    n.alpha = floor;
    out(v)[0] = -std::log(std::max(in(probs)[index], floor));
    return v;
  }

  std::size_t size(Var v) const { return nodes_.at(v.id).size; }

  std::span<const double> value(Var v) const {
    const auto& n = nodes_.at(v.id);
    return {values_.data() + n.offset, n.size};
  }

  /// Adjoint of a node after backward().
  std::span<const double> adjoint(Var v) const {
    const auto& n = nodes_.at(v.id);
    return {grads_.data() + n.offset, n.size};
  }

  /// Accumulates seed * d(loss)/d(param) into every bound gradient tensor.
  void backward(Var loss, double seed = 1.0) {
    if (size(loss) != 1)
      throw ContractError("Tape::backward: loss must be scalar, got length " +
                          std::to_string(size(loss)));
    grads_.assign(values_.size(), 0.0);
    grads_[nodes_[loss.id].offset] = seed;
    visit_order_.clear();
    for (std::size_t k = loss.id + 1; k-- > 0;) {
      visit_order_.push_back(static_cast<std::uint32_t>(k));
      backprop(nodes_[k]);
    }
  }

  /// Node ids in the order the last backward() visited them.
  const std::vector<std::uint32_t>& last_backward_order() const { return visit_order_; }

 private:
  enum class Op : std::uint8_t {
    Constant,
    ParamCopy,
    GatherRow,
    MatVec,
    Add,
    Mul,
    Tanh,
    Sigmoid,
    Slice,
    Affine,
    Cosine,
    Lerp,
    Softmax,
    NegLogPick,
  };

  static constexpr std::uint32_t kNone = std::uint32_t(-1);

  struct Node {
    Op op;
    bool flag = false;
    std::uint32_t a = kNone, b = kNone, c = kNone;
    std::uint32_t param = kNone;
    std::uint32_t aux = 0;
    std::uint32_t offset = 0;
    std::uint32_t size = 0;
    double alpha = 0.0;
  };

  struct ParamBinding {
    const Tensor* value;
    Tensor* grad;
  };

  Var push(Op op, std::size_t n, Var a = Var{kNone}, Var b = Var{kNone}, Var c = Var{kNone}) {
    Node nd;
    nd.op = op;
    nd.a = a.id;
    nd.b = b.id;
    nd.c = c.id;
    nd.offset = static_cast<std::uint32_t>(values_.size());
    nd.size = static_cast<std::uint32_t>(n);
    values_.resize(values_.size() + n);
    nodes_.push_back(nd);
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  Var binary(Op op, Var a, Var b) {
    require(size(a) == size(b), "Tape: elementwise operands differ in length");
    const auto v = push(op, size(a), a, b);
    const double* as = in(a);
    const double* bs = in(b);
    double* ys = out(v);
    const std::size_t n = size(a);
    if (op == Op::Add)
      for (std::size_t i = 0; i < n; ++i) ys[i] = as[i] + bs[i];
    else
      for (std::size_t i = 0; i < n; ++i) ys[i] = as[i] * bs[i];
    return v;
  }

  Node& node(Var v) { return nodes_[v.id]; }
  const double* in(Var v) const { return values_.data() + nodes_[v.id].offset; }
  double* out(Var v) { return values_.data() + nodes_[v.id].offset; }
  const double* val(std::uint32_t id) const { return values_.data() + nodes_[id].offset; }
  double* adj(std::uint32_t id) { return grads_.data() + nodes_[id].offset; }

  void backprop(const Node& n) {
    const double* g = grads_.data() + n.offset;
    const double* y = values_.data() + n.offset;
    const std::size_t len = n.size;
    switch (n.op) {
      case Op::Constant:
        break;
      case Op::ParamCopy: {
        auto dst = params_[n.param].grad->values();
        for (std::size_t i = 0; i < len; ++i) dst[i] += g[i];
        break;
      }
      case Op::GatherRow: {
        if (n.flag && n.aux == 0) break;
        auto dst = params_[n.param].grad->row(n.aux);
        for (std::size_t i = 0; i < len; ++i) dst[i] += g[i];
        break;
      }
      case Op::MatVec: {
        const Tensor& w = *params_[n.param].value;
        Tensor& dw = *params_[n.param].grad;
        const std::size_t cols = w.cols();
        const double* x = val(n.a);
        double* dx = adj(n.a);
        const double* wd = w.values().data();
        double* dwd = dw.values().data();
        for (std::size_t i = 0; i < len; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          const double* wr = wd + i * cols;
          double* dwr = dwd + i * cols;
          for (std::size_t j = 0; j < cols; ++j) {
            dwr[j] += gi * x[j];
            dx[j] += gi * wr[j];
          }
        }
        break;
      }
      case Op::Add: {
        double* da = adj(n.a);
        double* db = adj(n.b);
        for (std::size_t i = 0; i < len; ++i) {
          da[i] += g[i];
          db[i] += g[i];
        }
        break;
      }
      case Op::Mul: {
        const double* a = val(n.a);
        const double* b = val(n.b);
        double* da = adj(n.a);
        double* db = adj(n.b);
        for (std::size_t i = 0; i < len; ++i) {
          da[i] += g[i] * b[i];
          db[i] += g[i] * a[i];
        }
        break;
      }
      case Op::Tanh: {
        double* dx = adj(n.a);
        for (std::size_t i = 0; i < len; ++i) dx[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case Op::Sigmoid: {
        double* dx = adj(n.a);
        for (std::size_t i = 0; i < len; ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case Op::Slice: {
        double* dx = adj(n.a) + n.aux;
        for (std::size_t i = 0; i < len; ++i) dx[i] += g[i];
        break;
      }
      case Op::Affine: {
        double* dx = adj(n.a);
        for (std::size_t i = 0; i < len; ++i) dx[i] += n.alpha * g[i];
        break;
      }
      case Op::Cosine: {
        const std::size_t m = nodes_[n.a].size;
        const std::span<const double> a(val(n.a), m);
        const std::span<const double> b(val(n.b), m);
        const double na = nd::norm(a);
        const double nb = nd::norm(b);
        if (na < n.alpha || nb < n.alpha) break;
        // d cos/da = b/(|a||b|) - cos * a/|a|^2, symmetric in b.
        const double c = y[0];
        const double inv = 1.0 / (na * nb);
        double* da = adj(n.a);
        double* db = adj(n.b);
        for (std::size_t i = 0; i < m; ++i) {
          da[i] += g[0] * (b[i] * inv - c * a[i] / (na * na));
          db[i] += g[0] * (a[i] * inv - c * b[i] / (nb * nb));
        }
        break;
      }
      case Op::Lerp: {
        const double* a = val(n.a);
        const double* b = val(n.b);
        const double s = val(n.c)[0];
        double* da = adj(n.a);
        double* db = adj(n.b);
        double ds = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
          da[i] += (1.0 - s) * g[i];
          db[i] += s * g[i];
          ds += g[i] * (b[i] - a[i]);
        }
        adj(n.c)[0] += ds;
        break;
      }
      case Op::Softmax: {
        double gy = 0.0;
        for (std::size_t i = 0; i < len; ++i) gy += g[i] * y[i];
        double* dx = adj(n.a);
        for (std::size_t i = 0; i < len; ++i) dx[i] += y[i] * (g[i] - gy);
        break;
      }
      case Op::NegLogPick: {
        const double p = val(n.a)[n.aux];
        if (p > n.alpha) adj(n.a)[n.aux] += -g[0] / p;
        break;
      }
    }
  }

  std::vector<ParamBinding> params_;
  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> grads_;
  std::vector<std::uint32_t> visit_order_;
};

}  // namespace catfill::nd
