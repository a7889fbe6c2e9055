#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gpmu/errors.hpp"
#include "gpmu/numerics/tensor.hpp"

namespace gpmu::ad {

// Overflow-safe scalar activations, shared by the tape ops and by code that
// evaluates the same formulas outside a gradient context.
template <class S>
S scalar_sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  S e = std::exp(x);
  return e / (S(1) + e);
}

template <class S>
S scalar_softplus(S x) {
  if (x > S(30)) return x + std::log1p(std::exp(-x));
  S r = std::log1p(std::exp(x));
  if (r == S(0)) return std::numeric_limits<S>::denorm_min();
  return r;
}

template <class S>
S scalar_leaky(S x, S slope) {
  return x >= S(0) ? x : slope * x;
}

enum class Op : std::uint8_t {
  kConstant,
  kParam,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kNeg,
  kAddRowVec,
  kLeakyRelu,
  kSigmoid,
  kTanh,
  kSoftplus,
  kConcatCols,
  kSliceCols,
  kMeanRows,
  kTileRows,
  kSum,
  kMse,
  kTranspose,
};

template <class S>
class TapeT;

template <class S>
struct VarT {
  TapeT<S>* tape = nullptr;
  std::int32_t id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  Index rows() const;
  Index cols() const;
  const TensorT<S>& value() const;
};

// Records every operation eagerly (values are computed at emission time) and
// replays them in reverse for gradients. Gradients accumulate additively, so
// a parameter used in several places receives the sum of its contributions.
template <class S>
class TapeT {
 public:
  using Tensor = TensorT<S>;
  using Var = VarT<S>;
  using GradMap = std::map<std::string, Tensor>;

  struct Node {
    Op op;
    std::int32_t a = -1;
    std::int32_t b = -1;
    S c = S(0);
    Index aux0 = 0;
    Index aux1 = 0;
    bool needs_grad = false;
    Tensor val;
  };

  Var constant(Tensor v) {
    return wrap(emit(Op::kConstant, -1, -1, S(0), 0, 0, std::move(v), false));
  }

  Var scalar(S v) {
    Tensor t(1, 1);
    t(0, 0) = v;
    return constant(std::move(t));
  }

  // Registers (or retrieves) the tracked leaf for a named parameter. The
  // value is captured on first registration; later calls with the same name
  // return the same node.
  Var param(const std::string& name, const Tensor& value) {
    auto it = param_ids_.find(name);
    if (it != param_ids_.end()) {
      const Node& n = nodes_[static_cast<std::size_t>(it->second)];
      if (n.val.rows() != value.rows() || n.val.cols() != value.cols()) {
        throw ShapeError("param " + name + " re-registered with shape " +
                         shape_str(value) + ", tape has " + shape_str(n.val));
      }
      return wrap(it->second);
    }
    std::int32_t id = emit(Op::kParam, -1, -1, S(0), 0, 0, Tensor(value), true);
    param_ids_.emplace(name, id);
    return wrap(id);
  }

  const Tensor& value(std::int32_t id) const {
    return nodes_[static_cast<std::size_t>(id)].val;
  }

  std::size_t node_count() const { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    param_ids_.clear();
  }

  // Reverse sweep from `loss` (must be 1x1). `seed` is d(total)/d(loss) and
  // defaults to 1. Returns d(total)/dP for every parameter registered on
  // this tape; parameters on no path to the loss get exact zeros.
  GradMap backward(Var loss, S seed = S(1)) {
    if (!loss.valid() || loss.tape != this) {
      throw ContractError("backward: loss is not a value on this tape");
    }
    const Node& ln = nodes_[static_cast<std::size_t>(loss.id)];
    if (ln.val.rows() != 1 || ln.val.cols() != 1) {
      throw ContractError("backward: loss must be a scalar, got " +
                          shape_str(ln.val));
    }

    std::vector<Tensor> grads(nodes_.size());
    std::vector<bool> touched(nodes_.size(), false);
    auto acc = [&](std::int32_t id) -> Tensor& {
      auto i = static_cast<std::size_t>(id);
      if (!touched[i]) {
        grads[i] = Tensor::Zero(nodes_[i].val.rows(), nodes_[i].val.cols());
        touched[i] = true;
      }
      return grads[i];
    };

    if (nodes_[static_cast<std::size_t>(loss.id)].needs_grad) {
      acc(loss.id)(0, 0) = seed;
    }

    for (std::int32_t id = loss.id; id >= 0; --id) {
      auto i = static_cast<std::size_t>(id);
      const Node& n = nodes_[i];
      if (!n.needs_grad || !touched[i]) continue;
      const Tensor& g = grads[i];
      propagate(n, g, acc);
    }

    GradMap out;
    for (const auto& [name, pid] : param_ids_) {
      auto i = static_cast<std::size_t>(pid);
      if (touched[i]) {
        out.emplace(name, std::move(grads[i]));
      } else {
        out.emplace(name, Tensor::Zero(nodes_[i].val.rows(), nodes_[i].val.cols()));
      }
    }
    return out;
  }

  std::int32_t emit(Op op, std::int32_t a, std::int32_t b, S c, Index aux0,
                    Index aux1, Tensor val, bool needs_grad) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.c = c;
    n.aux0 = aux0;
    n.aux1 = aux1;
    n.needs_grad = needs_grad;
    n.val = std::move(val);
    nodes_.push_back(std::move(n));
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  bool needs_grad(std::int32_t id) const {
    return nodes_[static_cast<std::size_t>(id)].needs_grad;
  }

 private:
  Var wrap(std::int32_t id) { return Var{this, id}; }

  template <class Acc>
  void propagate(const Node& n, const Tensor& g, Acc&& acc) {
    auto in = [&](std::int32_t id) -> const Tensor& { return value(id); };
    auto wants = [&](std::int32_t id) { return needs_grad(id); };
    switch (n.op) {
      case Op::kConstant:
      case Op::kParam:
        break;
      case Op::kMatMul:
        if (wants(n.a)) acc(n.a).noalias() += g * in(n.b).transpose();
        if (wants(n.b)) acc(n.b).noalias() += in(n.a).transpose() * g;
        break;
      case Op::kAdd:
        if (wants(n.a)) acc(n.a) += g;
        if (wants(n.b)) acc(n.b) += g;
        break;
      case Op::kSub:
        if (wants(n.a)) acc(n.a) += g;
        if (wants(n.b)) acc(n.b) -= g;
        break;
      case Op::kMul:
        if (wants(n.a)) acc(n.a).array() += g.array() * in(n.b).array();
        if (wants(n.b)) acc(n.b).array() += g.array() * in(n.a).array();
        break;
      case Op::kScale:
        if (wants(n.a)) acc(n.a) += n.c * g;
        break;
      case Op::kNeg:
        if (wants(n.a)) acc(n.a) -= g;
        break;
      case Op::kAddRowVec:
        if (wants(n.a)) acc(n.a) += g;
        if (wants(n.b)) acc(n.b) += g.colwise().sum();
        break;
      case Op::kLeakyRelu:
        if (wants(n.a)) {
          S slope = n.c;
          acc(n.a).array() +=
              g.array() * in(n.a)
                              .unaryExpr([slope](S v) {
                                return v >= S(0) ? S(1) : slope;
                              })
                              .array();
        }
        break;
      case Op::kSigmoid:
        if (wants(n.a)) {
          acc(n.a).array() += g.array() * n.val.array() * (S(1) - n.val.array());
        }
        break;
      case Op::kTanh:
        if (wants(n.a)) {
          acc(n.a).array() += g.array() * (S(1) - n.val.array().square());
        }
        break;
      case Op::kSoftplus:
        if (wants(n.a)) {
          const Tensor& x = in(n.a);
          acc(n.a).array() +=
              g.array() *
              x.unaryExpr([](S v) { return scalar_sigmoid(v); }).array();
        }
        break;
      case Op::kConcatCols:
        if (wants(n.a)) acc(n.a) += g.leftCols(in(n.a).cols());
        if (wants(n.b)) acc(n.b) += g.rightCols(in(n.b).cols());
        break;
      case Op::kSliceCols:
        if (wants(n.a)) acc(n.a).middleCols(n.aux0, n.aux1) += g;
        break;
      case Op::kMeanRows:
        if (wants(n.a)) {
          acc(n.a).rowwise() += (g * (S(1) / S(in(n.a).rows()))).row(0);
        }
        break;
      case Op::kTileRows:
        if (wants(n.a)) acc(n.a) += g.colwise().sum();
        break;
      case Op::kSum:
        if (wants(n.a)) acc(n.a).array() += g(0, 0);
        break;
      case Op::kMse:
        if (wants(n.a) || wants(n.b)) {
          S k = g(0, 0) * S(2) / S(in(n.a).size());
          if (wants(n.a)) acc(n.a) += k * (in(n.a) - in(n.b));
          if (wants(n.b)) acc(n.b) -= k * (in(n.a) - in(n.b));
        }
        break;
      case Op::kTranspose:
        if (wants(n.a)) acc(n.a) += g.transpose();
        break;
    }
  }

  std::vector<Node> nodes_;
  std::map<std::string, std::int32_t> param_ids_;
};

template <class S>
Index VarT<S>::rows() const {
  return tape->value(id).rows();
}
template <class S>
Index VarT<S>::cols() const {
  return tape->value(id).cols();
}
template <class S>
const TensorT<S>& VarT<S>::value() const {
  return tape->value(id);
}

namespace detail {

template <class S>
TapeT<S>& same_tape(VarT<S> a, VarT<S> b, const char* op) {
  if (!a.valid() || !b.valid() || a.tape != b.tape) {
    throw ContractError(std::string(op) + ": operands are not on one tape");
  }
  return *a.tape;
}

template <class S>
TapeT<S>& one_tape(VarT<S> a, const char* op) {
  if (!a.valid()) {
    throw ContractError(std::string(op) + ": operand is not on a tape");
  }
  return *a.tape;
}

template <class S>
void require_same_shape(VarT<S> a, VarT<S> b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + " mismatch: " +
                     shape_str(a.value()) + " vs " + shape_str(b.value()));
  }
}

}  // namespace detail

template <class S>
VarT<S> matmul(VarT<S> a, VarT<S> b) {
  auto& t = detail::same_tape(a, b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul mismatch: " + shape_str(a.value()) + " * " +
                     shape_str(b.value()));
  }
  TensorT<S> v(a.rows(), b.cols());
  v.noalias() = a.value() * b.value();
  bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  return {&t, t.emit(Op::kMatMul, a.id, b.id, S(0), 0, 0, std::move(v), ng)};
}

template <class S>
VarT<S> add(VarT<S> a, VarT<S> b) {
  auto& t = detail::same_tape(a, b, "add");
  detail::require_same_shape(a, b, "add");
  TensorT<S> v = a.value() + b.value();
  bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  return {&t, t.emit(Op::kAdd, a.id, b.id, S(0), 0, 0, std::move(v), ng)};
}

template <class S>
VarT<S> sub(VarT<S> a, VarT<S> b) {
  auto& t = detail::same_tape(a, b, "sub");
  detail::require_same_shape(a, b, "sub");
  TensorT<S> v = a.value() - b.value();
  bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  return {&t, t.emit(Op::kSub, a.id, b.id, S(0), 0, 0, std::move(v), ng)};
}

// Elementwise (Hadamard) product.
template <class S>
VarT<S> mul(VarT<S> a, VarT<S> b) {
  auto& t = detail::same_tape(a, b, "mul");
  detail::require_same_shape(a, b, "mul");
  TensorT<S> v = a.value().cwiseProduct(b.value());
  bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  return {&t, t.emit(Op::kMul, a.id, b.id, S(0), 0, 0, std::move(v), ng)};
}

template <class S>
VarT<S> scale(VarT<S> a, S c) {
  auto& t = detail::one_tape(a, "scale");
  TensorT<S> v = c * a.value();
  return {&t, t.emit(Op::kScale, a.id, -1, c, 0, 0, std::move(v),
                     t.needs_grad(a.id))};
}

template <class S>
VarT<S> neg(VarT<S> a) {
  auto& t = detail::one_tape(a, "neg");
  TensorT<S> v = -a.value();
  return {&t, t.emit(Op::kNeg, a.id, -1, S(0), 0, 0, std::move(v),
                     t.needs_grad(a.id))};
}

// Adds a 1xN row vector to every row of an MxN matrix.
template <class S>
VarT<S> add_rowvec(VarT<S> m, VarT<S> v) {
  auto& t = detail::same_tape(m, v, "add_rowvec");
  if (v.rows() != 1 || v.cols() != m.cols()) {
    throw ShapeError("add_rowvec mismatch: " + shape_str(m.value()) + " + " +
                     shape_str(v.value()));
  }
  TensorT<S> out = m.value();
  out.rowwise() += v.value().row(0);
  bool ng = t.needs_grad(m.id) || t.needs_grad(v.id);
  return {&t, t.emit(Op::kAddRowVec, m.id, v.id, S(0), 0, 0, std::move(out), ng)};
}

template <class S>
VarT<S> leaky_relu(VarT<S> a, S slope) {
  auto& t = detail::one_tape(a, "leaky_relu");
  TensorT<S> v =
      a.value().unaryExpr([slope](S x) { return scalar_leaky(x, slope); });
  return {&t, t.emit(Op::kLeakyRelu, a.id, -1, slope, 0, 0, std::move(v),
                     t.needs_grad(a.id))};
}

template <class S>
VarT<S> sigmoid(VarT<S> a) {
  auto& t = detail::one_tape(a, "sigmoid");
  TensorT<S> v = a.value().unaryExpr([](S x) { return scalar_sigmoid(x); });
  return {&t, t.emit(Op::kSigmoid, a.id, -1, S(0), 0, 0, std::move(v),
                     t.needs_grad(a.id))};
}

template <class S>
VarT<S> tanh_op(VarT<S> a) {
  auto& t = detail::one_tape(a, "tanh");
  TensorT<S> v = a.value().unaryExpr([](S x) { return std::tanh(x); });
  return {&t, t.emit(Op::kTanh, a.id, -1, S(0), 0, 0, std::move(v),
                     t.needs_grad(a.id))};
}

template <class S>
VarT<S> softplus(VarT<S> a) {
  auto& t = detail::one_tape(a, "softplus");
  TensorT<S> v = a.value().unaryExpr([](S x) { return scalar_softplus(x); });
  return {&t, t.emit(Op::kSoftplus, a.id, -1, S(0), 0, 0, std::move(v),
                     t.needs_grad(a.id))};
}

template <class S>
VarT<S> concat_cols(VarT<S> a, VarT<S> b) {
  auto& t = detail::same_tape(a, b, "concat_cols");
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols mismatch: " + shape_str(a.value()) +
                     " || " + shape_str(b.value()));
  }
  TensorT<S> v(a.rows(), a.cols() + b.cols());
  v.leftCols(a.cols()) = a.value();
  v.rightCols(b.cols()) = b.value();
  bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  return {&t, t.emit(Op::kConcatCols, a.id, b.id, S(0), 0, 0, std::move(v), ng)};
}

template <class S>
VarT<S> slice_cols(VarT<S> a, Index first, Index count) {
  auto& t = detail::one_tape(a, "slice_cols");
  if (first < 0 || count <= 0 || first + count > a.cols()) {
    throw ShapeError("slice_cols [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ") out of " +
                     shape_str(a.value()));
  }
  TensorT<S> v = a.value().middleCols(first, count);
  return {&t, t.emit(Op::kSliceCols, a.id, -1, S(0), first, count,
                     std::move(v), t.needs_grad(a.id))};
}

// Column means over rows: MxN -> 1xN.
template <class S>
VarT<S> mean_rows(VarT<S> a) {
  auto& t = detail::one_tape(a, "mean_rows");
  TensorT<S> v = a.value().colwise().mean();
  return {&t, t.emit(Op::kMeanRows, a.id, -1, S(0), 0, 0, std::move(v),
                     t.needs_grad(a.id))};
}

// Repeats a 1xN row vector M times: 1xN -> MxN.
template <class S>
VarT<S> tile_rows(VarT<S> a, Index m) {
  auto& t = detail::one_tape(a, "tile_rows");
  if (a.rows() != 1) {
    throw ShapeError("tile_rows expects a row vector, got " +
                     shape_str(a.value()));
  }
  if (m <= 0) throw ContractError("tile_rows: count must be positive");
  TensorT<S> v = a.value().replicate(m, 1);
  return {&t, t.emit(Op::kTileRows, a.id, -1, S(0), m, 0, std::move(v),
                     t.needs_grad(a.id))};
}

template <class S>
VarT<S> sum(VarT<S> a) {
  auto& t = detail::one_tape(a, "sum");
  TensorT<S> v(1, 1);
  v(0, 0) = a.value().sum();
  return {&t, t.emit(Op::kSum, a.id, -1, S(0), 0, 0, std::move(v),
                     t.needs_grad(a.id))};
}

// Mean squared error over all elements: scalar.
template <class S>
VarT<S> mse(VarT<S> a, VarT<S> b) {
  auto& t = detail::same_tape(a, b, "mse");
  detail::require_same_shape(a, b, "mse");
  TensorT<S> v(1, 1);
  v(0, 0) = (a.value() - b.value()).squaredNorm() / S(a.value().size());
  bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  return {&t, t.emit(Op::kMse, a.id, b.id, S(0), 0, 0, std::move(v), ng)};
}

template <class S>
VarT<S> transpose(VarT<S> a) {
  auto& t = detail::one_tape(a, "transpose");
  TensorT<S> v = a.value().transpose();
  return {&t, t.emit(Op::kTranspose, a.id, -1, S(0), 0, 0, std::move(v),
                     t.needs_grad(a.id))};
}

using Tape = TapeT<double>;
using Var = VarT<double>;
using GradMap = Tape::GradMap;

}  // namespace gpmu::ad
