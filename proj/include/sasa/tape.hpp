// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over dense row-major matrices.
// A Tape records one forward computation; backward() replays it in reverse
// and accumulates gradients into the Parameters that were registered as
// leaves. Tapes are cheap, single-use, and confined to one training step.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "sasa/common.hpp"
#include "sasa/random.hpp"

namespace sasa {

template <class Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  bool weight_decay = false;  // decoupled decay applies to weight matrices only

  Parameter(std::string n, Matrix<Scalar> v, bool decay)
      : name(std::move(n)), value(std::move(v)), weight_decay(decay) {
    grad = Matrix<Scalar>::Zero(value.rows(), value.cols());
  }
};

template <class Scalar>
class Tape;

// Lightweight handle to a tape node; copyable, trivially cheap.
template <class Scalar>
class Var {
 public:
  Var() = default;

  const Matrix<Scalar>& value() const { return tape_->value_of(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Tape<Scalar>* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape<Scalar>;
  Var(Tape<Scalar>* t, int id) : tape_(t), id_(id) {}

  Tape<Scalar>* tape_ = nullptr;
  int id_ = -1;
};

template <class Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;

  Var<Scalar> constant(Mat v) { return push(std::move(v), false, nullptr); }

  Var<Scalar> scalar(Scalar s) {
    Mat m(1, 1);
    m(0, 0) = s;
    return constant(std::move(m));
  }

  // Registers a parameter as a leaf. With trainable=false the subgraph built
  // on top of it records no backward closures (pure inference forward).
  Var<Scalar> leaf(Parameter<Scalar>& p, bool trainable = true) {
    Var<Scalar> v = push(p.value, trainable, trainable ? &p : nullptr);
    if (trainable) registered_params_.push_back(&p);
    return v;
  }

  template <class Backward>
  Var<Scalar> apply(Mat value, std::initializer_list<int> inputs, Backward bwd) {
    bool needs = false;
    for (int id : inputs) needs = needs || nodes_[id].needs_grad;
    Var<Scalar> out = push(std::move(value), needs, nullptr);
    if (needs) nodes_[out.id()].backprop = std::move(bwd);
    return out;
  }

  // Variant for ops with a runtime-sized input list (concat).
  template <class Backward>
  Var<Scalar> apply_n(Mat value, const std::vector<int>& inputs, Backward bwd) {
    bool needs = false;
    for (int id : inputs) needs = needs || nodes_[id].needs_grad;
    Var<Scalar> out = push(std::move(value), needs, nullptr);
    if (needs) nodes_[out.id()].backprop = std::move(bwd);
    return out;
  }

  const Mat& value_of(int id) const { return nodes_[id].value; }
  const Mat& grad_of(int id) const { return nodes_[id].grad; }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

  // Zero-initialized gradient buffer for direct scatter accumulation;
  // nullptr when the node does not require gradients.
  Mat* grad_buffer(int id) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return nullptr;
    ensure_grad(n);
    return &n.grad;
  }

  template <class Expr>
  void accumulate(int id, const Expr& contribution) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    ensure_grad(n);
    n.grad += contribution;
  }

  // Reverse pass from a scalar loss. Gradients of every parameter registered
  // on this tape are zeroed first, so parameters that do not reach the loss
  // end with zero gradient. A tape can be differentiated once.
  void backward(const Var<Scalar>& loss) {
    require(!consumed_, "backward: tape already consumed");
    consumed_ = true;
    require(loss.valid() && loss.tape() == this, "backward: loss not on this tape");
    require(loss.rows() == 1 && loss.cols() == 1, "backward: loss must be scalar");
    for (Parameter<Scalar>* p : registered_params_) p->grad.setZero();

    Node& seed = nodes_[loss.id()];
    if (!seed.needs_grad) return;  // loss independent of all parameters
    ensure_grad(seed);
    seed.grad(0, 0) = Scalar(1);

    for (int i = loss.id(); i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.has_grad) continue;
      if (n.backprop) n.backprop(*this, i);
      if (n.param) n.param->grad += n.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    bool has_grad = false;
    std::function<void(Tape&, int)> backprop;
    Parameter<Scalar>* param = nullptr;
  };

  Var<Scalar> push(Mat value, bool needs, Parameter<Scalar>* param) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs;
    n.param = param;
    nodes_.push_back(std::move(n));
    return Var<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
  }

  void ensure_grad(Node& n) {
    if (!n.has_grad) {
      n.grad = Mat::Zero(n.value.rows(), n.value.cols());
      n.has_grad = true;
    }
  }

  std::vector<Node> nodes_;
  std::vector<Parameter<Scalar>*> registered_params_;
  bool consumed_ = false;
};

// ---------------------------------------------------------------------------
// Primitives. Free functions so model code composes like ordinary Eigen
// expressions; each registers its gradient rule on the tape.
// ---------------------------------------------------------------------------

namespace detail {
template <class Scalar>
Tape<Scalar>* same_tape(const Var<Scalar>& a, const Var<Scalar>& b) {
  require(a.valid() && b.valid() && a.tape() == b.tape(),
          "operands must live on the same tape");
  return a.tape();
}
}  // namespace detail

template <class Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  auto* t = detail::same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return t->apply(Matrix<Scalar>(a.value() + b.value()), {a.id(), b.id()},
                  [ia = a.id(), ib = b.id()](Tape<Scalar>& t, int self) {
                    t.accumulate(ia, t.grad_of(self));
                    t.accumulate(ib, t.grad_of(self));
                  });
}

template <class Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
  auto* t = detail::same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  return t->apply(Matrix<Scalar>(a.value() - b.value()), {a.id(), b.id()},
                  [ia = a.id(), ib = b.id()](Tape<Scalar>& t, int self) {
                    t.accumulate(ia, t.grad_of(self));
                    t.accumulate(ib, -t.grad_of(self));
                  });
}

template <class Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  auto* t = detail::same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape mismatch");
  return t->apply(
      Matrix<Scalar>(a.value().cwiseProduct(b.value())), {a.id(), b.id()},
      [ia = a.id(), ib = b.id()](Tape<Scalar>& t, int self) {
        t.accumulate(ia, t.grad_of(self).cwiseProduct(t.value_of(ib)));
        t.accumulate(ib, t.grad_of(self).cwiseProduct(t.value_of(ia)));
      });
}

// Broadcast add of a 1 x C row vector to every row (bias add).
template <class Scalar>
Var<Scalar> add_rowvec(Var<Scalar> a, Var<Scalar> b) {
  auto* t = detail::same_tape(a, b);
  require(b.rows() == 1 && b.cols() == a.cols(), "add_rowvec: bias must be 1 x cols");
  Matrix<Scalar> v = a.value();
  v.rowwise() += b.value().row(0);
  return t->apply(std::move(v), {a.id(), b.id()},
                  [ia = a.id(), ib = b.id()](Tape<Scalar>& t, int self) {
                    t.accumulate(ia, t.grad_of(self));
                    t.accumulate(ib, t.grad_of(self).colwise().sum());
                  });
}

template <class Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  auto* t = detail::same_tape(a, b);
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  return t->apply(Matrix<Scalar>(a.value() * b.value()), {a.id(), b.id()},
                  [ia = a.id(), ib = b.id()](Tape<Scalar>& t, int self) {
                    const auto& g = t.grad_of(self);
                    t.accumulate(ia, g * t.value_of(ib).transpose());
                    t.accumulate(ib, t.value_of(ia).transpose() * g);
                  });
}

template <class Scalar>
Var<Scalar> transpose(Var<Scalar> a) {
  return a.tape()->apply(Matrix<Scalar>(a.value().transpose()), {a.id()},
                         [ia = a.id()](Tape<Scalar>& t, int self) {
                           t.accumulate(ia, t.grad_of(self).transpose());
                         });
}

template <class Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar c) {
  return a.tape()->apply(Matrix<Scalar>(a.value() * c), {a.id()},
                         [ia = a.id(), c](Tape<Scalar>& t, int self) {
                           t.accumulate(ia, t.grad_of(self) * c);
                         });
}

template <class Scalar>
Var<Scalar> neg(Var<Scalar> a) {
  return scale(a, Scalar(-1));
}

template <class Scalar>
Var<Scalar> add_const(Var<Scalar> a, Scalar c) {
  return a.tape()->apply(Matrix<Scalar>((a.value().array() + c).matrix()), {a.id()},
                         [ia = a.id()](Tape<Scalar>& t, int self) {
                           t.accumulate(ia, t.grad_of(self));
                         });
}

// Elementwise product with a 1 x 1 variable (e.g. the learnable inverse
// temperature).
template <class Scalar>
Var<Scalar> mul_scalarvar(Var<Scalar> a, Var<Scalar> s) {
  auto* t = detail::same_tape(a, s);
  require(s.rows() == 1 && s.cols() == 1, "mul_scalarvar: scale must be 1 x 1");
  return t->apply(Matrix<Scalar>(a.value() * s.value()(0, 0)), {a.id(), s.id()},
                  [ia = a.id(), is = s.id()](Tape<Scalar>& t, int self) {
                    const auto& g = t.grad_of(self);
                    t.accumulate(ia, g * t.value_of(is)(0, 0));
                    Matrix<Scalar> gs(1, 1);
                    gs(0, 0) = g.cwiseProduct(t.value_of(ia)).sum();
                    t.accumulate(is, gs);
                  });
}

template <class Scalar>
Var<Scalar> exp_elem(Var<Scalar> a) {
  return a.tape()->apply(Matrix<Scalar>(a.value().array().exp().matrix()), {a.id()},
                         [ia = a.id()](Tape<Scalar>& t, int self) {
                           t.accumulate(ia, t.grad_of(self).cwiseProduct(t.value_of(self)));
                         });
}

template <class Scalar>
Var<Scalar> log_elem(Var<Scalar> a) {
  return a.tape()->apply(Matrix<Scalar>(a.value().array().log().matrix()), {a.id()},
                         [ia = a.id()](Tape<Scalar>& t, int self) {
                           t.accumulate(ia, t.grad_of(self).cwiseQuotient(t.value_of(ia)));
                         });
}

// Gradient passes through strictly inside (lo, hi) and is zero at clamped
// positions.
template <class Scalar>
Var<Scalar> clamp(Var<Scalar> a, Scalar lo, Scalar hi) {
  require(lo < hi, "clamp: lo must be < hi");
  return a.tape()->apply(
      Matrix<Scalar>(a.value().array().max(lo).min(hi).matrix()), {a.id()},
      [ia = a.id(), lo, hi](Tape<Scalar>& t, int self) {
        const auto& x = t.value_of(ia);
        Matrix<Scalar> g = t.grad_of(self);
        for (Index i = 0; i < g.rows(); ++i)
          for (Index j = 0; j < g.cols(); ++j)
            if (!(x(i, j) > lo && x(i, j) < hi)) g(i, j) = Scalar(0);
        t.accumulate(ia, g);
      });
}

// Tanh approximation with fixed constants, reproducible across platforms.
template <class Scalar>
Var<Scalar> gelu(Var<Scalar> a) {
  constexpr Scalar kC = Scalar(0.79788456080286535588);  // sqrt(2/pi)
  constexpr Scalar kA = Scalar(0.044715);
  const auto& x = a.value().array();
  Matrix<Scalar> th = (kC * (x + kA * x.cube())).tanh().matrix();
  Matrix<Scalar> v = (Scalar(0.5) * x * (Scalar(1) + th.array())).matrix();
  return a.tape()->apply(
      std::move(v), {a.id()},
      [ia = a.id(), th = std::move(th), kC, kA](Tape<Scalar>& t, int self) {
        const auto& x = t.value_of(ia).array();
        const auto& T = th.array();
        auto dydx = Scalar(0.5) * (Scalar(1) + T) +
                    Scalar(0.5) * x * (Scalar(1) - T.square()) * kC *
                        (Scalar(1) + Scalar(3) * kA * x.square());
        t.accumulate(ia, (t.grad_of(self).array() * dydx).matrix());
      });
}

namespace detail {
template <class Scalar>
void layer_norm_stats(const Matrix<Scalar>& x, Scalar eps, Matrix<Scalar>& xhat,
                      Matrix<Scalar>& inv_std) {
  const Index n = x.cols();
  xhat.resize(x.rows(), n);
  inv_std.resize(x.rows(), 1);
  for (Index i = 0; i < x.rows(); ++i) {
    const Scalar mu = x.row(i).mean();
    const Scalar var = (x.row(i).array() - mu).square().sum() / Scalar(n);
    const Scalar is = Scalar(1) / std::sqrt(var + eps);
    inv_std(i, 0) = is;
    xhat.row(i) = (x.row(i).array() - mu) * is;
  }
}

template <class Scalar>
Matrix<Scalar> layer_norm_input_grad(const Matrix<Scalar>& gx,
                                     const Matrix<Scalar>& xhat,
                                     const Matrix<Scalar>& inv_std) {
  const Index n = xhat.cols();
  Matrix<Scalar> dx(xhat.rows(), n);
  for (Index i = 0; i < xhat.rows(); ++i) {
    const Scalar m1 = gx.row(i).mean();
    const Scalar m2 = gx.row(i).cwiseProduct(xhat.row(i)).sum() / Scalar(n);
    dx.row(i) = inv_std(i, 0) *
                (gx.row(i).array() - m1 - xhat.row(i).array() * m2).matrix();
  }
  return dx;
}
}  // namespace detail

// Row-wise layer normalization without affine parameters.
template <class Scalar>
Var<Scalar> layer_norm(Var<Scalar> a, Scalar eps = Scalar(1e-5)) {
  Matrix<Scalar> xhat, inv_std;
  detail::layer_norm_stats(a.value(), eps, xhat, inv_std);
  Matrix<Scalar> v = xhat;
  return a.tape()->apply(
      std::move(v), {a.id()},
      [ia = a.id(), xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Tape<Scalar>& t, int self) {
        t.accumulate(ia, detail::layer_norm_input_grad(t.grad_of(self), xhat, inv_std));
      });
}

// Row-wise layer normalization with learnable gain and bias (1 x cols each).
template <class Scalar>
Var<Scalar> layer_norm_affine(Var<Scalar> a, Var<Scalar> gain, Var<Scalar> bias,
                              Scalar eps = Scalar(1e-5)) {
  auto* t = detail::same_tape(a, gain);
  detail::same_tape(a, bias);
  require(gain.rows() == 1 && gain.cols() == a.cols(), "layer_norm: gain shape");
  require(bias.rows() == 1 && bias.cols() == a.cols(), "layer_norm: bias shape");
  Matrix<Scalar> xhat, inv_std;
  detail::layer_norm_stats(a.value(), eps, xhat, inv_std);
  Matrix<Scalar> v = xhat;
  v.array().rowwise() *= gain.value().row(0).array();
  v.rowwise() += bias.value().row(0);
  return t->apply(
      std::move(v), {a.id(), gain.id(), bias.id()},
      [ia = a.id(), ig = gain.id(), ib = bias.id(), xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Tape<Scalar>& t, int self) {
        const auto& g = t.grad_of(self);
        t.accumulate(ib, g.colwise().sum());
        t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
        Matrix<Scalar> gx = g;
        gx.array().rowwise() *= t.value_of(ig).row(0).array();
        t.accumulate(ia, detail::layer_norm_input_grad(gx, xhat, inv_std));
      });
}

// Inverted dropout with an explicit seed. In eval mode the input passes
// through untouched (same tape node).
template <class Scalar>
Var<Scalar> dropout(Var<Scalar> a, Scalar rate, bool train, std::uint64_t seed) {
  require(rate >= Scalar(0) && rate < Scalar(1), "dropout: rate must be in [0, 1)");
  if (!train || rate == Scalar(0)) return a;
  Rng rng(seed);
  const Scalar keep_scale = Scalar(1) / (Scalar(1) - rate);
  Matrix<Scalar> mask(a.rows(), a.cols());
  for (Index i = 0; i < mask.rows(); ++i)
    for (Index j = 0; j < mask.cols(); ++j)
      mask(i, j) = rng.uniform() < static_cast<double>(rate) ? Scalar(0) : keep_scale;
  return a.tape()->apply(Matrix<Scalar>(a.value().cwiseProduct(mask)), {a.id()},
                         [ia = a.id(), mask = std::move(mask)](Tape<Scalar>& t, int self) {
                           t.accumulate(ia, t.grad_of(self).cwiseProduct(mask));
                         });
}

namespace detail {
template <class Scalar>
Matrix<Scalar> softmax_rows_value(const Matrix<Scalar>& x, const Matrix<Scalar>* additive) {
  Matrix<Scalar> v(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    Eigen::Array<Scalar, 1, Eigen::Dynamic> row = x.row(i).array();
    if (additive) row += additive->row(0).array();
    const Scalar m = row.maxCoeff();
    Eigen::Array<Scalar, 1, Eigen::Dynamic> e = (row - m).exp();
    v.row(i) = (e / e.sum()).matrix();
  }
  return v;
}

template <class Scalar, class TapeT>
Var<Scalar> softmax_rows_impl(Var<Scalar> a, Matrix<Scalar> value, TapeT* t) {
  return t->apply(std::move(value), {a.id()},
                  [ia = a.id()](Tape<Scalar>& t, int self) {
                    const auto& y = t.value_of(self);
                    const auto& g = t.grad_of(self);
                    Matrix<Scalar> dx(y.rows(), y.cols());
                    for (Index i = 0; i < y.rows(); ++i) {
                      const Scalar s = g.row(i).cwiseProduct(y.row(i)).sum();
                      dx.row(i) = y.row(i).cwiseProduct((g.row(i).array() - s).matrix());
                    }
                    t.accumulate(ia, dx);
                  });
}
}  // namespace detail

// Row-wise softmax.
template <class Scalar>
Var<Scalar> softmax_rows(Var<Scalar> a) {
  return detail::softmax_rows_impl(a, detail::softmax_rows_value<Scalar>(a.value(), nullptr),
                                   a.tape());
}

// Row-wise softmax after adding a constant 1 x cols logit offset (additive
// attention mask: 0 on active keys, a large negative number on padding, so
// masked positions come out exactly zero after the exp underflows).
template <class Scalar>
Var<Scalar> softmax_rows_masked(Var<Scalar> a, const Matrix<Scalar>& additive) {
  require(additive.rows() == 1 && additive.cols() == a.cols(),
          "softmax_rows_masked: additive mask must be 1 x cols");
  return detail::softmax_rows_impl(a, detail::softmax_rows_value<Scalar>(a.value(), &additive),
                                   a.tape());
}

// Mean over rows with mask[i] == 1; output 1 x cols.
template <class Scalar>
Var<Scalar> mean_pool_rows(Var<Scalar> a, const std::vector<int>& mask) {
  require(static_cast<Index>(mask.size()) == a.rows(), "mean_pool: mask length != rows");
  int active = 0;
  for (int m : mask) active += (m != 0);
  require(active > 0, "mean_pool: mask has no active positions");
  Matrix<Scalar> v = Matrix<Scalar>::Zero(1, a.cols());
  for (Index i = 0; i < a.rows(); ++i)
    if (mask[i]) v += a.value().row(i);
  v /= Scalar(active);
  return a.tape()->apply(std::move(v), {a.id()},
                         [ia = a.id(), mask, active](Tape<Scalar>& t, int self) {
                           Matrix<Scalar>* buf = t.grad_buffer(ia);
                           if (!buf) return;
                           const Matrix<Scalar> g = t.grad_of(self) / Scalar(active);
                           for (Index i = 0; i < buf->rows(); ++i)
                             if (mask[i]) buf->row(i) += g.row(0);
                         });
}

// Row-wise x / sqrt(|x|^2 + eps).
template <class Scalar>
Var<Scalar> l2_normalize_rows(Var<Scalar> a, Scalar eps = Scalar(1e-12)) {
  Matrix<Scalar> v(a.rows(), a.cols());
  Matrix<Scalar> inv_norm(a.rows(), 1);
  for (Index i = 0; i < a.rows(); ++i) {
    const Scalar n = std::sqrt(a.value().row(i).squaredNorm() + eps);
    inv_norm(i, 0) = Scalar(1) / n;
    v.row(i) = a.value().row(i) / n;
  }
  return a.tape()->apply(
      std::move(v), {a.id()},
      [ia = a.id(), inv_norm = std::move(inv_norm)](Tape<Scalar>& t, int self) {
        const auto& x = t.value_of(ia);
        const auto& g = t.grad_of(self);
        Matrix<Scalar> dx(x.rows(), x.cols());
        for (Index i = 0; i < x.rows(); ++i) {
          const Scalar inv = inv_norm(i, 0);
          const Scalar gx = g.row(i).cwiseProduct(x.row(i)).sum();
          dx.row(i) = inv * g.row(i) - (inv * inv * inv * gx) * x.row(i);
        }
        t.accumulate(ia, dx);
      });
}

// Inner product of two equally shaped tensors; output 1 x 1.
template <class Scalar>
Var<Scalar> dot(Var<Scalar> a, Var<Scalar> b) {
  auto* t = detail::same_tape(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "dot: shape mismatch");
  Matrix<Scalar> v(1, 1);
  v(0, 0) = a.value().cwiseProduct(b.value()).sum();
  return t->apply(std::move(v), {a.id(), b.id()},
                  [ia = a.id(), ib = b.id()](Tape<Scalar>& t, int self) {
                    const Scalar g = t.grad_of(self)(0, 0);
                    t.accumulate(ia, g * t.value_of(ib));
                    t.accumulate(ib, g * t.value_of(ia));
                  });
}

// Cosine similarity of two 1 x d vectors; norms are eps-guarded.
template <class Scalar>
Var<Scalar> cosine(Var<Scalar> a, Var<Scalar> b, Scalar eps = Scalar(1e-12)) {
  auto* t = detail::same_tape(a, b);
  require(a.rows() == 1 && b.rows() == 1 && a.cols() == b.cols(),
          "cosine: expects two 1 x d vectors");
  const Scalar na2 = a.value().squaredNorm() + eps;
  const Scalar nb2 = b.value().squaredNorm() + eps;
  const Scalar inv = Scalar(1) / std::sqrt(na2 * nb2);
  const Scalar s = a.value().cwiseProduct(b.value()).sum();
  Matrix<Scalar> v(1, 1);
  v(0, 0) = s * inv;
  return t->apply(std::move(v), {a.id(), b.id()},
                  [ia = a.id(), ib = b.id(), na2, nb2, inv](Tape<Scalar>& t, int self) {
                    const Scalar g = t.grad_of(self)(0, 0);
                    const Scalar val = t.value_of(self)(0, 0);
                    const auto& av = t.value_of(ia);
                    const auto& bv = t.value_of(ib);
                    t.accumulate(ia, g * (bv * inv - av * (val / na2)));
                    t.accumulate(ib, g * (av * inv - bv * (val / nb2)));
                  });
}

// Horizontal concatenation; inputs must share the row count.
template <class Scalar>
Var<Scalar> concat_cols(const std::vector<Var<Scalar>>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Tape<Scalar>* t = parts[0].tape();
  Index rows = parts[0].rows();
  Index cols = 0;
  std::vector<int> ids;
  std::vector<Index> widths;
  for (const auto& p : parts) {
    require(p.tape() == t, "concat_cols: mixed tapes");
    require(p.rows() == rows, "concat_cols: row mismatch");
    ids.push_back(p.id());
    widths.push_back(p.cols());
    cols += p.cols();
  }
  Matrix<Scalar> v(rows, cols);
  Index off = 0;
  for (const auto& p : parts) {
    v.block(0, off, rows, p.cols()) = p.value();
    off += p.cols();
  }
  return t->apply_n(std::move(v), ids,
                    [ids, widths](Tape<Scalar>& t, int self) {
                      const auto& g = t.grad_of(self);
                      Index off = 0;
                      for (std::size_t k = 0; k < ids.size(); ++k) {
                        t.accumulate(ids[k], g.block(0, off, g.rows(), widths[k]));
                        off += widths[k];
                      }
                    });
}

template <class Scalar>
Var<Scalar> slice_cols(Var<Scalar> a, Index start, Index n) {
  require(start >= 0 && n > 0 && start + n <= a.cols(), "slice_cols: out of range");
  return a.tape()->apply(Matrix<Scalar>(a.value().block(0, start, a.rows(), n)),
                         {a.id()},
                         [ia = a.id(), start, n](Tape<Scalar>& t, int self) {
                           Matrix<Scalar>* buf = t.grad_buffer(ia);
                           if (!buf) return;
                           buf->block(0, start, buf->rows(), n) += t.grad_of(self);
                         });
}

template <class Scalar>
Var<Scalar> slice_rows(Var<Scalar> a, Index start, Index n) {
  require(start >= 0 && n > 0 && start + n <= a.rows(), "slice_rows: out of range");
  return a.tape()->apply(Matrix<Scalar>(a.value().block(start, 0, n, a.cols())),
                         {a.id()},
                         [ia = a.id(), start, n](Tape<Scalar>& t, int self) {
                           Matrix<Scalar>* buf = t.grad_buffer(ia);
                           if (!buf) return;
                           buf->block(start, 0, n, buf->cols()) += t.grad_of(self);
                         });
}

// Gathers table rows by id; the workhorse of the embedding layers.
template <class Scalar>
Var<Scalar> embedding_rows(Var<Scalar> table, const std::vector<int>& ids) {
  Matrix<Scalar> v(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < table.rows(), "embedding_rows: id out of range");
    v.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  }
  return table.tape()->apply(std::move(v), {table.id()},
                             [it = table.id(), ids](Tape<Scalar>& t, int self) {
                               Matrix<Scalar>* buf = t.grad_buffer(it);
                               if (!buf) return;
                               const auto& g = t.grad_of(self);
                               for (std::size_t i = 0; i < ids.size(); ++i)
                                 buf->row(ids[i]) += g.row(static_cast<Index>(i));
                             });
}

template <class Scalar>
Var<Scalar> sum_all(Var<Scalar> a) {
  Matrix<Scalar> v(1, 1);
  v(0, 0) = a.value().sum();
  return a.tape()->apply(std::move(v), {a.id()},
                         [ia = a.id()](Tape<Scalar>& t, int self) {
                           const Scalar g = t.grad_of(self)(0, 0);
                           const auto& x = t.value_of(ia);
                           t.accumulate(ia, Matrix<Scalar>::Constant(x.rows(), x.cols(), g));
                         });
}

template <class Scalar>
Var<Scalar> mean_all(Var<Scalar> a) {
  const Scalar n = Scalar(a.rows() * a.cols());
  Matrix<Scalar> v(1, 1);
  v(0, 0) = a.value().sum() / n;
  return a.tape()->apply(std::move(v), {a.id()},
                         [ia = a.id(), n](Tape<Scalar>& t, int self) {
                           const Scalar g = t.grad_of(self)(0, 0) / n;
                           const auto& x = t.value_of(ia);
                           t.accumulate(ia, Matrix<Scalar>::Constant(x.rows(), x.cols(), g));
                         });
}

template <class Scalar>
Var<Scalar> pick(Var<Scalar> a, Index i, Index j) {
  require(i >= 0 && i < a.rows() && j >= 0 && j < a.cols(), "pick: out of range");
  Matrix<Scalar> v(1, 1);
  v(0, 0) = a.value()(i, j);
  return a.tape()->apply(std::move(v), {a.id()},
                         [ia = a.id(), i, j](Tape<Scalar>& t, int self) {
                           Matrix<Scalar>* buf = t.grad_buffer(ia);
                           if (!buf) return;
                           (*buf)(i, j) += t.grad_of(self)(0, 0);
                         });
}

// ---------------------------------------------------------------------------
// Gradient checking against central finite differences.
// ---------------------------------------------------------------------------

template <class Scalar>
struct GradCheckEntry {
  std::string name;
  Scalar max_err = 0;
  bool pass = true;
};

template <class Scalar>
struct GradCheckReport {
  std::vector<GradCheckEntry<Scalar>> entries;
  Scalar worst = 0;
  bool pass = true;
};

// Relative error with a magnitude floor: coordinates where both gradients are
// below `floor` in magnitude are effectively held to an absolute tolerance of
// tol * floor, keeping finite-difference noise on near-zero gradients from
// producing spurious failures.
template <class Scalar>
Scalar grad_rel_err(Scalar analytic, Scalar numeric, Scalar floor = Scalar(1e-3)) {
  const Scalar denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// The closure runs the model: with_grad=true must perform forward + backward
// and leave analytic gradients in the parameters; with_grad=false only needs
// the forward value. It must be deterministic (fixed dropout seeds) — this is
// verified by running it twice and comparing values bit-for-bit.
template <class Scalar, class Closure>
GradCheckReport<Scalar> grad_check(Closure&& closure,
                                   const std::vector<Parameter<Scalar>*>& params,
                                   Scalar eps = Scalar(1e-5),
                                   Scalar tol = Scalar(1e-4)) {
  GradCheckReport<Scalar> report;
  const Scalar f0 = closure(true);
  std::vector<Matrix<Scalar>> analytic;
  analytic.reserve(params.size());
  for (const Parameter<Scalar>* p : params) analytic.push_back(p->grad);
  const Scalar f1 = closure(false);
  require(f0 == f1, "grad_check: closure is not deterministic (forward runs disagree)");

  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<Scalar>* p = params[k];
    GradCheckEntry<Scalar> entry;
    entry.name = p->name;
    for (Index i = 0; i < p->value.rows(); ++i) {
      for (Index j = 0; j < p->value.cols(); ++j) {
        const Scalar saved = p->value(i, j);
        p->value(i, j) = saved + eps;
        const Scalar fp = closure(false);
        p->value(i, j) = saved - eps;
        const Scalar fm = closure(false);
        p->value(i, j) = saved;
        const Scalar numeric = (fp - fm) / (Scalar(2) * eps);
        entry.max_err = std::max(entry.max_err, grad_rel_err(analytic[k](i, j), numeric));
      }
    }
    entry.pass = entry.max_err < tol;
    report.worst = std::max(report.worst, entry.max_err);
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace sasa
