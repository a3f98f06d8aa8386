#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "physden/tensor.hpp"

namespace physden {

template <typename Scalar>
class Tape;

/// Handle to a value recorded on a Tape.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<Scalar>* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor<Scalar>& value() const { return tape_->value(*this); }
  const Shape& shape() const { return value().shape(); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const { return tape_->requires_grad(*this); }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode record of tensor operations.
///
/// Nodes are appended in evaluation order, so every node's inputs precede
/// it. backward() clears all gradients before sweeping, which makes
/// repeated calls on the same loss return identical gradients.
template <typename Scalar>
class Tape {
 public:
  using Vector = typename Tensor<Scalar>::Vector;
  // Reads the gradient of `self` and accumulates into the gradients of its inputs.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> leaf(Tensor<Scalar> value, bool requires_grad = false) {
    nodes_.push_back(Node{std::move(value), requires_grad, {}, {}, {}});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  Var<Scalar> constant(Tensor<Scalar> value) { return leaf(std::move(value), false); }

  Var<Scalar> record(Tensor<Scalar> value, std::vector<std::size_t> inputs, BackwardFn backward) {
    bool needs = false;
    for (auto in : inputs) {
      if (in >= nodes_.size()) throw ContractViolation("tape input recorded out of order");
      needs = needs || nodes_[in].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), needs, std::move(inputs), needs ? std::move(backward) : BackwardFn{}, {}});
    return Var<Scalar>(this, nodes_.size() - 1);
  }

  const Tensor<Scalar>& value(const Var<Scalar>& v) const { return nodes_.at(check(v)).value; }
  const Tensor<Scalar>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(const Var<Scalar>& v) const { return nodes_.at(check(v)).requires_grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  void backward(const Var<Scalar>& loss) {
    const std::size_t root = check(loss);
    if (nodes_[root].value.size() != 1) {
      throw ContractViolation("backward() needs a scalar loss, got shape " +
                              shape_string(nodes_[root].value.shape()));
    }
    for (auto& n : nodes_) n.grad.resize(0);
    grad_buffer(root).setOnes();
    for (std::size_t id = root + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (n.grad.size() == 0 || !n.backward) continue;
      n.backward(*this, id);
    }
  }

  /// Gradient of the last backward() loss wrt v; zeros when v is unreachable.
  Tensor<Scalar> grad(const Var<Scalar>& v) const {
    const Node& n = nodes_.at(check(v));
    if (n.grad.size() == 0) return Tensor<Scalar>(n.value.shape());
    return Tensor<Scalar>(n.value.shape(), n.grad);
  }

  // Backward-rule helpers.
  const Vector& grad_of(std::size_t id) const { return nodes_[id].grad; }

  Vector& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Vector::Zero(n.value.size());
    return n.grad;
  }

  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& contribution) {
    if (!nodes_[id].requires_grad) return;
    grad_buffer(id) += contribution;
  }

  std::size_t input(std::size_t id, std::size_t k) const { return nodes_[id].inputs[k]; }

 private:
  struct Node {
    Tensor<Scalar> value;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Vector grad;
  };

  std::size_t check(const Var<Scalar>& v) const {
    if (v.tape() != this) throw ContractViolation("variable belongs to a different tape");
    return v.id();
  }

  std::vector<Node> nodes_;
};

using Tape64 = Tape<double>;
using Var64 = Var<double>;

namespace detail {

template <typename Scalar>
Tape<Scalar>& same_tape(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) throw ContractViolation("operands live on different tapes");
  return *a.tape();
}

template <typename Scalar>
void require_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

template <typename Scalar>
Tensor<Scalar> like(const Var<Scalar>& a, typename Tensor<Scalar>::Vector data) {
  return Tensor<Scalar>(a.shape(), std::move(data));
}

}  // namespace detail

// ---- elementwise ---------------------------------------------------------

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::same_tape(a, b);
  detail::require_same_shape(a, b, "add");
  return tape.record(detail::like(a, a.value().data() + b.value().data()), {a.id(), b.id()},
                     [](Tape<Scalar>& t, std::size_t self) {
                       t.accumulate(t.input(self, 0), t.grad_of(self));
                       t.accumulate(t.input(self, 1), t.grad_of(self));
                     });
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::same_tape(a, b);
  detail::require_same_shape(a, b, "sub");
  return tape.record(detail::like(a, a.value().data() - b.value().data()), {a.id(), b.id()},
                     [](Tape<Scalar>& t, std::size_t self) {
                       t.accumulate(t.input(self, 0), t.grad_of(self));
                       t.accumulate(t.input(self, 1), -t.grad_of(self));
                     });
}

template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::same_tape(a, b);
  detail::require_same_shape(a, b, "mul");
  return tape.record(detail::like(a, a.value().data().cwiseProduct(b.value().data())), {a.id(), b.id()},
                     [](Tape<Scalar>& t, std::size_t self) {
                       const auto& g = t.grad_of(self);
                       const auto ia = t.input(self, 0), ib = t.input(self, 1);
                       if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib).data()));
                       if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia).data()));
                     });
}

template <typename Scalar>
Var<Scalar> operator/(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::same_tape(a, b);
  detail::require_same_shape(a, b, "div");
  return tape.record(detail::like(a, a.value().data().cwiseQuotient(b.value().data())), {a.id(), b.id()},
                     [](Tape<Scalar>& t, std::size_t self) {
                       const auto& g = t.grad_of(self);
                       const auto ia = t.input(self, 0), ib = t.input(self, 1);
                       const auto& bv = t.value(ib).data();
                       if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseQuotient(bv));
                       if (t.requires_grad(ib)) {
                         const auto& out = t.value(self).data();
                         t.accumulate(ib, -g.cwiseProduct(out).cwiseQuotient(bv));
                       }
                     });
}

template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, Scalar s) {
  return a.tape()->record(detail::like(a, a.value().data() * s), {a.id()},
                          [s](Tape<Scalar>& t, std::size_t self) { t.accumulate(t.input(self, 0), t.grad_of(self) * s); });
}

template <typename Scalar>
Var<Scalar> operator*(Scalar s, const Var<Scalar>& a) {
  return a * s;
}

template <typename Scalar>
Var<Scalar> operator/(const Var<Scalar>& a, Scalar s) {
  return a.tape()->record(detail::like(a, a.value().data() / s), {a.id()},
                          [s](Tape<Scalar>& t, std::size_t self) { t.accumulate(t.input(self, 0), t.grad_of(self) / s); });
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a) {
  return a * Scalar(-1);
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, Scalar s) {
  return a.tape()->record(detail::like(a, (a.value().data().array() + s).matrix()), {a.id()},
                          [](Tape<Scalar>& t, std::size_t self) { t.accumulate(t.input(self, 0), t.grad_of(self)); });
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, Scalar s) {
  return a + (-s);
}

template <typename Scalar>
Var<Scalar> sqrt(const Var<Scalar>& a) {
  return a.tape()->record(detail::like(a, a.value().data().cwiseSqrt()), {a.id()},
                          [](Tape<Scalar>& t, std::size_t self) {
                            const auto& out = t.value(self).data();
                            t.accumulate(t.input(self, 0), (t.grad_of(self).array() / (2 * out.array())).matrix());
                          });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  return a.tape()->record(detail::like(a, a.value().data().cwiseMax(Scalar(0))), {a.id()},
                          [](Tape<Scalar>& t, std::size_t self) {
                            const auto& x = t.value(t.input(self, 0)).data();
                            t.accumulate(t.input(self, 0),
                                         (x.array() > Scalar(0)).select(t.grad_of(self), Scalar(0)).matrix());
                          });
}

// ---- reductions ----------------------------------------------------------

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  return a.tape()->record(Tensor<Scalar>::scalar(a.value().data().sum()), {a.id()},
                          [](Tape<Scalar>& t, std::size_t self) {
                            const auto in = t.input(self, 0);
                            t.accumulate(in, Tensor<Scalar>::Vector::Constant(t.value(in).size(), t.grad_of(self)[0]));
                          });
}

/// Mean of squared entries.
template <typename Scalar>
Var<Scalar> mean_square(const Var<Scalar>& a) {
  const auto& x = a.value().data();
  const Scalar n = static_cast<Scalar>(x.size());
  return a.tape()->record(Tensor<Scalar>::scalar(x.squaredNorm() / n), {a.id()},
                          [n](Tape<Scalar>& t, std::size_t self) {
                            const auto in = t.input(self, 0);
                            t.accumulate(in, t.value(in).data() * (2 * t.grad_of(self)[0] / n));
                          });
}

/// Mean squared error over all elements.
template <typename Scalar>
Var<Scalar> mse(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape(a, b, "mse");
  auto& tape = detail::same_tape(a, b);
  const Scalar n = static_cast<Scalar>(a.value().size());
  typename Tensor<Scalar>::Vector diff = a.value().data() - b.value().data();
  const Scalar loss = diff.squaredNorm() / n;
  return tape.record(Tensor<Scalar>::scalar(loss), {a.id(), b.id()},
                     [n](Tape<Scalar>& t, std::size_t self) {
                       const auto ia = t.input(self, 0), ib = t.input(self, 1);
                       const typename Tensor<Scalar>::Vector g =
                           (t.value(ia).data() - t.value(ib).data()) * (2 * t.grad_of(self)[0] / n);
                       t.accumulate(ia, g);
                       t.accumulate(ib, -g);
                     });
}

// ---- layout --------------------------------------------------------------

/// Rows [first, first + count) of a 2-D value.
template <typename Scalar>
Var<Scalar> rows(const Var<Scalar>& a, Index first, Index count) {
  const auto& v = a.value();
  if (v.rank() != 2 || first < 0 || count < 0 || first + count > v.rows()) {
    throw DimensionError("rows(" + std::to_string(first) + ", " + std::to_string(count) + ") out of range for " +
                         shape_string(v.shape()));
  }
  const Index c = v.cols();
  RowMatrix<Scalar> out = v.matrix().middleRows(first, count);
  return a.tape()->record(Tensor<Scalar>::from_matrix(out), {a.id()},
                          [first, count, c](Tape<Scalar>& t, std::size_t self) {
                            const auto in = t.input(self, 0);
                            auto& g = t.grad_buffer(in);
                            Eigen::Map<RowMatrix<Scalar>> gm(g.data(), g.size() / c, c);
                            gm.middleRows(first, count) +=
                                Eigen::Map<const RowMatrix<Scalar>>(t.grad_of(self).data(), count, c);
                          });
}

template <typename Scalar>
Var<Scalar> row(const Var<Scalar>& a, Index r) {
  return rows(a, r, 1);
}

/// Columns [first, first + count) of a 2-D value.
template <typename Scalar>
Var<Scalar> cols(const Var<Scalar>& a, Index first, Index count) {
  const auto& v = a.value();
  if (v.rank() != 2 || first < 0 || count < 0 || first + count > v.cols()) {
    throw DimensionError("cols(" + std::to_string(first) + ", " + std::to_string(count) + ") out of range for " +
                         shape_string(v.shape()));
  }
  const Index r = v.rows(), c = v.cols();
  RowMatrix<Scalar> out = v.matrix().middleCols(first, count);
  return a.tape()->record(Tensor<Scalar>::from_matrix(out), {a.id()},
                          [first, count, r, c](Tape<Scalar>& t, std::size_t self) {
                            auto& g = t.grad_buffer(t.input(self, 0));
                            Eigen::Map<RowMatrix<Scalar>> gm(g.data(), r, c);
                            gm.middleCols(first, count) +=
                                Eigen::Map<const RowMatrix<Scalar>>(t.grad_of(self).data(), r, count);
                          });
}

/// Stacks 2-D values with equal column counts on top of each other.
template <typename Scalar>
Var<Scalar> concat_rows(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  Tape<Scalar>* tape = parts.front().tape();
  const Index c = parts.front().cols();
  Index total = 0;
  std::vector<std::size_t> ids;
  std::vector<Index> offsets;
  for (const auto& p : parts) {
    if (p.tape() != tape) throw ContractViolation("operands live on different tapes");
    if (p.value().rank() != 2 || p.cols() != c) throw DimensionError("concat_rows: column mismatch");
    ids.push_back(p.id());
    offsets.push_back(total);
    total += p.rows();
  }
  RowMatrix<Scalar> out(total, c);
  for (std::size_t k = 0; k < parts.size(); ++k) out.middleRows(offsets[k], parts[k].rows()) = parts[k].value().matrix();
  return tape->record(Tensor<Scalar>::from_matrix(out), ids, [offsets, c](Tape<Scalar>& t, std::size_t self) {
    Eigen::Map<const RowMatrix<Scalar>> g(t.grad_of(self).data(), t.grad_of(self).size() / c, c);
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      const auto in = t.input(self, k);
      if (!t.requires_grad(in)) continue;
      const Index n = t.value(in).rows();
      RowMatrix<Scalar> block = g.middleRows(offsets[k], n);
      t.accumulate(in, Eigen::Map<const typename Tensor<Scalar>::Vector>(block.data(), block.size()));
    }
  });
}

template <typename Scalar>
Var<Scalar> concat_rows(std::initializer_list<Var<Scalar>> parts) {
  return concat_rows(std::span<const Var<Scalar>>(parts.begin(), parts.size()));
}

/// y[r, :] = x[r, :] * scale[r] + shift[r]; scale and shift are constants.
template <typename Scalar, typename DerivedA, typename DerivedB>
Var<Scalar> affine_rows(const Var<Scalar>& a, const Eigen::MatrixBase<DerivedA>& scale,
                        const Eigen::MatrixBase<DerivedB>& shift) {
  const auto& v = a.value();
  if (scale.size() != v.rows() || shift.size() != v.rows()) throw DimensionError("affine_rows: per-row size mismatch");
  typename Tensor<Scalar>::Vector s = scale, m = shift;
  RowMatrix<Scalar> out = (v.matrix().array().colwise() * s.array()).colwise() + m.array();
  const Index c = v.cols();
  return a.tape()->record(Tensor<Scalar>(v.shape(), Eigen::Map<const typename Tensor<Scalar>::Vector>(out.data(), out.size())),
                          {a.id()}, [s, c](Tape<Scalar>& t, std::size_t self) {
                            Eigen::Map<const RowMatrix<Scalar>> g(t.grad_of(self).data(), s.size(), c);
                            RowMatrix<Scalar> gi = g.array().colwise() * s.array();
                            t.accumulate(t.input(self, 0),
                                         Eigen::Map<const typename Tensor<Scalar>::Vector>(gi.data(), gi.size()));
                          });
}

/// Per-row exclusive prefix sum along time: y[:, t] = sum_{s<t} x[:, s].
template <typename Scalar>
Var<Scalar> cumsum_exclusive(const Var<Scalar>& a) {
  const auto& v = a.value();
  const Index r = v.rows(), c = v.cols();
  RowMatrix<Scalar> out(r, c);
  for (Index i = 0; i < r; ++i) {
    Scalar acc = 0;
    for (Index j = 0; j < c; ++j) {
      out(i, j) = acc;
      acc += v.matrix()(i, j);
    }
  }
  return a.tape()->record(Tensor<Scalar>(v.shape(), Eigen::Map<const typename Tensor<Scalar>::Vector>(out.data(), out.size())),
                          {a.id()}, [r, c](Tape<Scalar>& t, std::size_t self) {
                            Eigen::Map<const RowMatrix<Scalar>> g(t.grad_of(self).data(), r, c);
                            RowMatrix<Scalar> gi(r, c);
                            for (Index i = 0; i < r; ++i) {
                              Scalar acc = 0;
                              for (Index j = c; j-- > 0;) {
                                gi(i, j) = acc;
                                acc += g(i, j);
                              }
                            }
                            t.accumulate(t.input(self, 0),
                                         Eigen::Map<const typename Tensor<Scalar>::Vector>(gi.data(), gi.size()));
                          });
}

// ---- convolution ---------------------------------------------------------

/// "Same"-padded 1-D convolution of a Cin x T input with Cout x Cin x K weights.
template <typename Scalar>
RowMatrix<Scalar> conv1d_values(const Tensor<Scalar>& input, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
  if (input.rank() != 2 || weight.rank() != 3 || bias.rank() != 1) {
    throw DimensionError("conv1d: expected input[Cin x T], weight[Cout x Cin x K], bias[Cout]; got " +
                         shape_string(input.shape()) + ", " + shape_string(weight.shape()) + ", " +
                         shape_string(bias.shape()));
  }
  const Index cin = input.dim(0), t = input.dim(1);
  const Index cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin || bias.dim(0) != cout) {
    throw DimensionError("conv1d: channel mismatch between input " + shape_string(input.shape()) + ", weight " +
                         shape_string(weight.shape()) + " and bias " + shape_string(bias.shape()));
  }
  if (k % 2 == 0) throw UnsupportedKernelError("conv1d: kernel size must be odd, got " + std::to_string(k));
  const Index pad = (k - 1) / 2;
  RowMatrix<Scalar> padded = RowMatrix<Scalar>::Zero(cin, t + 2 * pad);
  padded.middleCols(pad, t) = input.matrix();

  using Strided = Eigen::Map<const RowMatrix<Scalar>, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
  RowMatrix<Scalar> out = bias.data().replicate(1, t);
  for (Index j = 0; j < k; ++j) {
    Strided wk(weight.data().data() + j, cout, cin, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(cin * k, k));
    out.noalias() += wk * padded.middleCols(j, t);
  }
  return out;
}

template <typename Scalar>
Var<Scalar> conv1d(const Var<Scalar>& input, const Var<Scalar>& weight, const Var<Scalar>& bias) {
  if (input.tape() != weight.tape() || input.tape() != bias.tape()) {
    throw ContractViolation("operands live on different tapes");
  }
  RowMatrix<Scalar> out = conv1d_values(input.value(), weight.value(), bias.value());
  return input.tape()->record(Tensor<Scalar>::from_matrix(out), {input.id(), weight.id(), bias.id()},
                              [](Tape<Scalar>& t, std::size_t self) {
                                const auto ix = t.input(self, 0), iw = t.input(self, 1), ib = t.input(self, 2);
                                const auto& x = t.value(ix);
                                const auto& w = t.value(iw);
                                const Index cin = x.dim(0), len = x.dim(1), cout = w.dim(0), k = w.dim(2);
                                const Index pad = (k - 1) / 2;
                                Eigen::Map<const RowMatrix<Scalar>> g(t.grad_of(self).data(), cout, len);

                                if (t.requires_grad(ib)) t.accumulate(ib, g.rowwise().sum());

                                RowMatrix<Scalar> padded = RowMatrix<Scalar>::Zero(cin, len + 2 * pad);
                                padded.middleCols(pad, len) = x.matrix();
                                using Strided =
                                    Eigen::Map<const RowMatrix<Scalar>, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
                                using StridedMut =
                                    Eigen::Map<RowMatrix<Scalar>, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
                                if (t.requires_grad(iw)) {
                                  auto& gw = t.grad_buffer(iw);
                                  for (Index j = 0; j < k; ++j) {
                                    StridedMut gwk(gw.data() + j, cout, cin,
                                                   Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(cin * k, k));
                                    gwk.noalias() += g * padded.middleCols(j, len).transpose();
                                  }
                                }
                                if (t.requires_grad(ix)) {
                                  RowMatrix<Scalar> gpad = RowMatrix<Scalar>::Zero(cin, len + 2 * pad);
                                  for (Index j = 0; j < k; ++j) {
                                    Strided wk(w.data().data() + j, cout, cin,
                                               Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(cin * k, k));
                                    gpad.middleCols(j, len).noalias() += wk.transpose() * g;
                                  }
                                  RowMatrix<Scalar> gx = gpad.middleCols(pad, len);
                                  t.accumulate(ix, Eigen::Map<const typename Tensor<Scalar>::Vector>(gx.data(), gx.size()));
                                }
                              });
}

// ---- time differences ----------------------------------------------------

/// Central differences on interior timesteps: C x T -> C x (T - 2).
template <typename Scalar>
RowMatrix<Scalar> time_derivative_values(const Eigen::Ref<const RowMatrix<Scalar>>& x, Scalar dt, int order) {
  const Index len = x.cols();
  if (len < 3) throw DimensionError("time_derivative: need at least 3 timesteps, got " + std::to_string(len));
  if (!(dt > 0)) throw DimensionError("time_derivative: dt must be positive");
  const Index n = len - 2;
  if (order == 1) return (x.middleCols(2, n) - x.middleCols(0, n)) / (2 * dt);
  if (order == 2) return (x.middleCols(2, n) - 2 * x.middleCols(1, n) + x.middleCols(0, n)) / (dt * dt);
  throw ContractViolation("time_derivative: order must be 1 or 2");
}

template <typename Scalar>
Var<Scalar> time_derivative(const Var<Scalar>& a, Scalar dt, int order) {
  const auto& v = a.value();
  if (v.rank() != 2) throw DimensionError("time_derivative: expected C x T input");
  RowMatrix<Scalar> out = time_derivative_values<Scalar>(v.matrix(), dt, order);
  const Index r = v.rows(), len = v.cols();
  return a.tape()->record(Tensor<Scalar>::from_matrix(out), {a.id()},
                          [r, len, dt, order](Tape<Scalar>& t, std::size_t self) {
                            const Index n = len - 2;
                            Eigen::Map<const RowMatrix<Scalar>> g(t.grad_of(self).data(), r, n);
                            RowMatrix<Scalar> gi = RowMatrix<Scalar>::Zero(r, len);
                            if (order == 1) {
                              gi.middleCols(2, n) += g / (2 * dt);
                              gi.middleCols(0, n) -= g / (2 * dt);
                            } else {
                              const Scalar h2 = dt * dt;
                              gi.middleCols(2, n) += g / h2;
                              gi.middleCols(1, n) -= 2 * g / h2;
                              gi.middleCols(0, n) += g / h2;
                            }
                            t.accumulate(t.input(self, 0),
                                         Eigen::Map<const typename Tensor<Scalar>::Vector>(gi.data(), gi.size()));
                          });
}

/// Drops the first and last timestep so values align with time_derivative output.
template <typename Scalar>
Var<Scalar> interior(const Var<Scalar>& a) {
  if (a.cols() < 3) throw DimensionError("interior: need at least 3 timesteps");
  return cols(a, 1, a.cols() - 2);
}

}  // namespace physden
