#pragma once

// Reverse-mode autodiff over dense real matrices.
//
// Complex quantities are carried in flattened form (real block | imaginary
// block along columns), so every differentiable op is real-linear or
// elementwise and no complex-gradient convention is needed.

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "eign/matrix.hpp"
#include "eign/rng.hpp"
#include "eign/sparse.hpp"

namespace eign {

class AutodiffError : public Error {
 public:
  using Error::Error;
};

/// A sparse complex operator paired with its adjoint for the backward pass.
struct LinearOp {
  SparseComplexMatrix a;
  SparseComplexMatrix ah;

  explicit LinearOp(SparseComplexMatrix m) : a(std::move(m)), ah(a.adjoint()) {}
  std::size_t rows() const { return a.rows(); }
  std::size_t cols() const { return a.cols(); }
};

using LinearOpPtr = std::shared_ptr<const LinearOp>;

inline LinearOpPtr make_op(SparseComplexMatrix m) { return std::make_shared<const LinearOp>(std::move(m)); }

/// Re(Z) for flattened Z of width 2k: the first k columns.
inline Matrix real_block(const Matrix& flat) {
  const std::size_t k = flat.cols() / 2;
  Matrix out(flat.rows(), k);
  for (std::size_t r = 0; r < flat.rows(); ++r)
    for (std::size_t c = 0; c < k; ++c) out(r, c) = flat(r, c);
  return out;
}

using NodeId = std::size_t;

class Tape {
 public:
  NodeId constant(Matrix v) { return push(std::move(v), {}, nullptr); }

  /// Leaf whose gradient is added into `*sink` during backward.
  NodeId leaf(const Matrix& v, Matrix* sink) {
    NodeId id = push(v, {}, nullptr);
    nodes_[id].sink = sink;
    nodes_[id].requires_grad = true;
    return id;
  }

  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }

  const Matrix& value(NodeId id) const { return nodes_.at(id).value; }
  std::size_t size() const { return nodes_.size(); }

  NodeId matmul(NodeId a, NodeId b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (av.cols() != bv.rows()) throw DimensionError("tape matmul: " + shape_str(av) + " * " + shape_str(bv));
    return push(eign::matmul(av, bv), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
      if (t.needs(a)) gemm_nt_acc(g, t.value(b), t.grad(a));
      if (t.needs(b)) gemm_tn_acc(t.value(a), g, t.grad(b));
    });
  }

  NodeId add(NodeId a, NodeId b) {
    require_same_shape(value(a), value(b), "tape add");
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += value(b).data()[i];
    return push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
  }

  NodeId add_n(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw AutodiffError("add_n: no operands");
    NodeId acc = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
    return acc;
  }

  /// Adds a 1 x k row to every row.
  NodeId add_bias(NodeId a, NodeId bias) {
    const Matrix& av = value(a);
    const Matrix& bv = value(bias);
    if (bv.rows() != 1 || bv.cols() != av.cols()) throw DimensionError("tape add_bias: bias shape " + shape_str(bv));
    Matrix out = av;
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv(0, c);
    return push(std::move(out), {a, bias}, [a, bias](Tape& t, const Matrix& g, const Matrix&) {
      t.accumulate(a, g);
      if (t.needs(bias)) {
        Matrix& gb = t.grad(bias);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
      }
    });
  }

  NodeId scale(NodeId a, double s) {
    Matrix out = value(a);
    for (double& v : out.data()) v *= s;
    return push(std::move(out), {a}, [a, s](Tape& t, const Matrix& g, const Matrix&) {
      if (!t.needs(a)) return;
      Matrix& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += s * g.data()[i];
    });
  }

  NodeId tanh(NodeId a) {
    Matrix out = value(a);
    for (double& v : out.data()) v = std::tanh(v);
    return push(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix& y) {
      if (!t.needs(a)) return;
      Matrix& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * (1.0 - y.data()[i] * y.data()[i]);
    });
  }

  NodeId relu(NodeId a) {
    Matrix out = value(a);
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return push(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
      if (!t.needs(a)) return;
      const Matrix& x = t.value(a);
      Matrix& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x.data()[i] > 0.0) ga.data()[i] += g.data()[i];
    });
  }

  NodeId abs(NodeId a) {
    Matrix out = value(a);
    for (double& v : out.data()) v = std::fabs(v);
    return push(std::move(out), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
      if (!t.needs(a)) return;
      const Matrix& x = t.value(a);
      Matrix& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double x_i = x.data()[i];
        ga.data()[i] += x_i > 0.0 ? g.data()[i] : (x_i < 0.0 ? -g.data()[i] : 0.0);
      }
    });
  }

  NodeId hadamard(NodeId a, NodeId b) {
    require_same_shape(value(a), value(b), "tape hadamard");
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= value(b).data()[i];
    return push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
      if (t.needs(a)) {
        Matrix& ga = t.grad(a);
        const Matrix& bv = t.value(b);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * bv.data()[i];
      }
      if (t.needs(b)) {
        Matrix& gb = t.grad(b);
        const Matrix& av = t.value(a);
        for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] += g.data()[i] * av.data()[i];
      }
    });
  }

  /// Inverted dropout. Identity outside training or for p = 0.
  NodeId dropout(NodeId a, double p, Rng& rng, bool training) {
    if (!(p >= 0.0 && p < 1.0)) throw AutodiffError("dropout: p must lie in [0, 1)");
    if (!training || p == 0.0) return a;
    Matrix mask(value(a).rows(), value(a).cols());
    const double keep = 1.0 / (1.0 - p);
    for (double& m : mask.data()) m = rng.bernoulli(p) ? 0.0 : keep;
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
    return push(std::move(out), {a}, [a, mask = std::move(mask)](Tape& t, const Matrix& g, const Matrix&) {
      if (!t.needs(a)) return;
      Matrix& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * mask.data()[i];
    });
  }

  NodeId concat_cols(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw AutodiffError("concat_cols: no operands");
    const std::size_t rows = value(xs[0]).rows();
    std::size_t cols = 0;
    for (NodeId x : xs) {
      if (value(x).rows() != rows) throw DimensionError("concat_cols: row mismatch");
      cols += value(x).cols();
    }
    Matrix out(rows, cols);
    std::size_t off = 0;
    for (NodeId x : xs) {
      const Matrix& v = value(x);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < v.cols(); ++c) out(r, off + c) = v(r, c);
      off += v.cols();
    }
    return push(std::move(out), xs, [xs](Tape& t, const Matrix& g, const Matrix&) {
      std::size_t o = 0;
      for (NodeId x : xs) {
        const std::size_t w = t.value(x).cols();
        if (t.needs(x)) {
          Matrix& gx = t.grad(x);
          for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < w; ++c) gx(r, c) += g(r, o + c);
        }
        o += w;
      }
    });
  }

  /// Y = A X in flattened complex form. With `real_input`, X has zero
  /// imaginary part and is passed with width k; Y always has width 2k.
  NodeId apply(const LinearOpPtr& op, NodeId x, bool real_input) {
    const Matrix& xv = value(x);
    if (xv.rows() != op->cols()) throw DimensionError("tape apply: operator/input mismatch");
    if (!real_input && xv.cols() % 2 != 0) throw DimensionError("tape apply: flattened input needs even width");
    return push(op->a.multiply_flat(xv, real_input), {x}, [op, x, real_input](Tape& t, const Matrix& g, const Matrix&) {
      if (!t.needs(x)) return;
      Matrix back = op->ah.multiply_flat(g, false);
      if (real_input) back = real_block(back);
      t.accumulate(x, back);
    });
  }

  /// Y = Re(A) X for real operators and real X.
  NodeId apply_real(const LinearOpPtr& op, NodeId x) {
    const Matrix& xv = value(x);
    if (xv.rows() != op->cols()) throw DimensionError("tape apply_real: operator/input mismatch");
    return push(op->a.multiply_real(xv), {x}, [op, x](Tape& t, const Matrix& g, const Matrix&) {
      t.accumulate(x, op->ah.multiply_real(g));
    });
  }

  /// Real weight W (k x n) applied to a flattened complex X (width 2k):
  /// [Re X W | Im X W].
  NodeId flat_matmul(NodeId x, NodeId w) {
    const Matrix& xv = value(x);
    const Matrix& wv = value(w);
    const std::size_t k = wv.rows(), n = wv.cols();
    if (xv.cols() != 2 * k) throw DimensionError("tape flat_matmul: " + shape_str(xv) + " vs weight " + shape_str(wv));
    auto halves = [](const Matrix& m, std::size_t width) {
      Matrix re(m.rows(), width), im(m.rows(), width);
      for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < width; ++c) {
          re(r, c) = m(r, c);
          im(r, c) = m(r, width + c);
        }
      return std::pair{std::move(re), std::move(im)};
    };
    auto [xr, xi] = halves(xv, k);
    Matrix out(xv.rows(), 2 * n);
    Matrix yr = eign::matmul(xr, wv), yi = eign::matmul(xi, wv);
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < n; ++c) {
        out(r, c) = yr(r, c);
        out(r, n + c) = yi(r, c);
      }
    return push(std::move(out), {x, w}, [x, w, k, n, halves](Tape& t, const Matrix& g, const Matrix&) {
      auto [gr, gi] = halves(g, n);
      if (t.needs(x)) {
        Matrix dr(gr.rows(), k), di(gi.rows(), k);
        gemm_nt_acc(gr, t.value(w), dr);
        gemm_nt_acc(gi, t.value(w), di);
        Matrix& gx = t.grad(x);
        for (std::size_t r = 0; r < gx.rows(); ++r)
          for (std::size_t c = 0; c < k; ++c) {
            gx(r, c) += dr(r, c);
            gx(r, k + c) += di(r, c);
          }
      }
      if (t.needs(w)) {
        auto [xr2, xi2] = halves(t.value(x), k);
        gemm_tn_acc(xr2, gr, t.grad(w));
        gemm_tn_acc(xi2, gi, t.grad(w));
      }
    });
  }

  /// Mean squared error over rows with mask[r] set.
  NodeId mse(NodeId pred, const Matrix& target, const std::vector<std::uint8_t>& mask) {
    const Matrix& p = value(pred);
    require_same_shape(p, target, "mse");
    const std::size_t count = masked_count(mask, p.rows()) * p.cols();
    double loss = 0.0;
    for (std::size_t r = 0; r < p.rows(); ++r)
      if (mask[r])
        for (std::size_t c = 0; c < p.cols(); ++c) loss += (p(r, c) - target(r, c)) * (p(r, c) - target(r, c));
    Matrix out(1, 1, loss / static_cast<double>(count));
    return push(std::move(out), {pred}, [pred, target, mask, count](Tape& t, const Matrix& g, const Matrix&) {
      if (!t.needs(pred)) return;
      const Matrix& pv = t.value(pred);
      Matrix& gp = t.grad(pred);
      const double s = 2.0 * g(0, 0) / static_cast<double>(count);
      for (std::size_t r = 0; r < pv.rows(); ++r)
        if (mask[r])
          for (std::size_t c = 0; c < pv.cols(); ++c) gp(r, c) += s * (pv(r, c) - target(r, c));
    });
  }

  /// Mean binary cross-entropy on logits over rows with mask[r] set.
  NodeId bce_with_logits(NodeId logits, const Matrix& labels, const std::vector<std::uint8_t>& mask) {
    const Matrix& z = value(logits);
    require_same_shape(z, labels, "bce_with_logits");
    const std::size_t count = masked_count(mask, z.rows()) * z.cols();
    double loss = 0.0;
    for (std::size_t r = 0; r < z.rows(); ++r)
      if (mask[r])
        for (std::size_t c = 0; c < z.cols(); ++c) {
          const double x = z(r, c);
          loss += std::max(x, 0.0) - x * labels(r, c) + std::log1p(std::exp(-std::fabs(x)));
        }
    Matrix out(1, 1, loss / static_cast<double>(count));
    return push(std::move(out), {logits}, [logits, labels, mask, count](Tape& t, const Matrix& g, const Matrix&) {
      if (!t.needs(logits)) return;
      const Matrix& zv = t.value(logits);
      Matrix& gz = t.grad(logits);
      const double s = g(0, 0) / static_cast<double>(count);
      for (std::size_t r = 0; r < zv.rows(); ++r)
        if (mask[r])
          for (std::size_t c = 0; c < zv.cols(); ++c) {
            const double sig = 1.0 / (1.0 + std::exp(-zv(r, c)));
            gz(r, c) += s * (sig - labels(r, c));
          }
    });
  }

  /// Propagates d(loss)/d(node) = seed from a 1 x 1 node and flushes leaf
  /// gradients into their sinks. The tape is cleared afterwards.
  void backward(NodeId loss, double seed = 1.0) {
    const Matrix& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) throw AutodiffError("backward: loss must be a 1x1 scalar");
    if (!requires_grad(loss)) throw AutodiffError("backward: loss does not depend on any parameter");
    grad(loss)(0, 0) += seed;
    for (std::size_t i = loss + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty()) continue;
      if (n.backward) n.backward(*this, n.grad, n.value);
      if (n.sink) {
        require_same_shape(*n.sink, n.grad, "backward sink");
        for (std::size_t k = 0; k < n.grad.size(); ++k) n.sink->data()[k] += n.grad.data()[k];
      }
    }
    nodes_.clear();
  }

 private:
  using Backward = std::function<void(Tape&, const Matrix& grad, const Matrix& value)>;

  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Matrix* sink = nullptr;
    bool requires_grad = false;
  };

  NodeId push(Matrix v, const std::vector<NodeId>& parents, Backward bw) {
    if (!all_finite(v)) throw AutodiffError("non-finite value produced at tape node " + std::to_string(nodes_.size()));
    bool req = false;
    for (NodeId p : parents) req = req || nodes_.at(p).requires_grad;
    nodes_.push_back(Node{std::move(v), {}, req ? std::move(bw) : Backward{}, nullptr, req});
    return nodes_.size() - 1;
  }

  bool needs(NodeId id) const { return nodes_[id].requires_grad; }

  Matrix& grad(NodeId id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void accumulate(NodeId id, const Matrix& g) {
    if (!needs(id)) return;
    Matrix& t = grad(id);
    require_same_shape(t, g, "gradient accumulate");
    for (std::size_t i = 0; i < g.size(); ++i) t.data()[i] += g.data()[i];
  }

  static std::size_t masked_count(const std::vector<std::uint8_t>& mask, std::size_t rows) {
    if (mask.size() != rows) throw DimensionError("loss mask length mismatch");
    std::size_t c = 0;
    for (auto m : mask) c += m != 0;
    if (c == 0) throw AutodiffError("loss mask selects no rows");
    return c;
  }

  std::vector<Node> nodes_;
};

}  // namespace eign
