#include "grounding/tensor.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "grounding/errors.h"

namespace grounding::tensor {
namespace {

std::size_t Product(const Shape &shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void Require2D(const Tensor &t, const char *op) {
  if (t.shape().size() != 2) {
    throw ShapeError(std::string(op) + ": expected a 2-D tensor, got " +
                     ShapeString(t.shape()));
  }
}

Tape &SameTape(Var a, Var b, const char *op) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw ContractError(std::string(op) + ": operands recorded on different tapes");
  }
  return *a.tape();
}

// c (m x n) += a (m x k) * b (k x n)
void GemmNN(const double *a, const double *b, double *c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double *crow = c + i * n;
    const double *arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double *brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c (m x k) += g (m x n) * b^T, b is (k x n)
void GemmNT(const double *g, const double *b, double *c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double *grow = g + i * n;
    double *crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double *brow = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
      crow[p] += s;
    }
  }
}

// c (k x n) += a^T * g, a is (m x k), g is (m x n)
void GemmTN(const double *a, const double *g, double *c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double *arow = a + i * k;
    const double *grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double *crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

}  // namespace

std::string ShapeString(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(Product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != Product(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + ShapeString(shape_));
  }
}

Tensor Tensor::Row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto &row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

std::size_t Tensor::rows() const { return shape_.size() == 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const {
  return shape_.size() == 2 ? shape_[1] : data_.size();
}

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

const Tensor &Var::value() const { return tape_->value(*this); }

Var Tape::Parameter(Tensor value) {
  if (!value.AllFinite()) throw NumericError("non-finite parameter value");
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::Constant(Tensor value) {
  if (!value.AllFinite()) throw NumericError("non-finite constant value");
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor &Tape::value(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw ContractError("variable does not belong to this tape");
  }
  return nodes_[v.id()].value;
}

Tensor Tape::grad(Var v) const {
  const Node &node = nodes_.at(v.id());
  if (node.grad.size() == 0) return Tensor(node.value.shape(), 0.0);
  return node.grad;
}

Tensor &Tape::grad_buffer(std::size_t id) {
  Node &node = nodes_[id];
  if (node.grad.size() == 0) node.grad = Tensor(node.value.shape(), 0.0);
  return node.grad;
}

Var Tape::Record(Tensor value, std::vector<std::size_t> parents,
                 BackwardFn backward) {
  if (!value.AllFinite()) throw NumericError("op produced a non-finite value");
  Node node;
  node.value = std::move(value);
  for (std::size_t p : parents) node.requires_grad |= nodes_[p].requires_grad;
  node.parents = std::move(parents);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::Backward(Var loss) {
  if (loss.tape() != this) throw ContractError("loss belongs to another tape");
  if (value(loss).size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " +
                        ShapeString(value(loss).shape()));
  }
  for (Node &node : nodes_) node.grad = Tensor();
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node &node = nodes_[id];
    if (!node.backward || node.grad.size() == 0) continue;
    node.backward(*this, id);
  }
}

Var MatMul(Var a, Var b) {
  Tape &tape = SameTape(a, b, "matmul");
  const Tensor &av = a.value();
  const Tensor &bv = b.value();
  Require2D(av, "matmul");
  Require2D(bv, "matmul");
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw ShapeError("matmul: " + ShapeString(av.shape()) + " x " +
                     ShapeString(bv.shape()));
  }
  Tensor out({m, n}, 0.0);
  GemmNN(av.values().data(), bv.values().data(), out.values().data(), m, k, n);
  const std::size_t ia = a.id(), ib = b.id();
  return tape.Record(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape &t, std::size_t self) {
    const double *g = t.grad_ref(self).values().data();
    if (t.requires_grad(ia)) {
      GemmNT(g, t.value_ref(ib).values().data(),
             t.grad_buffer(ia).values().data(), m, k, n);
    }
    if (t.requires_grad(ib)) {
      GemmTN(t.value_ref(ia).values().data(), g,
             t.grad_buffer(ib).values().data(), m, k, n);
    }
  });
}

Var Add(Var a, Var b) {
  Tape &tape = SameTape(a, b, "add");
  if (a.shape() != b.shape()) {
    throw ShapeError("add: " + ShapeString(a.shape()) + " vs " +
                     ShapeString(b.shape()));
  }
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.Record(std::move(out), {ia, ib}, [ia, ib](Tape &t, std::size_t self) {
    const Tensor &g = t.grad_ref(self);
    for (std::size_t p : {ia, ib}) {
      if (!t.requires_grad(p)) continue;
      Tensor &dst = t.grad_buffer(p);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
  });
}

Var AddBias(Var m, Var bias) {
  Tape &tape = SameTape(m, bias, "add_bias");
  const Tensor &mv = m.value();
  const Tensor &bv = bias.value();
  Require2D(mv, "add_bias");
  if (bv.rows() != 1 || bv.cols() != mv.cols()) {
    throw ShapeError("add_bias: " + ShapeString(mv.shape()) + " + " +
                     ShapeString(bv.shape()));
  }
  const std::size_t rows = mv.rows(), cols = mv.cols();
  Tensor out = mv;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += bv[c];
  const std::size_t im = m.id(), ib = bias.id();
  return tape.Record(std::move(out), {im, ib}, [im, ib, rows, cols](Tape &t, std::size_t self) {
    const Tensor &g = t.grad_ref(self);
    if (t.requires_grad(im)) {
      Tensor &dst = t.grad_buffer(im);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor &dst = t.grad_buffer(ib);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) dst[c] += g[r * cols + c];
    }
  });
}

Var ConcatCols(Var a, Var b) {
  Tape &tape = SameTape(a, b, "concat");
  const Tensor &av = a.value();
  const Tensor &bv = b.value();
  Require2D(av, "concat");
  Require2D(bv, "concat");
  if (av.rows() != bv.rows()) {
    throw ShapeError("concat: row mismatch " + ShapeString(av.shape()) + " ++ " +
                     ShapeString(bv.shape()));
  }
  const std::size_t rows = av.rows(), p = av.cols(), q = bv.cols();
  Tensor out({rows, p + q});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(&av.values()[r * p], p, &out.values()[r * (p + q)]);
    std::copy_n(&bv.values()[r * q], q, &out.values()[r * (p + q) + p]);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.Record(std::move(out), {ia, ib}, [ia, ib, rows, p, q](Tape &t, std::size_t self) {
    const Tensor &g = t.grad_ref(self);
    if (t.requires_grad(ia)) {
      Tensor &dst = t.grad_buffer(ia);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < p; ++c) dst[r * p + c] += g[r * (p + q) + c];
    }
    if (t.requires_grad(ib)) {
      Tensor &dst = t.grad_buffer(ib);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < q; ++c) dst[r * q + c] += g[r * (p + q) + p + c];
    }
  });
}

Var RepeatRows(Var row, std::size_t count) {
  Tape &tape = *row.tape();
  const Tensor &rv = row.value();
  if (rv.shape().size() != 2 || rv.rows() != 1) {
    throw ShapeError("repeat_rows: expected a row vector, got " +
                     ShapeString(rv.shape()));
  }
  const std::size_t n = rv.cols();
  Tensor out({count, n});
  for (std::size_t r = 0; r < count; ++r)
    std::copy_n(rv.values().data(), n, &out.values()[r * n]);
  const std::size_t ir = row.id();
  return tape.Record(std::move(out), {ir}, [ir, count, n](Tape &t, std::size_t self) {
    const Tensor &g = t.grad_ref(self);
    Tensor &dst = t.grad_buffer(ir);
    for (std::size_t r = 0; r < count; ++r)
      for (std::size_t c = 0; c < n; ++c) dst[c] += g[r * n + c];
  });
}

Var Reshape(Var v, Shape shape) {
  Tape &tape = *v.tape();
  if (Product(shape) != v.value().size()) {
    throw ShapeError("reshape: " + ShapeString(v.shape()) + " -> " +
                     ShapeString(shape));
  }
  Tensor out(std::move(shape), v.value().data());
  const std::size_t iv = v.id();
  return tape.Record(std::move(out), {iv}, [iv](Tape &t, std::size_t self) {
    const Tensor &g = t.grad_ref(self);
    Tensor &dst = t.grad_buffer(iv);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

Var Relu(Var v) {
  Tape &tape = *v.tape();
  Tensor out = v.value();
  for (double &x : out.values()) x = x > 0.0 ? x : 0.0;
  const std::size_t iv = v.id();
  tape.NoteReluInput(iv);
  return tape.Record(std::move(out), {iv}, [iv](Tape &t, std::size_t self) {
    const Tensor &g = t.grad_ref(self);
    const Tensor &x = t.value_ref(iv);
    Tensor &dst = t.grad_buffer(iv);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > 0.0) dst[i] += g[i];
  });
}

Var SelectRow(Var m, std::size_t r) {
  Tape &tape = *m.tape();
  const Tensor &mv = m.value();
  Require2D(mv, "select_row");
  if (r >= mv.rows()) {
    throw ShapeError("select_row: row " + std::to_string(r) + " of " +
                     ShapeString(mv.shape()));
  }
  const std::size_t cols = mv.cols();
  Tensor out({1, cols});
  std::copy_n(&mv.values()[r * cols], cols, out.values().data());
  const std::size_t im = m.id();
  return tape.Record(std::move(out), {im}, [im, r, cols](Tape &t, std::size_t self) {
    const Tensor &g = t.grad_ref(self);
    Tensor &dst = t.grad_buffer(im);
    for (std::size_t c = 0; c < cols; ++c) dst[r * cols + c] += g[c];
  });
}

Var Scale(Var v, double factor) {
  Tape &tape = *v.tape();
  Tensor out = v.value();
  for (double &x : out.values()) x *= factor;
  const std::size_t iv = v.id();
  return tape.Record(std::move(out), {iv}, [iv, factor](Tape &t, std::size_t self) {
    const Tensor &g = t.grad_ref(self);
    Tensor &dst = t.grad_buffer(iv);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += factor * g[i];
  });
}

std::vector<double> SoftmaxValues(std::span<const double> values,
                                  double temperature) {
  if (!(temperature > 0.0)) {
    throw DomainError("softmax temperature must be positive");
  }
  if (values.empty()) throw ShapeError("softmax of an empty tensor");
  const double top = *std::max_element(values.begin(), values.end());
  std::vector<double> out(values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::exp((values[i] - top) / temperature);
    total += out[i];
  }
  for (double &x : out) x /= total;
  return out;
}

Var Softmax(Var v, double temperature) {
  Tape &tape = *v.tape();
  Tensor out(v.shape(), SoftmaxValues(v.value().values(), temperature));
  const std::size_t iv = v.id();
  return tape.Record(std::move(out), {iv}, [iv, temperature](Tape &t, std::size_t self) {
    // d/dx_i = (1/T) * y_i * (g_i - sum_j g_j y_j)
    const Tensor &g = t.grad_ref(self);
    const Tensor &y = t.value_ref(self);
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
    Tensor &dst = t.grad_buffer(iv);
    for (std::size_t i = 0; i < g.size(); ++i)
      dst[i] += y[i] * (g[i] - dot) / temperature;
  });
}

Var L2Sq(Var a, Var b) {
  Tape &tape = SameTape(a, b, "l2_sq");
  if (a.value().size() != b.value().size()) {
    throw ShapeError("l2_sq: " + ShapeString(a.shape()) + " vs " +
                     ShapeString(b.shape()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) {
    const double d = a.value()[i] - b.value()[i];
    total += d * d;
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.Record(Tensor::Scalar(total), {ia, ib}, [ia, ib](Tape &t, std::size_t self) {
    const double g = t.grad_ref(self)[0];
    const Tensor &av = t.value_ref(ia);
    const Tensor &bv = t.value_ref(ib);
    if (t.requires_grad(ia)) {
      Tensor &dst = t.grad_buffer(ia);
      for (std::size_t i = 0; i < av.size(); ++i) dst[i] += 2.0 * g * (av[i] - bv[i]);
    }
    if (t.requires_grad(ib)) {
      Tensor &dst = t.grad_buffer(ib);
      for (std::size_t i = 0; i < av.size(); ++i) dst[i] -= 2.0 * g * (av[i] - bv[i]);
    }
  });
}

Tensor MatMul(const Tensor &a, const Tensor &b) {
  Require2D(a, "matmul");
  Require2D(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + ShapeString(a.shape()) + " x " +
                     ShapeString(b.shape()));
  }
  Tensor out({a.rows(), b.cols()}, 0.0);
  GemmNN(a.values().data(), b.values().data(), out.values().data(), a.rows(),
         a.cols(), b.cols());
  return out;
}

}  // namespace grounding::tensor
