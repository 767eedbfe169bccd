#ifndef GROUNDING_TENSOR_H_
#define GROUNDING_TENSOR_H_

// Dense double-precision tensors and a reverse-mode tape.
//
// Everything the grounding network needs is expressed with 2-D tensors:
// a vector is a 1 x n row, a scalar is 1 x 1. Ops record themselves on the
// tape that owns their inputs; Tape::Backward walks the records in reverse
// creation order, which is a valid topological order because every node
// only refers to earlier nodes.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace grounding::tensor {

using Shape = std::vector<std::size_t>;

std::string ShapeString(const Shape &shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  // 1 x n row vector.
  static Tensor Row(std::vector<double> values);
  // r x c matrix from nested rows.
  static Tensor Matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor Scalar(double value) { return Tensor({1, 1}, value); }

  const Shape &shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double &operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double &at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double> &data() const { return data_; }

  bool AllFinite() const;

  friend bool operator==(const Tensor &a, const Tensor &b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

class Tape;

// Handle to a node recorded on a tape. Cheap to copy; only valid while the
// owning tape is alive.
class Var {
 public:
  Var() = default;
  Tape *tape() const { return tape_; }
  std::size_t id() const { return id_; }
  const Tensor &value() const;
  const Shape &shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape *tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape *tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  // Leaf whose gradient is tracked.
  Var Parameter(Tensor value);
  // Leaf that never receives a gradient.
  Var Constant(Tensor value);

  const Tensor &value(Var v) const;
  // Gradient of the last Backward() loss w.r.t. v; zeros when v is not
  // reachable from the loss.
  Tensor grad(Var v) const;

  // Reverse sweep from a scalar loss. Visits each recorded node at most once.
  void Backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Used by the op implementations.
  using BackwardFn = std::function<void(Tape &, std::size_t self)>;
  Var Record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Tensor &grad_ref(std::size_t id) const { return nodes_[id].grad; }
  // Adds into the gradient buffer of node id (allocating it on first use).
  Tensor &grad_buffer(std::size_t id);
  const Tensor &value_ref(std::size_t id) const { return nodes_[id].value; }

  // Nodes fed into Relu, in recording order. Their sign patterns tell
  // whether two evaluations sit on the same linear piece.
  const std::vector<std::size_t> &relu_inputs() const { return relu_inputs_; }
  void NoteReluInput(std::size_t id) { relu_inputs_.push_back(id); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::vector<std::size_t> relu_inputs_;
};

// Forward ops. All inputs must live on the same tape.
Var MatMul(Var a, Var b);                     // (m x k)(k x n)
Var Add(Var a, Var b);                        // same shape
Var AddBias(Var m, Var bias);                 // (m x n) + (1 x n) broadcast over rows
Var ConcatCols(Var a, Var b);                 // (m x p) ++ (m x q) -> m x (p+q)
Var RepeatRows(Var row, std::size_t count);   // (1 x n) -> count x n
Var Reshape(Var v, Shape shape);              // same element count
Var Relu(Var v);
// Row r of a matrix as a 1 x cols tensor.
Var SelectRow(Var m, std::size_t r);
Var Scale(Var v, double factor);
// Softmax over all elements of v at the given temperature; output keeps v's shape.
Var Softmax(Var v, double temperature);
// Squared Euclidean distance between same-shaped tensors, as a 1 x 1 scalar.
Var L2Sq(Var a, Var b);

// Plain (untracked) kernels, exposed for tests and for scoring paths.
Tensor MatMul(const Tensor &a, const Tensor &b);
std::vector<double> SoftmaxValues(std::span<const double> values, double temperature);

}  // namespace grounding::tensor

#endif  // GROUNDING_TENSOR_H_
