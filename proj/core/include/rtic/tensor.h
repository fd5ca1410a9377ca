#pragma once
/*
 * Dense f64 tensors with a reverse-mode tape.
 *
 * A Tape records primitives in execution order. Leaves are either constants
 * or parameters bound to an external Tensor; Tape::backward() walks the record
 * in exact reverse and accumulates into each bound Tensor's grad buffer.
 * Every forward primitive rejects non-finite results with NumericError.
 */

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace rtic::nk {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& s);
std::string shape_str(const Shape& s);

struct Tensor {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first accumulation

  Tensor() = default;
  Tensor(Shape s, std::vector<double> v);
  static Tensor zeros(Shape s);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  std::size_t size() const { return values.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.size() > 1 ? shape[1] : 1; }
  double& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }

  void zero_grad() { grad.assign(values.size(), 0.0); }
  bool operator==(const Tensor& o) const { return shape == o.shape && values == o.values; }
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while its Tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Shape& shape() const;
  std::span<const double> values() const;
  double item() const;
  double at(std::size_t i, std::size_t j) const;
  std::size_t rows() const { return shape().at(0); }
  std::size_t cols() const { return shape().size() > 1 ? shape()[1] : 1; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // With record = false no backward closures are kept (forward-only scoring).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var param(Tensor& t);
  Var constant(Tensor t);
  Var constant(Shape s, std::vector<double> v) { return constant(Tensor(std::move(s), std::move(v))); }

  // Seeds d(loss)/d(loss) = 1 and propagates. loss must hold one element.
  void backward(Var loss);

  std::span<const double> grad(Var v) const;
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  // Primitive authoring interface, used by the op implementations.
  using Backward = std::function<void(Tape&, std::size_t self)>;
  Var push(Shape shape, std::vector<double> value, std::vector<std::size_t> inputs, Backward bw,
           const char* op);
  const std::vector<double>& value_of(std::size_t id) const { return nodes_[id].value; }
  const Shape& shape_of(std::size_t id) const { return nodes_[id].shape; }
  const std::vector<double>& grad_of(std::size_t id) const { return nodes_[id].grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Grad buffer of an input, allocated on first touch.
  std::vector<double>& grad_buffer(std::size_t id);

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    Backward backward;
    Tensor* bound = nullptr;
    bool needs_grad = false;
  };
  bool record_;
  std::vector<Node> nodes_;
};

// Primitives. Rank-1 operands behave as row vectors where a matrix is expected
// only where stated.

// (m,k)x(k,n) -> (m,n); (m,k)x(k) -> (m)
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
// Adds a length-n vector to every row of an (m,n) matrix.
Var add_bias(Var x, Var bias);
Var hadamard(Var a, Var b);
Var scalar_mul(Var a, double s);
Var add_scalar(Var a, double s);
// Multiplies by a learnable scalar held in a one-element Var.
Var scale_by(Var a, Var scalar);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var square(Var a);
Var softmax(Var a, std::size_t axis);
Var l2_normalize(Var a, std::size_t axis);
Var sum(Var a);
Var mean(Var a);
Var sum(Var a, std::size_t axis);
Var mean(Var a, std::size_t axis);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
Var reshape(Var a, Shape s);
// Flat element gather: out[i] = a.flat[index[i]]; output shape = shape.
Var gather(Var a, std::vector<std::size_t> index, Shape shape);
// Row gather from a matrix: out row i = a row index[i].
Var gather_rows(Var a, std::span<const std::size_t> index);

}  // namespace rtic::nk
