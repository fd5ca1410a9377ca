#include "rtic/tensor.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rtic/errors.h"

namespace rtic::nk {

std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  if (shape.empty() || shape.size() > 3) throw ShapeError("tensor rank must be 1..3, got " + shape_str(shape));
  for (auto d : shape)
    if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_str(shape));
  if (numel(shape) != values.size())
    throw ShapeError("tensor of shape " + shape_str(shape) + " given " + std::to_string(values.size()) +
                     " values");
}

Tensor Tensor::zeros(Shape s) {
  std::size_t n = numel(s);
  return Tensor(std::move(s), std::vector<double>(n, 0.0));
}

const Shape& Var::shape() const { return tape_->shape_of(id_); }
std::span<const double> Var::values() const { return tape_->value_of(id_); }
double Var::item() const {
  auto v = values();
  if (v.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return v[0];
}
double Var::at(std::size_t i, std::size_t j) const { return values()[i * cols() + j]; }

Var Tape::param(Tensor& t) {
  Node n;
  n.shape = t.shape;
  n.value = t.values;
  n.bound = record_ ? &t : nullptr;
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor t) {
  Node n;
  n.shape = std::move(t.shape);
  n.value = std::move(t.values);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(Shape shape, std::vector<double> value, std::vector<std::size_t> inputs, Backward bw,
               const char* op) {
  for (double x : value)
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite value produced by ") + op);
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(value);
  if (record_) {
    for (auto id : inputs) n.needs_grad = n.needs_grad || nodes_[id].needs_grad;
    if (n.needs_grad) n.backward = std::move(bw);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

std::vector<double>& Tape::grad_buffer(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

std::span<const double> Tape::grad(Var v) const { return nodes_[v.id()].grad; }

void Tape::backward(Var loss) {
  if (!record_) throw Error("backward() on a forward-only tape");
  if (nodes_[loss.id()].value.size() != 1) throw ShapeError("backward() requires a scalar loss");
  grad_buffer(loss.id())[0] += 1.0;
  for (std::size_t k = loss.id() + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, k);
    if (n.bound) {
      Tensor& t = *n.bound;
      if (t.grad.size() != t.values.size()) t.grad.assign(t.values.size(), 0.0);
      for (std::size_t i = 0; i < n.grad.size(); ++i) t.grad[i] += n.grad[i];
    }
  }
}

namespace {

Tape& same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw Error("operands live on different tapes");
  return a.tape();
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

struct AxisView {
  std::size_t outer, len, inner;
};

AxisView axis_view(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size())
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  AxisView v{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

template <class Fwd, class Deriv>
Var unary(Var a, const char* op, Fwd fwd, Deriv deriv) {
  Tape& t = a.tape();
  auto x = a.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  std::size_t ia = a.id();
  return t.push(a.shape(), std::move(y), {ia},
                [ia, deriv](Tape& t, std::size_t self) {
                  const auto& g = t.grad_of(self);
                  const auto& x = t.value_of(ia);
                  const auto& y = t.value_of(self);
                  auto& ga = t.grad_buffer(ia);
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
                },
                op);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() > 2 || sb.size() > 2) throw ShapeError("matmul: operands must be rank 1 or 2");
  const bool a_vec = sa.size() == 1;
  const bool b_vec = sb.size() == 1;
  const std::size_t m = a_vec ? 1 : sa[0];
  const std::size_t k = a_vec ? sa[0] : sa[1];
  const std::size_t kb = sb[0];
  const std::size_t n = b_vec ? 1 : sb[1];
  if (k != kb) throw ShapeError("matmul: inner dimensions differ " + shape_str(sa) + " x " + shape_str(sb));
  if (a_vec && b_vec) throw ShapeError("matmul: use hadamard+sum for vector dot products");

  auto A = a.values();
  auto B = b.values();
  std::vector<double> C(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &B[p * n];
      double* crow = &C[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  Shape out;
  if (a_vec) out = {n};
  else if (b_vec) out = {m};
  else out = {m, n};
  std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), std::move(C), {ia, ib},
                [ia, ib, m, k, n](Tape& t, std::size_t self) {
                  const auto& G = t.grad_of(self);
                  const auto& A = t.value_of(ia);
                  const auto& B = t.value_of(ib);
                  if (t.needs_grad(ia)) {
                    auto& GA = t.grad_buffer(ia);
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        const double* brow = &B[p * n];
                        const double* grow = &G[i * n];
                        for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                        GA[i * k + p] += s;
                      }
                  }
                  if (t.needs_grad(ib)) {
                    auto& GB = t.grad_buffer(ib);
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t p = 0; p < k; ++p) {
                        const double aip = A[i * k + p];
                        if (aip == 0.0) continue;
                        double* gbrow = &GB[p * n];
                        const double* grow = &G[i * n];
                        for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                      }
                  }
                },
                "matmul");
}

Var transpose(Var a) {
  if (a.shape().size() != 2) throw ShapeError("transpose: rank-2 operand required");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  auto x = a.values();
  std::vector<double> y(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[j * m + i] = x[i * n + j];
  std::size_t ia = a.id();
  return a.tape().push({n, m}, std::move(y), {ia},
                       [ia, m, n](Tape& t, std::size_t self) {
                         const auto& g = t.grad_of(self);
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
                       },
                       "transpose");
}

namespace {

Var binary_elementwise(Var a, Var b, double sb, const char* op) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, op);
  auto x = a.values();
  auto y = b.values();
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] + sb * y[i];
  std::size_t ia = a.id(), ib = b.id();
  return t.push(a.shape(), std::move(z), {ia, ib},
                [ia, ib, sb](Tape& t, std::size_t self) {
                  const auto& g = t.grad_of(self);
                  if (t.needs_grad(ia)) {
                    auto& ga = t.grad_buffer(ia);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                  }
                  if (t.needs_grad(ib)) {
                    auto& gb = t.grad_buffer(ib);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sb * g[i];
                  }
                },
                op);
}

}  // namespace

Var add(Var a, Var b) { return binary_elementwise(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return binary_elementwise(a, b, -1.0, "sub"); }

Var add_bias(Var x, Var bias) {
  Tape& t = same_tape(x, bias);
  const Shape& sx = x.shape();
  const std::size_t n = sx.back();
  if (bias.shape().size() != 1 || bias.shape()[0] != n)
    throw ShapeError("add_bias: bias " + shape_str(bias.shape()) + " does not match " + shape_str(sx));
  auto xv = x.values();
  auto bv = bias.values();
  std::vector<double> y(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = xv[i] + bv[i % n];
  std::size_t ix = x.id(), ib = bias.id();
  return t.push(sx, std::move(y), {ix, ib},
                [ix, ib, n](Tape& t, std::size_t self) {
                  const auto& g = t.grad_of(self);
                  if (t.needs_grad(ix)) {
                    auto& gx = t.grad_buffer(ix);
                    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                  }
                  if (t.needs_grad(ib)) {
                    auto& gb = t.grad_buffer(ib);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
                  }
                },
                "add_bias");
}

Var hadamard(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape(a, b, "hadamard");
  auto x = a.values();
  auto y = b.values();
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] * y[i];
  std::size_t ia = a.id(), ib = b.id();
  return t.push(a.shape(), std::move(z), {ia, ib},
                [ia, ib](Tape& t, std::size_t self) {
                  const auto& g = t.grad_of(self);
                  const auto& x = t.value_of(ia);
                  const auto& y = t.value_of(ib);
                  if (t.needs_grad(ia)) {
                    auto& ga = t.grad_buffer(ia);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
                  }
                  if (t.needs_grad(ib)) {
                    auto& gb = t.grad_buffer(ib);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
                  }
                },
                "hadamard");
}

Var scalar_mul(Var a, double s) {
  return unary(a, "scalar_mul", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var scale_by(Var a, Var scalar) {
  Tape& t = same_tape(a, scalar);
  if (scalar.values().size() != 1) throw ShapeError("scale_by: scalar operand must hold one element");
  const double s = scalar.values()[0];
  auto x = a.values();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = s * x[i];
  std::size_t ia = a.id(), is = scalar.id();
  return t.push(a.shape(), std::move(y), {ia, is},
                [ia, is](Tape& t, std::size_t self) {
                  const auto& g = t.grad_of(self);
                  const auto& x = t.value_of(ia);
                  const double s = t.value_of(is)[0];
                  if (t.needs_grad(ia)) {
                    auto& ga = t.grad_buffer(ia);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
                  }
                  if (t.needs_grad(is)) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x[i];
                    t.grad_buffer(is)[0] += acc;
                  }
                },
                "scale_by");
}

Var sigmoid(Var a) {
  return unary(
      a, "sigmoid",
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

// relu'(0) = 0.
Var relu(Var a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var square(Var a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var softmax(Var a, std::size_t axis) {
  const auto v = axis_view(a.shape(), axis, "softmax");
  auto x = a.values();
  std::vector<double> y(x.size());
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t in = 0; in < v.inner; ++in) {
      auto idx = [&](std::size_t l) { return (o * v.len + l) * v.inner + in; };
      double mx = x[idx(0)];
      for (std::size_t l = 1; l < v.len; ++l) mx = std::max(mx, x[idx(l)]);
      double z = 0.0;
      for (std::size_t l = 0; l < v.len; ++l) z += (y[idx(l)] = std::exp(x[idx(l)] - mx));
      for (std::size_t l = 0; l < v.len; ++l) y[idx(l)] /= z;
    }
  std::size_t ia = a.id();
  return a.tape().push(a.shape(), std::move(y), {ia},
                       [ia, v](Tape& t, std::size_t self) {
                         const auto& g = t.grad_of(self);
                         const auto& y = t.value_of(self);
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t o = 0; o < v.outer; ++o)
                           for (std::size_t in = 0; in < v.inner; ++in) {
                             auto idx = [&](std::size_t l) { return (o * v.len + l) * v.inner + in; };
                             double dot = 0.0;
                             for (std::size_t l = 0; l < v.len; ++l) dot += g[idx(l)] * y[idx(l)];
                             for (std::size_t l = 0; l < v.len; ++l) ga[idx(l)] += y[idx(l)] * (g[idx(l)] - dot);
                           }
                       },
                       "softmax");
}

Var l2_normalize(Var a, std::size_t axis) {
  const auto v = axis_view(a.shape(), axis, "l2_normalize");
  auto x = a.values();
  std::vector<double> y(x.size());
  std::vector<double> norms(v.outer * v.inner);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t in = 0; in < v.inner; ++in) {
      auto idx = [&](std::size_t l) { return (o * v.len + l) * v.inner + in; };
      double ss = 0.0;
      for (std::size_t l = 0; l < v.len; ++l) ss += x[idx(l)] * x[idx(l)];
      const double nrm = std::sqrt(ss);
      if (!(nrm > 0.0)) throw NumericError("l2_normalize: zero-norm input");
      norms[o * v.inner + in] = nrm;
      for (std::size_t l = 0; l < v.len; ++l) y[idx(l)] = x[idx(l)] / nrm;
    }
  std::size_t ia = a.id();
  return a.tape().push(a.shape(), std::move(y), {ia},
                       [ia, v, norms = std::move(norms)](Tape& t, std::size_t self) {
                         const auto& g = t.grad_of(self);
                         const auto& y = t.value_of(self);
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t o = 0; o < v.outer; ++o)
                           for (std::size_t in = 0; in < v.inner; ++in) {
                             auto idx = [&](std::size_t l) { return (o * v.len + l) * v.inner + in; };
                             const double nrm = norms[o * v.inner + in];
                             double dot = 0.0;
                             for (std::size_t l = 0; l < v.len; ++l) dot += g[idx(l)] * y[idx(l)];
                             for (std::size_t l = 0; l < v.len; ++l)
                               ga[idx(l)] += (g[idx(l)] - y[idx(l)] * dot) / nrm;
                           }
                       },
                       "l2_normalize");
}

Var sum(Var a) {
  double s = 0.0;
  for (double x : a.values()) s += x;
  std::size_t ia = a.id();
  return a.tape().push({1}, {s}, {ia},
                       [ia](Tape& t, std::size_t self) {
                         const double g = t.grad_of(self)[0];
                         for (auto& x : t.grad_buffer(ia)) x += g;
                       },
                       "sum");
}

Var mean(Var a) { return scalar_mul(sum(a), 1.0 / static_cast<double>(a.values().size())); }

Var sum(Var a, std::size_t axis) {
  const auto v = axis_view(a.shape(), axis, "sum");
  Shape out = a.shape();
  out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out.empty()) out = {1};
  auto x = a.values();
  std::vector<double> y(v.outer * v.inner, 0.0);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t l = 0; l < v.len; ++l)
      for (std::size_t in = 0; in < v.inner; ++in) y[o * v.inner + in] += x[(o * v.len + l) * v.inner + in];
  std::size_t ia = a.id();
  return a.tape().push(std::move(out), std::move(y), {ia},
                       [ia, v](Tape& t, std::size_t self) {
                         const auto& g = t.grad_of(self);
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t o = 0; o < v.outer; ++o)
                           for (std::size_t l = 0; l < v.len; ++l)
                             for (std::size_t in = 0; in < v.inner; ++in)
                               ga[(o * v.len + l) * v.inner + in] += g[o * v.inner + in];
                       },
                       "sum_axis");
}

Var mean(Var a, std::size_t axis) {
  const std::size_t len = axis_view(a.shape(), axis, "mean").len;
  return scalar_mul(sum(a, axis), 1.0 / static_cast<double>(len));
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto v = axis_view(a.shape(), axis, "slice");
  if (begin >= end || end > v.len)
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
                     shape_str(a.shape()));
  Shape out = a.shape();
  out[axis] = end - begin;
  const std::size_t w = end - begin;
  auto x = a.values();
  std::vector<double> y(v.outer * w * v.inner);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t l = 0; l < w; ++l)
      for (std::size_t in = 0; in < v.inner; ++in)
        y[(o * w + l) * v.inner + in] = x[(o * v.len + begin + l) * v.inner + in];
  std::size_t ia = a.id();
  return a.tape().push(std::move(out), std::move(y), {ia},
                       [ia, v, begin, w](Tape& t, std::size_t self) {
                         const auto& g = t.grad_of(self);
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t o = 0; o < v.outer; ++o)
                           for (std::size_t l = 0; l < w; ++l)
                             for (std::size_t in = 0; in < v.inner; ++in)
                               ga[(o * v.len + begin + l) * v.inner + in] += g[(o * w + l) * v.inner + in];
                       },
                       "slice");
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  Tape& t = parts[0].tape();
  const Shape& s0 = parts[0].shape();
  Shape out = s0;
  out.at(axis) = 0;
  std::vector<std::size_t> lens, ids;
  for (const Var& p : parts) {
    if (&p.tape() != &t) throw Error("operands live on different tapes");
    const Shape& s = p.shape();
    if (s.size() != s0.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d)
      if (d != axis && s[d] != s0[d])
        throw ShapeError("concat: shape mismatch " + shape_str(s) + " vs " + shape_str(s0));
    out[axis] += s[axis];
    lens.push_back(s[axis]);
    ids.push_back(p.id());
  }
  const auto v = axis_view(out, axis, "concat");
  std::vector<double> y(numel(out));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto x = parts[k].values();
    const std::size_t w = lens[k];
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t l = 0; l < w; ++l)
        for (std::size_t in = 0; in < v.inner; ++in)
          y[(o * v.len + offset + l) * v.inner + in] = x[(o * w + l) * v.inner + in];
    offset += w;
  }
  return t.push(std::move(out), std::move(y), ids,
                [ids, lens, v](Tape& t, std::size_t self) {
                  const auto& g = t.grad_of(self);
                  std::size_t offset = 0;
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    const std::size_t w = lens[k];
                    if (t.needs_grad(ids[k])) {
                      auto& ga = t.grad_buffer(ids[k]);
                      for (std::size_t o = 0; o < v.outer; ++o)
                        for (std::size_t l = 0; l < w; ++l)
                          for (std::size_t in = 0; in < v.inner; ++in)
                            ga[(o * w + l) * v.inner + in] += g[(o * v.len + offset + l) * v.inner + in];
                    }
                    offset += w;
                  }
                },
                "concat");
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var reshape(Var a, Shape s) {
  if (numel(s) != a.values().size())
    throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(s));
  std::vector<double> y(a.values().begin(), a.values().end());
  std::size_t ia = a.id();
  return a.tape().push(std::move(s), std::move(y), {ia},
                       [ia](Tape& t, std::size_t self) {
                         const auto& g = t.grad_of(self);
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                       },
                       "reshape");
}

Var gather(Var a, std::vector<std::size_t> index, Shape shape) {
  if (numel(shape) != index.size()) throw ShapeError("gather: index count does not match output shape");
  auto x = a.values();
  std::vector<double> y(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= x.size()) throw ShapeError("gather: index out of range");
    y[i] = x[index[i]];
  }
  std::size_t ia = a.id();
  return a.tape().push(std::move(shape), std::move(y), {ia},
                       [ia, index = std::move(index)](Tape& t, std::size_t self) {
                         const auto& g = t.grad_of(self);
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < index.size(); ++i) ga[index[i]] += g[i];
                       },
                       "gather");
}

Var gather_rows(Var a, std::span<const std::size_t> index) {
  if (a.shape().size() != 2) throw ShapeError("gather_rows: rank-2 operand required");
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  if (index.empty()) throw ShapeError("gather_rows: empty index");
  std::vector<std::size_t> flat;
  flat.reserve(index.size() * cols);
  for (auto r : index) {
    if (r >= rows)
      throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range (" + std::to_string(rows) + ")");
    for (std::size_t c = 0; c < cols; ++c) flat.push_back(r * cols + c);
  }
  return gather(a, std::move(flat), {index.size(), cols});
}

}  // namespace rtic::nk
