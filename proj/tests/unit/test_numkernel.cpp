#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "rtic/errors.h"
#include "rtic/params.h"
#include "rtic/rng.h"
#include "rtic/tensor.h"

using namespace rtic;
using nk::Tape;
using nk::Tensor;
using nk::Var;

namespace {

// Entries bounded away from zero with random sign.
Tensor away_from_zero(nk::Shape s, Rng& rng) {
  std::uniform_real_distribution<double> mag(0.3, 1.2);
  std::bernoulli_distribution neg(0.5);
  Tensor t = Tensor::zeros(std::move(s));
  for (auto& v : t.values) v = neg(rng) ? -mag(rng) : mag(rng);
  return t;
}

Tensor positive(nk::Shape s, Rng& rng) {
  std::uniform_real_distribution<double> mag(0.3, 1.2);
  Tensor t = Tensor::zeros(std::move(s));
  for (auto& v : t.values) v = mag(rng);
  return t;
}

// Weighted read-out so every output coordinate contributes with its own weight.
Var readout(Var out, const Tensor& w) {
  Tensor ww = w;
  ww.shape = out.shape();
  return nk::sum(nk::hadamard(out, out.tape().constant(ww)));
}

struct Primitive {
  const char* name;
  std::vector<nk::Shape> inputs;
  std::function<Var(std::vector<Var>&)> op;
};

}  // namespace

TEST_SUITE("numkernel") {

TEST_CASE("matmul forward matches a hand product") {
  Tape tape;
  Var a = tape.constant({2, 3}, {1, 2, 3, 4, 5, 6});
  Var b = tape.constant({3, 2}, {7, 8, 9, 10, 11, 12});
  Var c = nk::matmul(a, b);
  CHECK(c.shape() == nk::Shape{2, 2});
  CHECK(c.at(0, 0) == 58);
  CHECK(c.at(0, 1) == 64);
  CHECK(c.at(1, 0) == 139);
  CHECK(c.at(1, 1) == 154);
  Var v = nk::matmul(a, tape.constant({3}, {1, 0, -1}));
  CHECK(v.shape() == nk::Shape{2});
  CHECK(v.values()[0] == -2);
  CHECK(v.values()[1] == -2);
  CHECK_THROWS_AS(nk::matmul(a, a), ShapeError);
}

TEST_CASE("softmax rows sum to one and l2_normalize rows have unit norm") {
  Tape tape;
  Var x = tape.constant({2, 3}, {1, 2, 3, -1, 0, 4});
  Var s = nk::softmax(x, 1);
  Var n = nk::l2_normalize(x, 1);
  for (std::size_t i = 0; i < 2; ++i) {
    double sum = 0, ss = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      sum += s.at(i, j);
      ss += n.at(i, j) * n.at(i, j);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ss == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK(s.at(0, 2) == doctest::Approx(std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0))));
  CHECK_THROWS_AS(nk::l2_normalize(tape.constant({1, 2}, {0, 0}), 1), NumericError);
}

TEST_CASE("slice concat reshape and gather move values") {
  Tape tape;
  Var x = tape.constant({2, 3}, {1, 2, 3, 4, 5, 6});
  Var s = nk::slice(x, 1, 1, 3);
  CHECK(s.shape() == nk::Shape{2, 2});
  CHECK(s.at(1, 0) == 5);
  Var c = nk::concat({x, s}, 1);
  CHECK(c.shape() == nk::Shape{2, 5});
  CHECK(c.at(1, 4) == 6);
  Var r = nk::reshape(x, {3, 2});
  CHECK(r.at(2, 1) == 6);
  Var g = nk::gather(x, {5, 0}, {2});
  CHECK(g.values()[0] == 6);
  CHECK(g.values()[1] == 1);
  std::vector<std::size_t> rows{1, 1, 0};
  Var gr = nk::gather_rows(x, rows);
  CHECK(gr.shape() == nk::Shape{3, 3});
  CHECK(gr.at(2, 2) == 3);
  CHECK_THROWS_AS(nk::reshape(x, {4, 2}), ShapeError);
}

TEST_CASE("axis reductions") {
  Tape tape;
  Var x = tape.constant({2, 3}, {1, 2, 3, 4, 5, 6});
  Var s0 = nk::sum(x, 0);
  Var m1 = nk::mean(x, 1);
  CHECK(s0.values()[2] == 9);
  CHECK(m1.values()[1] == 5);
  CHECK(nk::sum(x).item() == 21);
  CHECK(nk::mean(x).item() == 3.5);
}

TEST_CASE("backward needs a scalar and a recording tape") {
  Tensor w({2}, {1, 2});
  {
    Tape tape;
    Var p = tape.param(w);
    CHECK_THROWS_AS(tape.backward(p), ShapeError);
  }
  Tape fwd(false);
  Var p = fwd.param(w);
  CHECK_THROWS(fwd.backward(nk::sum(p)));
}

TEST_CASE("gradients accumulate into a tensor used twice") {
  Tensor w({2}, {3, -1});
  w.zero_grad();
  Tape tape;
  Var p = tape.param(w);
  tape.backward(nk::sum(nk::hadamard(p, p)));
  CHECK(w.grad[0] == 6);
  CHECK(w.grad[1] == -2);
}

TEST_CASE("every primitive backward matches central differences") {
  Rng rng = make_stream(11, "gradcheck");
  const std::vector<Primitive> prims = {
      {"matmul", {{3, 4}, {4, 2}}, [](auto& v) { return nk::matmul(v[0], v[1]); }},
      {"matvec", {{3, 4}, {4}}, [](auto& v) { return nk::matmul(v[0], v[1]); }},
      {"transpose", {{3, 4}}, [](auto& v) { return nk::transpose(v[0]); }},
      {"add", {{2, 3}, {2, 3}}, [](auto& v) { return nk::add(v[0], v[1]); }},
      {"sub", {{2, 3}, {2, 3}}, [](auto& v) { return nk::sub(v[0], v[1]); }},
      {"add_bias", {{3, 4}, {4}}, [](auto& v) { return nk::add_bias(v[0], v[1]); }},
      {"hadamard", {{2, 3}, {2, 3}}, [](auto& v) { return nk::hadamard(v[0], v[1]); }},
      {"scalar_mul", {{2, 3}}, [](auto& v) { return nk::scalar_mul(v[0], -1.7); }},
      {"add_scalar", {{2, 3}}, [](auto& v) { return nk::add_scalar(v[0], 0.4); }},
      {"scale_by", {{2, 3}, {1}}, [](auto& v) { return nk::scale_by(v[0], v[1]); }},
      {"sigmoid", {{2, 3}}, [](auto& v) { return nk::sigmoid(v[0]); }},
      {"tanh", {{2, 3}}, [](auto& v) { return nk::tanh(v[0]); }},
      {"relu", {{2, 3}}, [](auto& v) { return nk::relu(v[0]); }},
      {"square", {{2, 3}}, [](auto& v) { return nk::square(v[0]); }},
      {"softmax", {{2, 4}}, [](auto& v) { return nk::softmax(v[0], 1); }},
      {"softmax0", {{3, 2}}, [](auto& v) { return nk::softmax(v[0], 0); }},
      {"l2_normalize", {{2, 4}}, [](auto& v) { return nk::l2_normalize(v[0], 1); }},
      {"sum", {{2, 3}}, [](auto& v) { return nk::sum(v[0]); }},
      {"mean", {{2, 3}}, [](auto& v) { return nk::mean(v[0]); }},
      {"sum_axis", {{2, 3}}, [](auto& v) { return nk::sum(v[0], 0); }},
      {"mean_axis", {{2, 3}}, [](auto& v) { return nk::mean(v[0], 1); }},
      {"slice", {{2, 5}}, [](auto& v) { return nk::slice(v[0], 1, 1, 4); }},
      {"concat", {{2, 3}, {2, 2}}, [](auto& v) { return nk::concat({v[0], v[1]}, 1); }},
      {"reshape", {{2, 3}}, [](auto& v) { return nk::reshape(v[0], {3, 2}); }},
      {"gather", {{2, 3}}, [](auto& v) { return nk::gather(v[0], {4, 0, 4, 2}, {4}); }},
      {"gather_rows", {{3, 2}},
       [](auto& v) {
         std::vector<std::size_t> idx{2, 0, 2};
         return nk::gather_rows(v[0], idx);
       }},
  };
  for (const auto& p : prims) {
    CAPTURE(p.name);
    std::vector<Tensor> inputs;
    for (const auto& s : p.inputs) inputs.push_back(away_from_zero(s, rng));
    // Output width is unknown up front; 64 weights covers every case here.
    const Tensor w = positive({64}, rng);
    std::vector<std::pair<std::string, Tensor*>> params;
    for (std::size_t i = 0; i < inputs.size(); ++i) params.emplace_back("x" + std::to_string(i), &inputs[i]);
    auto f = [&](Tape& tape) {
      std::vector<Var> vars;
      for (auto& t : inputs) vars.push_back(tape.param(t));
      Var out = p.op(vars);
      Tensor ww({out.values().size()}, std::vector<double>(w.values.begin(),
                                                           w.values.begin() + static_cast<std::ptrdiff_t>(out.values().size())));
      return readout(out, ww);
    };
    auto res = nk::finite_diff_check(f, params);
    CHECK(res.coords_checked > 0);
    CHECK(res.max_rel_error < 1e-6);
  }
}

TEST_CASE("shape errors are raised before any arithmetic") {
  Tape tape;
  Var a = tape.constant({2, 3}, std::vector<double>(6, 1.0));
  Var b = tape.constant({3, 2}, std::vector<double>(6, 1.0));
  CHECK_THROWS_AS(nk::add(a, b), ShapeError);
  CHECK_THROWS_AS(nk::hadamard(a, b), ShapeError);
  CHECK_THROWS_AS(nk::add_bias(a, tape.constant({2}, {0, 0})), ShapeError);
  CHECK_THROWS_AS(nk::slice(a, 1, 2, 4), ShapeError);
}

TEST_CASE("checkpoint round trip is exact") {
  Rng rng = make_stream(3, "init");
  nk::ParamStore ps;
  ps.add("b.w", nk::uniform({3, 2}, -1, 1, rng));
  ps.add("a.b", nk::uniform({5}, -1e-300, 1e300, rng));
  const std::string text = nk::serialize_checkpoint(ps, "0123456789abcdef");
  const std::string path = "numkernel_ckpt.tsv";
  nk::save_checkpoint(path, ps, "0123456789abcdef");
  auto ck = nk::load_checkpoint(path);
  CHECK(ck.config_hash == "0123456789abcdef");
  CHECK(ck.params == ps);
  CHECK(nk::serialize_checkpoint(ck.params, ck.config_hash) == text);
  CHECK_THROWS_AS(ps.add("a.b", Tensor::scalar(0)), DuplicateError);
  std::remove(path.c_str());
}

TEST_CASE("named streams are independent and reproducible") {
  Rng a = make_stream(5, "data"), b = make_stream(5, "data"), c = make_stream(5, "init");
  const auto x = a(), y = b(), z = c();
  CHECK(x == y);
  CHECK(x != z);
}

}
