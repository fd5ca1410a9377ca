#include <doctest.h>

#include <cmath>

#include "oracles.h"
#include "rtic/encoders.h"
#include "rtic/errors.h"
#include "rtic/model.h"

using namespace rtic;
using nk::Tape;
using nk::Tensor;
using nk::Var;
using oracle::sigmoid;

namespace {

TokenBatch one_row(std::size_t len) {
  std::vector<std::vector<std::size_t>> seqs{std::vector<std::size_t>(len, 4)};
  return make_token_batch(std::span<const std::vector<std::size_t>>(seqs));
}

std::vector<Var> scalar_steps(Tape& tape, const std::vector<double>& xs) {
  std::vector<Var> steps;
  for (double x : xs) steps.push_back(tape.constant({1, 1}, {x}));
  return steps;
}

Vocabulary small_vocab() { return Vocabulary({{"black", 3}, {"red", 2}, {"white", 1}}); }

}  // namespace

TEST_SUITE("encoders") {

TEST_CASE("swem is the average pool followed by the max pool") {
  Tape tape;
  Var e = tape.constant({2, 2}, {1, 3, 2, 0});
  std::vector<double> mask{1, 1};
  Var out = nk::reshape(swem_encode(e, mask), {4});
  const std::vector<double> expect{1.5, 1.5, 2, 3};
  CHECK(std::vector<double>(out.values().begin(), out.values().end()) == expect);

  std::vector<double> half{1, 0};
  Var masked = swem_encode(e, half);
  CHECK(masked.values()[0] == 1);
  CHECK(masked.values()[3] == 3);
  std::vector<double> none{0, 0};
  CHECK_THROWS(swem_encode(e, none));
}

TEST_CASE("one GRU layer matches the gate equations evaluated by hand") {
  // Gate order along the output axis: reset, update, candidate.
  const double wi[3] = {0.7, -0.4, 1.1}, wh[3] = {-0.6, 0.9, 0.5};
  const double bi[3] = {0.1, 0.2, -0.3}, bh[3] = {0.05, -0.15, 0.25};
  nk::ParamStore ps;
  ps.add("g.l0.w_ih", Tensor({1, 3}, {wi[0], wi[1], wi[2]}));
  ps.add("g.l0.w_hh", Tensor({1, 3}, {wh[0], wh[1], wh[2]}));
  ps.add("g.l0.b_ih", Tensor({3}, {bi[0], bi[1], bi[2]}));
  ps.add("g.l0.b_hh", Tensor({3}, {bh[0], bh[1], bh[2]}));
  const std::vector<double> xs{0.5, -0.3};

  double h = 0.0;
  for (double x : xs) {
    const double r = sigmoid(wi[0] * x + bi[0] + wh[0] * h + bh[0]);
    const double z = sigmoid(wi[1] * x + bi[1] + wh[1] * h + bh[1]);
    const double n = std::tanh(wi[2] * x + bi[2] + r * (wh[2] * h + bh[2]));
    h = (1 - z) * n + z * h;
  }

  Tape tape;
  nk::ParamBinder bind(tape, ps);
  auto steps = scalar_steps(tape, xs);
  Var out = gru_forward(bind, "g", 1, 1, steps, one_row(2));
  CHECK(out.item() == doctest::Approx(h).epsilon(1e-14));
}

TEST_CASE("one LSTM layer matches the gate equations evaluated by hand") {
  // Gate order: input, forget, cell, output.
  const double wi[4] = {0.3, -0.8, 1.2, 0.6}, wh[4] = {0.4, 0.2, -0.7, -0.5}, b[4] = {0.1, 1.0, 0.0, -0.2};
  nk::ParamStore ps;
  ps.add("l.l0.w_ih", Tensor({1, 4}, {wi[0], wi[1], wi[2], wi[3]}));
  ps.add("l.l0.w_hh", Tensor({1, 4}, {wh[0], wh[1], wh[2], wh[3]}));
  ps.add("l.l0.b", Tensor({4}, {b[0], b[1], b[2], b[3]}));
  const std::vector<double> xs{0.9, -0.2, 0.4};

  double h = 0.0, c = 0.0;
  for (double x : xs) {
    auto pre = [&](int k) { return wi[k] * x + wh[k] * h + b[k]; };
    const double i = sigmoid(pre(0)), f = sigmoid(pre(1)), g = std::tanh(pre(2)), o = sigmoid(pre(3));
    c = f * c + i * g;
    h = o * std::tanh(c);
  }

  Tape tape;
  nk::ParamBinder bind(tape, ps);
  auto steps = scalar_steps(tape, xs);
  Var out = lstm_forward(bind, "l", 1, 1, steps, one_row(3));
  CHECK(out.item() == doctest::Approx(h).epsilon(1e-14));
}

TEST_CASE("all-zero GRU weights keep the hidden state at zero") {
  nk::ParamStore ps;
  Rng rng = make_stream(0, "init");
  init_gru(ps, "g", 2, 3, 4, rng);
  for (auto& [_, t] : ps.tensors()) std::fill(t.values.begin(), t.values.end(), 0.0);
  Tape tape;
  nk::ParamBinder bind(tape, ps);
  std::vector<Var> steps{tape.constant({1, 3}, {1, -2, 3}), tape.constant({1, 3}, {0.5, 0.5, 0.5})};
  Var h = gru_forward(bind, "g", 2, 4, steps, one_row(2));
  for (double v : h.values()) CHECK(v == 0.0);
}

TEST_CASE("padding does not change a sequence's encoding") {
  const auto vocab = small_vocab();
  for (auto variant : {TextVariant::Swem, TextVariant::Gru, TextVariant::Lstm, TextVariant::LstmPlusGru}) {
    CAPTURE(to_string(variant));
    TextEncoderConfig cfg;
    cfg.variant = variant;
    cfg.e_word = 5;
    cfg.hidden = 4;
    cfg.out_dim = 6;
    nk::ParamStore ps;
    Rng rng = make_stream(1, "init");
    init_text_encoder(ps, cfg, vocab, rng);
    std::vector<std::vector<std::size_t>> alone{{0, 4, 5}};
    std::vector<std::vector<std::size_t>> padded{{0, 4, 5}, {0, 6, 1, 4, 5, 6}};
    Tape tape(false);
    nk::ParamBinder bind(tape, ps);
    Var a = text_encode(bind, cfg, make_token_batch(std::span<const std::vector<std::size_t>>(alone)));
    Var b = text_encode(bind, cfg, make_token_batch(std::span<const std::vector<std::size_t>>(padded)));
    CHECK(a.shape() == nk::Shape{1, 6});
    CHECK(b.shape() == nk::Shape{2, 6});
    for (std::size_t j = 0; j < 6; ++j) CHECK(a.at(0, j) == doctest::Approx(b.at(0, j)).epsilon(1e-14));
  }
}

TEST_CASE("recurrent hidden states stay inside (-1, 1)") {
  const auto vocab = small_vocab();
  TextEncoderConfig cfg;
  cfg.variant = TextVariant::LstmPlusGru;
  cfg.e_word = 4;
  cfg.hidden = 5;
  nk::ParamStore ps;
  Rng rng = make_stream(2, "init");
  init_text_encoder(ps, cfg, vocab, rng);
  for (auto& [name, t] : ps.tensors())
    for (auto& v : t.values) v *= 8.0;  // saturate the gates
  std::vector<std::vector<std::size_t>> seqs{{0, 4, 5, 6, 4, 5}, {0, 6}};
  Tape tape(false);
  nk::ParamBinder bind(tape, ps);
  Var f = text_features(bind, cfg, make_token_batch(std::span<const std::vector<std::size_t>>(seqs)));
  CHECK(f.shape() == nk::Shape{2, 10});
  for (double v : f.values()) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("pre-projection widths") {
  TextEncoderConfig cfg;
  cfg.e_word = 7;
  cfg.hidden = 3;
  cfg.variant = TextVariant::Swem;
  CHECK(cfg.pre_projection_width() == 14);
  cfg.variant = TextVariant::Gru;
  CHECK(cfg.pre_projection_width() == 3);
  cfg.variant = TextVariant::LstmPlusGru;
  CHECK(cfg.pre_projection_width() == 6);
}

TEST_CASE("external embeddings seed matching rows") {
  const auto vocab = small_vocab();
  EmbeddingFile ext{{"red", {0.25, -0.5, 1.0}}};
  nk::ParamStore ps;
  Rng rng = make_stream(0, "init");
  init_embedding_table(ps, vocab, 3, rng, &ext);
  const auto& t = ps.get("text.embed");
  const auto row = *vocab.index("red");
  CHECK(t.at(row, 0) == 0.25);
  CHECK(t.at(row, 2) == 1.0);
  nk::ParamStore bad;
  EmbeddingFile wrong{{"red", {1.0}}};
  CHECK_THROWS(init_embedding_table(bad, vocab, 3, rng, &wrong));
}

TEST_CASE("image projector checks its input width") {
  ImageEncoderConfig cfg{5, 4, 3};
  nk::ParamStore ps;
  Rng rng = make_stream(0, "init");
  init_image_encoder(ps, cfg, rng);
  Tape tape(false);
  nk::ParamBinder bind(tape, ps);
  CHECK(image_project(bind, cfg, tape.constant(Tensor::zeros({2, 5}))).shape() == nk::Shape{2, 3});
  CHECK_THROWS_AS(image_project(bind, cfg, tape.constant(Tensor::zeros({2, 4}))), DimensionError);
}

TEST_CASE("token batches reject empty input") {
  std::vector<std::vector<std::size_t>> none;
  CHECK_THROWS(make_token_batch(std::span<const std::vector<std::size_t>>(none)));
  std::vector<std::vector<std::size_t>> empty_row{{0, 4}, {}};
  CHECK_THROWS(make_token_batch(std::span<const std::vector<std::size_t>>(empty_row)));
}

}
