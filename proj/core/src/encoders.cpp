#include "rtic/encoders.h"

#include <cmath>

#include "rtic/errors.h"
#include "rtic/textio.h"

namespace rtic {

using nk::Tensor;
using nk::Var;

std::string_view to_string(TextVariant v) {
  switch (v) {
    case TextVariant::Swem: return "SWEM";
    case TextVariant::Lstm: return "LSTM";
    case TextVariant::Gru: return "GRU";
    case TextVariant::LstmPlusGru: return "LSTM_PLUS_GRU";
  }
  return "?";
}

TextVariant parse_text_variant(std::string_view s) {
  for (auto v : {TextVariant::Swem, TextVariant::Lstm, TextVariant::Gru, TextVariant::LstmPlusGru})
    if (to_string(v) == s) return v;
  throw ValidationError("unknown text encoder variant '" + std::string(s) + "'");
}

void TextEncoderConfig::validate() const {
  if (e_word < 1 || hidden < 1 || out_dim < 1 || layers < 1)
    throw ValidationError("text encoder widths and layer count must be >= 1");
}

std::size_t TextEncoderConfig::pre_projection_width() const {
  switch (variant) {
    case TextVariant::Swem: return 2 * e_word;
    case TextVariant::Lstm:
    case TextVariant::Gru: return hidden;
    case TextVariant::LstmPlusGru: return 2 * hidden;
  }
  return 0;
}

void ImageEncoderConfig::validate() const {
  if (in_dim < 1 || hidden < 1 || out_dim < 1) throw ValidationError("image encoder widths must be >= 1");
}

EmbeddingFile load_embedding_file(const std::string& path) {
  EmbeddingFile out;
  auto lines = io::read_lines(path);
  std::size_t width = 0;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    auto f = io::split(lines[ln], '\t');
    if (f.size() != 2 || f[0].empty()) throw ParseError(path, ln + 1, "expected word<TAB>v1,...,ve");
    std::vector<double> row;
    for (auto x : io::split(f[1], ',')) {
      double v;
      if (!io::parse_real(x, v)) throw ParseError(path, ln + 1, "bad value '" + std::string(x) + "'");
      row.push_back(v);
    }
    if (width && row.size() != width) throw DimensionError(path + ":" + std::to_string(ln + 1) + ": width mismatch");
    width = row.size();
    if (!out.emplace(std::string(f[0]), std::move(row)).second)
      throw DuplicateError(path + ":" + std::to_string(ln + 1) + ": duplicate word");
  }
  return out;
}

void init_embedding_table(nk::ParamStore& ps, const Vocabulary& vocab, std::size_t e_word, Rng& rng,
                          const EmbeddingFile* external) {
  Tensor table = nk::uniform({vocab.size(), e_word}, -0.05, 0.05, rng);
  if (external) {
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      auto it = external->find(vocab.token(i));
      if (it == external->end()) continue;
      if (it->second.size() != e_word)
        throw DimensionError("embedding for '" + vocab.token(i) + "' has width " + std::to_string(it->second.size()) +
                             ", expected " + std::to_string(e_word));
      std::copy(it->second.begin(), it->second.end(), table.values.begin() + static_cast<std::ptrdiff_t>(i * e_word));
    }
  }
  ps.add("text.embed", std::move(table));
}

void init_gru(nk::ParamStore& ps, const std::string& prefix, std::size_t layers, std::size_t in, std::size_t hidden,
              Rng& rng) {
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = prefix + ".l" + std::to_string(l);
    const std::size_t fan = l == 0 ? in : hidden;
    // Gate blocks along the output axis: reset, update, candidate.
    ps.add(p + ".w_ih", nk::uniform_fan_in({fan, 3 * hidden}, fan, rng));
    ps.add(p + ".w_hh", nk::uniform_fan_in({hidden, 3 * hidden}, hidden, rng));
    ps.add(p + ".b_ih", Tensor::zeros({3 * hidden}));
    ps.add(p + ".b_hh", Tensor::zeros({3 * hidden}));
  }
}

void init_lstm(nk::ParamStore& ps, const std::string& prefix, std::size_t layers, std::size_t in, std::size_t hidden,
               Rng& rng) {
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = prefix + ".l" + std::to_string(l);
    const std::size_t fan = l == 0 ? in : hidden;
    // Gate blocks: input, forget, cell, output.
    ps.add(p + ".w_ih", nk::uniform_fan_in({fan, 4 * hidden}, fan, rng));
    ps.add(p + ".w_hh", nk::uniform_fan_in({hidden, 4 * hidden}, hidden, rng));
    ps.add(p + ".b", Tensor::zeros({4 * hidden}));
  }
}

void init_text_encoder(nk::ParamStore& ps, const TextEncoderConfig& cfg, const Vocabulary& vocab, Rng& rng,
                       const EmbeddingFile* external) {
  cfg.validate();
  init_embedding_table(ps, vocab, cfg.e_word, rng, external);
  if (cfg.variant == TextVariant::Lstm || cfg.variant == TextVariant::LstmPlusGru)
    init_lstm(ps, "text.lstm", cfg.layers, cfg.e_word, cfg.hidden, rng);
  if (cfg.variant == TextVariant::Gru || cfg.variant == TextVariant::LstmPlusGru)
    init_gru(ps, "text.gru", cfg.layers, cfg.e_word, cfg.hidden, rng);
  nk::init_linear(ps, "text.proj", cfg.pre_projection_width(), cfg.out_dim, rng);
}

void init_image_encoder(nk::ParamStore& ps, const ImageEncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  nk::init_linear(ps, "image.l1", cfg.in_dim, cfg.hidden, rng);
  nk::init_linear(ps, "image.l2", cfg.hidden, cfg.out_dim, rng);
}

namespace {

template <class Seq>
TokenBatch make_batch_impl(std::span<const Seq> seqs, auto&& tokens_of) {
  if (seqs.empty()) throw ValidationError("empty token batch");
  TokenBatch b;
  b.batch = seqs.size();
  for (const auto& s : seqs) b.max_len = std::max(b.max_len, tokens_of(s).size());
  if (b.max_len == 0) throw ValidationError("token batch has only empty sequences");
  b.ids.assign(b.batch * b.max_len, Vocabulary::kPad);
  b.mask.assign(b.batch * b.max_len, 0.0);
  for (std::size_t i = 0; i < b.batch; ++i) {
    const auto& toks = tokens_of(seqs[i]);
    if (toks.empty()) throw ValidationError("empty token sequence in batch");
    for (std::size_t t = 0; t < toks.size(); ++t) {
      b.ids[i * b.max_len + t] = toks[t];
      b.mask[i * b.max_len + t] = toks[t] == Vocabulary::kPad ? 0.0 : 1.0;
    }
  }
  return b;
}

// Per-step embedded inputs, each batch x e_word.
std::vector<Var> embed_steps(nk::ParamBinder& bind, const TokenBatch& b) {
  Var table = bind("text.embed");
  std::vector<Var> steps;
  std::vector<std::size_t> col(b.batch);
  for (std::size_t t = 0; t < b.max_len; ++t) {
    for (std::size_t i = 0; i < b.batch; ++i) col[i] = b.ids[i * b.max_len + t];
    steps.push_back(nk::gather_rows(table, col));
  }
  return steps;
}

struct StepMasks {
  Var keep;   // 1 on real tokens
  Var carry;  // 1 on padding
};

StepMasks step_masks(nk::Tape& tape, const TokenBatch& b, std::size_t t, std::size_t hidden) {
  std::vector<double> keep(b.batch * hidden), carry(b.batch * hidden);
  for (std::size_t i = 0; i < b.batch; ++i)
    for (std::size_t h = 0; h < hidden; ++h) {
      keep[i * hidden + h] = b.mask[i * b.max_len + t];
      carry[i * hidden + h] = 1.0 - b.mask[i * b.max_len + t];
    }
  return {tape.constant({b.batch, hidden}, std::move(keep)), tape.constant({b.batch, hidden}, std::move(carry))};
}

// keep*next + carry*prev: exactly prev on padded steps, exactly next otherwise.
Var masked_update(const StepMasks& m, Var next, Var prev) {
  return nk::add(nk::hadamard(m.keep, next), nk::hadamard(m.carry, prev));
}

}  // namespace

TokenBatch make_token_batch(std::span<const TokenSequence> seqs) {
  return make_batch_impl(seqs, [](const TokenSequence& s) -> const std::vector<std::size_t>& { return s.tokens; });
}

TokenBatch make_token_batch(std::span<const std::vector<std::size_t>> seqs) {
  return make_batch_impl(seqs, [](const std::vector<std::size_t>& s) -> const std::vector<std::size_t>& { return s; });
}

Var embed(nk::ParamBinder& bind, std::span<const std::size_t> seq) {
  Var table = bind("text.embed");
  for (auto i : seq)
    if (i >= table.rows())
      throw ShapeError("token index " + std::to_string(i) + " outside embedding table of " +
                       std::to_string(table.rows()) + " rows");
  return nk::gather_rows(table, seq);
}

Var swem_encode(Var E, std::span<const double> mask) {
  if (E.shape().size() != 2 || mask.size() != E.rows()) throw ShapeError("swem_encode: mask does not match rows");
  std::vector<std::size_t> live;
  for (std::size_t r = 0; r < mask.size(); ++r)
    if (mask[r] != 0.0) live.push_back(r);
  if (live.empty()) throw ValidationError("swem_encode: every row is masked");
  const std::size_t e = E.cols();
  Var rows = nk::gather_rows(E, live);
  Var avg = nk::mean(rows, 0);
  std::vector<std::size_t> argmax(e);
  for (std::size_t c = 0; c < e; ++c) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < live.size(); ++r)
      if (rows.at(r, c) > rows.at(best, c)) best = r;
    argmax[c] = best * e + c;
  }
  Var mx = nk::gather(rows, std::move(argmax), {e});
  return nk::concat({avg, mx}, 0);
}

Var gru_forward(nk::ParamBinder& bind, const std::string& prefix, std::size_t layers, std::size_t hidden,
                std::span<const Var> steps, const TokenBatch& batch) {
  nk::Tape& tape = bind.tape();
  std::vector<Var> inputs(steps.begin(), steps.end());
  Var h;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = prefix + ".l" + std::to_string(l);
    Var w_ih = bind(p + ".w_ih"), w_hh = bind(p + ".w_hh");
    Var b_ih = bind(p + ".b_ih"), b_hh = bind(p + ".b_hh");
    if (inputs.empty() || inputs[0].cols() != w_ih.rows())
      throw ShapeError(p + ": input width does not match w_ih");
    h = tape.constant(nk::Tensor::zeros({batch.batch, hidden}));
    std::vector<Var> outputs;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
      Var gi = nk::add_bias(nk::matmul(inputs[t], w_ih), b_ih);
      Var gh = nk::add_bias(nk::matmul(h, w_hh), b_hh);
      Var r = nk::sigmoid(nk::add(nk::slice(gi, 1, 0, hidden), nk::slice(gh, 1, 0, hidden)));
      Var z = nk::sigmoid(nk::add(nk::slice(gi, 1, hidden, 2 * hidden), nk::slice(gh, 1, hidden, 2 * hidden)));
      Var n = nk::tanh(nk::add(nk::slice(gi, 1, 2 * hidden, 3 * hidden),
                               nk::hadamard(r, nk::slice(gh, 1, 2 * hidden, 3 * hidden))));
      // h' = (1 - z) * n + z * h
      Var next = nk::add(n, nk::hadamard(z, nk::sub(h, n)));
      h = masked_update(step_masks(tape, batch, t, hidden), next, h);
      outputs.push_back(h);
    }
    inputs = std::move(outputs);
  }
  return h;
}

Var lstm_forward(nk::ParamBinder& bind, const std::string& prefix, std::size_t layers, std::size_t hidden,
                 std::span<const Var> steps, const TokenBatch& batch) {
  nk::Tape& tape = bind.tape();
  std::vector<Var> inputs(steps.begin(), steps.end());
  Var h;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = prefix + ".l" + std::to_string(l);
    Var w_ih = bind(p + ".w_ih"), w_hh = bind(p + ".w_hh"), b = bind(p + ".b");
    if (inputs.empty() || inputs[0].cols() != w_ih.rows())
      throw ShapeError(p + ": input width does not match w_ih");
    h = tape.constant(nk::Tensor::zeros({batch.batch, hidden}));
    Var c = tape.constant(nk::Tensor::zeros({batch.batch, hidden}));
    std::vector<Var> outputs;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
      Var gates = nk::add_bias(nk::add(nk::matmul(inputs[t], w_ih), nk::matmul(h, w_hh)), b);
      Var i = nk::sigmoid(nk::slice(gates, 1, 0, hidden));
      Var f = nk::sigmoid(nk::slice(gates, 1, hidden, 2 * hidden));
      Var g = nk::tanh(nk::slice(gates, 1, 2 * hidden, 3 * hidden));
      Var o = nk::sigmoid(nk::slice(gates, 1, 3 * hidden, 4 * hidden));
      Var c_next = nk::add(nk::hadamard(f, c), nk::hadamard(i, g));
      Var h_next = nk::hadamard(o, nk::tanh(c_next));
      auto m = step_masks(tape, batch, t, hidden);
      c = masked_update(m, c_next, c);
      h = masked_update(m, h_next, h);
      outputs.push_back(h);
    }
    inputs = std::move(outputs);
  }
  return h;
}

Var text_features(nk::ParamBinder& bind, const TextEncoderConfig& cfg, const TokenBatch& batch) {
  Var table = bind("text.embed");
  for (auto id : batch.ids)
    if (id >= table.rows()) throw ShapeError("token index outside embedding table");
  if (cfg.variant == TextVariant::Swem) {
    std::vector<Var> rows;
    for (std::size_t i = 0; i < batch.batch; ++i) {
      std::span<const std::size_t> ids(batch.ids.data() + i * batch.max_len, batch.max_len);
      std::span<const double> mask(batch.mask.data() + i * batch.max_len, batch.max_len);
      Var pooled = swem_encode(embed(bind, ids), mask);
      rows.push_back(nk::reshape(pooled, {1, 2 * cfg.e_word}));
    }
    return nk::concat(rows, 0);
  }
  auto steps = embed_steps(bind, batch);
  switch (cfg.variant) {
    case TextVariant::Lstm: return lstm_forward(bind, "text.lstm", cfg.layers, cfg.hidden, steps, batch);
    case TextVariant::Gru: return gru_forward(bind, "text.gru", cfg.layers, cfg.hidden, steps, batch);
    default: {
      Var a = lstm_forward(bind, "text.lstm", cfg.layers, cfg.hidden, steps, batch);
      Var b = gru_forward(bind, "text.gru", cfg.layers, cfg.hidden, steps, batch);
      return nk::concat({a, b}, 1);
    }
  }
}

Var text_encode(nk::ParamBinder& bind, const TextEncoderConfig& cfg, const TokenBatch& batch) {
  return nk::linear(bind, "text.proj", text_features(bind, cfg, batch));
}

Var image_project(nk::ParamBinder& bind, const ImageEncoderConfig& cfg, Var x) {
  if (x.shape().size() != 2 || x.cols() != cfg.in_dim)
    throw DimensionError("image_project: expected input width " + std::to_string(cfg.in_dim) + ", got " +
                         nk::shape_str(x.shape()));
  return nk::linear(bind, "image.l2", nk::relu(nk::linear(bind, "image.l1", x)));
}

}  // namespace rtic
