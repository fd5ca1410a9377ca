#include "rtic/composers.h"

#include "rtic/errors.h"

namespace rtic {

using nk::Tensor;
using nk::Var;

std::string_view to_string(ComposerType t) {
  switch (t) {
    case ComposerType::TextOnly: return "text_only";
    case ComposerType::Tirg: return "tirg";
    case ComposerType::Rtic: return "rtic";
    case ComposerType::IrMatch: return "ir_match";
  }
  return "?";
}

ComposerType parse_composer_type(std::string_view s) {
  for (auto t : {ComposerType::TextOnly, ComposerType::Tirg, ComposerType::Rtic, ComposerType::IrMatch})
    if (to_string(t) == s) return t;
  throw ValidationError("unknown composer type '" + std::string(s) + "'");
}

void RticConfig::validate() const {
  if (d < 1 || blocks < 1 || block_hidden < 1) throw ValidationError("RTIC d, blocks and block_hidden must be >= 1");
}

void init_text_only(nk::ParamStore& ps, std::size_t d, Rng& rng) {
  const std::size_t bottleneck = std::max<std::size_t>(1, d / 2);
  nk::init_linear(ps, "composer.text.enc", d, bottleneck, rng);
  nk::init_linear(ps, "composer.text.dec", bottleneck, d, rng);
}

void init_tirg(nk::ParamStore& ps, const TirgConfig& cfg, Rng& rng) {
  nk::init_linear(ps, "composer.tirg.gate1", 2 * cfg.d, cfg.hidden, rng);
  nk::init_linear(ps, "composer.tirg.gate2", cfg.hidden, cfg.d, rng);
  nk::init_linear(ps, "composer.tirg.res1", 2 * cfg.d, cfg.hidden, rng);
  nk::init_linear(ps, "composer.tirg.res2", cfg.hidden, cfg.d, rng);
  ps.add("composer.tirg.w_gate", Tensor::scalar(1.0));
  ps.add("composer.tirg.w_res", Tensor::scalar(0.1));
}

void init_rtic(nk::ParamStore& ps, const RticConfig& cfg, Rng& rng) {
  cfg.validate();
  nk::init_linear(ps, "composer.rtic.attn", 2 * cfg.d, cfg.blocks * cfg.d, rng);
  for (std::size_t i = 0; i < cfg.blocks; ++i) {
    const std::string p = "composer.rtic.block" + std::to_string(i);
    nk::init_linear(ps, p + ".fc1", 2 * cfg.d, cfg.block_hidden, rng);
    nk::init_linear(ps, p + ".fc2", cfg.block_hidden, cfg.d, rng);
  }
}

namespace {

void require_pair(Var a, Var b, const char* op) {
  if (a.shape().size() != 2 || a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": f_I " + nk::shape_str(a.shape()) + " and f_T " + nk::shape_str(b.shape()) +
                     " must both be n x d");
}

}  // namespace

Var compose_text_only(nk::ParamBinder& bind, Var f_text) {
  return nk::linear(bind, "composer.text.dec", nk::relu(nk::linear(bind, "composer.text.enc", f_text)));
}

Var compose_tirg(nk::ParamBinder& bind, Var f_image, Var f_text) {
  require_pair(f_image, f_text, "compose_tirg");
  Var joint = nk::concat({f_image, f_text}, 1);
  Var gate = nk::sigmoid(
      nk::linear(bind, "composer.tirg.gate2", nk::relu(nk::linear(bind, "composer.tirg.gate1", joint))));
  Var gated = nk::hadamard(gate, f_image);
  Var res = nk::linear(bind, "composer.tirg.res2", nk::relu(nk::linear(bind, "composer.tirg.res1", joint)));
  return nk::add(nk::scale_by(gated, bind("composer.tirg.w_gate")), nk::scale_by(res, bind("composer.tirg.w_res")));
}

Var rtic_attention(nk::ParamBinder& bind, const RticConfig& cfg, Var f_image, Var f_text) {
  require_pair(f_image, f_text, "rtic_attention");
  if (f_image.cols() != cfg.d) throw ShapeError("rtic_attention: feature width does not match d");
  return nk::sigmoid(nk::linear(bind, "composer.rtic.attn", nk::concat({f_image, f_text}, 1)));
}

ComposerOutput compose_rtic(nk::ParamBinder& bind, const RticConfig& cfg, Var f_image, Var f_text,
                            std::optional<Var> forced_attention) {
  require_pair(f_image, f_text, "compose_rtic");
  if (f_image.cols() != cfg.d) throw ShapeError("compose_rtic: feature width does not match d");
  Var attn = forced_attention ? *forced_attention : rtic_attention(bind, cfg, f_image, f_text);
  if (attn.shape() != nk::Shape{f_image.rows(), cfg.blocks * cfg.d})
    throw ShapeError("compose_rtic: attention must be n x (blocks*d), got " + nk::shape_str(attn.shape()));
  Var f = f_image;
  for (std::size_t i = 0; i < cfg.blocks; ++i) {
    const std::string p = "composer.rtic.block" + std::to_string(i);
    Var a = nk::slice(attn, 1, i * cfg.d, (i + 1) * cfg.d);
    Var x = nk::hadamard(a, f);
    Var r = nk::linear(bind, p + ".fc2", nk::relu(nk::linear(bind, p + ".fc1", nk::concat({x, f_text}, 1))));
    f = nk::add(f, nk::hadamard(a, r));
  }
  return {f, nk::sub(f, f_image), attn};
}

Tensor attention_bank(Var attention, const RticConfig& cfg, std::size_t row) {
  Tensor bank = Tensor::zeros({cfg.d, cfg.blocks});
  for (std::size_t i = 0; i < cfg.blocks; ++i)
    for (std::size_t c = 0; c < cfg.d; ++c) bank.at(c, i) = attention.at(row, i * cfg.d + c);
  return bank;
}

Var ir_match_loss(Var f, Var f_ir) {
  if (f.shape() != f_ir.shape()) throw ShapeError("ir_match_loss: shapes differ");
  const std::size_t axis = f.shape().size() - 1;
  Var diff = nk::sub(nk::l2_normalize(f, axis), nk::l2_normalize(f_ir, axis));
  return nk::mean(nk::square(diff));
}

}  // namespace rtic
