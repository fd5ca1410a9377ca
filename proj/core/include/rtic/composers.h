#pragma once
/*
 * Multimodal composition heads.
 *
 * All heads take batched row features: f_I and f_T are (n x d) and the
 * composed output is (n x d).
 *
 * RTIC keeps a running state f_0 = f_I and applies N gated residual blocks:
 *
 *   x_i = A_i * f_{i-1}
 *   r_i = W_i2 relu(W_i1 [x_i, f_T])
 *   f_i = f_{i-1} + A_i * r_i
 *
 * where A_i in [0,1]^d is column i of the channel attention computed from
 * [f_I, f_T]. The residual is h = f_N - f_0 and the composition is f_N; a
 * channel whose attention is zero in every block is passed through untouched.
 */

#include <optional>
#include <string>

#include "rtic/layers.h"

namespace rtic {

enum class ComposerType { TextOnly, Tirg, Rtic, IrMatch };

std::string_view to_string(ComposerType t);
ComposerType parse_composer_type(std::string_view s);

struct RticConfig {
  std::size_t d = 64;
  std::size_t blocks = 2;
  std::size_t block_hidden = 64;

  void validate() const;
};

struct TirgConfig {
  std::size_t d = 64;
  std::size_t hidden = 64;
};

void init_text_only(nk::ParamStore& ps, std::size_t d, Rng& rng);
void init_tirg(nk::ParamStore& ps, const TirgConfig& cfg, Rng& rng);
void init_rtic(nk::ParamStore& ps, const RticConfig& cfg, Rng& rng);

// Encoder-decoder over f_T alone: linear -> relu bottleneck (d/2) -> linear.
nk::Var compose_text_only(nk::ParamBinder& bind, nk::Var f_text);

// Gated-residual baseline: w_g * sigmoid(G [f_I, f_T]) * f_I + w_r * R [f_I, f_T]
// with G and R two-layer relu MLPs and learnable scalars w_g, w_r.
nk::Var compose_tirg(nk::ParamBinder& bind, nk::Var f_image, nk::Var f_text);

// n x (N*d) sigmoid gates; columns [i*d, (i+1)*d) are block i's A_i.
nk::Var rtic_attention(nk::ParamBinder& bind, const RticConfig& cfg, nk::Var f_image, nk::Var f_text);

struct ComposerOutput {
  nk::Var composed;
  nk::Var residual;
  nk::Var attention;  // n x (N*d); unset for heads without attention
};

// forced_attention, when set, replaces the computed gates (n x (N*d)).
ComposerOutput compose_rtic(nk::ParamBinder& bind, const RticConfig& cfg, nk::Var f_image, nk::Var f_text,
                            std::optional<nk::Var> forced_attention = std::nullopt);

// Gate matrix d x N for one batch row, the layout used in reports.
nk::Tensor attention_bank(nk::Var attention, const RticConfig& cfg, std::size_t row);

// Mean squared error between row-wise l2-normalized f and f_ir.
nk::Var ir_match_loss(nk::Var f, nk::Var f_ir);

}  // namespace rtic
