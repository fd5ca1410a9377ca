#pragma once

#include <cstdint>

#include "rtic/composers.h"
#include "rtic/encoders.h"

namespace rtic {

// One single model of the ensemble: text encoder, image projector and a
// composition head, all producing d-wide features.
struct ModelSpec {
  ComposerType type = ComposerType::Rtic;
  std::size_t d = 64;
  TextEncoderConfig text;  // out_dim is taken from d
  std::size_t image_in = 0;
  std::size_t image_hidden = 64;
  std::size_t rtic_blocks = 2;
  std::size_t rtic_block_hidden = 64;
  std::size_t tirg_hidden = 64;
  // Head trained by IR-match regression (Rtic or Tirg).
  ComposerType ir_inner = ComposerType::Rtic;

  void validate() const;
  TextEncoderConfig text_config() const;
  ImageEncoderConfig image_config() const;
  RticConfig rtic_config() const;
  TirgConfig tirg_config() const;
  // Head actually used by compose().
  ComposerType head() const { return type == ComposerType::IrMatch ? ir_inner : type; }
};

class RetrievalModel {
 public:
  RetrievalModel(ModelSpec spec, nk::ParamStore params);
  static RetrievalModel initialize(const ModelSpec& spec, const Vocabulary& vocab, std::uint64_t seed,
                                   const EmbeddingFile* embeddings = nullptr);

  const ModelSpec& spec() const { return spec_; }
  nk::ParamStore& params() { return params_; }
  const nk::ParamStore& params() const { return params_; }

  // Composed query features (n x d). candidates is n x image_in; Text-only
  // ignores it.
  nk::Var compose(nk::ParamBinder& bind, const TokenBatch& text, nk::Var candidates) const;
  // psi(x): n x image_in -> n x d.
  nk::Var embed_image(nk::ParamBinder& bind, nk::Var images) const;
  // IR-match is scored against raw gallery IR features instead of psi(x).
  bool scores_against_ir() const { return spec_.type == ComposerType::IrMatch; }

 private:
  ModelSpec spec_;
  nk::ParamStore params_;
};

}  // namespace rtic
