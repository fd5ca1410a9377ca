#include "rtic/model.h"

#include "rtic/errors.h"

namespace rtic {

void ModelSpec::validate() const {
  if (d < 1) throw ValidationError("model d must be >= 1");
  if (image_in < 1) throw ValidationError("model image_in must be >= 1");
  if (type == ComposerType::IrMatch && ir_inner != ComposerType::Rtic && ir_inner != ComposerType::Tirg)
    throw ValidationError("IR-match head must be rtic or tirg");
  text_config().validate();
  image_config().validate();
  rtic_config().validate();
  if (tirg_hidden < 1) throw ValidationError("tirg_hidden must be >= 1");
}

TextEncoderConfig ModelSpec::text_config() const {
  TextEncoderConfig c = text;
  c.out_dim = d;
  return c;
}

ImageEncoderConfig ModelSpec::image_config() const { return {image_in, image_hidden, d}; }

RticConfig ModelSpec::rtic_config() const { return {d, rtic_blocks, rtic_block_hidden}; }

TirgConfig ModelSpec::tirg_config() const { return {d, tirg_hidden}; }

RetrievalModel::RetrievalModel(ModelSpec spec, nk::ParamStore params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
}

RetrievalModel RetrievalModel::initialize(const ModelSpec& spec, const Vocabulary& vocab, std::uint64_t seed,
                                          const EmbeddingFile* embeddings) {
  spec.validate();
  Rng rng = make_stream(seed, "init");
  nk::ParamStore ps;
  init_text_encoder(ps, spec.text_config(), vocab, rng, embeddings);
  init_image_encoder(ps, spec.image_config(), rng);
  switch (spec.head()) {
    case ComposerType::TextOnly: init_text_only(ps, spec.d, rng); break;
    case ComposerType::Tirg: init_tirg(ps, spec.tirg_config(), rng); break;
    case ComposerType::Rtic: init_rtic(ps, spec.rtic_config(), rng); break;
    case ComposerType::IrMatch: break;
  }
  return RetrievalModel(spec, std::move(ps));
}

nk::Var RetrievalModel::compose(nk::ParamBinder& bind, const TokenBatch& text, nk::Var candidates) const {
  nk::Var f_text = text_encode(bind, spec_.text_config(), text);
  if (spec_.head() == ComposerType::TextOnly) return compose_text_only(bind, f_text);
  nk::Var f_image = embed_image(bind, candidates);
  if (f_image.rows() != f_text.rows()) throw ShapeError("compose: candidate and caption batch sizes differ");
  if (spec_.head() == ComposerType::Tirg) return compose_tirg(bind, f_image, f_text);
  return compose_rtic(bind, spec_.rtic_config(), f_image, f_text).composed;
}

nk::Var RetrievalModel::embed_image(nk::ParamBinder& bind, nk::Var images) const {
  return image_project(bind, spec_.image_config(), images);
}

}  // namespace rtic
