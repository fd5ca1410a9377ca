#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rtic/layers.h"
#include "rtic/textprep.h"

namespace rtic {

enum class TextVariant { Swem, Lstm, Gru, LstmPlusGru };

std::string_view to_string(TextVariant v);
TextVariant parse_text_variant(std::string_view s);

struct TextEncoderConfig {
  TextVariant variant = TextVariant::LstmPlusGru;
  std::size_t e_word = 32;
  std::size_t hidden = 32;
  std::size_t layers = 2;
  std::size_t out_dim = 64;

  void validate() const;
  // Width of the pooled/recurrent representation before the output projection.
  std::size_t pre_projection_width() const;
};

struct ImageEncoderConfig {
  std::size_t in_dim = 0;
  std::size_t hidden = 64;
  std::size_t out_dim = 64;

  void validate() const;
};

// Optional external word vectors: word -> row of width e_word.
using EmbeddingFile = std::unordered_map<std::string, std::vector<double>>;
// TSV word<TAB>v1,...,ve
EmbeddingFile load_embedding_file(const std::string& path);

// Table rows found in `external` are copied; the rest are uniform(-0.05, 0.05).
void init_embedding_table(nk::ParamStore& ps, const Vocabulary& vocab, std::size_t e_word, Rng& rng,
                          const EmbeddingFile* external = nullptr);
void init_text_encoder(nk::ParamStore& ps, const TextEncoderConfig& cfg, const Vocabulary& vocab, Rng& rng,
                       const EmbeddingFile* external = nullptr);
void init_image_encoder(nk::ParamStore& ps, const ImageEncoderConfig& cfg, Rng& rng);

// Padded, time-major view of a batch of token sequences. mask[b*max_len+t]
// is 1 for real tokens and 0 for [PAD].
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t max_len = 0;
  std::vector<std::size_t> ids;
  std::vector<double> mask;
};
TokenBatch make_token_batch(std::span<const TokenSequence> seqs);
TokenBatch make_token_batch(std::span<const std::vector<std::size_t>> seqs);

// seq.size() x e_word rows of the embedding table.
nk::Var embed(nk::ParamBinder& bind, std::span<const std::size_t> seq);

// concat(mean over unmasked rows, max over unmasked rows): length 2*e_word.
nk::Var swem_encode(nk::Var E, std::span<const double> mask);

// Stacked recurrences over time-major steps (each step batch x in). Padded
// steps carry the previous state through unchanged; the returned matrix
// (batch x hidden) is the top layer's state after each row's last real token.
nk::Var gru_forward(nk::ParamBinder& bind, const std::string& prefix, std::size_t layers, std::size_t hidden,
                    std::span<const nk::Var> steps, const TokenBatch& batch);
nk::Var lstm_forward(nk::ParamBinder& bind, const std::string& prefix, std::size_t layers, std::size_t hidden,
                     std::span<const nk::Var> steps, const TokenBatch& batch);

void init_gru(nk::ParamStore& ps, const std::string& prefix, std::size_t layers, std::size_t in, std::size_t hidden,
              Rng& rng);
void init_lstm(nk::ParamStore& ps, const std::string& prefix, std::size_t layers, std::size_t in, std::size_t hidden,
               Rng& rng);

// f_T for every sequence in the batch: batch x out_dim.
nk::Var text_encode(nk::ParamBinder& bind, const TextEncoderConfig& cfg, const TokenBatch& batch);
// Representation before the output projection: batch x pre_projection_width().
nk::Var text_features(nk::ParamBinder& bind, const TextEncoderConfig& cfg, const TokenBatch& batch);

// relu MLP over precomputed image features: x (n x in_dim) -> n x out_dim.
nk::Var image_project(nk::ParamBinder& bind, const ImageEncoderConfig& cfg, nk::Var x);

}  // namespace rtic
