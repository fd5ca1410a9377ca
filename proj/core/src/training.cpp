#include "rtic/training.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "rtic/errors.h"

namespace rtic {

using nk::Var;

std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::Sgd ? "SGD" : "ADAMW"; }

OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "SGD") return OptimizerKind::Sgd;
  if (s == "ADAMW") return OptimizerKind::AdamW;
  throw ValidationError("unknown optimizer '" + std::string(s) + "' (expected SGD or ADAMW)");
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ValidationError("train.lr must be > 0");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw ValidationError("train betas must be in [0, 1)");
  if (batch_size < 2) throw ValidationError("train.batch_size must be >= 2 for negative mining");
  if (weight_decay < 0) throw ValidationError("train.weight_decay must be >= 0");
  if (decay_every < 1) throw ValidationError("train.decay_every must be >= 1");
  if (!(lr_decay > 0)) throw ValidationError("train.lr_decay must be > 0");
  if (!(image_lr_factor > 0)) throw ValidationError("train.image_lr_factor must be > 0");
  if (margin < 0) throw ValidationError("train.margin must be >= 0");
}

Var pairwise_cosine_distance(Var queries, Var gallery) {
  if (queries.shape().size() != 2 || gallery.shape().size() != 2 || queries.cols() != gallery.cols())
    throw ShapeError("pairwise_cosine_distance: operands must be n x d and m x d");
  Var sim = nk::matmul(nk::l2_normalize(queries, 1), nk::transpose(nk::l2_normalize(gallery, 1)));
  return nk::add_scalar(nk::scalar_mul(sim, -1.0), 1.0);
}

Var batch_hard_triplet_loss(Var composed, Var targets, double margin, std::span<const std::string> target_ids) {
  const std::size_t n = composed.rows();
  if (n < 2) throw ValidationError("batch_hard_triplet_loss: need at least 2 rows");
  if (composed.shape() != targets.shape()) throw ShapeError("batch_hard_triplet_loss: composed/targets shapes differ");
  if (!target_ids.empty() && target_ids.size() != n) throw ShapeError("batch_hard_triplet_loss: one id per row");
  Var dist = pairwise_cosine_distance(composed, targets);
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = n;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (!target_ids.empty() && target_ids[j] == target_ids[i]) continue;
      const double d = dist.at(i, j);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    if (best == n) continue;  // no valid negative for this anchor
    pos.push_back(i * n + i);
    neg.push_back(i * n + best);
  }
  nk::Tape& tape = composed.tape();
  if (pos.empty()) return tape.constant({1}, {0.0});
  const std::size_t k = pos.size();
  Var hinge = nk::relu(nk::add_scalar(nk::sub(nk::gather(dist, std::move(pos), {k}), nk::gather(dist, std::move(neg), {k})), margin));
  return nk::scalar_mul(nk::sum(hinge), 1.0 / static_cast<double>(n));
}

double lr_at_epoch(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch / cfg.decay_every));
}

bool is_image_param(const std::string& name) { return name.rfind("image.", 0) == 0; }

void adamw_step(nk::ParamStore& params, OptimizerState& state, const TrainConfig& cfg, const LrForParam& lr_for) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (auto& [name, t] : params.tensors()) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) {
      m.assign(t.size(), 0.0);
      v.assign(t.size(), 0.0);
    }
    const double lr = lr_for(name);
    const bool has_grad = t.grad.size() == t.size();
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double g = has_grad ? t.grad[i] : 0.0;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      const double theta = t.values[i];
      t.values[i] = theta - lr * m_hat / (std::sqrt(v_hat) + 1e-8) - lr * cfg.weight_decay * theta;
    }
  }
}

void sgd_step(nk::ParamStore& params, OptimizerState& state, const TrainConfig& cfg, const LrForParam& lr_for) {
  ++state.step;
  for (auto& [name, t] : params.tensors()) {
    auto& buf = state.m[name];
    if (buf.empty()) buf.assign(t.size(), 0.0);
    const double lr = lr_for(name);
    const bool has_grad = t.grad.size() == t.size();
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double g = (has_grad ? t.grad[i] : 0.0) + cfg.weight_decay * t.values[i];
      buf[i] = cfg.momentum * buf[i] + g;
      t.values[i] -= lr * buf[i];
    }
  }
}

namespace {

nk::Tensor feature_rows(const FeatureStore& store, const std::vector<const std::string*>& ids) {
  nk::Tensor t = nk::Tensor::zeros({ids.size(), store.dim()});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& v = store.at(*ids[i]).values;
    std::copy(v.begin(), v.end(), t.values.begin() + static_cast<std::ptrdiff_t>(i * store.dim()));
  }
  return t;
}

}  // namespace

TrainResult train_run(const TrainingData& data, const ModelSpec& spec_in, const TrainConfig& cfg,
                      const EmbeddingFile* embeddings, const EpochCallback& on_epoch) {
  cfg.validate();
  if (!data.features || !data.triplets || !data.vocab) throw ValidationError("train_run: incomplete training data");
  ModelSpec spec = spec_in;
  if (spec.image_in == 0) spec.image_in = data.features->dim();
  if (spec.image_in != data.features->dim())
    throw DimensionError("model image_in " + std::to_string(spec.image_in) + " != feature dimension " +
                         std::to_string(data.features->dim()));
  const bool ir = spec.type == ComposerType::IrMatch;
  if (ir) {
    if (!data.ir_features) throw ValidationError("IR-match training needs IR features");
    if (data.ir_features->dim() != spec.d)
      throw DimensionError("IR-match needs d == IR feature dimension (" + std::to_string(data.ir_features->dim()) + ")");
  }
  validate_triplets(*data.triplets, *data.features);
  if (ir) validate_triplets(*data.triplets, *data.ir_features);

  std::vector<const TripletRecord*> train;
  for (const auto& t : *data.triplets)
    if (t.split == Split::Train) train.push_back(&t);
  if (train.size() < cfg.batch_size)
    throw ValidationError("train split has " + std::to_string(train.size()) + " triplets, fewer than one batch");

  std::vector<std::vector<std::vector<std::size_t>>> captions(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    for (const auto& c : train[i]->captions)
      captions[i].push_back(encode_caption(c, *data.vocab, data.spell_correct, data.overrides));

  TrainResult result{RetrievalModel::initialize(spec, *data.vocab, cfg.seed, embeddings), {}};
  RetrievalModel& model = result.model;
  OptimizerState opt;
  Rng shuffle_rng = make_stream(cfg.seed, "shuffle");
  const std::uint64_t caption_seed = make_stream(cfg.seed, "captions")();

  std::vector<std::size_t> order(train.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double epoch_lr = lr_at_epoch(epoch, cfg);
    const LrForParam lr_for = [&](const std::string& name) {
      return epoch_lr * (is_image_param(name) ? cfg.image_lr_factor : 1.0);
    };
    for (std::size_t start = 0; start + cfg.batch_size <= order.size(); start += cfg.batch_size) {
      std::vector<TokenSequence> seqs;
      std::vector<const std::string*> cand_ids, target_ids;
      std::vector<std::string> target_names;
      for (std::size_t b = start; b < start + cfg.batch_size; ++b) {
        const std::size_t idx = order[b];
        seqs.push_back(join_captions(captions[idx], mix_seed(mix_seed(caption_seed, epoch), idx)));
        cand_ids.push_back(&train[idx]->candidate_id);
        target_ids.push_back(&train[idx]->target_id);
        target_names.push_back(train[idx]->target_id);
      }
      model.params().zero_grad();
      nk::Tape tape;
      nk::ParamBinder bind(tape, model.params());
      TokenBatch text = make_token_batch(seqs);
      Var cand = tape.constant(feature_rows(*data.features, cand_ids));
      Var composed = model.compose(bind, text, cand);
      Var loss;
      if (ir) {
        Var ir_c = tape.constant(feature_rows(*data.ir_features, cand_ids));
        Var ir_t = tape.constant(feature_rows(*data.ir_features, target_ids));
        loss = nk::add(ir_match_loss(model.embed_image(bind, cand), ir_c), ir_match_loss(composed, ir_t));
      } else {
        Var targets = model.embed_image(bind, tape.constant(feature_rows(*data.features, target_ids)));
        loss = batch_hard_triplet_loss(composed, targets, cfg.margin, target_names);
      }
      const double loss_value = loss.item();
      if (!std::isfinite(loss_value))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step));
      tape.backward(loss);
      if (cfg.optimizer == OptimizerKind::AdamW) adamw_step(model.params(), opt, cfg, lr_for);
      else sgd_step(model.params(), opt, cfg, lr_for);
      result.log.push_back({epoch, step, loss_value, epoch_lr});
      ++step;
    }
    if (on_epoch && !result.log.empty()) on_epoch(result.log.back());
  }
  model.params().zero_grad();
  for (auto& [_, t] : model.params().tensors()) t.grad.clear();
  return result;
}

std::string metrics_log_jsonl(const std::vector<MetricsRecord>& log, const std::string& config_hash) {
  std::string out = nlohmann::json{{"config_hash", config_hash}}.dump() + "\n";
  for (const auto& r : log) {
    nlohmann::json j;
    j["epoch"] = r.epoch;
    j["step"] = r.step;
    j["loss"] = r.loss;
    j["lr"] = r.lr;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace rtic
