#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rtic/datastore.h"
#include "rtic/model.h"

namespace rtic {

enum class OptimizerKind { Sgd, AdamW };

std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view s);

struct TrainConfig {
  double lr = 0.00011148;
  double beta1 = 0.47;
  double beta2 = 0.999;
  double weight_decay = 0.01;
  std::size_t batch_size = 32;
  std::size_t epochs = 80;
  double lr_decay = 0.474;
  std::size_t decay_every = 10;
  double image_lr_factor = 0.48;
  double margin = 0.2;
  OptimizerKind optimizer = OptimizerKind::AdamW;
  double momentum = 0.9;  // SGD only
  std::uint64_t seed = 0;

  void validate() const;
};

// Per-parameter moment buffers (AdamW) or momentum buffers (SGD, in m).
struct OptimizerState {
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
  std::int64_t step = 0;
};

// D[i][j] = 1 - cos(Q_i, G_j); zero rows raise NumericError.
nk::Var pairwise_cosine_distance(nk::Var queries, nk::Var gallery);

// Mean over anchors of max(0, D[i][i] - min_{j != i} D[i][j] + margin).
// When target_ids is given, columns whose id equals the anchor's own target
// id are not negatives for that anchor.
nk::Var batch_hard_triplet_loss(nk::Var composed, nk::Var targets, double margin,
                                std::span<const std::string> target_ids = {});

// lr * lr_decay^floor(epoch / decay_every)
double lr_at_epoch(std::size_t epoch, const TrainConfig& cfg);

using LrForParam = std::function<double(const std::string& name)>;

// Decoupled weight decay:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + 1e-8) - lr * wd * theta
void adamw_step(nk::ParamStore& params, OptimizerState& state, const TrainConfig& cfg, const LrForParam& lr_for);
// Heavy-ball SGD with coupled L2: buf <- mu buf + g + wd theta; theta <- theta - lr buf.
void sgd_step(nk::ParamStore& params, OptimizerState& state, const TrainConfig& cfg, const LrForParam& lr_for);

// Image-path parameters train at image_lr_factor times the base rate.
bool is_image_param(const std::string& name);

struct TrainingData {
  const FeatureStore* features = nullptr;
  const FeatureStore* ir_features = nullptr;  // IR-match only
  const std::vector<TripletRecord>* triplets = nullptr;
  const Vocabulary* vocab = nullptr;
  const SpellOverrides* overrides = nullptr;
  bool spell_correct = true;
};

struct MetricsRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  RetrievalModel model;
  std::vector<MetricsRecord> log;
};

using EpochCallback = std::function<void(const MetricsRecord& last_of_epoch)>;

// Seeded epoch loop over the train split: shuffle, drop the short tail batch,
// reshuffle caption order per epoch, batch-hard triplet loss (or IR
// regression for IR-match), backward, optimizer step.
TrainResult train_run(const TrainingData& data, const ModelSpec& spec, const TrainConfig& cfg,
                      const EmbeddingFile* embeddings = nullptr, const EpochCallback& on_epoch = {});

std::string metrics_log_jsonl(const std::vector<MetricsRecord>& log, const std::string& config_hash);

}  // namespace rtic
