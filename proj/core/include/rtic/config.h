#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "rtic/datastore.h"
#include "rtic/ensemble.h"
#include "rtic/model.h"
#include "rtic/training.h"

namespace rtic {

// Input files. Relative paths are resolved against `dir`, and `dir` itself
// against the directory holding the config file.
struct DataPaths {
  std::string dir = ".";
  std::string features = "features.tsv";
  std::string ir_features = "ir_features.tsv";
  std::string triplets = "triplets.jsonl";
  std::string vocab = "vocab.tsv";  // external word list; optional
  std::string embeddings;           // optional
  std::string overrides;            // optional

  std::string resolve(const std::string& p) const;
};

struct TextPrepConfig {
  std::size_t min_freq = 1;
  bool spell_correct = true;
};

struct MetricsConfig {
  std::array<int, 2> ks{10, 50};
  Split split = Split::Val;
  std::size_t batch_size = 64;
};

struct EnsembleConfig {
  IterativeConfig iterative;
  bool row_zscore = false;
};

struct RunConfig {
  std::uint64_t seed = 0;
  DataPaths data;
  SynthSpec synth;
  TextPrepConfig text;
  ModelSpec model;
  TrainConfig train;  // train.seed mirrors seed
  MetricsConfig metrics;
  EnsembleConfig ensemble;

  void validate() const;
};

// Every key is optional; unknown keys and wrong types raise ValidationError
// naming the offending field.
RunConfig parse_run_config(std::string_view json_text, const std::string& source = "<memory>");
RunConfig load_run_config(const std::string& path);
std::string run_config_json(const RunConfig& cfg);

// 16 hex digits over the canonical form of the sections that define a
// trained model: seed, text, model, train.
std::string config_hash(const RunConfig& cfg);

}  // namespace rtic
