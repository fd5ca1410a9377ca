#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rtic/config.h"

namespace rtic {

struct Correction {
  std::string from;
  std::string to;
  std::size_t count = 0;
};

struct PreparedText {
  Vocabulary vocab;
  // Every token the encoder rewrites, over all splits, sorted by `from`.
  std::vector<Correction> corrections;
};

// Training vocabulary and correction report. Train-split tokens are first
// corrected against the external word list (or, without one, against the
// train corpus filtered by min_freq); the vocabulary is the corrected train
// tokens plus the external words.
PreparedText prepare_text(const std::vector<TripletRecord>& triplets, const WordList* external,
                          const SpellOverrides* overrides, const TextPrepConfig& cfg);

// Everything a subcommand reads, loaded and validated once.
struct Workspace {
  RunConfig config;
  std::string hash;
  FeatureStore features;
  std::optional<FeatureStore> ir_features;
  std::vector<TripletRecord> triplets;
  std::optional<WordList> external_words;
  std::optional<SpellOverrides> overrides;
  std::optional<EmbeddingFile> embeddings;
  PreparedText text;

  TrainingData training_data() const;
  ScoringInputs scoring_inputs() const;
  ModelSpec model_spec() const;
};

Workspace open_workspace(const RunConfig& cfg);

void run_synth(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
PreparedText run_prep(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
TrainResult run_train(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
RecallReport run_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& out_dir,
                      std::ostream& log);

// Manifest JSON:
//   {"members": [{"name": "rtic", "scores": {"shirt": "...", "dress": "...", "toptee": "..."},
//                 "holdout_scores": {...}}, ...],
//    "truth": "truth.tsv", "holdout_truth": "test/truth.tsv"}
// Paths are relative to the manifest. The holdout keys are optional but go
// together: with "holdout_truth" every member needs "holdout_scores".
struct EnsembleManifest {
  EnsemblePool pool;
  TruthSet truth;
  std::optional<Holdout> holdout;
};
EnsembleManifest load_manifest(const std::string& path);

IterativeResult run_ensemble(const RunConfig& cfg, const std::string& manifest, const std::string& out_dir,
                             std::ostream& log);

struct GradCheckRow {
  std::string component;
  nk::GradCheckResult result;
  bool passed = false;
  // Random instances drawn before one had no near-zero derivative.
  std::size_t draws = 1;
};

// Finite-difference checks over small instances of every encoder, composer
// and loss.
std::vector<GradCheckRow> gradient_suite(std::uint64_t seed, double tolerance = 1e-4);
std::vector<GradCheckRow> run_gradcheck(const RunConfig& cfg, std::ostream& log);

}  // namespace rtic
