#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rtic/metrics.h"
#include "rtic/rng.h"

namespace rtic {

using EnsembleWeights = std::vector<double>;

struct TrialRecord {
  EnsembleWeights weights;
  double objective = 0.0;
};

// Named per-category score sets. Every member has the same categories and,
// per category, the same query and gallery orderings.
struct EnsemblePool {
  std::vector<std::string> names;
  std::vector<ScoreSet> members;

  std::size_t size() const { return members.size(); }
  void add(std::string name, ScoreSet scores);
  void validate() const;
};

// Per-row (x - mean) / stddev; constant rows become zero.
void row_zscore(ScoreMatrix& m);
void row_zscore(ScoreSet& s);

ScoreMatrix weighted_sum(std::span<const ScoreMatrix* const> mats, std::span<const double> w);
ScoreSet weighted_sum(const EnsemblePool& pool, std::span<const double> w);

struct TpeConfig {
  double gamma = 0.25;
  std::size_t n_startup = 20;
  std::size_t n_candidates = 24;
  std::array<int, 2> ks{10, 50};

  void validate() const;
};

// Density over [0,1] used by the suggester: equal-weight mixture of
// truncated Gaussians, one per observation plus a wide prior at 0.5.
struct ParzenDensity {
  std::vector<double> mu;
  std::vector<double> sigma;

  static ParzenDensity fit(std::vector<double> obs);
  double log_pdf(double x) const;
  double sample(Rng& rng) const;
};

EnsembleWeights tpe_suggest(const std::vector<TrialRecord>& history, std::size_t n_dims, const TpeConfig& cfg,
                            Rng& rng);

struct TpeResult {
  EnsembleWeights best_weights;
  ScoreSet best_scores;
  RecallReport best_report;
  double best_objective = -std::numeric_limits<double>::infinity();
  std::vector<TrialRecord> history;
};

// Trials listed in `initial` are evaluated first, in order, and count
// towards n_trials.
TpeResult tpe_optimize(const EnsemblePool& pool, const TruthSet& truth, std::size_t n_trials, std::uint64_t seed,
                       const TpeConfig& cfg, const std::vector<EnsembleWeights>& initial = {});

struct IterativeConfig {
  std::size_t rounds = 3;
  std::size_t n_trials = 200;
  double stop_eps = 0.05;
  TpeConfig tpe;
};

struct RoundRecord {
  std::vector<std::string> pool_names;
  TpeResult result;
  // Weights of the round's best fusion expressed over the original members.
  EnsembleWeights effective_weights;
  std::optional<double> holdout_objective;
};

struct IterativeResult {
  ScoreSet best_scores;
  EnsembleWeights effective_weights;
  double best_objective = 0.0;
  std::vector<RoundRecord> rounds;
};

// Same members scored on held-out queries.
struct Holdout {
  EnsemblePool pool;
  TruthSet truth;
};

// Round 1 optimizes the pool; each later round adds the current best fusion
// as a member and starts from the one-hot trial on it. Stops once a round
// gains less than stop_eps. With a holdout, every round's best weights are
// also evaluated there (never optimized on).
IterativeResult iterative_ensemble(const EnsemblePool& pool, const TruthSet& truth, const IterativeConfig& cfg,
                                   std::uint64_t seed, const Holdout* holdout = nullptr);

// JSONL, one line per trial: {"round", "trial", "weights", "objective"}.
std::string history_jsonl(const IterativeResult& result, const std::string& config_hash);
std::string weights_json(const IterativeResult& result, const std::vector<std::string>& member_names,
                         const std::string& config_hash);

}  // namespace rtic
