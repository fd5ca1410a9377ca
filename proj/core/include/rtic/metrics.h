#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rtic/datastore.h"
#include "rtic/model.h"

namespace rtic {

// query id -> target gallery id
using GroundTruth = std::unordered_map<std::string, std::string>;
using ScoreSet = std::map<Category, ScoreMatrix>;
using TruthSet = std::map<Category, GroundTruth>;

// TSV query_id<TAB>target_id<TAB>category; leading '#' lines are metadata.
void save_truth(const TruthSet& truth, const std::string& path, const std::string& header_comment = "");
TruthSet load_truth(const std::string& path);

// Queries of one split, grouped by category.
TruthSet truth_for_split(const std::vector<TripletRecord>& triplets, Split split);

struct ScoringInputs {
  const FeatureStore* features = nullptr;
  const FeatureStore* ir_features = nullptr;  // gallery for IR-match models
  const Vocabulary* vocab = nullptr;
  const SpellOverrides* overrides = nullptr;
  bool spell_correct = true;
  std::size_t batch_size = 64;
};

// Cosine similarity of every composed query against every gallery item of
// one category (gallery order = store order). Captions are joined in their
// stored order.
ScoreMatrix build_score_matrix(const RetrievalModel& model,
                               std::span<const std::pair<std::string, const TripletRecord*>> queries,
                               Category category, const ScoringInputs& in);
ScoreSet build_score_set(const RetrievalModel& model, const std::vector<TripletRecord>& triplets, Split split,
                         const ScoringInputs& in);

// Row-wise cosine similarity between two row-major feature blocks.
std::vector<double> cosine_matrix(std::span<const double> a, std::size_t rows_a, std::span<const double> b,
                                  std::size_t rows_b, std::size_t dim);

// Percentage of queries whose target ranks in the top k, scores descending,
// ties broken by lexicographic gallery id.
double recall_at_k(const ScoreMatrix& m, const GroundTruth& truth, std::size_t k);

// R@k1 and R@k2 per category; average = mean of the six values.
RecallReport aggregate_report(const ScoreSet& scores, const TruthSet& truth, std::array<int, 2> ks = {10, 50});
// Report assembled from already computed per-category recalls.
RecallReport make_report(const std::map<Category, CategoryRecall>& recalls, std::array<int, 2> ks = {10, 50});

// (mean R@10 + mean R@50) / 2, which equals report.average.
double ensemble_objective(const RecallReport& report);

std::string report_json(const RecallReport& report, const std::string& config_hash = "");
std::string report_table(const RecallReport& report);

}  // namespace rtic
