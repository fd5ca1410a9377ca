#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rtic {

enum class Category { Shirt, Dress, Toptee };
enum class Split { Train, Val, Test };

inline constexpr std::array<Category, 3> kCategories{Category::Shirt, Category::Dress, Category::Toptee};

std::string_view to_string(Category c);
std::string_view to_string(Split s);
Category parse_category(std::string_view s);
Split parse_split(std::string_view s);

struct FeatureVector {
  std::string id;
  Category category = Category::Shirt;
  std::vector<double> values;
};

// Precomputed embeddings keyed by item id. Insertion order is preserved and is
// the gallery order everywhere downstream.
class FeatureStore {
 public:
  void add(FeatureVector v);
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  // Zero until the first insert.
  std::size_t dim() const { return dim_; }

  bool contains(std::string_view id) const;
  const FeatureVector& at(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;
  const std::vector<FeatureVector>& items() const { return items_; }
  std::vector<const FeatureVector*> in_category(Category c) const;

  bool operator==(const FeatureStore& o) const;

 private:
  std::vector<FeatureVector> items_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t dim_ = 0;
};

// TSV: id<TAB>category<TAB>v1,v2,...,vd
FeatureStore load_feature_store(const std::string& path);
FeatureStore parse_feature_store(std::string_view text, const std::string& source = "<memory>");
std::string serialize_feature_store(const FeatureStore& store);
void save_feature_store(const FeatureStore& store, const std::string& path);

struct TripletRecord {
  std::string candidate_id;
  std::string target_id;
  std::vector<std::string> captions;
  Category category = Category::Shirt;
  Split split = Split::Train;

  bool operator==(const TripletRecord&) const = default;
};

// JSON Lines, one record per line.
std::vector<TripletRecord> load_triplets(const std::string& path);
std::vector<TripletRecord> parse_triplets(std::string_view text, const std::string& source = "<memory>");
std::string serialize_triplets(const std::vector<TripletRecord>& triplets);
void save_triplets(const std::vector<TripletRecord>& triplets, const std::string& path);

// Throws MissingIdError naming the first unresolvable id.
void validate_triplets(const std::vector<TripletRecord>& triplets, const FeatureStore& store);

// Query ids are "<split>:<position among that split's records>".
std::string query_id(const TripletRecord& t, std::size_t position_in_split);
std::vector<std::pair<std::string, const TripletRecord*>> select_split(const std::vector<TripletRecord>& triplets,
                                                                       Split split);

struct ScoreMatrix {
  std::vector<std::string> query_ids;
  std::vector<std::string> gallery_ids;
  std::vector<double> values;  // row-major q x g

  std::size_t rows() const { return query_ids.size(); }
  std::size_t cols() const { return gallery_ids.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
  void validate() const;
  bool operator==(const ScoreMatrix&) const = default;
};

// TSV: header `<empty><TAB>g1<TAB>...<TAB>gg`, then `query_id<TAB>s1<TAB>...<TAB>sg`.
// Leading lines starting with '#' are metadata and are skipped on load.
void save_score_matrix(const ScoreMatrix& m, const std::string& path, const std::string& header_comment = "");
std::string serialize_score_matrix(const ScoreMatrix& m, const std::string& header_comment = "");
ScoreMatrix load_score_matrix(const std::string& path);
ScoreMatrix parse_score_matrix(std::string_view text, const std::string& source = "<memory>");

struct CategoryRecall {
  double r10 = 0.0;
  double r50 = 0.0;
};

struct RecallReport {
  std::map<Category, CategoryRecall> categories;
  double average = 0.0;
  std::array<int, 2> ks{10, 50};
};

struct SynthSpec {
  std::size_t n_items = 100;
  std::size_t dim = 16;
  std::size_t n_attrs = 8;
  std::size_t n_triplets = 400;
  std::size_t n_styles = 9;
  double noise = 0.01;
  // Standard deviation of base and direction entries.
  double feature_scale = 0.0625;
  double val_fraction = 0.2;
  double test_fraction = 0.0;
  std::size_t ir_dim = 64;
  double typo_rate = 0.0;
  std::size_t captions_per_triplet = 2;
  double attr_probability = 0.3;
};

struct SynthData {
  FeatureStore features;
  FeatureStore ir_features;
  std::vector<TripletRecord> triplets;
  // Word list with frequencies, written in the vocabulary file format.
  std::vector<std::pair<std::string, std::int64_t>> corpus;
  // Construction ground truth: attribute words and their direction vectors.
  std::vector<std::string> attribute_words;
  std::vector<std::vector<double>> directions;
  // Attributes each triplet adds to its candidate, as indices into the above.
  std::vector<std::vector<std::size_t>> added_attributes;
};

// Largest attribute vocabulary synth_dataset can draw from.
std::size_t synth_attribute_capacity();

// Items are style base vectors plus the direction of every attribute they
// carry; a triplet's target is its candidate with one or two attributes
// added, so target = candidate + named directions (+ bounded noise). Base and
// direction entries are multiples of 1/1024 so that sum is exact in f64.
SynthData synth_dataset(std::uint64_t seed, const SynthSpec& spec);

// Writes features.tsv, ir_features.tsv, triplets.jsonl and vocab.tsv.
void write_synth(const SynthData& data, const std::string& out_dir);

}  // namespace rtic
