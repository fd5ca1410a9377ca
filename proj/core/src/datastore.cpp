#include "rtic/datastore.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "rtic/errors.h"
#include "rtic/rng.h"
#include "rtic/textio.h"

namespace rtic {

using nlohmann::json;

std::string_view to_string(Category c) {
  switch (c) {
    case Category::Shirt: return "shirt";
    case Category::Dress: return "dress";
    case Category::Toptee: return "toptee";
  }
  return "?";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Category parse_category(std::string_view s) {
  for (auto c : kCategories)
    if (to_string(c) == s) return c;
  throw ParseError("unknown category '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  for (auto sp : {Split::Train, Split::Val, Split::Test})
    if (to_string(sp) == s) return sp;
  throw ParseError("unknown split '" + std::string(s) + "'");
}

// ---- FeatureStore ---------------------------------------------------------

void FeatureStore::add(FeatureVector v) {
  if (v.values.empty()) throw DimensionError("feature '" + v.id + "' has no values");
  if (dim_ != 0 && v.values.size() != dim_)
    throw DimensionError("feature '" + v.id + "' has dimension " + std::to_string(v.values.size()) +
                         ", store dimension is " + std::to_string(dim_));
  for (double x : v.values)
    if (!std::isfinite(x)) throw NumericError("feature '" + v.id + "' has a non-finite value");
  if (index_.count(v.id)) throw DuplicateError("duplicate feature id '" + v.id + "'");
  dim_ = v.values.size();
  index_.emplace(v.id, items_.size());
  items_.push_back(std::move(v));
}

bool FeatureStore::contains(std::string_view id) const { return index_.count(std::string(id)) != 0; }

std::size_t FeatureStore::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw MissingIdError("unknown feature id '" + std::string(id) + "'");
  return it->second;
}

const FeatureVector& FeatureStore::at(std::string_view id) const { return items_[index_of(id)]; }

std::vector<const FeatureVector*> FeatureStore::in_category(Category c) const {
  std::vector<const FeatureVector*> out;
  for (const auto& v : items_)
    if (v.category == c) out.push_back(&v);
  return out;
}

bool FeatureStore::operator==(const FeatureStore& o) const {
  if (dim_ != o.dim_ || items_.size() != o.items_.size()) return false;
  for (std::size_t i = 0; i < items_.size(); ++i)
    if (items_[i].id != o.items_[i].id || items_[i].category != o.items_[i].category ||
        items_[i].values != o.items_[i].values)
      return false;
  return true;
}

FeatureStore parse_feature_store(std::string_view text, const std::string& source) {
  FeatureStore store;
  auto lines = io::split(text, '\n');
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    auto line = lines[ln];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto fields = io::split(line, '\t');
    if (fields.size() != 3) throw ParseError(source, ln + 1, "expected id<TAB>category<TAB>values");
    if (fields[0].empty()) throw ParseError(source, ln + 1, "empty id");
    FeatureVector v;
    v.id = std::string(fields[0]);
    try {
      v.category = parse_category(fields[1]);
    } catch (const ParseError& e) {
      throw ParseError(source, ln + 1, e.what());
    }
    for (auto f : io::split(fields[2], ',')) {
      double x;
      if (!io::parse_real(f, x)) throw ParseError(source, ln + 1, "bad value '" + std::string(f) + "'");
      v.values.push_back(x);
    }
    try {
      store.add(std::move(v));
    } catch (const DimensionError& e) {
      throw DimensionError(source + ":" + std::to_string(ln + 1) + ": " + e.what());
    } catch (const DuplicateError& e) {
      throw DuplicateError(source + ":" + std::to_string(ln + 1) + ": " + e.what());
    }
  }
  return store;
}

FeatureStore load_feature_store(const std::string& path) { return parse_feature_store(io::read_file(path), path); }

std::string serialize_feature_store(const FeatureStore& store) {
  std::string out;
  for (const auto& v : store.items()) {
    out += v.id;
    out += '\t';
    out += to_string(v.category);
    out += '\t';
    for (std::size_t i = 0; i < v.values.size(); ++i) {
      if (i) out += ',';
      out += io::format_real(v.values[i]);
    }
    out += '\n';
  }
  return out;
}

void save_feature_store(const FeatureStore& store, const std::string& path) {
  io::write_file(path, serialize_feature_store(store));
}

// ---- Triplets -------------------------------------------------------------

std::vector<TripletRecord> parse_triplets(std::string_view text, const std::string& source) {
  std::vector<TripletRecord> out;
  auto lines = io::split(text, '\n');
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    auto line = io::trim(lines[ln]);
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      TripletRecord t;
      t.candidate_id = j.at("candidate_id").get<std::string>();
      t.target_id = j.at("target_id").get<std::string>();
      t.captions = j.at("captions").get<std::vector<std::string>>();
      t.category = parse_category(j.at("category").get<std::string>());
      t.split = parse_split(j.at("split").get<std::string>());
      if (t.captions.empty()) throw ParseError("captions must be non-empty");
      out.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw ParseError(source, ln + 1, e.what());
    } catch (const ParseError& e) {
      throw ParseError(source, ln + 1, e.what());
    }
  }
  return out;
}

std::vector<TripletRecord> load_triplets(const std::string& path) { return parse_triplets(io::read_file(path), path); }

std::string serialize_triplets(const std::vector<TripletRecord>& triplets) {
  std::string out;
  for (const auto& t : triplets) {
    json j;
    j["candidate_id"] = t.candidate_id;
    j["target_id"] = t.target_id;
    j["captions"] = t.captions;
    j["category"] = std::string(to_string(t.category));
    j["split"] = std::string(to_string(t.split));
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_triplets(const std::vector<TripletRecord>& triplets, const std::string& path) {
  io::write_file(path, serialize_triplets(triplets));
}

void validate_triplets(const std::vector<TripletRecord>& triplets, const FeatureStore& store) {
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    for (const auto* id : {&t.candidate_id, &t.target_id})
      if (!store.contains(*id))
        throw MissingIdError("triplet " + std::to_string(i) + " references unknown id '" + *id + "'");
    if (t.captions.empty()) throw ValidationError("triplet " + std::to_string(i) + " has no captions");
  }
}

std::string query_id(const TripletRecord& t, std::size_t position_in_split) {
  return std::string(to_string(t.split)) + ":" + std::to_string(position_in_split);
}

std::vector<std::pair<std::string, const TripletRecord*>> select_split(const std::vector<TripletRecord>& triplets,
                                                                       Split split) {
  std::vector<std::pair<std::string, const TripletRecord*>> out;
  for (const auto& t : triplets)
    if (t.split == split) out.emplace_back(query_id(t, out.size()), &t);
  return out;
}

// ---- ScoreMatrix ----------------------------------------------------------

void ScoreMatrix::validate() const {
  if (query_ids.empty() || gallery_ids.empty()) throw ValidationError("score matrix must be at least 1x1");
  if (values.size() != query_ids.size() * gallery_ids.size())
    throw ShapeError("score matrix values do not match " + std::to_string(rows()) + "x" + std::to_string(cols()));
  for (double v : values)
    if (std::isnan(v)) throw NumericError("score matrix contains NaN");
}

std::string serialize_score_matrix(const ScoreMatrix& m, const std::string& header_comment) {
  m.validate();
  std::string out;
  if (!header_comment.empty()) out += "# " + header_comment + "\n";
  for (const auto& g : m.gallery_ids) {
    out += '\t';
    out += g;
  }
  out += '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out += m.query_ids[i];
    for (std::size_t j = 0; j < m.cols(); ++j) {
      out += '\t';
      out += io::format_real(m.at(i, j));
    }
    out += '\n';
  }
  return out;
}

void save_score_matrix(const ScoreMatrix& m, const std::string& path, const std::string& header_comment) {
  io::write_file(path, serialize_score_matrix(m, header_comment));
}

ScoreMatrix parse_score_matrix(std::string_view text, const std::string& source) {
  ScoreMatrix m;
  auto lines = io::split(text, '\n');
  bool have_header = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    auto line = lines[ln];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!have_header && line.front() == '#') continue;
    auto fields = io::split(line, '\t');
    if (!have_header) {
      if (fields.size() < 2 || !fields[0].empty())
        throw ParseError(source, ln + 1, "header must be an empty cell followed by gallery ids");
      for (std::size_t j = 1; j < fields.size(); ++j) m.gallery_ids.emplace_back(fields[j]);
      have_header = true;
      continue;
    }
    if (fields.size() != m.gallery_ids.size() + 1)
      throw ParseError(source, ln + 1,
                       "row has " + std::to_string(fields.size() - 1) + " values, header declares " +
                           std::to_string(m.gallery_ids.size()));
    m.query_ids.emplace_back(fields[0]);
    for (std::size_t j = 1; j < fields.size(); ++j) {
      double x;
      if (!io::parse_real(fields[j], x)) throw ParseError(source, ln + 1, "bad score '" + std::string(fields[j]) + "'");
      m.values.push_back(x);
    }
  }
  if (!have_header) throw ParseError(source, 1, "missing header row");
  if (m.query_ids.empty()) throw ParseError(source, lines.size(), "no query rows");
  return m;
}

ScoreMatrix load_score_matrix(const std::string& path) { return parse_score_matrix(io::read_file(path), path); }

// ---- Synthetic data -------------------------------------------------------

namespace {

const std::vector<std::string>& attribute_pool() {
  static const std::vector<std::string> words{
      "white",  "black", "red",    "blue",    "green",  "yellow", "pink",   "purple", "striped", "floral",
      "plaid",  "sleeveless", "longer", "shorter", "looser", "tighter", "shiny", "darker", "brighter", "lace"};
  return words;
}

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words{"is",    "and",   "has",  "more", "with", "a",     "the",   "it",
                                              "color", "style", "less", "same", "but",  "pattern", "fabric", "looks"};
  return words;
}

// Multiples of 1/1024 in [-2 scale, 2 scale]: small dyadic values, so sums of
// a handful of them are exact in double precision.
double dyadic(Rng& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  double x = std::clamp(n(rng), -2.0 * scale, 2.0 * scale);
  return std::round(x * 1024.0) / 1024.0;
}

std::string make_typo(const std::string& w, Rng& rng, const std::set<std::string>& known) {
  if (w.size() < 4) return w;
  std::uniform_int_distribution<std::size_t> pos(1, w.size() - 3);
  for (int attempt = 0; attempt < 8; ++attempt) {
    std::string t = w;
    std::size_t p = pos(rng);
    std::swap(t[p], t[p + 1]);
    if (t != w && !known.count(t)) return t;
  }
  return w;
}

std::string item_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "item-%05zu", i);
  return buf;
}

}  // namespace

std::size_t synth_attribute_capacity() { return attribute_pool().size(); }

SynthData synth_dataset(std::uint64_t seed, const SynthSpec& spec) {
  if (spec.n_attrs == 0 || spec.n_attrs > attribute_pool().size())
    throw ValidationError("n_attrs must be in [1, " + std::to_string(attribute_pool().size()) + "]");
  if (spec.dim < spec.n_attrs) throw ValidationError("dim must be >= n_attrs");
  if (spec.n_items == 0 || spec.n_styles == 0) throw ValidationError("n_items and n_styles must be positive");
  if (spec.n_triplets == 0) throw ValidationError("n_triplets must be positive");
  if (!(spec.feature_scale > 0)) throw ValidationError("feature_scale must be positive");
  if (spec.noise < 0) throw ValidationError("noise must be non-negative");
  if (spec.val_fraction < 0 || spec.test_fraction < 0 || spec.val_fraction + spec.test_fraction > 1)
    throw ValidationError("split fractions must be non-negative and sum to at most 1");
  if (spec.captions_per_triplet == 0) throw ValidationError("captions_per_triplet must be positive");
  if (spec.ir_dim == 0) throw ValidationError("ir_dim must be positive");
  if (spec.typo_rate < 0 || spec.typo_rate > 1) throw ValidationError("typo_rate must be in [0, 1]");
  const std::size_t max_keys = spec.n_styles << spec.n_attrs;
  if (spec.n_items > max_keys / 2) throw ValidationError("n_items too large for n_styles x 2^n_attrs combinations");

  Rng rng = make_stream(seed, "data");
  SynthData out;
  out.attribute_words.assign(attribute_pool().begin(), attribute_pool().begin() + spec.n_attrs);

  std::vector<std::vector<double>> bases(spec.n_styles, std::vector<double>(spec.dim));
  for (auto& b : bases)
    for (auto& x : b) x = dyadic(rng, spec.feature_scale);
  out.directions.assign(spec.n_attrs, std::vector<double>(spec.dim));
  for (auto& d : out.directions)
    for (auto& x : d) x = dyadic(rng, spec.feature_scale);

  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  using Key = std::pair<std::size_t, std::uint32_t>;  // (style, attribute mask)
  std::map<Key, std::size_t> by_key;
  std::vector<Key> keys;

  auto make_item = [&](const Key& key) {
    FeatureVector v;
    v.id = item_id(keys.size());
    v.category = kCategories[key.first % kCategories.size()];
    v.values = bases[key.first];
    for (std::size_t a = 0; a < spec.n_attrs; ++a)
      if (key.second & (1u << a))
        for (std::size_t k = 0; k < spec.dim; ++k) v.values[k] += out.directions[a][k];
    if (spec.noise > 0)
      for (auto& x : v.values) x += spec.noise * unit(rng);
    by_key.emplace(key, keys.size());
    keys.push_back(key);
    out.features.add(std::move(v));
  };

  std::uniform_int_distribution<std::size_t> style_dist(0, spec.n_styles - 1);
  std::bernoulli_distribution attr_on(spec.attr_probability);
  const std::uint32_t full = (spec.n_attrs >= 32) ? ~0u : ((1u << spec.n_attrs) - 1);
  while (keys.size() < spec.n_items) {
    Key key{style_dist(rng), 0};
    for (std::size_t a = 0; a < spec.n_attrs; ++a)
      if (attr_on(rng)) key.second |= (1u << a);
    if (key.second == full || by_key.count(key)) continue;
    make_item(key);
  }

  std::set<std::string> known(attribute_pool().begin(), attribute_pool().end());
  known.insert(filler_words().begin(), filler_words().end());
  std::bernoulli_distribution typo(spec.typo_rate);
  auto word = [&](std::size_t a) {
    const std::string& w = out.attribute_words[a];
    return typo(rng) ? make_typo(w, rng, known) : w;
  };

  std::uniform_int_distribution<std::size_t> cand_dist(0, spec.n_items - 1);
  std::uniform_int_distribution<int> coin(0, 1);
  static const char* kOpeners[] = {"is", "has", "more", "looks"};
  for (std::size_t t = 0; t < spec.n_triplets; ++t) {
    const std::size_t c = cand_dist(rng);
    const Key ck = keys[c];
    std::vector<std::size_t> off;
    for (std::size_t a = 0; a < spec.n_attrs; ++a)
      if (!(ck.second & (1u << a))) off.push_back(a);
    std::shuffle(off.begin(), off.end(), rng);
    const std::size_t n_add = (off.size() >= 2 && coin(rng)) ? 2 : 1;
    std::vector<std::size_t> added(off.begin(), off.begin() + static_cast<std::ptrdiff_t>(n_add));
    std::sort(added.begin(), added.end());

    Key tk = ck;
    for (auto a : added) tk.second |= (1u << a);
    auto it = by_key.find(tk);
    if (it == by_key.end()) {
      make_item(tk);
      it = by_key.find(tk);
    }

    TripletRecord rec;
    rec.candidate_id = item_id(c);
    rec.target_id = item_id(it->second);
    rec.category = kCategories[ck.first % kCategories.size()];
    for (std::size_t k = 0; k < spec.captions_per_triplet; ++k) {
      std::string cap = kOpeners[(t + k) % 4];
      for (std::size_t i = 0; i < added.size(); ++i) {
        if (i) cap += (k % 2) ? " with" : " and";
        cap += " " + word(added[i]);
      }
      rec.captions.push_back(std::move(cap));
    }
    out.triplets.push_back(std::move(rec));
    out.added_attributes.push_back(std::move(added));
  }

  std::vector<std::size_t> order(out.triplets.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n = static_cast<double>(order.size());
  const auto n_val = static_cast<std::size_t>(std::llround(spec.val_fraction * n));
  const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * n));
  for (std::size_t r = 0; r < order.size(); ++r) {
    auto& rec = out.triplets[order[r]];
    rec.split = r < n_val ? Split::Val : (r < n_val + n_test ? Split::Test : Split::Train);
  }

  // IR features: a fixed random linear view of the image features.
  std::normal_distribution<double> proj_dist(0.0, 1.0 / std::sqrt(static_cast<double>(spec.dim)));
  std::vector<double> proj(spec.ir_dim * spec.dim);
  for (auto& x : proj) x = proj_dist(rng);
  for (const auto& v : out.features.items()) {
    FeatureVector ir;
    ir.id = v.id;
    ir.category = v.category;
    ir.values.assign(spec.ir_dim, 0.0);
    for (std::size_t r = 0; r < spec.ir_dim; ++r)
      for (std::size_t k = 0; k < spec.dim; ++k) ir.values[r] += proj[r * spec.dim + k] * v.values[k];
    out.ir_features.add(std::move(ir));
  }

  std::int64_t freq = 50000;
  for (const auto& w : filler_words()) out.corpus.emplace_back(w, freq -= 1000);
  freq = 20000;
  for (const auto& w : attribute_pool()) out.corpus.emplace_back(w, freq -= 500);
  return out;
}

void write_synth(const SynthData& data, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  save_feature_store(data.features, (fs::path(out_dir) / "features.tsv").string());
  save_feature_store(data.ir_features, (fs::path(out_dir) / "ir_features.tsv").string());
  save_triplets(data.triplets, (fs::path(out_dir) / "triplets.jsonl").string());
  std::string vocab;
  for (const auto& [w, f] : data.corpus) vocab += w + "\t" + std::to_string(f) + "\n";
  io::write_file((fs::path(out_dir) / "vocab.tsv").string(), vocab);
}

}  // namespace rtic
