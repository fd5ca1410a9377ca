#include "rtic/config.h"

#include <cstdio>
#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "rtic/errors.h"
#include "rtic/textio.h"

namespace rtic {

using json = nlohmann::json;

namespace {

// Reads fields of one JSON object, remembering which keys were consumed so
// leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError("config: '" + label() + "' must be an object");
  }
  ~Section() = default;

  template <typename T>
  void get(const char* key, T& out) {
    auto it = j_.find(key);
    seen_.insert(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, std::size_t>) {
        if (!it->is_number_unsigned()) throw ValidationError("expected a non-negative integer");
      } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!it->is_number_unsigned()) throw ValidationError("expected a non-negative integer");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!it->is_number()) throw ValidationError("expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ValidationError("expected true or false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ValidationError("expected a string");
      }
      out = it->get<T>();
    } catch (const std::exception& e) {
      throw ValidationError("config: field '" + label(key) + "': " + e.what());
    }
  }

  template <typename Fn>
  void get_with(const char* key, Fn&& fn) {
    auto it = j_.find(key);
    seen_.insert(key);
    if (it == j_.end()) return;
    try {
      fn(*it);
    } catch (const ValidationError& e) {
      const std::string what = e.what();
      if (what.rfind("config:", 0) == 0) throw;
      throw ValidationError("config: field '" + label(key) + "': " + what);
    } catch (const Error& e) {
      throw ValidationError("config: field '" + label(key) + "': " + e.what());
    } catch (const json::exception& e) {
      throw ValidationError("config: field '" + label(key) + "': " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string label(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [k, _] : j_.items())
      if (!seen_.count(k)) throw ValidationError("config: unknown key '" + label(k) + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string expect_string(const json& v) {
  if (!v.is_string()) throw ValidationError("expected a string");
  return v.get<std::string>();
}

void read_text_encoder(Section& s, TextEncoderConfig& t) {
  s.get_with("variant", [&](const json& v) { t.variant = parse_text_variant(expect_string(v)); });
  s.get("e_word", t.e_word);
  s.get("hidden", t.hidden);
  s.get("layers", t.layers);
}

void read_model(const json& j, ModelSpec& m) {
  Section s(j, "model");
  s.get_with("type", [&](const json& v) { m.type = parse_composer_type(expect_string(v)); });
  s.get("d", m.d);
  if (const json* enc = s.child("encoder")) {
    Section e(*enc, "model.encoder");
    read_text_encoder(e, m.text);
    e.finish();
  }
  s.get("image_hidden", m.image_hidden);
  if (const json* r = s.child("rtic")) {
    Section rs(*r, "model.rtic");
    rs.get("blocks", m.rtic_blocks);
    rs.get("block_hidden", m.rtic_block_hidden);
    rs.finish();
  }
  if (const json* t = s.child("tirg")) {
    Section ts(*t, "model.tirg");
    ts.get("hidden", m.tirg_hidden);
    ts.finish();
  }
  s.get_with("ir_inner", [&](const json& v) { m.ir_inner = parse_composer_type(expect_string(v)); });
  s.finish();
}

void read_train(const json& j, TrainConfig& t) {
  Section s(j, "train");
  s.get_with("optimizer", [&](const json& v) { t.optimizer = parse_optimizer(expect_string(v)); });
  s.get("lr", t.lr);
  s.get("beta1", t.beta1);
  s.get("beta2", t.beta2);
  s.get("weight_decay", t.weight_decay);
  s.get("batch_size", t.batch_size);
  s.get("epochs", t.epochs);
  s.get("lr_decay", t.lr_decay);
  s.get("decay_every", t.decay_every);
  s.get("image_lr_factor", t.image_lr_factor);
  s.get("margin", t.margin);
  s.get("momentum", t.momentum);
  s.finish();
}

void read_synth(const json& j, SynthSpec& p) {
  Section s(j, "synth");
  s.get("n_items", p.n_items);
  s.get("dim", p.dim);
  s.get("n_attrs", p.n_attrs);
  s.get("n_triplets", p.n_triplets);
  s.get("n_styles", p.n_styles);
  s.get("noise", p.noise);
  s.get("feature_scale", p.feature_scale);
  s.get("val_fraction", p.val_fraction);
  s.get("test_fraction", p.test_fraction);
  s.get("ir_dim", p.ir_dim);
  s.get("typo_rate", p.typo_rate);
  s.get("captions_per_triplet", p.captions_per_triplet);
  s.get("attr_probability", p.attr_probability);
  s.finish();
}

json text_encoder_json(const TextEncoderConfig& t) {
  return {{"variant", std::string(to_string(t.variant))},
          {"e_word", t.e_word},
          {"hidden", t.hidden},
          {"layers", t.layers}};
}

json model_json(const ModelSpec& m) {
  return {{"type", std::string(to_string(m.type))},
          {"d", m.d},
          {"encoder", text_encoder_json(m.text)},
          {"image_hidden", m.image_hidden},
          {"rtic", {{"blocks", m.rtic_blocks}, {"block_hidden", m.rtic_block_hidden}}},
          {"tirg", {{"hidden", m.tirg_hidden}}},
          {"ir_inner", std::string(to_string(m.ir_inner))}};
}

// Reals go through format_real so the canonical text is stable.
json real(double v) { return json::parse(io::format_real(v)); }

json train_json(const TrainConfig& t) {
  return {{"optimizer", std::string(to_string(t.optimizer))},
          {"lr", real(t.lr)},
          {"beta1", real(t.beta1)},
          {"beta2", real(t.beta2)},
          {"weight_decay", real(t.weight_decay)},
          {"batch_size", t.batch_size},
          {"epochs", t.epochs},
          {"lr_decay", real(t.lr_decay)},
          {"decay_every", t.decay_every},
          {"image_lr_factor", real(t.image_lr_factor)},
          {"margin", real(t.margin)},
          {"momentum", real(t.momentum)}};
}

json text_json(const TextPrepConfig& t) { return {{"min_freq", t.min_freq}, {"spell_correct", t.spell_correct}}; }

}  // namespace

std::string DataPaths::resolve(const std::string& p) const {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  return (std::filesystem::path(dir) / path).lexically_normal().string();
}

void RunConfig::validate() const {
  ModelSpec m = model;
  if (m.image_in == 0) m.image_in = 1;  // taken from the feature file at run time
  m.validate();
  train.validate();
  if (metrics.ks[0] < 1 || metrics.ks[1] < 1) throw ValidationError("config: metrics.ks must be >= 1");
  if (metrics.batch_size < 1) throw ValidationError("config: metrics.batch_size must be >= 1");
  ensemble.iterative.tpe.validate();
  if (ensemble.iterative.rounds < 1) throw ValidationError("config: ensemble.rounds must be >= 1");
  if (ensemble.iterative.n_trials < 1) throw ValidationError("config: ensemble.trials must be >= 1");
  if (ensemble.iterative.stop_eps < 0) throw ValidationError("config: ensemble.stop_eps must be >= 0");
}

RunConfig parse_run_config(std::string_view json_text, const std::string& source) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(source + ": invalid JSON: " + e.what());
  }
  RunConfig cfg;
  try {
    Section root(j, "");
    root.get("seed", cfg.seed);
    if (const json* d = root.child("data")) {
      Section s(*d, "data");
      s.get("dir", cfg.data.dir);
      s.get("features", cfg.data.features);
      s.get("ir_features", cfg.data.ir_features);
      s.get("triplets", cfg.data.triplets);
      s.get("vocab", cfg.data.vocab);
      s.get("embeddings", cfg.data.embeddings);
      s.get("overrides", cfg.data.overrides);
      s.finish();
    }
    if (const json* v = root.child("synth")) read_synth(*v, cfg.synth);
    if (const json* v = root.child("text")) {
      Section s(*v, "text");
      s.get("min_freq", cfg.text.min_freq);
      s.get("spell_correct", cfg.text.spell_correct);
      s.finish();
    }
    if (const json* v = root.child("model")) read_model(*v, cfg.model);
    if (const json* v = root.child("train")) read_train(*v, cfg.train);
    if (const json* v = root.child("metrics")) {
      Section s(*v, "metrics");
      s.get_with("ks", [&](const json& k) {
        if (!k.is_array() || k.size() != 2 || !k[0].is_number_integer() || !k[1].is_number_integer())
          throw ValidationError("expected two integers");
        cfg.metrics.ks = {k[0].get<int>(), k[1].get<int>()};
      });
      s.get_with("split", [&](const json& v2) { cfg.metrics.split = parse_split(expect_string(v2)); });
      s.get("batch_size", cfg.metrics.batch_size);
      s.finish();
    }
    if (const json* v = root.child("ensemble")) {
      Section s(*v, "ensemble");
      auto& it = cfg.ensemble.iterative;
      s.get("trials", it.n_trials);
      s.get("gamma", it.tpe.gamma);
      s.get("n_startup", it.tpe.n_startup);
      s.get("n_candidates", it.tpe.n_candidates);
      s.get("rounds", it.rounds);
      s.get("stop_eps", it.stop_eps);
      s.get("row_zscore", cfg.ensemble.row_zscore);
      s.finish();
    }
    root.finish();
  } catch (const ParseError& e) {
    throw ValidationError(source + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
  cfg.train.seed = cfg.seed;
  cfg.ensemble.iterative.tpe.ks = cfg.metrics.ks;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  RunConfig cfg = parse_run_config(io::read_file(path), path);
  const auto base = std::filesystem::path(path).parent_path();
  if (!std::filesystem::path(cfg.data.dir).is_absolute())
    cfg.data.dir = (base / cfg.data.dir).lexically_normal().string();
  return cfg;
}

std::string run_config_json(const RunConfig& cfg) {
  const auto& s = cfg.synth;
  const auto& it = cfg.ensemble.iterative;
  json j;
  j["seed"] = cfg.seed;
  j["data"] = {{"dir", cfg.data.dir},         {"features", cfg.data.features}, {"ir_features", cfg.data.ir_features},
               {"triplets", cfg.data.triplets}, {"vocab", cfg.data.vocab},       {"embeddings", cfg.data.embeddings},
               {"overrides", cfg.data.overrides}};
  j["synth"] = {{"n_items", s.n_items},
                {"dim", s.dim},
                {"n_attrs", s.n_attrs},
                {"n_triplets", s.n_triplets},
                {"n_styles", s.n_styles},
                {"noise", real(s.noise)},
                {"feature_scale", real(s.feature_scale)},
                {"val_fraction", real(s.val_fraction)},
                {"test_fraction", real(s.test_fraction)},
                {"ir_dim", s.ir_dim},
                {"typo_rate", real(s.typo_rate)},
                {"captions_per_triplet", s.captions_per_triplet},
                {"attr_probability", real(s.attr_probability)}};
  j["text"] = text_json(cfg.text);
  j["model"] = model_json(cfg.model);
  j["train"] = train_json(cfg.train);
  j["metrics"] = {{"ks", {cfg.metrics.ks[0], cfg.metrics.ks[1]}},
                  {"split", std::string(to_string(cfg.metrics.split))},
                  {"batch_size", cfg.metrics.batch_size}};
  j["ensemble"] = {{"trials", it.n_trials},         {"gamma", real(it.tpe.gamma)}, {"n_startup", it.tpe.n_startup},
                   {"n_candidates", it.tpe.n_candidates}, {"rounds", it.rounds}, {"stop_eps", real(it.stop_eps)},
                   {"row_zscore", cfg.ensemble.row_zscore}};
  return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["text"] = text_json(cfg.text);
  j["model"] = model_json(cfg.model);
  j["train"] = train_json(cfg.train);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

}  // namespace rtic
