#include "rtic/pipeline.h"

#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "rtic/errors.h"
#include "rtic/textio.h"

namespace rtic {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string hash_comment(const std::string& hash) { return "config_hash=" + hash; }

void check_exists(const std::string& path, const std::string& field) {
  if (!fs::exists(path)) throw ValidationError("config: " + field + ": file not found: " + path);
}

}  // namespace

PreparedText prepare_text(const std::vector<TripletRecord>& triplets, const WordList* external,
                          const SpellOverrides* overrides, const TextPrepConfig& cfg) {
  std::vector<std::string> raw;
  for (const auto& t : triplets)
    if (t.split == Split::Train)
      for (const auto& c : t.captions)
        for (auto& tok : tokenize(c)) raw.push_back(std::move(tok));

  const bool has_external = external && !external->empty();
  const Vocabulary dict = has_external ? build_vocab({}, 1, external) : build_vocab(raw, cfg.min_freq);
  std::vector<std::string> corrected;
  corrected.reserve(raw.size());
  std::map<std::string, std::string> memo;
  for (const auto& tok : raw) {
    if (!cfg.spell_correct || dict.contains_word(tok)) {
      corrected.push_back(tok);
      continue;
    }
    auto it = memo.find(tok);
    if (it == memo.end()) it = memo.emplace(tok, correct_token(tok, dict, overrides)).first;
    corrected.push_back(it->second);
  }

  PreparedText out{build_vocab(corrected, cfg.min_freq, external), {}};
  if (!cfg.spell_correct) return out;
  std::map<std::string, Correction> changes;
  for (const auto& t : triplets)
    for (const auto& c : t.captions)
      for (const auto& tok : tokenize(c)) {
        if (out.vocab.contains_word(tok)) continue;
        auto it = changes.find(tok);
        if (it == changes.end()) {
          std::string to = correct_token(tok, out.vocab, overrides);
          if (to == tok) continue;
          it = changes.emplace(tok, Correction{tok, std::move(to), 0}).first;
        }
        ++it->second.count;
      }
  for (auto& [_, c] : changes) out.corrections.push_back(std::move(c));
  return out;
}

TrainingData Workspace::training_data() const {
  return {&features, ir_features ? &*ir_features : nullptr, &triplets, &text.vocab,
          overrides ? &*overrides : nullptr, config.text.spell_correct};
}

ScoringInputs Workspace::scoring_inputs() const {
  return {&features, ir_features ? &*ir_features : nullptr, &text.vocab, overrides ? &*overrides : nullptr,
          config.text.spell_correct, config.metrics.batch_size};
}

ModelSpec Workspace::model_spec() const {
  ModelSpec spec = config.model;
  spec.image_in = features.dim();
  return spec;
}

Workspace open_workspace(const RunConfig& cfg) {
  Workspace ws;
  ws.config = cfg;
  ws.hash = config_hash(cfg);
  const DataPaths& d = cfg.data;
  const std::string features = d.resolve(d.features), triplets = d.resolve(d.triplets);
  check_exists(features, "data.features");
  check_exists(triplets, "data.triplets");
  ws.features = load_feature_store(features);
  ws.triplets = load_triplets(triplets);
  validate_triplets(ws.triplets, ws.features);
  if (cfg.model.type == ComposerType::IrMatch) {
    const std::string ir = d.resolve(d.ir_features);
    check_exists(ir, "data.ir_features");
    ws.ir_features = load_feature_store(ir);
    validate_triplets(ws.triplets, *ws.ir_features);
  }
  if (!d.vocab.empty()) {
    const std::string p = d.resolve(d.vocab);
    check_exists(p, "data.vocab");
    ws.external_words = load_word_list(p);
  }
  if (!d.overrides.empty()) {
    const std::string p = d.resolve(d.overrides);
    check_exists(p, "data.overrides");
    ws.overrides = load_overrides(p);
  }
  if (!d.embeddings.empty()) {
    const std::string p = d.resolve(d.embeddings);
    check_exists(p, "data.embeddings");
    ws.embeddings = load_embedding_file(p);
  }
  ws.text = prepare_text(ws.triplets, ws.external_words ? &*ws.external_words : nullptr,
                         ws.overrides ? &*ws.overrides : nullptr, cfg.text);
  return ws;
}

void run_synth(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  SynthData data = synth_dataset(cfg.seed, cfg.synth);
  write_synth(data, out_dir);
  io::write_file(path_in(out_dir, "config.json"), run_config_json(cfg));
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& t : data.triplets) ++counts[static_cast<int>(t.split)];
  log << "wrote " << data.features.items().size() << " items, " << data.triplets.size() << " triplets (train "
      << counts[0] << ", val " << counts[1] << ", test " << counts[2] << ") to " << out_dir << "\n";
}

PreparedText run_prep(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  const DataPaths& d = cfg.data;
  const std::string triplets_path = d.resolve(d.triplets);
  check_exists(triplets_path, "data.triplets");
  auto triplets = load_triplets(triplets_path);
  std::optional<WordList> words;
  if (!d.vocab.empty()) {
    check_exists(d.resolve(d.vocab), "data.vocab");
    words = load_word_list(d.resolve(d.vocab));
  }
  std::optional<SpellOverrides> overrides;
  if (!d.overrides.empty()) {
    check_exists(d.resolve(d.overrides), "data.overrides");
    overrides = load_overrides(d.resolve(d.overrides));
  }
  const SpellOverrides* ov = overrides ? &*overrides : nullptr;
  PreparedText text = prepare_text(triplets, words ? &*words : nullptr, ov, cfg.text);
  const std::string hash = config_hash(cfg);

  io::write_file(path_in(out_dir, "vocab.tsv"), serialize_vocabulary(text.vocab));
  std::string tokens = json{{"config_hash", hash}}.dump() + "\n";
  std::map<Split, std::size_t> position;
  for (const auto& t : triplets) {
    json caps = json::array();
    for (const auto& c : t.captions) {
      json toks = json::array();
      for (auto idx : encode_caption(c, text.vocab, cfg.text.spell_correct, ov)) toks.push_back(text.vocab.token(idx));
      caps.push_back(std::move(toks));
    }
    tokens += json{{"query_id", query_id(t, position[t.split]++)}, {"tokens", caps}}.dump() + "\n";
  }
  io::write_file(path_in(out_dir, "tokens.jsonl"), tokens);

  std::string report = "# " + hash_comment(hash) + "\n";
  for (const auto& c : text.corrections) {
    report += c.from + "\t" + c.to + "\t" + std::to_string(c.count) + "\n";
    log << c.from << " → " << c.to << " (" << c.count << ")\n";
  }
  io::write_file(path_in(out_dir, "corrections.tsv"), report);
  log << "vocabulary " << text.vocab.size() << " tokens, " << text.corrections.size() << " corrections\n";
  return text;
}

TrainResult run_train(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  Workspace ws = open_workspace(cfg);
  auto on_epoch = [&](const MetricsRecord& r) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "epoch %3zu  step %6zu  loss %.6f  lr %.6g\n", r.epoch, r.step, r.loss, r.lr);
    log << buf << std::flush;
  };
  TrainResult res = train_run(ws.training_data(), ws.model_spec(), cfg.train,
                              ws.embeddings ? &*ws.embeddings : nullptr, on_epoch);
  nk::save_checkpoint(path_in(out_dir, "checkpoint.tsv"), res.model.params(), ws.hash);
  io::write_file(path_in(out_dir, "metrics.jsonl"), metrics_log_jsonl(res.log, ws.hash));
  log << "checkpoint " << path_in(out_dir, "checkpoint.tsv") << " (" << res.model.params().parameter_count()
      << " parameters)\n";
  return res;
}

RecallReport run_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& out_dir,
                      std::ostream& log) {
  Workspace ws = open_workspace(cfg);
  if (!fs::exists(checkpoint)) throw ValidationError("checkpoint not found: " + checkpoint);
  nk::Checkpoint ck = nk::load_checkpoint(checkpoint);
  if (ck.config_hash != ws.hash)
    throw ValidationError(checkpoint + ": config hash " + ck.config_hash + " does not match the config (" + ws.hash +
                          ")");
  const ModelSpec spec = ws.model_spec();
  // Same names and shapes as a fresh model of this config.
  RetrievalModel fresh = RetrievalModel::initialize(spec, ws.text.vocab, cfg.seed);
  for (const auto& [name, t] : fresh.params().tensors()) {
    if (!ck.params.contains(name)) throw ValidationError(checkpoint + ": missing tensor '" + name + "'");
    if (ck.params.get(name).shape != t.shape)
      throw ValidationError(checkpoint + ": tensor '" + name + "' has shape " +
                            nk::shape_str(ck.params.get(name).shape) + ", expected " + nk::shape_str(t.shape));
  }
  if (ck.params.size() != fresh.params().size()) throw ValidationError(checkpoint + ": unexpected extra tensors");

  RetrievalModel model(spec, std::move(ck.params));
  ScoreSet scores = build_score_set(model, ws.triplets, cfg.metrics.split, ws.scoring_inputs());
  TruthSet truth = truth_for_split(ws.triplets, cfg.metrics.split);
  RecallReport report = aggregate_report(scores, truth, cfg.metrics.ks);
  for (const auto& [cat, m] : scores)
    save_score_matrix(m, path_in(out_dir, "scores_" + std::string(to_string(cat)) + ".tsv"), hash_comment(ws.hash));
  save_truth(truth, path_in(out_dir, "truth.tsv"), hash_comment(ws.hash));
  io::write_file(path_in(out_dir, "report.json"), report_json(report, ws.hash));
  log << report_table(report);
  return report;
}

namespace {

ScoreSet load_score_set(const json& j, const fs::path& base, const std::string& what) {
  if (!j.is_object()) throw ValidationError(what + ": expected an object of category -> path");
  ScoreSet out;
  for (const auto& [cat, p] : j.items()) {
    if (!p.is_string()) throw ValidationError(what + "." + cat + ": expected a path");
    Category c;
    try {
      c = parse_category(cat);
    } catch (const Error& e) {
      throw ValidationError(what + ": " + e.what());
    }
    const std::string path = (base / p.get<std::string>()).lexically_normal().string();
    if (!fs::exists(path)) throw ValidationError(what + "." + cat + ": file not found: " + path);
    out.emplace(c, load_score_matrix(path));
  }
  return out;
}

}  // namespace

EnsembleManifest load_manifest(const std::string& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
  const fs::path base = fs::path(path).parent_path();
  static const std::set<std::string> kKeys = {"members", "truth", "holdout_truth"};
  static const std::set<std::string> kMemberKeys = {"name", "scores", "holdout_scores"};
  if (!j.is_object()) throw ValidationError(path + ": expected a JSON object");
  for (const auto& [k, _] : j.items())
    if (!kKeys.count(k)) throw ValidationError(path + ": unknown key '" + k + "'");
  if (!j.contains("members") || !j["members"].is_array() || j["members"].empty())
    throw ValidationError(path + ": 'members' must be a non-empty array");
  if (!j.contains("truth") || !j["truth"].is_string()) throw ValidationError(path + ": 'truth' must be a path");

  EnsembleManifest m;
  const bool holdout = j.contains("holdout_truth");
  Holdout held;
  for (std::size_t i = 0; i < j["members"].size(); ++i) {
    const json& mj = j["members"][i];
    const std::string where = path + ": members[" + std::to_string(i) + "]";
    if (!mj.is_object()) throw ValidationError(where + ": expected an object");
    for (const auto& [k, _] : mj.items())
      if (!kMemberKeys.count(k)) throw ValidationError(where + ": unknown key '" + k + "'");
    if (!mj.contains("name") || !mj["name"].is_string()) throw ValidationError(where + ": 'name' must be a string");
    if (!mj.contains("scores")) throw ValidationError(where + ": missing 'scores'");
    const std::string name = mj["name"].get<std::string>();
    m.pool.add(name, load_score_set(mj["scores"], base, where + ".scores"));
    if (holdout) {
      if (!mj.contains("holdout_scores")) throw ValidationError(where + ": missing 'holdout_scores'");
      held.pool.add(name, load_score_set(mj["holdout_scores"], base, where + ".holdout_scores"));
    }
  }
  auto truth_path = [&](const char* key) {
    if (!j[key].is_string()) throw ValidationError(path + ": '" + std::string(key) + "' must be a path");
    const std::string p = (base / j[key].get<std::string>()).lexically_normal().string();
    if (!fs::exists(p)) throw ValidationError(path + ": " + key + ": file not found: " + p);
    return p;
  };
  m.truth = load_truth(truth_path("truth"));
  if (holdout) {
    held.truth = load_truth(truth_path("holdout_truth"));
    m.holdout = std::move(held);
  }
  m.pool.validate();
  return m;
}

IterativeResult run_ensemble(const RunConfig& cfg, const std::string& manifest, const std::string& out_dir,
                             std::ostream& log) {
  if (!fs::exists(manifest)) throw ValidationError("manifest not found: " + manifest);
  EnsembleManifest m = load_manifest(manifest);
  if (cfg.ensemble.row_zscore) {
    for (auto& s : m.pool.members) row_zscore(s);
    if (m.holdout)
      for (auto& s : m.holdout->pool.members) row_zscore(s);
  }
  const std::string hash = config_hash(cfg);
  IterativeResult res =
      iterative_ensemble(m.pool, m.truth, cfg.ensemble.iterative, cfg.seed, m.holdout ? &*m.holdout : nullptr);

  io::write_file(path_in(out_dir, "weights.json"), weights_json(res, m.pool.names, hash));
  io::write_file(path_in(out_dir, "history.jsonl"), history_jsonl(res, hash));
  for (const auto& [cat, mat] : res.best_scores)
    save_score_matrix(mat, path_in(out_dir, "fused_" + std::string(to_string(cat)) + ".tsv"), hash_comment(hash));
  for (std::size_t r = 0; r < res.rounds.size(); ++r) {
    char buf[160];
    const auto& rr = res.rounds[r];
    if (rr.holdout_objective)
      std::snprintf(buf, sizeof(buf), "round %zu  members %zu  objective %.4f  holdout %.4f\n", r + 1,
                    rr.pool_names.size(), rr.result.best_objective, *rr.holdout_objective);
    else
      std::snprintf(buf, sizeof(buf), "round %zu  members %zu  objective %.4f\n", r + 1, rr.pool_names.size(),
                    rr.result.best_objective);
    log << buf;
  }
  log << "weights";
  for (std::size_t k = 0; k < m.pool.size(); ++k) log << "  " << m.pool.names[k] << "=" << res.effective_weights[k];
  log << "\n";
  return res;
}

std::vector<GradCheckRow> run_gradcheck(const RunConfig& cfg, std::ostream& log) {
  auto rows = gradient_suite(cfg.seed);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-20s %14s %8s %6s  %-6s %s\n", "component", "max_rel_error", "coords", "draws",
                "status", "worst");
  log << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-20s %14.3e %8zu %6zu  %-6s %s[%zu] %.3e/%.3e\n", r.component.c_str(),
                  r.result.max_rel_error, r.result.coords_checked, r.draws, r.passed ? "PASS" : "FAIL", r.result.worst_param.c_str(),
                  r.result.worst_index, r.result.worst_analytic, r.result.worst_numeric);
    log << buf;
  }
  return rows;
}

}  // namespace rtic
