// Acceptance suite. Prints one PASS/FAIL line per criterion; with arguments
// (e.g. `rtic_acceptance A3 A7`) runs only the named criteria. Exit status is
// non-zero when any selected criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.h"
#include "pools.h"
#include "rtic/pipeline.h"

using namespace rtic;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- A1 --------------------------------------------------------------------

Outcome a1() {
  const auto t0 = std::chrono::steady_clock::now();
  auto rows = gradient_suite(0, 1e-4);
  const double secs = seconds_since(t0);
  std::set<std::string> need = {"enc.swem", "enc.gru", "enc.lstm", "enc.lstm_plus_gru", "composer.text_only",
                                "composer.tirg", "composer.rtic", "composer.ir_match", "loss.triplet",
                                "loss.ir_match"};
  double worst = 0.0;
  std::string worst_name, failed;
  for (const auto& r : rows) {
    need.erase(r.component);
    if (r.result.max_rel_error > worst) {
      worst = r.result.max_rel_error;
      worst_name = r.component;
    }
    if (!r.passed || r.result.coords_checked == 0) failed += " " + r.component;
  }
  std::string missing;
  for (const auto& n : need) missing += " " + n;
  const bool pass = failed.empty() && missing.empty() && worst < 1e-4 && secs < 60.0;
  return {pass, fmt("%zu components, max rel err %.2e (%s), %.1f s%s%s", rows.size(), worst, worst_name.c_str(), secs,
                    failed.empty() ? "" : ("; failed:" + failed).c_str(),
                    missing.empty() ? "" : ("; missing:" + missing).c_str())};
}

// ---- A2 --------------------------------------------------------------------

Outcome a2() {
  Rng rng = make_stream(2, "data");
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> margin(0.0, 1.0), fine(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> n_dist(2, 8), d_dist(1, 16), id_dist(0, 4), size(1, 50);
  std::uniform_int_distribution<int> coarse(-2, 2);
  std::bernoulli_distribution coin(0.5);

  std::size_t triplet_ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = n_dist(rng), d = d_dist(rng);
    nk::Tensor c = nk::Tensor::zeros({n, d}), t = nk::Tensor::zeros({n, d});
    oracle::Matrix cm(n, std::vector<double>(d)), tm(n, std::vector<double>(d));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) {
        c.at(i, k) = cm[i][k] = g(rng);
        t.at(i, k) = tm[i][k] = g(rng);
      }
    std::vector<std::string> ids;
    if (coin(rng))
      for (std::size_t i = 0; i < n; ++i) ids.push_back("t" + std::to_string(id_dist(rng)));
    const double m = margin(rng);
    nk::Tape tape(false);
    const double got = batch_hard_triplet_loss(tape.constant(c), tape.constant(t), m, ids).item();
    if (got == oracle::batch_hard_triplet(cm, tm, m, ids)) ++triplet_ok;
  }

  std::size_t recall_ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t q = size(rng), gsz = size(rng);
    const bool ties = coin(rng);
    ScoreMatrix sm;
    oracle::Matrix rows(q);
    GroundTruth truth;
    std::vector<std::size_t> cols;
    std::vector<std::size_t> perm(gsz);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (auto p : perm) sm.gallery_ids.push_back("g" + std::to_string(p));
    std::uniform_int_distribution<std::size_t> col(0, gsz - 1), kd(1, gsz);
    for (std::size_t i = 0; i < q; ++i) {
      sm.query_ids.push_back("q" + std::to_string(i));
      for (std::size_t j = 0; j < gsz; ++j) {
        const double s = ties ? coarse(rng) * 0.25 : fine(rng);
        sm.values.push_back(s);
        rows[i].push_back(s);
      }
      cols.push_back(col(rng));
      truth[sm.query_ids[i]] = sm.gallery_ids[cols.back()];
    }
    const std::size_t k = kd(rng);
    const double expect =
        100.0 * static_cast<double>(oracle::recall_hits(rows, sm.gallery_ids, cols, k)) / static_cast<double>(q);
    if (recall_at_k(sm, truth, k) == expect) ++recall_ok;
  }
  return {triplet_ok == 100 && recall_ok == 100,
          fmt("triplet loss exact on %zu/100 batches, recall exact on %zu/100 matrices", triplet_ok, recall_ok)};
}

// ---- A3 --------------------------------------------------------------------

Outcome a3() {
  auto report = [](std::array<double, 6> v) {
    return make_report(
        {{Category::Shirt, {v[0], v[1]}}, {Category::Dress, {v[2], v[3]}}, {Category::Toptee, {v[4], v[5]}}});
  };
  const double single = report({21.30, 44.80, 28.21, 51.41, 28.00, 55.58}).average;
  const double fused = report({26.55, 52.65, 33.07, 59.35, 35.49, 63.23}).average;
  const bool ok1 = std::abs(single - 38.22) <= 0.005;
  const bool ok2 = std::abs(fused - 45.05) <= 0.005;
  return {ok1 && ok2, fmt("single %.4f vs 38.22 (|d| %.4f %s), ensemble %.4f vs 45.05 (|d| %.4f %s), tol 0.005",
                          single, std::abs(single - 38.22), ok1 ? "ok" : "over", fused, std::abs(fused - 45.05),
                          ok2 ? "ok" : "over")};
}

// ---- A4 --------------------------------------------------------------------

Outcome a4() {
  std::size_t onehot_ok = 0, onehot_total = 0, scale_ok = 0, scale_total = 0, monotone_ok = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto p = pools::planted(1000 + seed, {1.6, 1.2, 0.9, 0.0});
    for (std::size_t k = 0; k < p.pool.size(); ++k) {
      std::vector<double> w(p.pool.size(), 0.0);
      w[k] = 1.0;
      const auto a = aggregate_report(weighted_sum(p.pool, w), p.truth);
      const auto b = aggregate_report(p.pool.members[k], p.truth);
      bool same = a.average == b.average;
      for (auto c : kCategories)
        same = same && a.categories.at(c).r10 == b.categories.at(c).r10 &&
               a.categories.at(c).r50 == b.categories.at(c).r50;
      onehot_ok += same;
      ++onehot_total;
    }
    Rng rng = make_stream(seed, "tpe");
    std::uniform_real_distribution<double> u(0.05, 1.0), scale(0.01, 100.0);
    std::vector<double> w(p.pool.size());
    for (auto& x : w) x = u(rng);
    const auto ref = aggregate_report(weighted_sum(p.pool, w), p.truth);
    for (double c : {0.5, 4.0, scale(rng), scale(rng)}) {
      std::vector<double> cw = w;
      for (auto& x : cw) x *= c;
      const auto r = aggregate_report(weighted_sum(p.pool, cw), p.truth);
      bool same = true;
      for (auto cat : kCategories)
        same = same && r.categories.at(cat).r10 == ref.categories.at(cat).r10 &&
               r.categories.at(cat).r50 == ref.categories.at(cat).r50;
      scale_ok += same;
      ++scale_total;
    }
    IterativeConfig cfg;
    cfg.rounds = 4;
    cfg.n_trials = 40;
    cfg.stop_eps = 0.0;
    auto res = iterative_ensemble(p.pool, p.truth, cfg, seed);
    bool mono = true;
    for (std::size_t r = 1; r < res.rounds.size(); ++r)
      mono = mono && res.rounds[r].result.best_objective >= res.rounds[r - 1].result.best_objective;
    monotone_ok += mono;
  }
  return {onehot_ok == onehot_total && scale_ok == scale_total && monotone_ok == 20,
          fmt("one-hot exact %zu/%zu, rescaling invariant %zu/%zu, non-decreasing rounds on %zu/20 pools", onehot_ok,
              onehot_total, scale_ok, scale_total, monotone_ok)};
}

// ---- A5 / A6 ---------------------------------------------------------------

// The synthetic benchmark shared by A5 and A6: 400 train / 100 val triplets,
// 16-dim features, 8 attributes, noise 0.01.
struct Bench {
  SynthData data;
  Vocabulary vocab;
  TruthSet truth;
  std::map<ComposerType, ScoreSet> scores;
  std::map<ComposerType, double> train_seconds;
  std::size_t min_gallery = 0;
};

SynthSpec bench_spec() {
  SynthSpec s;
  s.n_items = 180;
  s.dim = 16;
  s.n_attrs = 8;
  s.n_triplets = 500;
  s.val_fraction = 0.2;
  s.noise = 0.01;
  return s;
}

Bench& bench() {
  static std::optional<Bench> b;
  if (!b) {
    b.emplace();
    b->data = synth_dataset(0, bench_spec());
    PreparedText text = prepare_text(b->data.triplets, &b->data.corpus, nullptr, TextPrepConfig{});
    b->vocab = std::move(text.vocab);
    b->truth = truth_for_split(b->data.triplets, Split::Val);
    b->min_gallery = b->data.features.size();
    for (auto c : kCategories) b->min_gallery = std::min(b->min_gallery, b->data.features.in_category(c).size());
  }
  return *b;
}

const ScoreSet& bench_scores(ComposerType type) {
  Bench& b = bench();
  auto it = b.scores.find(type);
  if (it != b.scores.end()) return it->second;
  const auto t0 = std::chrono::steady_clock::now();
  TrainingData td{&b.data.features, &b.data.ir_features, &b.data.triplets, &b.vocab, nullptr, true};
  ModelSpec spec;
  spec.type = type;
  TrainConfig cfg;
  cfg.epochs = 40;
  auto res = train_run(td, spec, cfg);
  ScoringInputs in{&b.data.features, &b.data.ir_features, &b.vocab, nullptr, true, 64};
  b.scores[type] = build_score_set(res.model, b.data.triplets, Split::Val, in);
  b.train_seconds[type] = seconds_since(t0);
  return b.scores[type];
}

double mean_r10(const ScoreSet& s, const TruthSet& t) {
  const auto r = aggregate_report(s, t);
  double sum = 0.0;
  for (const auto& [_, c] : r.categories) sum += c.r10;
  return sum / 3.0;
}

Outcome a5() {
  const auto t0 = std::chrono::steady_clock::now();
  Bench& b = bench();
  std::size_t train = 0, val = 0;
  for (const auto& t : b.data.triplets) (t.split == Split::Train ? train : val)++;
  const double rtic = mean_r10(bench_scores(ComposerType::Rtic), b.truth);
  const double text = mean_r10(bench_scores(ComposerType::TextOnly), b.truth);
  const double secs = seconds_since(t0);
  const bool pass = train == 400 && val == 100 && b.min_gallery >= 60 && rtic >= 90.0 && rtic - text >= 15.0 &&
                    secs < 300.0;
  return {pass, fmt("RTIC R@10 %.2f, Text-only R@10 %.2f (gap %.2f), %zu/%zu train/val, smallest gallery %zu, %.0f s",
                    rtic, text, rtic - text, train, val, b.min_gallery, secs)};
}

Outcome a6() {
  Bench& b = bench();
  EnsemblePool pool;
  double best_single = -1.0;
  std::string best_name;
  for (auto type : {ComposerType::Rtic, ComposerType::TextOnly, ComposerType::IrMatch, ComposerType::Tirg}) {
    const ScoreSet& s = bench_scores(type);
    pool.add(std::string(to_string(type)), s);
    const double obj = ensemble_objective(aggregate_report(s, b.truth));
    if (obj > best_single) {
      best_single = obj;
      best_name = to_string(type);
    }
  }
  std::size_t wins = 0;
  double lo = 1e9, hi = -1e9;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto res = tpe_optimize(pool, b.truth, 200, seed, TpeConfig{});
    wins += res.best_objective >= best_single;
    lo = std::min(lo, res.best_objective);
    hi = std::max(hi, res.best_objective);
  }
  return {wins >= 9, fmt("fused objective >= best single (%s, %.2f) in %zu/10 seeds; fused range %.2f..%.2f",
                         best_name.c_str(), best_single, wins, lo, hi)};
}

// ---- A7 --------------------------------------------------------------------

Outcome a7() {
  std::size_t wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto p = pools::planted(500 + seed, {2.0, 0.0, 0.0, 0.0});
    auto res = tpe_optimize(p.pool, p.truth, 200, seed, TpeConfig{});
    bool dominant = true;
    for (std::size_t k = 1; k < res.best_weights.size(); ++k) dominant = dominant && res.best_weights[0] > res.best_weights[k];
    wins += dominant;
  }
  Rng rng = make_stream(7, "tpe");
  const std::size_t dims = 4;
  std::vector<std::vector<double>> draws(dims);
  for (int i = 0; i < 1000; ++i) {
    auto w = tpe_suggest({}, dims, TpeConfig{}, rng);
    for (std::size_t d = 0; d < dims; ++d) draws[d].push_back(w[d]);
  }
  double min_p = 1.0;
  for (auto& xs : draws) min_p = std::min(min_p, oracle::ks_uniform_pvalue(xs));
  return {wins >= 9 && min_p > 0.01,
          fmt("informative weight dominant in %zu/10 seeds; startup KS min p-value %.3f over %zu dims", wins, min_p,
              dims)};
}

// ---- A8 --------------------------------------------------------------------

Outcome a8() {
  WordList words = synth_dataset(0, bench_spec()).corpus;
  for (const char* w : {"sleeve", "sleeves", "collar", "neckline", "printed", "solid", "denim", "cotton"})
    if (std::none_of(words.begin(), words.end(), [&](const auto& e) { return e.first == w; })) words.emplace_back(w, 10);
  const Vocabulary vocab(words);
  const std::vector<std::pair<std::string, long>> dict(words.begin(), words.end());
  const bool example = spell_correct("whtie", vocab) == "white";

  Rng rng = make_stream(8, "data");
  const std::string letters = "abcdefghijklmnopqrstuvwxyz";
  std::uniform_int_distribution<std::size_t> pick_word(0, words.size() - 1), pick_letter(0, letters.size() - 1);
  std::uniform_int_distribution<int> n_edits(0, 3), kind(0, 3);
  std::size_t tokens = 0, idempotent = 0, bounded = 0, agrees = 0, changed = 0;
  while (tokens < 1000) {
    std::string t = words[pick_word(rng)].first;
    const int n = n_edits(rng);
    for (int e = 0; e < n && !t.empty(); ++e) {
      std::uniform_int_distribution<std::size_t> pos(0, t.size() - 1);
      const std::size_t p = pos(rng);
      switch (kind(rng)) {
        case 0: t.erase(p, 1); break;
        case 1: t.insert(t.begin() + static_cast<std::ptrdiff_t>(p), letters[pick_letter(rng)]); break;
        case 2: t[p] = letters[pick_letter(rng)]; break;
        default:
          if (p + 1 < t.size()) std::swap(t[p], t[p + 1]);
      }
    }
    if (t.empty()) continue;
    ++tokens;
    const std::string c = spell_correct(t, vocab);
    changed += c != t;
    idempotent += spell_correct(c, vocab) == c;
    bounded += oracle::damerau_levenshtein(t, c) <= 2;
    agrees += c == oracle::spell_correct(t, dict);
  }
  return {example && idempotent == tokens && bounded == tokens && agrees == tokens,
          fmt("whtie -> %s; %zu fuzzed tokens (%zu corrected): idempotent %zu, distance<=2 %zu, oracle agreement %zu",
              spell_correct("whtie", vocab).c_str(), tokens, changed, idempotent, bounded, agrees)};
}

// ---- A9 --------------------------------------------------------------------

Outcome a9() {
  const fs::path root = fs::temp_directory_path() / "rtic_acceptance_a9";
  fs::remove_all(root);
  RunConfig cfg = parse_run_config(R"({
    "seed": 9,
    "synth": {"n_items": 90, "n_triplets": 200, "typo_rate": 0.05},
    "model": {"d": 16, "encoder": {"e_word": 8, "hidden": 8}, "image_hidden": 16, "rtic": {"block_hidden": 16}},
    "train": {"epochs": 3},
    "metrics": {"ks": [5, 20]},
    "ensemble": {"trials": 40, "rounds": 2, "stop_eps": 0}
  })");
  cfg.data.dir = (root / "data").string();
  std::ostringstream log;
  run_synth(cfg, cfg.data.dir, log);
  run_train(cfg, (root / "a").string(), log);
  run_train(cfg, (root / "b").string(), log);
  const std::string ck_a = slurp(root / "a" / "checkpoint.tsv"), ck_b = slurp(root / "b" / "checkpoint.tsv");
  const bool ckpt_same = !ck_a.empty() && ck_a == ck_b;

  RunConfig tirg = cfg;
  tirg.model.type = ComposerType::Tirg;
  run_train(tirg, (root / "c").string(), log);
  run_eval(cfg, (root / "a" / "checkpoint.tsv").string(), (root / "a").string(), log);
  run_eval(tirg, (root / "c" / "checkpoint.tsv").string(), (root / "c").string(), log);
  {
    std::ofstream(root / "manifest.json") << R"({"members": [
      {"name": "rtic", "scores": {"dress": "a/scores_dress.tsv", "shirt": "a/scores_shirt.tsv", "toptee": "a/scores_toptee.tsv"}},
      {"name": "tirg", "scores": {"dress": "c/scores_dress.tsv", "shirt": "c/scores_shirt.tsv", "toptee": "c/scores_toptee.tsv"}}
    ], "truth": "a/truth.tsv"})";
  }
  run_ensemble(cfg, (root / "manifest.json").string(), (root / "e1").string(), log);
  run_ensemble(cfg, (root / "manifest.json").string(), (root / "e2").string(), log);
  const std::string h1 = slurp(root / "e1" / "history.jsonl"), h2 = slurp(root / "e2" / "history.jsonl");
  const bool hist_same = !h1.empty() && h1 == h2;
  fs::remove_all(root);
  return {ckpt_same && hist_same, fmt("checkpoints %s (%zu bytes), ensemble histories %s (%zu bytes)",
                                      ckpt_same ? "identical" : "DIFFER", ck_a.size(),
                                      hist_same ? "identical" : "DIFFER", h1.size())};
}

// ---- A10 -------------------------------------------------------------------

Outcome a10() {
  nk::ParamStore ps;
  auto& theta = ps.add("w", nk::Tensor::scalar(1.0));
  theta.grad = {1.0};
  TrainConfig cfg;
  cfg.lr = 0.1;
  cfg.beta1 = 0.47;
  cfg.beta2 = 0.999;
  cfg.weight_decay = 0.01;
  OptimizerState st;
  adamw_step(ps, st, cfg, [&](const std::string&) { return cfg.lr; });
  // m_hat = v_hat = 1 after one step.
  const double hand = 1.0 - 0.1 * 1.0 / (std::sqrt(1.0) + 1e-8) - 0.1 * 0.01 * 1.0;
  const double d_step = std::abs(theta.values[0] - hand);
  const double d_lr = std::abs(lr_at_epoch(10, TrainConfig{}) - 0.00011148 * 0.474);
  return {d_step <= 1e-9 && d_lr <= 1e-12,
          fmt("theta 1 -> %.12f (hand %.12f, |d| %.1e); lr_at_epoch(10) = %.10g (|d| %.1e)", theta.values[0], hand,
              d_step, lr_at_epoch(10, TrainConfig{}), d_lr)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> all = {
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5},
      {"A6", a6}, {"A7", a7}, {"A8", a8}, {"A9", a9}, {"A10", a10},
  };
  std::set<std::string> wanted(argv + 1, argv + argc);
  for (const auto& w : wanted) {
    bool known = false;
    for (const auto& [id, _] : all) known = known || id == w;
    if (!known) {
      std::cerr << "unknown criterion '" << w << "'\n";
      return 2;
    }
  }
  int failures = 0;
  for (const auto& [id, run] : all) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << id << (id.size() == 2 ? "  " : " ") << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
