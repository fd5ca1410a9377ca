#include "rtic/ensemble.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "rtic/errors.h"

namespace rtic {

namespace {

void require_aligned(const ScoreMatrix& a, const ScoreMatrix& b, const std::string& what) {
  if (a.query_ids != b.query_ids) throw ValidationError(what + ": query ids differ");
  if (a.gallery_ids != b.gallery_ids) throw ValidationError(what + ": gallery ids differ");
}

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kLogSqrt2Pi = 0.91893853320467274;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

}  // namespace

void EnsemblePool::add(std::string name, ScoreSet scores) {
  if (std::find(names.begin(), names.end(), name) != names.end()) throw DuplicateError("pool member '" + name + "'");
  names.push_back(std::move(name));
  members.push_back(std::move(scores));
}

void EnsemblePool::validate() const {
  if (members.empty()) throw ValidationError("ensemble pool is empty");
  if (names.size() != members.size()) throw ValidationError("ensemble pool names/members mismatch");
  const ScoreSet& ref = members.front();
  for (std::size_t i = 0; i < members.size(); ++i) {
    const ScoreSet& s = members[i];
    if (s.size() != ref.size()) throw ValidationError("pool member '" + names[i] + "' has different categories");
    for (const auto& [cat, m] : s) {
      m.validate();
      auto r = ref.find(cat);
      if (r == ref.end()) throw ValidationError("pool member '" + names[i] + "' has different categories");
      require_aligned(r->second, m, "pool member '" + names[i] + "' " + std::string(to_string(cat)));
    }
  }
}

void row_zscore(ScoreMatrix& m) {
  const std::size_t g = m.cols();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < g; ++j) mean += m.at(i, j);
    mean /= static_cast<double>(g);
    double var = 0.0;
    for (std::size_t j = 0; j < g; ++j) var += (m.at(i, j) - mean) * (m.at(i, j) - mean);
    const double sd = std::sqrt(var / static_cast<double>(g));
    for (std::size_t j = 0; j < g; ++j) m.at(i, j) = sd > 0 ? (m.at(i, j) - mean) / sd : 0.0;
  }
}

void row_zscore(ScoreSet& s) {
  for (auto& [_, m] : s) row_zscore(m);
}

ScoreMatrix weighted_sum(std::span<const ScoreMatrix* const> mats, std::span<const double> w) {
  if (mats.empty()) throw ValidationError("weighted_sum: no matrices");
  if (mats.size() != w.size())
    throw ValidationError("weighted_sum: " + std::to_string(w.size()) + " weights for " +
                          std::to_string(mats.size()) + " matrices");
  ScoreMatrix out;
  out.query_ids = mats[0]->query_ids;
  out.gallery_ids = mats[0]->gallery_ids;
  out.values.assign(mats[0]->values.size(), 0.0);
  for (std::size_t k = 0; k < mats.size(); ++k) {
    require_aligned(*mats[0], *mats[k], "weighted_sum");
    if (mats[k]->values.size() != out.values.size()) throw ShapeError("weighted_sum: value count mismatch");
    const double wk = w[k];
    const auto& v = mats[k]->values;
    for (std::size_t i = 0; i < v.size(); ++i) out.values[i] += wk * v[i];
  }
  return out;
}

ScoreSet weighted_sum(const EnsemblePool& pool, std::span<const double> w) {
  if (pool.members.empty()) throw ValidationError("weighted_sum: empty pool");
  ScoreSet out;
  std::vector<const ScoreMatrix*> mats(pool.size());
  for (const auto& [cat, _] : pool.members.front()) {
    for (std::size_t k = 0; k < pool.size(); ++k) {
      auto it = pool.members[k].find(cat);
      if (it == pool.members[k].end()) throw ValidationError("weighted_sum: pool member lacks a category");
      mats[k] = &it->second;
    }
    out.emplace(cat, weighted_sum(mats, w));
  }
  return out;
}

void TpeConfig::validate() const {
  if (!(gamma > 0 && gamma < 1)) throw ValidationError("ensemble.gamma must be in (0, 1)");
  if (n_candidates < 1) throw ValidationError("ensemble.n_candidates must be >= 1");
}

ParzenDensity ParzenDensity::fit(std::vector<double> obs) {
  // Prior component at the middle of the search space with unit width.
  constexpr double kPriorMu = 0.5, kPriorSigma = 1.0;
  const std::size_t n = obs.size();
  std::vector<std::pair<double, bool>> pts;
  for (double x : obs) pts.emplace_back(x, false);
  pts.emplace_back(kPriorMu, true);
  std::stable_sort(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.first < b.first; });

  const double floor = 1.0 / static_cast<double>(std::min<std::size_t>(100, n + 1));
  ParzenDensity d;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    d.mu.push_back(pts[i].first);
    if (pts[i].second) {
      d.sigma.push_back(kPriorSigma);
      continue;
    }
    double s = 0.0;
    if (i > 0) s = std::max(s, pts[i].first - pts[i - 1].first);
    if (i + 1 < pts.size()) s = std::max(s, pts[i + 1].first - pts[i].first);
    d.sigma.push_back(std::clamp(s, floor, 1.0));
  }
  return d;
}

double ParzenDensity::log_pdf(double x) const {
  double p = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double s = sigma[i];
    const double z = (x - mu[i]) / s;
    const double mass = normal_cdf((1.0 - mu[i]) / s) - normal_cdf(-mu[i] / s);
    p += std::exp(-0.5 * z * z - kLogSqrt2Pi) / (s * mass);
  }
  return std::log(p / static_cast<double>(mu.size()));
}

double ParzenDensity::sample(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, mu.size() - 1);
  const std::size_t k = pick(rng);
  std::normal_distribution<double> nd(mu[k], sigma[k]);
  for (;;) {
    const double x = nd(rng);
    if (x >= 0.0 && x <= 1.0) return x;
  }
}

EnsembleWeights tpe_suggest(const std::vector<TrialRecord>& history, std::size_t n_dims, const TpeConfig& cfg,
                            Rng& rng) {
  cfg.validate();
  if (n_dims == 0) throw ValidationError("tpe_suggest: zero dimensions");
  EnsembleWeights w(n_dims);
  if (history.size() < std::max<std::size_t>(cfg.n_startup, 2)) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& x : w) x = u(rng);
    return w;
  }
  std::vector<std::size_t> order(history.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return history[a].objective > history[b].objective; });
  const auto n_good = static_cast<std::size_t>(std::ceil(cfg.gamma * static_cast<double>(history.size())));

  std::vector<ParzenDensity> good(n_dims), bad(n_dims);
  for (std::size_t d = 0; d < n_dims; ++d) {
    std::vector<double> l, g;
    for (std::size_t r = 0; r < order.size(); ++r) {
      const auto& h = history[order[r]];
      if (h.weights.size() != n_dims) throw ValidationError("tpe_suggest: history dimension mismatch");
      (r < n_good ? l : g).push_back(h.weights[d]);
    }
    good[d] = ParzenDensity::fit(std::move(l));
    bad[d] = ParzenDensity::fit(std::move(g));
  }

  double best_score = -std::numeric_limits<double>::infinity();
  EnsembleWeights cand(n_dims);
  for (std::size_t c = 0; c < cfg.n_candidates; ++c) {
    double score = 0.0;
    for (std::size_t d = 0; d < n_dims; ++d) {
      cand[d] = good[d].sample(rng);
      score += good[d].log_pdf(cand[d]) - bad[d].log_pdf(cand[d]);
    }
    if (score > best_score) {
      best_score = score;
      w = cand;
    }
  }
  return w;
}

TpeResult tpe_optimize(const EnsemblePool& pool, const TruthSet& truth, std::size_t n_trials, std::uint64_t seed,
                       const TpeConfig& cfg, const std::vector<EnsembleWeights>& initial) {
  if (n_trials < 1) throw ValidationError("tpe_optimize: n_trials must be >= 1");
  cfg.validate();
  pool.validate();
  Rng rng = make_stream(seed, "tpe");
  TpeResult res;
  for (std::size_t t = 0; t < n_trials; ++t) {
    EnsembleWeights w = t < initial.size() ? initial[t] : tpe_suggest(res.history, pool.size(), cfg, rng);
    if (w.size() != pool.size()) throw ValidationError("tpe_optimize: initial trial has wrong dimension");
    ScoreSet fused = weighted_sum(pool, w);
    RecallReport report = aggregate_report(fused, truth, cfg.ks);
    const double obj = ensemble_objective(report);
    if (!std::isfinite(obj)) throw NumericError("ensemble objective is not finite");
    res.history.push_back({w, obj});
    if (obj > res.best_objective) {
      res.best_objective = obj;
      res.best_weights = w;
      res.best_scores = std::move(fused);
      res.best_report = report;
    }
  }
  return res;
}

IterativeResult iterative_ensemble(const EnsemblePool& pool_in, const TruthSet& truth, const IterativeConfig& cfg,
                                   std::uint64_t seed, const Holdout* holdout) {
  if (cfg.rounds < 1) throw ValidationError("ensemble.rounds must be >= 1");
  pool_in.validate();
  EnsemblePool pool = pool_in;
  EnsemblePool held;
  if (holdout) {
    holdout->pool.validate();
    if (holdout->pool.names != pool_in.names) throw ValidationError("holdout members differ from the pool");
    held = holdout->pool;
  }
  const std::size_t n_orig = pool_in.size();
  // Each member as a combination of the original members.
  std::vector<EnsembleWeights> basis;
  for (std::size_t k = 0; k < n_orig; ++k) {
    basis.emplace_back(n_orig, 0.0);
    basis.back()[k] = 1.0;
  }

  IterativeResult out;
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    std::vector<EnsembleWeights> initial;
    if (r > 0) {
      initial.emplace_back(pool.size(), 0.0);
      initial.back().back() = 1.0;
    }
    RoundRecord rec;
    rec.pool_names = pool.names;
    rec.result = tpe_optimize(pool, truth, cfg.n_trials, mix_seed(seed, r), cfg.tpe, initial);
    rec.effective_weights.assign(n_orig, 0.0);
    for (std::size_t k = 0; k < pool.size(); ++k)
      for (std::size_t j = 0; j < n_orig; ++j) rec.effective_weights[j] += rec.result.best_weights[k] * basis[k][j];
    if (holdout) {
      ScoreSet fused = weighted_sum(held, rec.result.best_weights);
      rec.holdout_objective = ensemble_objective(aggregate_report(fused, holdout->truth, cfg.tpe.ks));
      held.add("H_best_" + std::to_string(r + 1), std::move(fused));
    }
    const double prev = out.best_objective;
    out.best_objective = rec.result.best_objective;
    out.best_scores = rec.result.best_scores;
    out.effective_weights = rec.effective_weights;
    pool.add("H_best_" + std::to_string(r + 1), rec.result.best_scores);
    basis.push_back(rec.effective_weights);
    out.rounds.push_back(std::move(rec));
    if (r > 0 && out.best_objective - prev < cfg.stop_eps) break;
  }
  return out;
}

std::string history_jsonl(const IterativeResult& result, const std::string& config_hash) {
  std::string out = nlohmann::json{{"config_hash", config_hash}}.dump() + "\n";
  for (std::size_t r = 0; r < result.rounds.size(); ++r) {
    const auto& hist = result.rounds[r].result.history;
    for (std::size_t t = 0; t < hist.size(); ++t) {
      nlohmann::json j;
      j["round"] = r + 1;
      j["trial"] = t;
      j["weights"] = hist[t].weights;
      j["objective"] = hist[t].objective;
      out += j.dump() + "\n";
    }
  }
  return out;
}

std::string weights_json(const IterativeResult& result, const std::vector<std::string>& member_names,
                         const std::string& config_hash) {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["members"] = member_names;
  j["weights"] = result.effective_weights;
  j["objective"] = result.best_objective;
  j["rounds"] = nlohmann::json::array();
  for (const auto& r : result.rounds) {
    nlohmann::json jr;
    jr["pool"] = r.pool_names;
    jr["weights"] = r.result.best_weights;
    jr["objective"] = r.result.best_objective;
    if (r.holdout_objective) jr["holdout_objective"] = *r.holdout_objective;
    j["rounds"].push_back(jr);
  }
  return j.dump(2) + "\n";
}

}  // namespace rtic
