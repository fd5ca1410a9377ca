#include "rtic/metrics.h"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "rtic/errors.h"
#include "rtic/textio.h"

namespace rtic {

void save_truth(const TruthSet& truth, const std::string& path, const std::string& header_comment) {
  std::string out = header_comment.empty() ? "" : "# " + header_comment + "\n";
  for (const auto& [cat, gt] : truth) {
    std::map<std::string, std::string> sorted(gt.begin(), gt.end());
    for (const auto& [q, t] : sorted) out += q + "\t" + t + "\t" + std::string(to_string(cat)) + "\n";
  }
  io::write_file(path, out);
}

TruthSet load_truth(const std::string& path) {
  TruthSet out;
  auto lines = io::read_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].empty() || lines[ln][0] == '#') continue;
    auto f = io::split(lines[ln], '\t');
    if (f.size() != 3) throw ParseError(path, ln + 1, "expected query_id<TAB>target_id<TAB>category");
    Category c;
    try {
      c = parse_category(f[2]);
    } catch (const ParseError& e) {
      throw ParseError(path, ln + 1, e.what());
    }
    if (!out[c].emplace(std::string(f[0]), std::string(f[1])).second)
      throw DuplicateError(path + ":" + std::to_string(ln + 1) + ": duplicate query id");
  }
  return out;
}

TruthSet truth_for_split(const std::vector<TripletRecord>& triplets, Split split) {
  TruthSet out;
  for (const auto& [qid, t] : select_split(triplets, split)) out[t->category][qid] = t->target_id;
  return out;
}

std::vector<double> cosine_matrix(std::span<const double> a, std::size_t rows_a, std::span<const double> b,
                                  std::size_t rows_b, std::size_t dim) {
  auto normalized = [dim](std::span<const double> x, std::size_t rows) {
    std::vector<double> out(x.begin(), x.end());
    for (std::size_t r = 0; r < rows; ++r) {
      double ss = 0.0;
      for (std::size_t c = 0; c < dim; ++c) ss += out[r * dim + c] * out[r * dim + c];
      const double n = std::sqrt(ss);
      if (!(n > 0)) throw NumericError("cosine of a zero-norm feature");
      for (std::size_t c = 0; c < dim; ++c) out[r * dim + c] /= n;
    }
    return out;
  };
  auto na = normalized(a, rows_a);
  auto nb = normalized(b, rows_b);
  std::vector<double> s(rows_a * rows_b);
  for (std::size_t i = 0; i < rows_a; ++i)
    for (std::size_t j = 0; j < rows_b; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < dim; ++c) dot += na[i * dim + c] * nb[j * dim + c];
      s[i * rows_b + j] = std::clamp(dot, -1.0, 1.0);
    }
  return s;
}

ScoreMatrix build_score_matrix(const RetrievalModel& model,
                               std::span<const std::pair<std::string, const TripletRecord*>> queries,
                               Category category, const ScoringInputs& in) {
  if (!in.features || !in.vocab) throw ValidationError("build_score_matrix: missing features or vocabulary");
  if (model.scores_against_ir() && !in.ir_features) throw ValidationError("IR-match scoring needs IR features");
  const FeatureStore& gallery_store = model.scores_against_ir() ? *in.ir_features : *in.features;
  auto gallery = gallery_store.in_category(category);
  if (gallery.empty()) throw ValidationError("empty gallery for category " + std::string(to_string(category)));

  ScoreMatrix m;
  for (const auto* g : gallery) m.gallery_ids.push_back(g->id);
  std::vector<const TripletRecord*> rows;
  for (const auto& [qid, t] : queries) {
    if (t->category != category) continue;
    if (!in.features->contains(t->candidate_id))
      throw MissingIdError("query " + qid + " references unknown candidate '" + t->candidate_id + "'");
    m.query_ids.push_back(qid);
    rows.push_back(t);
  }
  if (rows.empty()) throw ValidationError("no queries for category " + std::string(to_string(category)));

  // Copy so forward-only tapes can bind parameters without mutating the model.
  nk::ParamStore params = model.params();
  const std::size_t d = model.spec().d;
  const std::size_t in_dim = in.features->dim();
  std::vector<double> composed;
  for (std::size_t start = 0; start < rows.size(); start += in.batch_size) {
    const std::size_t end = std::min(rows.size(), start + in.batch_size);
    std::vector<TokenSequence> seqs;
    nk::Tensor cand = nk::Tensor::zeros({end - start, in_dim});
    for (std::size_t i = start; i < end; ++i) {
      EncodeOptions opts{in.spell_correct, std::nullopt, in.overrides};
      seqs.push_back(encode_captions(rows[i]->captions, *in.vocab, opts));
      const auto& v = in.features->at(rows[i]->candidate_id).values;
      std::copy(v.begin(), v.end(), cand.values.begin() + static_cast<std::ptrdiff_t>((i - start) * in_dim));
    }
    nk::Tape tape(false);
    nk::ParamBinder bind(tape, params);
    nk::Var out = model.compose(bind, make_token_batch(seqs), tape.constant(std::move(cand)));
    composed.insert(composed.end(), out.values().begin(), out.values().end());
  }

  std::vector<double> gallery_feats;
  if (model.scores_against_ir()) {
    if (gallery_store.dim() != d) throw DimensionError("IR gallery dimension differs from model d");
    for (const auto* g : gallery) gallery_feats.insert(gallery_feats.end(), g->values.begin(), g->values.end());
  } else {
    for (std::size_t start = 0; start < gallery.size(); start += in.batch_size) {
      const std::size_t end = std::min(gallery.size(), start + in.batch_size);
      nk::Tensor x = nk::Tensor::zeros({end - start, in_dim});
      for (std::size_t i = start; i < end; ++i)
        std::copy(gallery[i]->values.begin(), gallery[i]->values.end(),
                  x.values.begin() + static_cast<std::ptrdiff_t>((i - start) * in_dim));
      nk::Tape tape(false);
      nk::ParamBinder bind(tape, params);
      nk::Var out = model.embed_image(bind, tape.constant(std::move(x)));
      gallery_feats.insert(gallery_feats.end(), out.values().begin(), out.values().end());
    }
  }
  m.values = cosine_matrix(composed, m.rows(), gallery_feats, m.cols(), d);
  m.validate();
  return m;
}

ScoreSet build_score_set(const RetrievalModel& model, const std::vector<TripletRecord>& triplets, Split split,
                         const ScoringInputs& in) {
  auto queries = select_split(triplets, split);
  ScoreSet out;
  for (auto c : kCategories) out.emplace(c, build_score_matrix(model, queries, c, in));
  return out;
}

double recall_at_k(const ScoreMatrix& m, const GroundTruth& truth, std::size_t k) {
  m.validate();
  if (k < 1 || k > m.cols())
    throw ValidationError("recall_at_k: k=" + std::to_string(k) + " outside [1, " + std::to_string(m.cols()) + "]");
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t j = 0; j < m.cols(); ++j) column.emplace(m.gallery_ids[j], j);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto t = truth.find(m.query_ids[i]);
    if (t == truth.end()) throw MissingIdError("query '" + m.query_ids[i] + "' has no ground truth");
    auto c = column.find(t->second);
    if (c == column.end()) throw MissingIdError("target '" + t->second + "' is not in the gallery");
    const std::size_t tj = c->second;
    const double ts = m.at(i, tj);
    std::size_t rank = 0;
    for (std::size_t j = 0; j < m.cols() && rank < k; ++j) {
      const double s = m.at(i, j);
      if (s > ts || (s == ts && j != tj && m.gallery_ids[j] < m.gallery_ids[tj])) ++rank;
    }
    if (rank < k) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(m.rows());
}

RecallReport make_report(const std::map<Category, CategoryRecall>& recalls, std::array<int, 2> ks) {
  RecallReport r;
  r.ks = ks;
  double total = 0.0;
  for (auto c : kCategories) {
    auto it = recalls.find(c);
    if (it == recalls.end()) throw ValidationError("report is missing category " + std::string(to_string(c)));
    r.categories[c] = it->second;
    total += it->second.r10 + it->second.r50;
  }
  if (recalls.size() != kCategories.size()) throw ValidationError("report has unexpected categories");
  r.average = total / 6.0;
  return r;
}

RecallReport aggregate_report(const ScoreSet& scores, const TruthSet& truth, std::array<int, 2> ks) {
  if (ks[0] < 1 || ks[1] < 1) throw ValidationError("recall cutoffs must be >= 1");
  std::map<Category, CategoryRecall> recalls;
  for (auto c : kCategories) {
    auto s = scores.find(c);
    auto t = truth.find(c);
    if (s == scores.end() || t == truth.end())
      throw ValidationError("missing category " + std::string(to_string(c)) + " in scores or truth");
    recalls[c] = {recall_at_k(s->second, t->second, static_cast<std::size_t>(ks[0])),
                  recall_at_k(s->second, t->second, static_cast<std::size_t>(ks[1]))};
  }
  return make_report(recalls, ks);
}

double ensemble_objective(const RecallReport& report) {
  double r10 = 0.0, r50 = 0.0;
  for (const auto& [_, v] : report.categories) {
    r10 += v.r10;
    r50 += v.r50;
  }
  const auto n = static_cast<double>(report.categories.size());
  return (r10 / n + r50 / n) / 2.0;
}

std::string report_json(const RecallReport& report, const std::string& config_hash) {
  nlohmann::json j;
  const std::string k1 = "R@" + std::to_string(report.ks[0]);
  const std::string k2 = "R@" + std::to_string(report.ks[1]);
  for (const auto& [c, v] : report.categories) j["categories"][std::string(to_string(c))] = {{k1, v.r10}, {k2, v.r50}};
  j["average"] = report.average;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  return j.dump(2) + "\n";
}

std::string report_table(const RecallReport& report) {
  char buf[128];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-8s %8s %8s\n", "category", ("R@" + std::to_string(report.ks[0])).c_str(),
                ("R@" + std::to_string(report.ks[1])).c_str());
  out += buf;
  for (const auto& [c, v] : report.categories) {
    std::snprintf(buf, sizeof(buf), "%-8s %8.2f %8.2f\n", std::string(to_string(c)).c_str(), v.r10, v.r50);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "%-8s %8.2f\n", "average", report.average);
  out += buf;
  return out;
}

}  // namespace rtic
