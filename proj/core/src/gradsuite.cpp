#include <cmath>
#include <memory>

#include "rtic/pipeline.h"

namespace rtic {

namespace {

using nk::Tape;
using nk::Tensor;
using nk::Var;

// Below this an analytic derivative is within a few orders of magnitude of
// central-difference round-off at eps = 1e-6, and the relative error there
// measures noise rather than the backward pass.
constexpr double kGradFloor = 1e-6;
constexpr std::size_t kMaxDraws = 5000;

const Vocabulary& vocab() {
  static const Vocabulary v{{{"black", 5}, {"longer", 4}, {"red", 9}, {"sleeveless", 2}, {"striped", 3}, {"white", 7}}};
  return v;
}

const TokenBatch& tokens() {
  // Lengths 6, 4, 3, 2 so padding and per-row last steps are exercised.
  static const TokenBatch b = [] {
    std::vector<std::vector<std::size_t>> seqs = {{0, 4, 6, 1, 7, 9}, {0, 5, 1, 8}, {0, 6, 2}, {0, 9}};
    return make_token_batch(std::span<const std::vector<std::size_t>>(seqs));
  }();
  return b;
}

ModelSpec small_spec(ComposerType type, TextVariant variant = TextVariant::LstmPlusGru) {
  ModelSpec s;
  s.type = type;
  s.d = 6;
  s.text.variant = variant;
  s.text.e_word = 4;
  s.text.hidden = 3;
  s.text.layers = 2;
  s.image_in = 7;
  s.image_hidden = 5;
  s.rtic_blocks = 2;
  s.rtic_block_hidden = 4;
  s.tirg_hidden = 4;
  return s;
}

// One gradient-check instance: the tensors under test and constant inputs.
struct Case {
  nk::ParamStore ps;
  std::map<std::string, Tensor> consts;
  std::function<Var(Tape&, Case&)> f;

  Var input(Tape& tape, const std::string& name) { return tape.constant(consts.at(name)); }
};

using Factory = std::function<void(Case&, Rng&)>;

// Keeps the tensors whose name starts with one of the prefixes. Embedding
// rows are redrawn at unit scale; the default +-0.05 leaves the upper
// recurrent layers with derivatives near round-off.
void take_params(Case& c, const ModelSpec& spec, Rng& rng, std::initializer_list<const char*> prefixes) {
  RetrievalModel model = RetrievalModel::initialize(spec, vocab(), rng());
  for (auto& [name, t] : model.params().tensors())
    for (const char* p : prefixes)
      if (name.rfind(p, 0) == 0) {
        Tensor v = name == "text.embed" ? nk::uniform(t.shape, -1.0, 1.0, rng) : t;
        c.ps.add(name, std::move(v));
      }
}

// Random linear read-out so every output coordinate gets a distinct weight.
Var readout(Var out, Case& c) { return nk::sum(nk::hadamard(out, c.input(out.tape(), "readout"))); }

bool well_conditioned(Case& c) {
  c.ps.zero_grad();
  Tape tape;
  Var loss = c.f(tape, c);
  tape.backward(loss);
  bool ok = true;
  for (auto& [_, t] : c.ps.tensors())
    for (double g : t.grad)
      if (g != 0.0 && std::abs(g) < kGradFloor) ok = false;
  c.ps.zero_grad();
  return ok;
}

GradCheckRow run_case(const std::string& name, const Factory& make, Rng& rng, std::uint64_t seed, double tolerance) {
  auto c = std::make_unique<Case>();
  std::size_t draws = 0;
  while (draws < kMaxDraws) {
    c = std::make_unique<Case>();
    make(*c, rng);
    ++draws;
    if (well_conditioned(*c)) break;
  }
  nk::GradCheckOptions opts;
  opts.seed = seed;
  Case& cs = *c;
  GradCheckRow row{name, nk::finite_diff_check([&](Tape& t) { return cs.f(t, cs); }, cs.ps, opts), false, draws};
  row.passed = row.result.max_rel_error < tolerance;
  return row;
}

}  // namespace

std::vector<GradCheckRow> gradient_suite(std::uint64_t seed, double tolerance) {
  Rng rng = make_stream(seed, "gradcheck");
  std::vector<GradCheckRow> rows;

  const std::pair<const char*, TextVariant> encoders[] = {{"enc.swem", TextVariant::Swem},
                                                          {"enc.gru", TextVariant::Gru},
                                                          {"enc.lstm", TextVariant::Lstm},
                                                          {"enc.lstm_plus_gru", TextVariant::LstmPlusGru}};
  for (const auto& [name, variant] : encoders) {
    const ModelSpec spec = small_spec(ComposerType::Rtic, variant);
    rows.push_back(run_case(name, [&](Case& c, Rng& r) {
      take_params(c, spec, r, {"text."});
      c.consts["readout"] = nk::uniform({4, spec.d}, -1.0, 1.0, r);
      c.f = [spec](Tape& tape, Case& cs) {
        nk::ParamBinder bind(tape, cs.ps);
        return readout(text_encode(bind, spec.text_config(), tokens()), cs);
      };
    }, rng, seed, tolerance));
  }

  {
    const ModelSpec spec = small_spec(ComposerType::Rtic);
    rows.push_back(run_case("enc.image", [&](Case& c, Rng& r) {
      take_params(c, spec, r, {"image."});
      c.consts["x"] = nk::uniform({4, spec.image_in}, -1.0, 1.0, r);
      c.consts["readout"] = nk::uniform({4, spec.d}, -1.0, 1.0, r);
      c.f = [spec](Tape& tape, Case& cs) {
        nk::ParamBinder bind(tape, cs.ps);
        return readout(image_project(bind, spec.image_config(), cs.input(tape, "x")), cs);
      };
    }, rng, seed, tolerance));
  }

  // Heads are checked on their own with f_I and f_T as leaves.
  for (auto type : {ComposerType::TextOnly, ComposerType::Tirg, ComposerType::Rtic, ComposerType::IrMatch}) {
    const ModelSpec spec = small_spec(type);
    rows.push_back(run_case("composer." + std::string(to_string(type)), [&](Case& c, Rng& r) {
      take_params(c, spec, r, {"composer."});
      c.ps.add("input.f_text", nk::uniform({4, spec.d}, -1.0, 1.0, r));
      if (type != ComposerType::TextOnly) c.ps.add("input.f_image", nk::uniform({4, spec.d}, -1.0, 1.0, r));
      c.consts["readout"] = nk::uniform({4, spec.d}, -1.0, 1.0, r);
      c.consts["ir"] = nk::uniform({4, spec.d}, -1.0, 1.0, r);
      c.f = [spec, type](Tape& tape, Case& cs) {
        nk::ParamBinder bind(tape, cs.ps);
        Var f_text = bind("input.f_text");
        switch (type) {
          case ComposerType::TextOnly: return readout(compose_text_only(bind, f_text), cs);
          case ComposerType::Tirg: return readout(compose_tirg(bind, bind("input.f_image"), f_text), cs);
          case ComposerType::Rtic:
            return readout(compose_rtic(bind, spec.rtic_config(), bind("input.f_image"), f_text).composed, cs);
          default: break;
        }
        Var composed = compose_rtic(bind, spec.rtic_config(), bind("input.f_image"), f_text).composed;
        return ir_match_loss(composed, cs.input(tape, "ir"));
      };
    }, rng, seed, tolerance));
  }

  rows.push_back(run_case("loss.triplet", [&](Case& c, Rng& r) {
    c.ps.add("composed", nk::uniform({4, 8}, -1.0, 1.0, r));
    c.ps.add("targets", nk::uniform({4, 8}, -1.0, 1.0, r));
    // Cosine distance is at most 2, so with margin 2 every hinge is active.
    c.f = [](Tape& tape, Case& cs) {
      static const std::vector<std::string> ids{"t0", "t1", "t2", "t3"};
      return batch_hard_triplet_loss(tape.param(cs.ps.get("composed")), tape.param(cs.ps.get("targets")), 2.0, ids);
    };
  }, rng, seed, tolerance));

  rows.push_back(run_case("loss.ir_match", [&](Case& c, Rng& r) {
    c.ps.add("f", nk::uniform({4, 8}, -1.0, 1.0, r));
    c.consts["ir"] = nk::uniform({4, 8}, -1.0, 1.0, r);
    c.f = [](Tape& tape, Case& cs) { return ir_match_loss(tape.param(cs.ps.get("f")), cs.input(tape, "ir")); };
  }, rng, seed, tolerance));
  return rows;
}

}  // namespace rtic
