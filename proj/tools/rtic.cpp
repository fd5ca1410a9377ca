// rtic: synth | prep | train | eval | ensemble | gradcheck
//
// Exit codes: 0 success, 1 validation or input error, 2 numeric failure.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "rtic/errors.h"
#include "rtic/pipeline.h"

namespace {

rtic::RunConfig config_from(const std::string& path) {
  return path.empty() ? rtic::RunConfig{} : rtic::load_run_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composed image-text retrieval: synthetic data, training, evaluation and score ensembling"};
  app.require_subcommand(1);

  std::string config, out = ".", checkpoint, manifest;
  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", config, "Run configuration (JSON); defaults apply when omitted")
        ->check(CLI::ExistingFile);
    if (needs_out) sub->add_option("--out", out, "Output directory")->capture_default_str();
  };

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  add_common(synth, true);
  auto* prep = app.add_subcommand("prep", "Spell-correct and tokenize captions; write vocabulary and report");
  add_common(prep, true);
  auto* train = app.add_subcommand("train", "Train one model; write checkpoint and metrics log");
  add_common(train, true);
  auto* eval = app.add_subcommand("eval", "Score a checkpoint; write score matrices, truth and report");
  add_common(eval, true);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint written by train")->required();
  auto* ens = app.add_subcommand("ensemble", "Search fusion weights over score matrices");
  add_common(ens, true);
  ens->add_option("--manifest", manifest, "Manifest JSON listing score matrices and truth")->required();
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every component");
  add_common(grad, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const rtic::RunConfig cfg = config_from(config);
    if (!grad->parsed()) std::filesystem::create_directories(out);
    if (synth->parsed()) {
      rtic::run_synth(cfg, out, std::cout);
    } else if (prep->parsed()) {
      rtic::run_prep(cfg, out, std::cout);
    } else if (train->parsed()) {
      rtic::run_train(cfg, out, std::cout);
    } else if (eval->parsed()) {
      rtic::run_eval(cfg, checkpoint, out, std::cout);
    } else if (ens->parsed()) {
      rtic::run_ensemble(cfg, manifest, out, std::cout);
    } else if (grad->parsed()) {
      for (const auto& row : rtic::run_gradcheck(cfg, std::cout))
        if (!row.passed) return 2;
    }
  } catch (const rtic::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
