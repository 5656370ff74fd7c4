// emoscore: batch pipeline for speech emotion score regression over
// precomputed feature tensors. Subcommands mirror the pipeline stages:
//
//   emoscore synth    --config synth.cfg    generate a synthetic corpus
//   emoscore train    --config train.cfg    frozen-backbone fine-tuning runs
//   emoscore predict  --config predict.cfg  score a manifest with a checkpoint
//   emoscore fuse     --config fuse.cfg     combine score tables
//   emoscore evaluate --config eval.cfg     RMSE reports and run ranking
//
// All stages communicate via files; rerunning a stage with identical inputs
// and seeds reproduces its outputs byte for byte. EMOSCORE_THREADS caps the
// worker thread count.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "emoscore/experiment.hpp"

namespace {

struct SubcommandArgs {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool dry_run = false;
};

void add_common_options(CLI::App* cmd, SubcommandArgs& args) {
  cmd->add_option("--config", args.config, "configuration file (key = value lines)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "override the config seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_flag("--dry-run", args.dry_run, "validate the configuration and write nothing");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speech emotion score pipeline"};
  app.require_subcommand(1);

  SubcommandArgs args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  CLI::App* train = app.add_subcommand("train", "run frozen-backbone fine-tuning");
  CLI::App* predict = app.add_subcommand("predict", "score utterances with a checkpoint");
  CLI::App* fuse = app.add_subcommand("fuse", "fuse score tables");
  CLI::App* evaluate = app.add_subcommand("evaluate", "compute RMSE reports");
  for (CLI::App* cmd : {synth, train, predict, fuse, evaluate}) {
    add_common_options(cmd, args);
  }

  CLI11_PARSE(app, argc, argv);

  emoscore::CliOptions opts;
  if (args.seed_set) opts.seed_override = args.seed;
  opts.dry_run = args.dry_run;

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "synth") {
      emoscore::synth_command(args.config, opts);
    } else if (command == "train") {
      emoscore::train_command(args.config, opts);
    } else if (command == "predict") {
      emoscore::predict_command(args.config, opts);
    } else if (command == "fuse") {
      emoscore::fuse_command(args.config, opts);
    } else {
      emoscore::evaluate_command(args.config, opts);
    }
  } catch (const std::exception& e) {
    std::cerr << "emoscore " << command << ": error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
