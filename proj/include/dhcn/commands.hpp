#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dhcn/config.hpp"

namespace dhcn {

/// Command implementations behind the CLI, separated from argument parsing
/// so tests and the acceptance suite can drive them in process. Results go
/// to `out`; progress notes go to `err`. All failures throw.

struct PreprocessArgs {
  std::string input;
  std::string output;
  double test_fraction = 0.1;
  std::size_t min_item_freq = 5;
  std::size_t min_session_len = 2;
  std::size_t max_session_len = 50;
};

/// Session log -> processed dataset file, printing the pipeline counts.
void cmd_preprocess(const PreprocessArgs& args, std::ostream& out, std::ostream& err);

struct TrainArgs {
  std::string dataset_path;
  std::string checkpoint_path = "model.ckpt";
  std::string log_path = "train_log.csv";
  ModelConfig model;
  TrainConfig train;
  /// When nonempty: write the hypergraph operator and the first batch's
  /// line-graph adjacency there as `row col value` text, before training.
  std::string dump_graphs_dir;
};

/// Trains on a processed dataset, writing a checkpoint and a CSV epoch log.
void cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);

struct EvaluateArgs {
  std::string checkpoint_path;
  std::string dataset_path;
  std::vector<std::size_t> ks = {10, 20};
  bool with_popularity_baseline = false;
};

/// Scores the dataset's test split with a trained checkpoint; prints each
/// report as an aligned table followed by CSV.
void cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err);

/// Runs the built-in invariant suite; returns false when any check fails.
bool cmd_selfcheck(std::ostream& out);

}  // namespace dhcn
