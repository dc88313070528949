#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dhcn/model.hpp"
#include "dhcn/training.hpp"

namespace dhcn {

/// Every tunable the commands share, merged from (in rising precedence)
/// built-in defaults, the DHCN_SEED environment variable, a config file,
/// and command-line flags.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  // preprocessing knobs
  double test_fraction = 0.1;
  std::size_t min_item_freq = 5;
  std::size_t min_session_len = 2;
  std::size_t max_session_len = 50;

  // paths
  std::string dataset_path;
  std::string checkpoint_path = "model.ckpt";
  std::string log_path = "train_log.csv";
};

/// One `key = value` assignment from a config file.
struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Reads UTF-8 `key = value` lines; `#` starts a comment, blank lines are
/// skipped. Lines without `=` or with an empty key raise ParseError naming
/// the line.
std::vector<ConfigEntry> parse_config_file(const std::string& path);

/// Applies entries onto the config. Unknown keys are collected and reported
/// together in one ParseError; bad values name the key and line.
void apply_config_entries(RunConfig& config, const std::vector<ConfigEntry>& entries);

/// Defaults, then DHCN_SEED (when set to a valid integer; anything else is a
/// ParseError), then the config file when a path is given.
RunConfig load_run_config(const std::optional<std::string>& config_path);

/// Behavior-named loss switch used by config files and flags.
std::string loss_form_name(LossForm form);
LossForm parse_loss_form(const std::string& name);

/// Command-line values. Only fields the user actually passed are set, so
/// they can override the config file without clobbering it.
struct FlagOverrides {
  std::optional<std::size_t> embedding_dim, layers, batch_size, epochs, lr_decay_every,
      early_stop_patience, min_item_freq, min_session_len, max_session_len;
  std::optional<double> beta, lr, l2, test_fraction;
  std::optional<std::uint64_t> seed;
  std::optional<bool> use_position, use_attention, ssl_shifted_negative, eval_each_epoch;
  std::optional<std::string> loss_form, dataset_path, checkpoint_path, log_path;
};

/// Highest-precedence layer: every set field replaces the merged value.
void apply_flag_overrides(RunConfig& config, const FlagOverrides& flags);

}  // namespace dhcn
