#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dhcn/commands.hpp"
#include "dhcn/common.hpp"
#include "dhcn/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"session-based recommender over dual hypergraph channels"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  dhcn::FlagOverrides flags;

  auto add_config_option = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
  };

  // ---- preprocess ----------------------------------------------------------
  CLI::App* preprocess = app.add_subcommand("preprocess", "session log -> dataset file");
  std::string pre_input, pre_output;
  preprocess->add_option("input", pre_input, "session log (TSV)")->required();
  preprocess->add_option("output", pre_output, "dataset file to write")->required();
  preprocess->add_option("--test-fraction", flags.test_fraction,
                         "fraction of sessions held out from the temporal end");
  preprocess->add_option("--min-item-freq", flags.min_item_freq,
                         "drop items seen fewer times than this");
  preprocess->add_option("--min-session-len", flags.min_session_len,
                         "drop sessions shorter than this after item filtering");
  preprocess->add_option("--max-session-len", flags.max_session_len,
                         "keep only the most recent items of long prefixes");
  add_config_option(preprocess);

  // ---- train ---------------------------------------------------------------
  CLI::App* train = app.add_subcommand("train", "fit a model on a dataset file");
  train->add_option("dataset", flags.dataset_path, "processed dataset file");
  train->add_option("--checkpoint,-o", flags.checkpoint_path, "checkpoint file to write");
  train->add_option("--log", flags.log_path, "per-epoch CSV log to write");
  train->add_option("--embedding-dim", flags.embedding_dim, "embedding width d");
  train->add_option("--layers", flags.layers, "convolution layers L");
  train->add_option("--beta", flags.beta, "contrastive loss weight");
  train->add_option("--lr", flags.lr, "learning rate");
  train->add_option("--l2", flags.l2, "weight decay coefficient");
  train->add_option("--batch-size", flags.batch_size, "sequences per batch");
  train->add_option("--epochs", flags.epochs, "training epochs");
  train->add_option("--seed", flags.seed, "master random seed");
  train->add_option("--loss-form", flags.loss_form, "all_item_bce or softmax_ce")
      ->check(CLI::IsMember({"all_item_bce", "softmax_ce"}));
  train->add_option("--lr-decay-every", flags.lr_decay_every,
                    "multiply the rate by 0.1 every N epochs (0 = fixed)");
  train->add_option("--early-stop-patience", flags.early_stop_patience,
                    "stop after N epochs without P@20 improvement (0 = off)");
  train->add_flag_callback(
      "--no-position", [&] { flags.use_position = false; },
      "drop the reversed-position fusion");
  train->add_flag_callback(
      "--no-attention", [&] { flags.use_attention = false; },
      "replace soft attention with mean pooling");
  train->add_flag_callback(
      "--ssl-shifted-negative", [&] { flags.ssl_shifted_negative = true; },
      "score negative pairs as sigmoid(1 - dot)");
  train->add_flag_callback(
      "--no-epoch-eval", [&] { flags.eval_each_epoch = false; },
      "skip test-set scoring between epochs");
  std::string dump_graphs_dir;
  train->add_option("--dump-graphs", dump_graphs_dir,
                    "write both graph operators as 'row col value' text into this directory");
  add_config_option(train);

  // ---- evaluate ------------------------------------------------------------
  CLI::App* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the test split");
  std::string eval_checkpoint, eval_dataset;
  evaluate->add_option("checkpoint", eval_checkpoint, "trained checkpoint")->required();
  evaluate->add_option("dataset", eval_dataset, "processed dataset file")->required();
  std::vector<std::size_t> eval_ks;
  evaluate->add_option("--k", eval_ks, "ranking cutoffs (default 10 20)");
  std::string baseline;
  evaluate->add_option("--baseline", baseline, "also score a reference ranker")
      ->check(CLI::IsMember({"popularity"}));

  // ---- selfcheck -----------------------------------------------------------
  CLI::App* selfcheck = app.add_subcommand("selfcheck", "run the built-in invariant suite");

  CLI11_PARSE(app, argc, argv);

  try {
    dhcn::RunConfig config = dhcn::load_run_config(config_path);
    dhcn::apply_flag_overrides(config, flags);

    if (preprocess->parsed()) {
      dhcn::PreprocessArgs args;
      args.input = pre_input;
      args.output = pre_output;
      args.test_fraction = config.test_fraction;
      args.min_item_freq = config.min_item_freq;
      args.min_session_len = config.min_session_len;
      args.max_session_len = config.max_session_len;
      dhcn::cmd_preprocess(args, std::cout, std::cerr);
    } else if (train->parsed()) {
      if (config.dataset_path.empty())
        throw dhcn::ContractError("no dataset given (positional argument or 'dataset' key)");
      dhcn::TrainArgs args;
      args.dataset_path = config.dataset_path;
      args.checkpoint_path = config.checkpoint_path;
      args.log_path = config.log_path;
      args.model = config.model;
      args.train = config.train;
      args.dump_graphs_dir = dump_graphs_dir;
      dhcn::cmd_train(args, std::cout, std::cerr);
    } else if (evaluate->parsed()) {
      dhcn::EvaluateArgs args;
      args.checkpoint_path = eval_checkpoint;
      args.dataset_path = eval_dataset;
      if (!eval_ks.empty()) args.ks = eval_ks;
      args.with_popularity_baseline = baseline == "popularity";
      dhcn::cmd_evaluate(args, std::cout, std::cerr);
    } else if (selfcheck->parsed()) {
      if (!dhcn::cmd_selfcheck(std::cout)) return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
