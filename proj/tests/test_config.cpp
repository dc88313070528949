#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include "dhcn/common.hpp"
#include "dhcn/config.hpp"
#include "doctest.h"

using namespace dhcn;

namespace {

std::string write_config(const char* name, const std::string& text) {
  const std::string path = std::string("/tmp/dhcn_config_test_") + name;
  std::ofstream out(path);
  out << text;
  return path;
}

}  // namespace

TEST_CASE("config files parse keys, values, comments, and line numbers") {
  const std::string path = write_config("basic",
                                        "# comment line\n"
                                        "lr = 0.05\n"
                                        "\n"
                                        "  epochs=12   # trailing comment\n"
                                        "dataset = data/sessions.bin\n");
  auto entries = parse_config_file(path);
  REQUIRE(entries.size() == 3);
  CHECK(entries[0].key == "lr");
  CHECK(entries[0].value == "0.05");
  CHECK(entries[0].line == 2);
  CHECK(entries[1].key == "epochs");
  CHECK(entries[1].value == "12");
  CHECK(entries[1].line == 4);
  CHECK(entries[2].value == "data/sessions.bin");
  std::remove(path.c_str());
}

TEST_CASE("malformed config lines are rejected with their line number") {
  const std::string no_eq = write_config("noeq", "lr 0.05\n");
  CHECK_THROWS_WITH_AS(parse_config_file(no_eq), doctest::Contains("line 1"), ParseError);
  std::remove(no_eq.c_str());

  const std::string empty_key = write_config("nokey", "\n = 3\n");
  CHECK_THROWS_WITH_AS(parse_config_file(empty_key), doctest::Contains("line 2"), ParseError);
  std::remove(empty_key.c_str());

  const std::string empty_value = write_config("noval", "lr =\n");
  CHECK_THROWS_WITH_AS(parse_config_file(empty_value), doctest::Contains("empty value"),
                       ParseError);
  std::remove(empty_value.c_str());

  CHECK_THROWS_AS(parse_config_file("/tmp/dhcn_config_missing_file"), IoError);
}

TEST_CASE("every schema key reaches its field") {
  RunConfig config;
  apply_config_entries(
      config,
      {{"embedding_dim", "32", 1},  {"layers", "2", 2},
       {"beta", "0.02", 3},         {"use_position", "false", 4},
       {"use_attention", "0", 5},   {"loss_form", "softmax_ce", 6},
       {"ssl_shifted_negative", "true", 7},
       {"lr", "0.01", 8},           {"l2", "1e-4", 9},
       {"batch_size", "64", 10},    {"epochs", "7", 11},
       {"seed", "99", 12},          {"lr_decay_every", "3", 13},
       {"early_stop_patience", "2", 14},
       {"eval_each_epoch", "false", 15},
       {"test_fraction", "0.25", 16},
       {"min_item_freq", "3", 17},  {"min_session_len", "4", 18},
       {"max_session_len", "19", 19},
       {"dataset", "a.bin", 20},    {"checkpoint", "b.ckpt", 21},
       {"log", "c.csv", 22}});

  CHECK(config.model.embedding_dim == 32);
  CHECK(config.model.layers == 2);
  CHECK(config.model.beta == 0.02);
  CHECK(config.model.use_position == false);
  CHECK(config.model.use_attention == false);
  CHECK(config.model.loss_form == LossForm::softmax_ce);
  CHECK(config.model.ssl_shifted_negative == true);
  CHECK(config.train.lr == 0.01);
  CHECK(config.train.l2 == 1e-4);
  CHECK(config.train.batch_size == 64);
  CHECK(config.train.epochs == 7);
  CHECK(config.train.seed == 99);
  CHECK(config.train.lr_decay_every == 3);
  CHECK(config.train.early_stop_patience == 2);
  CHECK(config.train.eval_each_epoch == false);
  CHECK(config.test_fraction == 0.25);
  CHECK(config.min_item_freq == 3);
  CHECK(config.min_session_len == 4);
  CHECK(config.max_session_len == 19);
  CHECK(config.dataset_path == "a.bin");
  CHECK(config.checkpoint_path == "b.ckpt");
  CHECK(config.log_path == "c.csv");
}

TEST_CASE("rejection lists every offending key at once") {
  RunConfig config;
  try {
    apply_config_entries(config, {{"lr", "0.1", 1},
                                  {"learning_rate", "0.1", 2},   // unknown
                                  {"epochs", "banana", 3},        // bad value
                                  {"betaa", "0.01", 4}});         // unknown
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string what = e.what();
    CHECK(what.find("learning_rate") != std::string::npos);
    CHECK(what.find("epochs") != std::string::npos);
    CHECK(what.find("banana") != std::string::npos);
    CHECK(what.find("betaa") != std::string::npos);
    CHECK(what.find("line 2") != std::string::npos);
    CHECK(what.find("line 4") != std::string::npos);
  }
}

TEST_CASE("value types are enforced") {
  RunConfig config;
  CHECK_THROWS_AS(apply_config_entries(config, {{"lr", "fast", 1}}), ParseError);
  CHECK_THROWS_AS(apply_config_entries(config, {{"epochs", "-3", 1}}), ParseError);
  CHECK_THROWS_AS(apply_config_entries(config, {{"use_position", "maybe", 1}}), ParseError);
  CHECK_THROWS_AS(apply_config_entries(config, {{"loss_form", "eq_seven", 1}}), ParseError);
}

TEST_CASE("loss form names round-trip") {
  CHECK(parse_loss_form("all_item_bce") == LossForm::all_item_bce);
  CHECK(parse_loss_form("softmax_ce") == LossForm::softmax_ce);
  CHECK(loss_form_name(LossForm::all_item_bce) == "all_item_bce");
  CHECK(loss_form_name(LossForm::softmax_ce) == "softmax_ce");
  CHECK_THROWS_AS(parse_loss_form("bce"), ParseError);
}

TEST_CASE("precedence: defaults, then DHCN_SEED, then file, then flags") {
  unsetenv("DHCN_SEED");

  // Layer 0: built-in defaults.
  RunConfig base = load_run_config(std::nullopt);
  CHECK(base.train.seed == 42);
  CHECK(base.train.lr == 0.001);
  CHECK(base.model.embedding_dim == 100);
  CHECK(base.model.layers == 3);
  CHECK(base.model.beta == 0.01);
  CHECK(base.train.l2 == 1e-5);
  CHECK(base.train.batch_size == 100);

  // Layer 1: environment seed overrides the default.
  setenv("DHCN_SEED", "7", 1);
  CHECK(load_run_config(std::nullopt).train.seed == 7);

  // Layer 2: the config file overrides the environment.
  const std::string path = write_config("precedence", "seed = 9\nlr = 0.5\n");
  RunConfig filed = load_run_config(path);
  CHECK(filed.train.seed == 9);
  CHECK(filed.train.lr == 0.5);

  // Layer 3: flags override everything below.
  FlagOverrides flags;
  flags.seed = 11;
  apply_flag_overrides(filed, flags);
  CHECK(filed.train.seed == 11);
  CHECK(filed.train.lr == 0.5);  // untouched by unset flags

  // Env var without a file still loses to flags.
  RunConfig env_only = load_run_config(std::nullopt);
  apply_flag_overrides(env_only, flags);
  CHECK(env_only.train.seed == 11);

  // Broken env values fail loudly instead of silently keeping 42.
  setenv("DHCN_SEED", "not-a-seed", 1);
  CHECK_THROWS_AS(load_run_config(std::nullopt), ParseError);
  unsetenv("DHCN_SEED");
  std::remove(path.c_str());
}

TEST_CASE("flag overrides cover every field and respect unset ones") {
  RunConfig config;
  FlagOverrides flags;
  flags.embedding_dim = 24;
  flags.beta = 0.0;            // zero must still override
  flags.use_attention = false;  // explicit false must still override
  flags.loss_form = "softmax_ce";
  flags.checkpoint_path = "x.ckpt";
  apply_flag_overrides(config, flags);

  CHECK(config.model.embedding_dim == 24);
  CHECK(config.model.beta == 0.0);
  CHECK(config.model.use_attention == false);
  CHECK(config.model.loss_form == LossForm::softmax_ce);
  CHECK(config.checkpoint_path == "x.ckpt");
  // Untouched fields keep their defaults.
  CHECK(config.model.layers == 3);
  CHECK(config.train.lr == 0.001);
  CHECK(config.log_path == "train_log.csv");
}
