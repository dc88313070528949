#include "dhcn/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>

#include "dhcn/common.hpp"

namespace dhcn {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& value) {
  char* end = nullptr;
  const double parsed = std::strtod(value.c_str(), &end);
  if (end != value.c_str() + value.size() || value.empty())
    throw ParseError("cannot parse '" + value + "' as a number");
  return parsed;
}

std::uint64_t parse_unsigned(const std::string& value) {
  std::uint64_t parsed = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ParseError("cannot parse '" + value + "' as a nonnegative integer");
  return parsed;
}

bool parse_bool(const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ParseError("cannot parse '" + value + "' as a boolean (true/false/1/0)");
}

/// Routes one assignment to its field. Unknown key -> false.
bool apply_one(RunConfig& config, const std::string& key, const std::string& value) {
  if (key == "embedding_dim") config.model.embedding_dim = parse_unsigned(value);
  else if (key == "layers") config.model.layers = parse_unsigned(value);
  else if (key == "beta") config.model.beta = parse_double(value);
  else if (key == "use_position") config.model.use_position = parse_bool(value);
  else if (key == "use_attention") config.model.use_attention = parse_bool(value);
  else if (key == "loss_form") config.model.loss_form = parse_loss_form(value);
  else if (key == "ssl_shifted_negative") config.model.ssl_shifted_negative = parse_bool(value);
  else if (key == "lr") config.train.lr = parse_double(value);
  else if (key == "l2") config.train.l2 = parse_double(value);
  else if (key == "batch_size") config.train.batch_size = parse_unsigned(value);
  else if (key == "epochs") config.train.epochs = parse_unsigned(value);
  else if (key == "seed") config.train.seed = parse_unsigned(value);
  else if (key == "lr_decay_every") config.train.lr_decay_every = parse_unsigned(value);
  else if (key == "early_stop_patience") config.train.early_stop_patience = parse_unsigned(value);
  else if (key == "eval_each_epoch") config.train.eval_each_epoch = parse_bool(value);
  else if (key == "test_fraction") config.test_fraction = parse_double(value);
  else if (key == "min_item_freq") config.min_item_freq = parse_unsigned(value);
  else if (key == "min_session_len") config.min_session_len = parse_unsigned(value);
  else if (key == "max_session_len") config.max_session_len = parse_unsigned(value);
  else if (key == "dataset") config.dataset_path = value;
  else if (key == "checkpoint") config.checkpoint_path = value;
  else if (key == "log") config.log_path = value;
  else return false;
  return true;
}

}  // namespace

std::string loss_form_name(LossForm form) {
  return form == LossForm::all_item_bce ? "all_item_bce" : "softmax_ce";
}

LossForm parse_loss_form(const std::string& name) {
  if (name == "all_item_bce") return LossForm::all_item_bce;
  if (name == "softmax_ce") return LossForm::softmax_ce;
  throw ParseError("unknown loss form '" + name + "' (all_item_bce or softmax_ce)");
}

std::vector<ConfigEntry> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::vector<ConfigEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + " line " + std::to_string(line_no) + ": expected key = value");
    ConfigEntry entry;
    entry.key = trim(stripped.substr(0, eq));
    entry.value = trim(stripped.substr(eq + 1));
    entry.line = line_no;
    if (entry.key.empty())
      throw ParseError(path + " line " + std::to_string(line_no) + ": empty key");
    if (entry.value.empty())
      throw ParseError(path + " line " + std::to_string(line_no) + ": empty value for '" +
                       entry.key + "'");
    entries.push_back(std::move(entry));
  }
  return entries;
}

void apply_config_entries(RunConfig& config, const std::vector<ConfigEntry>& entries) {
  std::vector<std::string> offenders;
  for (const ConfigEntry& entry : entries) {
    try {
      if (!apply_one(config, entry.key, entry.value))
        offenders.push_back("unknown key '" + entry.key + "' (line " +
                            std::to_string(entry.line) + ")");
    } catch (const ParseError& e) {
      offenders.push_back("key '" + entry.key + "' (line " + std::to_string(entry.line) +
                          "): " + e.what());
    }
  }
  if (!offenders.empty()) {
    std::string message = "config rejected:";
    for (const std::string& o : offenders) message += "\n  " + o;
    throw ParseError(message);
  }
}

void apply_flag_overrides(RunConfig& config, const FlagOverrides& flags) {
  if (flags.embedding_dim) config.model.embedding_dim = *flags.embedding_dim;
  if (flags.layers) config.model.layers = *flags.layers;
  if (flags.beta) config.model.beta = *flags.beta;
  if (flags.use_position) config.model.use_position = *flags.use_position;
  if (flags.use_attention) config.model.use_attention = *flags.use_attention;
  if (flags.loss_form) config.model.loss_form = parse_loss_form(*flags.loss_form);
  if (flags.ssl_shifted_negative)
    config.model.ssl_shifted_negative = *flags.ssl_shifted_negative;
  if (flags.lr) config.train.lr = *flags.lr;
  if (flags.l2) config.train.l2 = *flags.l2;
  if (flags.batch_size) config.train.batch_size = *flags.batch_size;
  if (flags.epochs) config.train.epochs = *flags.epochs;
  if (flags.seed) config.train.seed = *flags.seed;
  if (flags.lr_decay_every) config.train.lr_decay_every = *flags.lr_decay_every;
  if (flags.early_stop_patience) config.train.early_stop_patience = *flags.early_stop_patience;
  if (flags.eval_each_epoch) config.train.eval_each_epoch = *flags.eval_each_epoch;
  if (flags.test_fraction) config.test_fraction = *flags.test_fraction;
  if (flags.min_item_freq) config.min_item_freq = *flags.min_item_freq;
  if (flags.min_session_len) config.min_session_len = *flags.min_session_len;
  if (flags.max_session_len) config.max_session_len = *flags.max_session_len;
  if (flags.dataset_path) config.dataset_path = *flags.dataset_path;
  if (flags.checkpoint_path) config.checkpoint_path = *flags.checkpoint_path;
  if (flags.log_path) config.log_path = *flags.log_path;
}

RunConfig load_run_config(const std::optional<std::string>& config_path) {
  RunConfig config;
  if (const char* env = std::getenv("DHCN_SEED"); env && *env) {
    try {
      config.train.seed = parse_unsigned(env);
    } catch (const ParseError&) {
      throw ParseError(std::string("DHCN_SEED: cannot parse '") + env + "' as a seed");
    }
  }
  if (config_path) apply_config_entries(config, parse_config_file(*config_path));
  return config;
}

}  // namespace dhcn
