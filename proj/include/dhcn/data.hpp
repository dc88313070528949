#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace dhcn {

/// One session line from the input log: an ordered item-token list plus an
/// optional start timestamp (seconds).
struct RawSession {
  std::string session_id;
  std::vector<std::string> items;
  std::optional<std::int64_t> timestamp;
};

/// Bijective token <-> index map over 0..size()-1, built from training
/// sessions only, in first-appearance order.
class Vocabulary {
 public:
  Vocabulary() = default;

  static Vocabulary from_sessions(const std::vector<RawSession>& sessions);

  std::size_t size() const { return tokens_.size(); }
  /// Index of a token, or nullopt for out-of-vocabulary tokens.
  std::optional<std::size_t> lookup(const std::string& token) const;
  const std::string& token(std::size_t index) const;
  /// Appends a token with the next free index; duplicate -> contract error.
  void add(const std::string& token);

 private:
  std::unordered_map<std::string, std::size_t> index_of_;
  std::vector<std::string> tokens_;
};

/// One training / evaluation example: an observed prefix and the next item.
struct LabeledSequence {
  std::vector<std::size_t> prefix;  // item indices, interaction order, length >= 1
  std::size_t target = 0;
};

/// Padded mini-batch. max_len is the longest prefix in this batch; shorter
/// rows are right-padded with -1 in items and 0 in mask.
struct Batch {
  std::size_t size = 0;     // number of sequences n
  std::size_t max_len = 0;  // padded width
  std::vector<std::int64_t> items;   // n x max_len, row-major, pad = -1
  std::vector<std::uint8_t> mask;    // n x max_len, 1 = real item
  std::vector<std::size_t> lengths;  // per row, 1..max_len
  std::vector<std::size_t> targets;  // per row
  std::vector<std::vector<std::size_t>> unique_items_per_row;  // sorted ascending
};

struct FilterStats {
  std::size_t items_removed = 0;     // distinct items dropped for low frequency
  std::size_t sessions_dropped = 0;  // sessions below min_session_len afterwards
};

struct AugmentStats {
  std::size_t produced = 0;
  std::size_t dropped_oov_target = 0;
  std::size_t dropped_empty_prefix = 0;
  std::size_t oov_items_stripped = 0;
  std::size_t prefixes_truncated = 0;
};

/// Parses a session log: one session per line,
/// `session_id<TAB>item tokens separated by spaces[<TAB>unix_timestamp]`.
/// Blank lines are skipped. Malformed lines raise ParseError naming the line
/// number; a file with no sessions raises DataError.
std::vector<RawSession> load_sessions(const std::string& path);

/// Removes items whose corpus-wide frequency is below min_item_freq, then
/// drops sessions left with fewer than min_session_len items. Single pass,
/// not a fixpoint. Order preserved. Empty result raises DataError.
std::vector<RawSession> filter_dataset(const std::vector<RawSession>& sessions,
                                       std::size_t min_item_freq = 5,
                                       std::size_t min_session_len = 2,
                                       FilterStats* stats = nullptr);

/// Temporal-last holdout: when every session carries a timestamp the list is
/// stably sorted by it (ties keep input order); otherwise input order stands.
/// The last ceil(test_fraction * count) sessions form the test split.
std::pair<std::vector<RawSession>, std::vector<RawSession>> split_train_test(
    const std::vector<RawSession>& sessions, double test_fraction);

/// Expands each session [i1..im] into the m-1 pairs ([i1],i2) ...
/// ([i1..i(m-1)],im). Tokens missing from vocab (test split only): a pair
/// whose target is unknown is dropped; unknown prefix items are stripped and
/// the pair dropped if the prefix empties. Prefixes keep only their most
/// recent max_session_len items.
std::vector<LabeledSequence> augment_sequences(const std::vector<RawSession>& sessions,
                                               const Vocabulary& vocab,
                                               std::size_t max_session_len,
                                               AugmentStats* stats = nullptr);

/// Slices sequences into batches of batch_size (last one may be short),
/// optionally pre-shuffled with the given seed. Same seed, same order.
std::vector<Batch> make_batches(const std::vector<LabeledSequence>& sequences,
                                std::size_t batch_size, bool shuffle, std::uint64_t seed);

/// Everything downstream training needs, persisted as one file.
struct ProcessedDataset {
  Vocabulary vocab;
  std::size_t max_session_len = 0;
  /// Filtered training sessions as index lists (source of the hypergraph).
  std::vector<std::vector<std::size_t>> train_sessions;
  std::vector<LabeledSequence> train_sequences;
  std::vector<LabeledSequence> test_sequences;

  void save(const std::string& path) const;
  static ProcessedDataset load(const std::string& path);
};

struct PipelineStats {
  std::size_t sessions_loaded = 0;
  std::size_t train_split = 0;
  std::size_t test_split = 0;
  FilterStats filter;
  AugmentStats train_augment;
  AugmentStats test_augment;
};

/// Full preprocessing pipeline: load -> temporal split -> frequency/length
/// filter on the training split only -> vocabulary from filtered training
/// sessions -> augmentation of both splits. The test split never touches the
/// vocabulary or the frequency counts.
ProcessedDataset build_dataset(const std::string& path, double test_fraction,
                               std::size_t min_item_freq, std::size_t min_session_len,
                               std::size_t max_session_len, PipelineStats* stats = nullptr);

}  // namespace dhcn
