#include "dhcn/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "dhcn/binary_io.hpp"
#include "dhcn/common.hpp"
#include "dhcn/rng.hpp"

namespace dhcn {

namespace {

const char kDatasetMagic[] = "DHCNDATA1";

std::int64_t parse_timestamp(const std::string& field, std::size_t line_no) {
  std::int64_t value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ParseError("line " + std::to_string(line_no) + ": bad timestamp '" + field + "'");
  return value;
}

}  // namespace

Vocabulary Vocabulary::from_sessions(const std::vector<RawSession>& sessions) {
  Vocabulary v;
  for (const RawSession& s : sessions)
    for (const std::string& item : s.items)
      if (!v.index_of_.count(item)) v.add(item);
  return v;
}

std::optional<std::size_t> Vocabulary::lookup(const std::string& token) const {
  auto it = index_of_.find(token);
  if (it == index_of_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(std::size_t index) const {
  if (index >= tokens_.size())
    throw ContractError("vocabulary index " + std::to_string(index) + " outside size " +
                        std::to_string(tokens_.size()));
  return tokens_[index];
}

void Vocabulary::add(const std::string& token) {
  if (index_of_.count(token)) throw ContractError("duplicate vocabulary token '" + token + "'");
  index_of_.emplace(token, tokens_.size());
  tokens_.push_back(token);
}

std::vector<RawSession> load_sessions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open session file: " + path);

  std::vector<RawSession> sessions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2 || fields.size() > 3)
      throw ParseError("line " + std::to_string(line_no) + ": expected 2 or 3 tab-separated " +
                       "fields, got " + std::to_string(fields.size()));

    RawSession s;
    s.session_id = fields[0];
    std::istringstream items(fields[1]);
    std::string token;
    while (items >> token) s.items.push_back(token);
    if (s.items.empty())
      throw ParseError("line " + std::to_string(line_no) + ": session '" + s.session_id +
                       "' has no items");
    if (fields.size() == 3) s.timestamp = parse_timestamp(fields[2], line_no);
    sessions.push_back(std::move(s));
  }
  if (sessions.empty()) throw DataError("no sessions in file: " + path);
  return sessions;
}

std::vector<RawSession> filter_dataset(const std::vector<RawSession>& sessions,
                                       std::size_t min_item_freq, std::size_t min_session_len,
                                       FilterStats* stats) {
  if (sessions.empty()) throw ContractError("filter_dataset: no sessions");

  std::unordered_map<std::string, std::size_t> freq;
  for (const RawSession& s : sessions)
    for (const std::string& item : s.items) ++freq[item];

  std::size_t items_removed = 0;
  for (const auto& [item, count] : freq)
    if (count < min_item_freq) ++items_removed;

  std::vector<RawSession> out;
  std::size_t sessions_dropped = 0;
  for (const RawSession& s : sessions) {
    RawSession kept;
    kept.session_id = s.session_id;
    kept.timestamp = s.timestamp;
    for (const std::string& item : s.items)
      if (freq[item] >= min_item_freq) kept.items.push_back(item);
    if (kept.items.size() >= min_session_len)
      out.push_back(std::move(kept));
    else
      ++sessions_dropped;
  }
  if (stats) {
    stats->items_removed = items_removed;
    stats->sessions_dropped = sessions_dropped;
  }
  if (out.empty()) throw DataError("filtering removed every session");
  return out;
}

std::pair<std::vector<RawSession>, std::vector<RawSession>> split_train_test(
    const std::vector<RawSession>& sessions, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ContractError("split_train_test: test_fraction must lie in (0,1), got " +
                        std::to_string(test_fraction));
  if (sessions.size() < 2)
    throw ContractError("split_train_test: need at least 2 sessions, got " +
                        std::to_string(sessions.size()));

  std::vector<RawSession> ordered = sessions;
  const bool all_timestamped =
      std::all_of(ordered.begin(), ordered.end(),
                  [](const RawSession& s) { return s.timestamp.has_value(); });
  if (all_timestamped)
    std::stable_sort(ordered.begin(), ordered.end(), [](const RawSession& a, const RawSession& b) {
      return *a.timestamp < *b.timestamp;
    });

  const auto count = static_cast<double>(ordered.size());
  auto test_count = static_cast<std::size_t>(std::ceil(test_fraction * count));
  if (test_count >= ordered.size())
    throw DataError("split_train_test: test fraction " + std::to_string(test_fraction) +
                    " leaves no training sessions");

  std::vector<RawSession> train(ordered.begin(), ordered.end() - static_cast<long>(test_count));
  std::vector<RawSession> test(ordered.end() - static_cast<long>(test_count), ordered.end());
  return {std::move(train), std::move(test)};
}

std::vector<LabeledSequence> augment_sequences(const std::vector<RawSession>& sessions,
                                               const Vocabulary& vocab,
                                               std::size_t max_session_len,
                                               AugmentStats* stats) {
  if (max_session_len == 0) throw ContractError("augment_sequences: max_session_len is 0");
  AugmentStats local;
  std::vector<LabeledSequence> out;
  for (const RawSession& s : sessions) {
    for (std::size_t t = 1; t < s.items.size(); ++t) {
      std::optional<std::size_t> target = vocab.lookup(s.items[t]);
      if (!target) {
        ++local.dropped_oov_target;
        continue;
      }
      LabeledSequence seq;
      seq.target = *target;
      for (std::size_t k = 0; k < t; ++k) {
        if (std::optional<std::size_t> idx = vocab.lookup(s.items[k]))
          seq.prefix.push_back(*idx);
        else
          ++local.oov_items_stripped;
      }
      if (seq.prefix.empty()) {
        ++local.dropped_empty_prefix;
        continue;
      }
      if (seq.prefix.size() > max_session_len) {
        seq.prefix.erase(seq.prefix.begin(),
                         seq.prefix.end() - static_cast<long>(max_session_len));
        ++local.prefixes_truncated;
      }
      out.push_back(std::move(seq));
      ++local.produced;
    }
  }
  if (stats) *stats = local;
  return out;
}

std::vector<Batch> make_batches(const std::vector<LabeledSequence>& sequences,
                                std::size_t batch_size, bool shuffle, std::uint64_t seed) {
  if (sequences.empty()) throw ContractError("make_batches: no sequences");
  if (batch_size == 0) throw ContractError("make_batches: batch_size is 0");

  std::vector<std::size_t> order(sequences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (shuffle) Rng(seed).shuffle(order);

  std::vector<Batch> batches;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const std::size_t end = std::min(begin + batch_size, order.size());
    Batch b;
    b.size = end - begin;
    for (std::size_t k = begin; k < end; ++k)
      b.max_len = std::max(b.max_len, sequences[order[k]].prefix.size());
    b.items.assign(b.size * b.max_len, -1);
    b.mask.assign(b.size * b.max_len, 0);
    b.lengths.resize(b.size);
    b.targets.resize(b.size);
    b.unique_items_per_row.resize(b.size);
    for (std::size_t r = 0; r < b.size; ++r) {
      const LabeledSequence& seq = sequences[order[begin + r]];
      b.lengths[r] = seq.prefix.size();
      b.targets[r] = seq.target;
      for (std::size_t c = 0; c < seq.prefix.size(); ++c) {
        b.items[r * b.max_len + c] = static_cast<std::int64_t>(seq.prefix[c]);
        b.mask[r * b.max_len + c] = 1;
      }
      std::vector<std::size_t> uniq = seq.prefix;
      std::sort(uniq.begin(), uniq.end());
      uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
      b.unique_items_per_row[r] = std::move(uniq);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

void ProcessedDataset::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset file: " + path);
  out.write(kDatasetMagic, sizeof(kDatasetMagic) - 1);
  io::write_u64(out, max_session_len);

  io::write_u64(out, vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) io::write_string(out, vocab.token(i));

  io::write_u64(out, train_sessions.size());
  for (const auto& session : train_sessions) {
    io::write_u64(out, session.size());
    for (std::size_t idx : session) io::write_u64(out, idx);
  }

  auto write_sequences = [&](const std::vector<LabeledSequence>& seqs) {
    io::write_u64(out, seqs.size());
    for (const LabeledSequence& s : seqs) {
      io::write_u64(out, s.prefix.size());
      for (std::size_t idx : s.prefix) io::write_u64(out, idx);
      io::write_u64(out, s.target);
    }
  };
  write_sequences(train_sequences);
  write_sequences(test_sequences);
  if (!out) throw IoError("failed writing dataset file: " + path);
}

ProcessedDataset ProcessedDataset::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file: " + path);
  io::expect_magic(in, kDatasetMagic, path);

  ProcessedDataset d;
  d.max_session_len = io::read_u64(in, path);

  const std::uint64_t vocab_size = io::read_u64(in, path);
  for (std::uint64_t i = 0; i < vocab_size; ++i) d.vocab.add(io::read_string(in, path));

  const std::uint64_t session_count = io::read_u64(in, path);
  d.train_sessions.resize(session_count);
  for (auto& session : d.train_sessions) {
    session.resize(io::read_u64(in, path));
    for (auto& idx : session) idx = io::read_u64(in, path);
  }

  auto read_sequences = [&](std::vector<LabeledSequence>& seqs) {
    seqs.resize(io::read_u64(in, path));
    for (LabeledSequence& s : seqs) {
      s.prefix.resize(io::read_u64(in, path));
      for (auto& idx : s.prefix) idx = io::read_u64(in, path);
      s.target = io::read_u64(in, path);
    }
  };
  read_sequences(d.train_sequences);
  read_sequences(d.test_sequences);
  return d;
}

ProcessedDataset build_dataset(const std::string& path, double test_fraction,
                               std::size_t min_item_freq, std::size_t min_session_len,
                               std::size_t max_session_len, PipelineStats* stats) {
  PipelineStats local;
  std::vector<RawSession> sessions = load_sessions(path);
  local.sessions_loaded = sessions.size();

  auto [train_raw, test_raw] = split_train_test(sessions, test_fraction);
  local.train_split = train_raw.size();
  local.test_split = test_raw.size();

  std::vector<RawSession> train =
      filter_dataset(train_raw, min_item_freq, min_session_len, &local.filter);

  ProcessedDataset d;
  d.max_session_len = max_session_len;
  d.vocab = Vocabulary::from_sessions(train);

  d.train_sessions.reserve(train.size());
  for (const RawSession& s : train) {
    std::vector<std::size_t> indices;
    indices.reserve(s.items.size());
    for (const std::string& item : s.items) indices.push_back(*d.vocab.lookup(item));
    d.train_sessions.push_back(std::move(indices));
  }

  d.train_sequences = augment_sequences(train, d.vocab, max_session_len, &local.train_augment);
  d.test_sequences = augment_sequences(test_raw, d.vocab, max_session_len, &local.test_augment);
  if (d.test_sequences.empty()) throw DataError("no usable test sequences after filtering");

  if (stats) *stats = local;
  return d;
}

}  // namespace dhcn
