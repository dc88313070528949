#include "dhcn/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "dhcn/common.hpp"

namespace dhcn {

namespace {

void check_cutoffs(const std::vector<std::size_t>& ks) {
  if (ks.empty()) throw ContractError("metrics need at least one cutoff");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == 0) throw ContractError("metric cutoffs start at 1");
    if (i > 0 && ks[i] <= ks[i - 1])
      throw ContractError("metric cutoffs must be strictly increasing");
  }
}

}  // namespace

void MetricsReport::validate() const {
  if (ks.size() != precision.size() || ks.size() != mrr.size())
    throw ContractError("metrics report columns disagree in length");
  check_cutoffs(ks);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (precision[i] < 0.0 || precision[i] > 1.0 || mrr[i] < 0.0 || mrr[i] > 1.0)
      throw ContractError("metric values must lie in [0,1]");
    if (mrr[i] > precision[i] + 1e-12)
      throw ContractError("MRR@K cannot exceed P@K");
    if (i > 0 && precision[i] + 1e-12 < precision[i - 1])
      throw ContractError("P@K cannot decrease as K grows");
  }
}

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out << "K,P,MRR\n";
  char line[64];
  for (std::size_t i = 0; i < ks.size(); ++i) {
    std::snprintf(line, sizeof(line), "%zu,%.6f,%.6f\n", ks[i], precision[i], mrr[i]);
    out << line;
  }
  return out.str();
}

std::string MetricsReport::to_table() const {
  std::ostringstream out;
  char line[64];
  out << "   K      P@K    MRR@K\n";
  for (std::size_t i = 0; i < ks.size(); ++i) {
    std::snprintf(line, sizeof(line), "%4zu   %.4f   %.4f\n", ks[i], precision[i], mrr[i]);
    out << line;
  }
  return out.str();
}

std::size_t rank_target(const std::vector<double>& scores, std::size_t target) {
  if (target >= scores.size())
    throw ContractError("rank_target: target " + std::to_string(target) + " outside " +
                        std::to_string(scores.size()) + " scores");
  const double s = scores[target];
  std::size_t rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > s || (scores[i] == s && i < target)) ++rank;
  }
  return rank;
}

std::vector<std::size_t> rank_targets(const ModelParams& params, const ModelConfig& config,
                                      const Tensor& item_reprs,
                                      const std::vector<LabeledSequence>& sequences,
                                      std::size_t batch_size) {
  if (sequences.empty()) throw ContractError("rank_targets: no sequences");
  if (batch_size == 0) throw ContractError("rank_targets: batch_size must be positive");
  const std::size_t num_items = item_reprs.rows();
  std::vector<std::size_t> ranks;
  ranks.reserve(sequences.size());
  for (const Batch& batch : make_batches(sequences, batch_size, /*shuffle=*/false, 0)) {
    Tape tape(false);  // forward only
    Tensor sess = session_embeddings(tape, params, config, item_reprs, batch);
    Tensor logits = tape.matmul(sess, tape.transpose(item_reprs));
    const double* row = logits.values().data();
    for (std::size_t r = 0; r < batch.size; ++r, row += num_items)
      ranks.push_back(rank_target(std::vector<double>(row, row + num_items), batch.targets[r]));
  }
  return ranks;
}

MetricsReport report_from_ranks(const std::vector<std::size_t>& ranks,
                                const std::vector<std::size_t>& ks) {
  if (ranks.empty()) throw ContractError("metrics need at least one ranked sequence");
  check_cutoffs(ks);
  MetricsReport report;
  report.ks = ks;
  report.sequence_count = ranks.size();
  const double n = static_cast<double>(ranks.size());
  for (std::size_t k : ks) {
    std::size_t hits = 0;
    double reciprocal = 0.0;
    for (std::size_t rank : ranks) {
      if (rank <= k) {
        ++hits;
        reciprocal += 1.0 / static_cast<double>(rank);
      }
    }
    report.precision.push_back(static_cast<double>(hits) / n);
    report.mrr.push_back(reciprocal / n);
  }
  report.validate();
  return report;
}

MetricsReport evaluate(const ModelParams& params, const ModelConfig& config,
                       const Tensor& item_reprs,
                       const std::vector<LabeledSequence>& test_sequences,
                       const std::vector<std::size_t>& ks, std::size_t batch_size) {
  if (test_sequences.empty()) throw ContractError("evaluate: empty test set");
  return report_from_ranks(rank_targets(params, config, item_reprs, test_sequences, batch_size),
                           ks);
}

MetricsReport popularity_baseline(const std::vector<LabeledSequence>& train_sequences,
                                  const std::vector<LabeledSequence>& test_sequences,
                                  std::size_t num_items, const std::vector<std::size_t>& ks) {
  if (train_sequences.empty() || test_sequences.empty())
    throw ContractError("popularity_baseline: both splits must be nonempty");
  std::vector<double> frequency(num_items, 0.0);
  for (const LabeledSequence& seq : train_sequences) {
    if (seq.target >= num_items)
      throw ContractError("popularity_baseline: train target outside the item range");
    frequency[seq.target] += 1.0;
  }
  std::vector<std::size_t> ranks;
  ranks.reserve(test_sequences.size());
  for (const LabeledSequence& seq : test_sequences)
    ranks.push_back(rank_target(frequency, seq.target));
  return report_from_ranks(ranks, ks);
}

}  // namespace dhcn
