#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dhcn/data.hpp"
#include "dhcn/model.hpp"
#include "dhcn/tensor.hpp"

namespace dhcn {

/// Top-K ranking quality over a set of test sequences.
struct MetricsReport {
  std::vector<std::size_t> ks;  // strictly increasing cutoffs
  std::vector<double> precision;  // per cutoff: fraction of targets ranked <= K
  std::vector<double> mrr;        // per cutoff: mean of 1/rank, 0 past the cutoff
  std::size_t sequence_count = 0;

  /// Enforces the report's own arithmetic: every value in [0,1],
  /// MRR@K <= P@K, and P@K nondecreasing in K. Violations are contract errors.
  void validate() const;

  /// `K,P,MRR` header plus one row per cutoff.
  std::string to_csv() const;
  /// Aligned three-column table for terminals.
  std::string to_table() const;
};

/// 1-based rank of the target's score: 1 + items scoring strictly higher,
/// ties broken by ascending item index (lower-indexed equals rank ahead).
std::size_t rank_target(const std::vector<double>& scores, std::size_t target);

/// Ranks every sequence's target under the model, in input order.
/// Runs forward-only (no tape recording) in batches.
std::vector<std::size_t> rank_targets(const ModelParams& params, const ModelConfig& config,
                                      const Tensor& item_reprs,
                                      const std::vector<LabeledSequence>& sequences,
                                      std::size_t batch_size = 512);

/// Builds P@K / MRR@K from precomputed ranks. ks must be nonempty and
/// strictly increasing; ranks must be nonempty.
MetricsReport report_from_ranks(const std::vector<std::size_t>& ranks,
                                const std::vector<std::size_t>& ks);

/// Scores the test split with the trained model: convolved item table ->
/// per-session embedding -> dot-product ranking.
MetricsReport evaluate(const ModelParams& params, const ModelConfig& config,
                       const Tensor& item_reprs,
                       const std::vector<LabeledSequence>& test_sequences,
                       const std::vector<std::size_t>& ks = {10, 20},
                       std::size_t batch_size = 512);

/// Sanity floor: every item scored by how often it appears as a training
/// target, constant across sessions. A learned model should beat this.
MetricsReport popularity_baseline(const std::vector<LabeledSequence>& train_sequences,
                                  const std::vector<LabeledSequence>& test_sequences,
                                  std::size_t num_items,
                                  const std::vector<std::size_t>& ks = {10, 20});

}  // namespace dhcn
