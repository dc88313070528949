#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "dhcn/data.hpp"
#include "dhcn/evaluation.hpp"
#include "dhcn/hypergraph.hpp"
#include "dhcn/model.hpp"

namespace dhcn {

/// Adam moment buffers, parallel to one fixed parameter list.
struct AdamState {
  std::vector<std::vector<double>> m;  // first moments, zero-initialized
  std::vector<std::vector<double>> v;  // second moments, zero-initialized
  std::size_t t = 0;                   // completed applies

  static AdamState init(const std::vector<Tensor>& params);
};

/// One bias-corrected Adam update (beta1 0.9, beta2 0.999, eps 1e-8) over all
/// parameters, reading each tensor's accumulated gradient. L2 couples into
/// the gradient as grad + l2 * value before the moment updates. Every
/// parameter must carry a gradient; t advances by exactly 1.
void adam_step(std::vector<Tensor>& params, AdamState& state, double lr, double l2);

struct TrainConfig {
  double lr = 0.001;
  double l2 = 1e-5;
  std::size_t batch_size = 100;
  std::size_t epochs = 30;
  std::uint64_t seed = 42;
  /// Multiply the rate by 0.1 every this many epochs; 0 keeps it fixed.
  std::size_t lr_decay_every = 0;
  /// Stop after this many epochs without a validation P@20 improvement;
  /// 0 trains the full budget. Needs per-epoch evaluation.
  std::size_t early_stop_patience = 0;
  /// Score the test split after every epoch (fills the metric columns).
  bool eval_each_epoch = true;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_rec_loss = 0.0;
  double mean_ssl_loss = 0.0;  // 0 when the contrastive term never ran
  std::optional<MetricsReport> metrics;
  double wall_ms = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  /// Batches with a single sequence, where corruption has nothing to permute.
  std::size_t ssl_skipped_batches = 0;
  bool stopped_early = false;
};

/// CSV header matching csv_row's columns.
std::string train_log_header();
/// `epoch,mean_Lr,mean_Ls,P@10,MRR@10,P@20,MRR@20,wall_ms`; metric cells stay
/// empty when the epoch was not evaluated.
std::string train_log_row(const EpochRecord& record);

/// Jointly trains the recommendation and contrastive objectives in place.
///
/// Per epoch: reshuffle batches (seed mixed with the epoch), forward both
/// channels, add beta times the contrastive loss, backprop, Adam. The
/// hypergraph is built once from dataset.train_sessions. With beta = 0 the
/// contrastive channel is never constructed. A non-finite loss aborts with a
/// diagnostic naming the epoch and batch. Same seed, same trajectory.
///
/// csv_out, when given, receives the header plus one row per epoch.
TrainResult train(ModelParams& params, const ModelConfig& model_config,
                  const TrainConfig& train_config, const ProcessedDataset& dataset,
                  std::ostream* csv_out = nullptr);

}  // namespace dhcn
