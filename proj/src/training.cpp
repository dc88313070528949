#include "dhcn/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "dhcn/common.hpp"
#include "dhcn/rng.hpp"

namespace dhcn {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

/// P/MRR at one cutoff, or empty cells when the epoch skipped evaluation.
void append_metric_cells(std::string& row, const EpochRecord& record, std::size_t k) {
  if (record.metrics) {
    const MetricsReport& m = *record.metrics;
    for (std::size_t i = 0; i < m.ks.size(); ++i) {
      if (m.ks[i] == k) {
        char cells[40];
        std::snprintf(cells, sizeof(cells), ",%.6f,%.6f", m.precision[i], m.mrr[i]);
        row += cells;
        return;
      }
    }
  }
  row += ",,";
}

}  // namespace

AdamState AdamState::init(const std::vector<Tensor>& params) {
  AdamState state;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const Tensor& p : params) {
    state.m.emplace_back(p.size(), 0.0);
    state.v.emplace_back(p.size(), 0.0);
  }
  return state;
}

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr, double l2) {
  if (lr <= 0.0) throw ContractError("adam_step: learning rate must be positive");
  if (l2 < 0.0) throw ContractError("adam_step: l2 must be nonnegative");
  if (params.size() != state.m.size())
    throw ContractError("adam_step: state built for a different parameter list");

  state.t += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.t));

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    if (!p.has_grad())
      throw ContractError("adam_step: parameter " + std::to_string(pi) + " has no gradient");
    const std::vector<double>& grad = p.grad();
    std::vector<double>& value = p.values();
    std::vector<double>& m = state.m[pi];
    std::vector<double>& v = state.v[pi];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] + l2 * value[i];
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + kEps);
    }
  }
}

std::string train_log_header() {
  return "epoch,mean_Lr,mean_Ls,P@10,MRR@10,P@20,MRR@20,wall_ms";
}

std::string train_log_row(const EpochRecord& record) {
  char head[96];
  std::snprintf(head, sizeof(head), "%zu,%.6f,%.6f", record.epoch, record.mean_rec_loss,
                record.mean_ssl_loss);
  std::string row = head;
  append_metric_cells(row, record, 10);
  append_metric_cells(row, record, 20);
  char tail[32];
  std::snprintf(tail, sizeof(tail), ",%.1f", record.wall_ms);
  row += tail;
  return row;
}

TrainResult train(ModelParams& params, const ModelConfig& model_config,
                  const TrainConfig& train_config, const ProcessedDataset& dataset,
                  std::ostream* csv_out) {
  if (train_config.lr <= 0.0) throw ContractError("train: learning rate must be positive");
  if (train_config.l2 < 0.0) throw ContractError("train: l2 must be nonnegative");
  if (train_config.batch_size == 0) throw ContractError("train: batch_size must be positive");
  if (dataset.train_sequences.empty()) throw ContractError("train: no training sequences");
  if (params.num_items() != dataset.vocab.size())
    throw ContractError("train: parameters sized for " + std::to_string(params.num_items()) +
                        " items but the dataset has " + std::to_string(dataset.vocab.size()));

  Hypergraph hg = build_incidence(dataset.train_sessions, dataset.vocab.size());
  PropagationOperator op = propagation_operator(hg);

  std::vector<Tensor> trainable = params.trainable(model_config);
  AdamState state = AdamState::init(trainable);

  const bool do_eval = train_config.eval_each_epoch && !dataset.test_sequences.empty();
  const std::vector<std::size_t> log_ks = {10, 20};

  TrainResult result;
  if (csv_out) *csv_out << train_log_header() << "\n";

  double best_p20 = -1.0;
  std::size_t epochs_since_best = 0;

  for (std::size_t epoch = 1; epoch <= train_config.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    double lr = train_config.lr;
    if (train_config.lr_decay_every > 0)
      lr *= std::pow(0.1, static_cast<double>((epoch - 1) / train_config.lr_decay_every));

    std::vector<Batch> batches = make_batches(dataset.train_sequences, train_config.batch_size,
                                              /*shuffle=*/true,
                                              mix_seed(train_config.seed, epoch));
    double rec_sum = 0.0, ssl_sum = 0.0;
    std::size_t rec_n = 0, ssl_n = 0;

    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& batch = batches[bi];
      LineGraph lg;  // outlives the tape: its operator is captured by reference
      Tape tape;

      Tensor x_h = item_representations(tape, params, model_config, op);
      Tensor theta_h = session_embeddings(tape, params, model_config, x_h, batch);
      Scores scores = score(tape, theta_h, x_h);
      Tensor rec = rec_loss(tape, scores.probs, batch.targets, model_config.loss_form);
      Tensor loss = rec;

      if (model_config.beta > 0.0) {
        if (batch.size >= 2) {
          lg = build_line_graph(batch.unique_items_per_row);
          Tensor theta_l = line_convolve(
              tape, lg, line_channel_init(tape, params.item_embeddings, batch),
              model_config.layers);
          Tensor ssl = ssl_loss(tape, theta_h, theta_l,
                                mix_seed(train_config.seed, epoch, bi),
                                model_config.ssl_shifted_negative);
          loss = total_loss(tape, rec, ssl, model_config.beta);
          ssl_sum += ssl.item() * static_cast<double>(batch.size);
          ssl_n += batch.size;
        } else {
          ++result.ssl_skipped_batches;
        }
      }

      if (!std::isfinite(loss.item()))
        throw DataError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                        ", batch " + std::to_string(bi));
      rec_sum += rec.item() * static_cast<double>(batch.size);
      rec_n += batch.size;

      for (Tensor& p : trainable) p.zero_grad();
      tape.backward(loss);
      adam_step(trainable, state, lr, train_config.l2);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.mean_rec_loss = rec_sum / static_cast<double>(rec_n);
    record.mean_ssl_loss = ssl_n > 0 ? ssl_sum / static_cast<double>(ssl_n) : 0.0;

    if (do_eval) {
      Tape scratch(false);
      Tensor x_h = item_representations(scratch, params, model_config, op);
      record.metrics = evaluate(params, model_config, x_h, dataset.test_sequences, log_ks);
    }

    record.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               epoch_start)
                         .count();
    if (csv_out) *csv_out << train_log_row(record) << "\n";
    result.log.push_back(std::move(record));

    if (train_config.early_stop_patience > 0 && do_eval) {
      const MetricsReport& m = *result.log.back().metrics;
      double p20 = 0.0;
      for (std::size_t i = 0; i < m.ks.size(); ++i)
        if (m.ks[i] == 20) p20 = m.precision[i];
      if (p20 > best_p20) {
        best_p20 = p20;
        epochs_since_best = 0;
      } else if (++epochs_since_best >= train_config.early_stop_patience) {
        result.stopped_early = true;
        break;
      }
    }
  }
  return result;
}

}  // namespace dhcn
