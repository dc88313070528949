#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dhcn/data.hpp"
#include "dhcn/hypergraph.hpp"
#include "dhcn/tensor.hpp"

namespace dhcn {

class Rng;

/// How the next-item loss treats the softmax output.
enum class LossForm : std::uint8_t {
  all_item_bce = 0,  // -log p(target) - sum over other items of log(1 - p(i))
  softmax_ce = 1,    // -log p(target)
};

struct ModelConfig {
  std::size_t embedding_dim = 100;  // d
  std::size_t layers = 3;           // propagation depth L for both channels
  double beta = 0.01;               // weight of the contrastive term
  std::size_t max_len = 50;         // position-table height
  bool use_position = true;         // fuse reversed position embeddings
  bool use_attention = true;        // soft-attention readout vs plain mean
  LossForm loss_form = LossForm::all_item_bce;
  /// Score the corrupted pair as sigmoid(1 - dot) instead of the standard
  /// complement term -log(1 - sigmoid(dot)).
  bool ssl_shifted_negative = false;
};

/// All trainable tensors. Shapes are fixed by (num_items, config); every
/// tensor is created with requires_grad set.
struct ModelParams {
  Tensor item_embeddings;  // N x d
  Tensor position_table;   // max_len x d, row 0 = position closest to the target
  Tensor fuse_weight;      // d x 2d
  Tensor fuse_bias;        // 1 x d
  Tensor attn_head;        // d x 1
  Tensor attn_session;     // d x d
  Tensor attn_item;        // d x d
  Tensor attn_bias;        // 1 x d

  /// Uniform(-1/sqrt(d), 1/sqrt(d)) init for every tensor, in declaration
  /// order, from the given stream.
  static ModelParams init(std::size_t num_items, const ModelConfig& config, Rng& rng);

  std::size_t num_items() const { return item_embeddings.rows(); }

  /// (name, tensor) pairs in declaration order.
  std::vector<std::pair<std::string, Tensor>> named() const;
  /// Tensors the optimizer should update given the active ablations: the
  /// position block (table, fuse weight, fuse bias) is omitted with
  /// use_position off, the attention block with use_attention off — those
  /// tensors receive no gradient there.
  std::vector<Tensor> trainable(const ModelConfig& config) const;

  void save(const std::string& path, const ModelConfig& config) const;
  static std::pair<ModelParams, ModelConfig> load(const std::string& path);
};

/// tanh(W1 [x_t || p_rev(t)] + b): pairs the last item with position row 0,
/// the one before with row 1, and so on. item_embs rows must number at most
/// the position-table height.
Tensor position_fuse(Tape& tape, const Tensor& item_embs, const Tensor& position_table,
                     const Tensor& fuse_weight, const Tensor& fuse_bias);

/// Soft-attention pooling of one session's fused items to a 1 x d embedding:
/// weights are head • sigmoid(W_s mean + W_i item + bias) per item.
Tensor session_readout(Tape& tape, const Tensor& fused, const Tensor& attn_head,
                       const Tensor& attn_session, const Tensor& attn_item,
                       const Tensor& attn_bias);

/// Layer-averaged item representations from the global hypergraph channel.
Tensor item_representations(Tape& tape, const ModelParams& params, const ModelConfig& config,
                            const PropagationOperator& op);

/// One embedding row per batch session, honoring the position/attention
/// switches. Real (unpadded) items only, in interaction order.
Tensor session_embeddings(Tape& tape, const ModelParams& params, const ModelConfig& config,
                          const Tensor& item_reprs, const Batch& batch);

struct Scores {
  Tensor logits;  // n x N, dot products against every item
  Tensor probs;   // n x N, row-softmax of logits
};

Scores score(Tape& tape, const Tensor& session_embs, const Tensor& item_reprs);

/// Mean next-item loss over the batch; see LossForm. Probabilities are
/// clamped to [1e-12, 1-1e-12] inside the logs (clamped entries contribute
/// no gradient).
Tensor rec_loss(Tape& tape, const Tensor& probs, const std::vector<std::size_t>& targets,
                LossForm form);

/// Line-channel start: row s is the mean of the layer-0 item embeddings over
/// session s's distinct items.
Tensor line_channel_init(Tape& tape, const Tensor& item_embeddings, const Batch& batch);

/// Random row permutation followed by an independent column permutation,
/// both drawn from the seed. Needs at least 2 rows.
Tensor corrupt(Tape& tape, const Tensor& theta, std::uint64_t seed);

/// Contrastive pair loss between the two channels' session embeddings:
/// mean of -log sigmoid(dot(h_i, l_i)) - log(1 - sigmoid(dot(corrupt(h)_i, l_i))),
/// dot products clamped to |x| <= 50 before sigmoid. With shifted_negative
/// the second term scores sigmoid(1 - dot) instead.
Tensor ssl_loss(Tape& tape, const Tensor& theta_h, const Tensor& theta_l,
                std::uint64_t corrupt_seed, bool shifted_negative = false);

/// Variant with caller-chosen permutations, for oracle tests.
Tensor ssl_loss_with_permutations(Tape& tape, const Tensor& theta_h, const Tensor& theta_l,
                                  const std::vector<std::size_t>& row_perm,
                                  const std::vector<std::size_t>& col_perm,
                                  bool shifted_negative = false);

/// rec + beta * ssl.
Tensor total_loss(Tape& tape, const Tensor& rec, const Tensor& ssl, double beta);

}  // namespace dhcn
