#include "dhcn/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "dhcn/binary_io.hpp"
#include "dhcn/common.hpp"
#include "dhcn/rng.hpp"

namespace dhcn {

namespace {

const char kCheckpointMagic[] = "DHCNCKPT1";
constexpr double kProbFloor = 1e-12;
constexpr double kLogitClamp = 50.0;

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + e^x) without overflow; equals -log(sigmoid(-x))
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

ModelParams ModelParams::init(std::size_t num_items, const ModelConfig& config, Rng& rng) {
  if (config.embedding_dim == 0) throw ContractError("embedding_dim must be at least 1");
  if (num_items == 0) throw ContractError("cannot size embeddings for an empty vocabulary");
  const std::size_t d = config.embedding_dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  auto uniform = [&](std::size_t r, std::size_t c) {
    return Tensor::random_uniform(r, c, -bound, bound, rng, /*requires_grad=*/true);
  };
  ModelParams p;
  p.item_embeddings = uniform(num_items, d);
  p.position_table = uniform(config.max_len, d);
  p.fuse_weight = uniform(d, 2 * d);
  p.fuse_bias = uniform(1, d);
  p.attn_head = uniform(d, 1);
  p.attn_session = uniform(d, d);
  p.attn_item = uniform(d, d);
  p.attn_bias = uniform(1, d);
  return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
  return {
      {"item_embeddings", item_embeddings},
      {"position_table", position_table},
      {"fuse_weight", fuse_weight},
      {"fuse_bias", fuse_bias},
      {"attn_head", attn_head},
      {"attn_session", attn_session},
      {"attn_item", attn_item},
      {"attn_bias", attn_bias},
  };
}

std::vector<Tensor> ModelParams::trainable(const ModelConfig& config) const {
  std::vector<Tensor> out = {item_embeddings};
  if (config.use_position) {
    out.push_back(position_table);
    out.push_back(fuse_weight);
    out.push_back(fuse_bias);
  }
  if (config.use_attention) {
    out.push_back(attn_head);
    out.push_back(attn_session);
    out.push_back(attn_item);
    out.push_back(attn_bias);
  }
  return out;
}

Tensor position_fuse(Tape& tape, const Tensor& item_embs, const Tensor& position_table,
                     const Tensor& fuse_weight, const Tensor& fuse_bias) {
  const std::size_t m = item_embs.rows();
  if (m == 0) throw ContractError("position_fuse: empty session");
  if (m > position_table.rows())
    throw ContractError("position_fuse: session length " + std::to_string(m) +
                        " exceeds position table height " +
                        std::to_string(position_table.rows()));
  std::vector<std::size_t> reversed(m);
  for (std::size_t t = 0; t < m; ++t) reversed[t] = m - 1 - t;
  Tensor positions = tape.gather_rows(position_table, std::move(reversed));
  Tensor joined = tape.concat_cols(item_embs, positions);
  return tape.tanh(tape.add(tape.matmul(joined, tape.transpose(fuse_weight)), fuse_bias));
}

Tensor session_readout(Tape& tape, const Tensor& fused, const Tensor& attn_head,
                       const Tensor& attn_session, const Tensor& attn_item,
                       const Tensor& attn_bias) {
  Tensor session_mean = tape.mean_rows(fused);  // 1 x d
  Tensor gate = tape.sigmoid(
      tape.add(tape.add(tape.matmul(fused, tape.transpose(attn_item)),
                        tape.matmul(session_mean, tape.transpose(attn_session))),
               attn_bias));
  Tensor alpha = tape.matmul(gate, attn_head);          // m x 1
  return tape.matmul(tape.transpose(alpha), fused);     // 1 x d
}

Tensor item_representations(Tape& tape, const ModelParams& params, const ModelConfig& config,
                            const PropagationOperator& op) {
  return hypergraph_convolve(tape, op, params.item_embeddings, config.layers);
}

Tensor session_embeddings(Tape& tape, const ModelParams& params, const ModelConfig& config,
                          const Tensor& item_reprs, const Batch& batch) {
  if (batch.size == 0) throw ContractError("session_embeddings: empty batch");
  std::vector<Tensor> rows;
  rows.reserve(batch.size);
  for (std::size_t r = 0; r < batch.size; ++r) {
    if (batch.lengths[r] == 0)
      throw ContractError("session_embeddings: empty session row " + std::to_string(r));
    std::vector<std::size_t> indices(batch.lengths[r]);
    for (std::size_t c = 0; c < batch.lengths[r]; ++c)
      indices[c] = static_cast<std::size_t>(batch.items[r * batch.max_len + c]);
    Tensor items = tape.gather_rows(item_reprs, std::move(indices));
    Tensor fused = config.use_position
                       ? position_fuse(tape, items, params.position_table,
                                       params.fuse_weight, params.fuse_bias)
                       : items;
    Tensor pooled = config.use_attention
                        ? session_readout(tape, fused, params.attn_head, params.attn_session,
                                          params.attn_item, params.attn_bias)
                        : tape.mean_rows(fused);
    rows.push_back(pooled);
  }
  return tape.concat_rows(rows);
}

Scores score(Tape& tape, const Tensor& session_embs, const Tensor& item_reprs) {
  Scores s;
  s.logits = tape.matmul(session_embs, tape.transpose(item_reprs));
  s.probs = tape.softmax_rows(s.logits);
  return s;
}

Tensor rec_loss(Tape& tape, const Tensor& probs, const std::vector<std::size_t>& targets,
                LossForm form) {
  const std::size_t n = probs.rows();
  const std::size_t num_items = probs.cols();
  if (targets.size() != n)
    throw ContractError("rec_loss: " + std::to_string(targets.size()) + " targets for " +
                        std::to_string(n) + " rows");
  for (std::size_t t : targets)
    if (t >= num_items)
      throw ContractError("rec_loss: target " + std::to_string(t) + " outside " +
                          std::to_string(num_items) + " items");

  const double hi = 1.0 - kProbFloor;
  double total = 0.0;
  const double* pv = probs.values().data();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < num_items; ++i) {
      const double p = std::clamp(pv[r * num_items + i], kProbFloor, hi);
      if (i == targets[r])
        total -= std::log(p);
      else if (form == LossForm::all_item_bce)
        total -= std::log1p(-p);
    }
  }
  Tensor out = tape.alloc_output(1, 1, probs.requires_grad());
  out.values()[0] = total / static_cast<double>(n);

  if (out.requires_grad())
    tape.push_backward([probs, out, targets, form, n, num_items, hi]() {
      const auto* dout = Tape::grad_if_any(out);
      if (!dout) return;
      const double g = (*dout)[0] / static_cast<double>(n);
      double* dp = Tape::grad_buffer(probs).data();
      const double* pv = probs.values().data();
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < num_items; ++i) {
          const double p = pv[r * num_items + i];
          if (p < kProbFloor || p > hi) continue;  // clamped: flat region
          if (i == targets[r])
            dp[r * num_items + i] += g * (-1.0 / p);
          else if (form == LossForm::all_item_bce)
            dp[r * num_items + i] += g * (1.0 / (1.0 - p));
        }
      }
    });
  return out;
}

Tensor line_channel_init(Tape& tape, const Tensor& item_embeddings, const Batch& batch) {
  if (batch.size == 0) throw ContractError("line_channel_init: empty batch");
  std::vector<Tensor> rows;
  rows.reserve(batch.size);
  for (std::size_t r = 0; r < batch.size; ++r) {
    const auto& uniq = batch.unique_items_per_row[r];
    if (uniq.empty())
      throw ContractError("line_channel_init: session row " + std::to_string(r) +
                          " has no items");
    rows.push_back(tape.mean_rows(tape.gather_rows(item_embeddings, uniq)));
  }
  return tape.concat_rows(rows);
}

Tensor corrupt(Tape& tape, const Tensor& theta, std::uint64_t seed) {
  if (theta.rows() < 2)
    throw ContractError("corrupt: need at least 2 rows, got " + std::to_string(theta.rows()));
  Rng rng(seed);
  std::vector<std::size_t> row_perm = rng.permutation(theta.rows());
  std::vector<std::size_t> col_perm = rng.permutation(theta.cols());
  return tape.permute(theta, row_perm, col_perm);
}

namespace {

// mean over rows of -log sigmoid(pos) + the chosen negative-pair term, with
// the discriminator outputs clamped to +/-50 (flat gradient outside)
Tensor contrastive_from_dots(Tape& tape, const Tensor& pos, const Tensor& neg,
                             bool shifted_negative) {
  const std::size_t n = pos.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(pos.values()[i], -kLogitClamp, kLogitClamp);
    const double q = std::clamp(neg.values()[i], -kLogitClamp, kLogitClamp);
    total += softplus(-p);  // -log sigmoid(p)
    total += shifted_negative ? softplus(-(1.0 - q))  // -log sigmoid(1 - q)
                              : softplus(q);          // -log(1 - sigmoid(q))
  }
  Tensor out = tape.alloc_output(1, 1, pos.requires_grad() || neg.requires_grad());
  out.values()[0] = total / static_cast<double>(n);

  if (out.requires_grad())
    tape.push_backward([pos, neg, out, n, shifted_negative]() {
      const auto* dout = Tape::grad_if_any(out);
      if (!dout) return;
      const double g = (*dout)[0] / static_cast<double>(n);
      if (pos.requires_grad()) {
        double* dp = Tape::grad_buffer(pos).data();
        for (std::size_t i = 0; i < n; ++i) {
          const double p = pos.values()[i];
          if (std::fabs(p) > kLogitClamp) continue;
          dp[i] += g * -stable_sigmoid(-p);
        }
      }
      if (neg.requires_grad()) {
        double* dq = Tape::grad_buffer(neg).data();
        for (std::size_t i = 0; i < n; ++i) {
          const double q = neg.values()[i];
          if (std::fabs(q) > kLogitClamp) continue;
          dq[i] += g * stable_sigmoid(shifted_negative ? q - 1.0 : q);
        }
      }
    });
  return out;
}

Tensor ssl_loss_impl(Tape& tape, const Tensor& theta_h, const Tensor& theta_l,
                     const Tensor& corrupted, bool shifted_negative) {
  if (theta_h.rows() != theta_l.rows() || theta_h.cols() != theta_l.cols())
    throw ShapeError("ssl_loss: channel shapes differ (" +
                     shape_str(theta_h.rows(), theta_h.cols()) + " vs " +
                     shape_str(theta_l.rows(), theta_l.cols()) + ")");
  Tensor pos = tape.rowwise_dot(theta_h, theta_l);
  Tensor neg = tape.rowwise_dot(corrupted, theta_l);
  return contrastive_from_dots(tape, pos, neg, shifted_negative);
}

}  // namespace

Tensor ssl_loss(Tape& tape, const Tensor& theta_h, const Tensor& theta_l,
                std::uint64_t corrupt_seed, bool shifted_negative) {
  return ssl_loss_impl(tape, theta_h, theta_l, corrupt(tape, theta_h, corrupt_seed),
                       shifted_negative);
}

Tensor ssl_loss_with_permutations(Tape& tape, const Tensor& theta_h, const Tensor& theta_l,
                                  const std::vector<std::size_t>& row_perm,
                                  const std::vector<std::size_t>& col_perm,
                                  bool shifted_negative) {
  return ssl_loss_impl(tape, theta_h, theta_l, tape.permute(theta_h, row_perm, col_perm),
                       shifted_negative);
}

Tensor total_loss(Tape& tape, const Tensor& rec, const Tensor& ssl, double beta) {
  if (beta < 0.0) throw ContractError("total_loss: beta must be nonnegative");
  if (rec.rows() != 1 || rec.cols() != 1 || ssl.rows() != 1 || ssl.cols() != 1)
    throw ContractError("total_loss: both terms must be 1x1");
  return tape.add(rec, tape.scale(ssl, beta));
}

void ModelParams::save(const std::string& path, const ModelConfig& config) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  io::write_u64(out, num_items());
  io::write_u64(out, config.embedding_dim);
  io::write_u64(out, config.layers);
  io::write_u64(out, config.max_len);
  io::write_f64(out, config.beta);
  io::write_u8(out, config.use_position ? 1 : 0);
  io::write_u8(out, config.use_attention ? 1 : 0);
  io::write_u8(out, static_cast<std::uint8_t>(config.loss_form));
  io::write_u8(out, config.ssl_shifted_negative ? 1 : 0);

  const auto params = named();
  io::write_u64(out, params.size());
  for (const auto& [name, tensor] : params) {
    io::write_string(out, name);
    io::write_u64(out, tensor.rows());
    io::write_u64(out, tensor.cols());
    for (double v : tensor.values()) io::write_f64(out, v);
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

std::pair<ModelParams, ModelConfig> ModelParams::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  io::expect_magic(in, kCheckpointMagic, path);

  const std::uint64_t num_items = io::read_u64(in, path);
  ModelConfig config;
  config.embedding_dim = io::read_u64(in, path);
  config.layers = io::read_u64(in, path);
  config.max_len = io::read_u64(in, path);
  config.beta = io::read_f64(in, path);
  config.use_position = io::read_u8(in, path) != 0;
  config.use_attention = io::read_u8(in, path) != 0;
  config.loss_form = static_cast<LossForm>(io::read_u8(in, path));
  config.ssl_shifted_negative = io::read_u8(in, path) != 0;

  std::map<std::string, Tensor> blocks;
  const std::uint64_t count = io::read_u64(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = io::read_string(in, path);
    const std::uint64_t rows = io::read_u64(in, path);
    const std::uint64_t cols = io::read_u64(in, path);
    std::vector<double> values(rows * cols);
    for (double& v : values) v = io::read_f64(in, path);
    blocks.emplace(name,
                   Tensor::from_values(rows, cols, std::move(values), /*requires_grad=*/true));
  }

  ModelParams p;
  const std::size_t d = config.embedding_dim;
  auto take = [&](const char* name, std::size_t rows, std::size_t cols) {
    auto it = blocks.find(name);
    if (it == blocks.end())
      throw IoError(path + ": checkpoint is missing parameter '" + name + "'");
    if (it->second.rows() != rows || it->second.cols() != cols)
      throw IoError(path + ": parameter '" + name + "' is " +
                    shape_str(it->second.rows(), it->second.cols()) + ", expected " +
                    shape_str(rows, cols));
    return it->second;
  };
  p.item_embeddings = take("item_embeddings", num_items, d);
  p.position_table = take("position_table", config.max_len, d);
  p.fuse_weight = take("fuse_weight", d, 2 * d);
  p.fuse_bias = take("fuse_bias", 1, d);
  p.attn_head = take("attn_head", d, 1);
  p.attn_session = take("attn_session", d, d);
  p.attn_item = take("attn_item", d, d);
  p.attn_bias = take("attn_bias", 1, d);
  if (count != 8)
    throw IoError(path + ": unexpected parameter count " + std::to_string(count));
  return {std::move(p), config};
}

}  // namespace dhcn
