#include "dhcn/selfcheck.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "dhcn/data.hpp"
#include "dhcn/evaluation.hpp"
#include "dhcn/hypergraph.hpp"
#include "dhcn/model.hpp"
#include "dhcn/rng.hpp"
#include "dhcn/sparse.hpp"
#include "dhcn/tensor.hpp"
#include "dhcn/training.hpp"

namespace dhcn {

namespace {

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buffer[128];
  std::snprintf(buffer, sizeof(buffer), pattern, a, b);
  return buffer;
}

/// Central-difference comparison of every parameter gradient. Returns an
/// empty string on agreement, else a description of the worst offender.
/// grad_skew corrupts the first analytic entry to let tests force a failure.
std::string fd_mismatch(const std::vector<Tensor>& params,
                        const std::function<Tensor(Tape&)>& forward, double grad_skew) {
  for (Tensor p : params) p.zero_grad();
  Tape tape;
  Tensor loss = forward(tape);
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  for (const Tensor& p : params)
    analytic.push_back(p.has_grad() ? p.grad() : std::vector<double>(p.size(), 0.0));
  if (!analytic.empty() && !analytic[0].empty()) analytic[0][0] += grad_skew;

  const double h = 1e-5;
  double worst = 0.0;
  std::string where;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.values()[i];
      p.values()[i] = saved + h;
      Tape plus(false);
      const double f_plus = forward(plus).item();
      p.values()[i] = saved - h;
      Tape minus(false);
      const double f_minus = forward(minus).item();
      p.values()[i] = saved;

      const double fd = (f_plus - f_minus) / (2.0 * h);
      const double ad = analytic[pi][i];
      const double rel = std::fabs(fd - ad) / std::max({std::fabs(fd), std::fabs(ad), 1e-4});
      if (rel > worst) {
        worst = rel;
        where = "parameter " + std::to_string(pi) + " entry " + std::to_string(i) +
                fmt(": fd %.6g vs analytic %.6g", fd, ad);
      }
    }
  }
  if (worst > 1e-4) return where + fmt(" (relative error %.3g)", worst);
  return "";
}

CheckResult check_composite_gradients(double grad_skew) {
  CheckResult result{"tensor-core", "composite op gradients match finite differences", false, ""};
  Rng rng(211);
  Tensor a = Tensor::random_uniform(2, 3, -0.8, 0.8, rng, true);
  Tensor b = Tensor::random_uniform(3, 2, -0.8, 0.8, rng, true);
  Tensor c = Tensor::random_uniform(1, 2, -0.8, 0.8, rng, true);
  const std::string mismatch = fd_mismatch({a, b, c}, [&](Tape& tape) {
    Tensor hidden = tape.tanh(tape.add(tape.matmul(a, b), c));
    return tape.sum(tape.mul(tape.softmax_rows(hidden), hidden));
  }, grad_skew);
  result.passed = mismatch.empty();
  result.detail = mismatch;
  return result;
}

CheckResult check_joint_gradients(double grad_skew) {
  CheckResult result{"model", "joint loss gradients match finite differences", false, ""};
  ModelConfig config;
  config.embedding_dim = 4;
  config.layers = 1;
  config.beta = 0.02;
  config.max_len = 5;
  Rng rng(7);
  ModelParams params = ModelParams::init(6, config, rng);

  const std::vector<std::vector<std::size_t>> sessions = {{0, 1, 2}, {2, 3, 4}, {4, 5, 0}};
  Hypergraph hg = build_incidence(sessions, 6);
  PropagationOperator op = propagation_operator(hg);
  std::vector<LabeledSequence> seqs = {{{0, 1}, 2}, {{2, 3}, 4}, {{4, 5}, 0}};
  std::vector<Batch> batches = make_batches(seqs, 3, false, 0);
  const Batch& batch = batches[0];
  LineGraph lg = build_line_graph({{0, 1}, {2, 3}, {4, 5}});
  const std::vector<std::size_t> rp = {2, 0, 1};
  const std::vector<std::size_t> cp = {1, 3, 0, 2};

  auto forward = [&](Tape& tape) {
    Tensor x_h = item_representations(tape, params, config, op);
    Tensor theta_h = session_embeddings(tape, params, config, x_h, batch);
    Scores s = score(tape, theta_h, x_h);
    Tensor rec = rec_loss(tape, s.probs, batch.targets, config.loss_form);
    Tensor theta_l = line_convolve(
        tape, lg, line_channel_init(tape, params.item_embeddings, batch), config.layers);
    Tensor ssl = ssl_loss_with_permutations(tape, theta_h, theta_l, rp, cp);
    return total_loss(tape, rec, ssl, config.beta);
  };
  const std::string mismatch = fd_mismatch(
      {params.item_embeddings, params.position_table, params.fuse_weight, params.fuse_bias,
       params.attn_head, params.attn_session, params.attn_item, params.attn_bias},
      forward, grad_skew);
  result.passed = mismatch.empty();
  result.detail = mismatch;
  return result;
}

std::vector<std::vector<std::size_t>> random_corpus(Rng& rng, std::size_t num_items) {
  std::vector<std::vector<std::size_t>> sessions(2 + rng.below(4));
  for (auto& s : sessions) {
    const std::size_t len = 2 + rng.below(4);
    for (std::size_t k = 0; k < len; ++k) s.push_back(rng.below(num_items));
    if (s.size() == 2 && s[0] == s[1]) s[1] = (s[1] + 1) % num_items;
  }
  return sessions;
}

CheckResult check_propagation_oracle() {
  CheckResult result{"hypergraph", "matrix propagation equals the elementwise double sum",
                     false, ""};
  Rng rng(331);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4 + rng.below(5);
    Hypergraph hg = build_incidence(random_corpus(rng, n), n);
    PropagationOperator op = propagation_operator(hg);
    const std::size_t d = 1 + rng.below(5);
    Tensor x = Tensor::random_uniform(n, d, -1, 1, rng);

    Tape tape(false);
    Tensor matrix_form = tape.sparse_matmul(op.matrix, x);

    // Elementwise: out[i][f] = (1/D_i) sum_e sum_j H_ie W_e (1/B_e) H_je x[j][f]
    std::vector<double> h = hg.incidence.densify();
    const std::size_t m = hg.incidence.cols;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t f = 0; f < d; ++f) {
        double acc = 0.0;
        for (std::size_t e = 0; e < m; ++e) {
          if (h[i * m + e] == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j)
            acc += hg.edge_weights[e] * (1.0 / hg.edge_degrees[e]) * h[j * m + e] * x(j, f);
        }
        if (hg.vertex_degrees[i] > 0.0) acc /= hg.vertex_degrees[i];
        worst = std::max(worst, std::fabs(acc - matrix_form(i, f)));
      }
    }
  }
  result.passed = worst <= 1e-10;
  result.detail = fmt("largest deviation %.3g over 20 corpora", worst);
  return result;
}

CheckResult check_row_stochasticity() {
  CheckResult result{"hypergraph", "propagation rows sum to one on both channels", false, ""};
  Rng rng(412);
  double worst = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 4 + rng.below(6);
    auto sessions = random_corpus(rng, n);
    Hypergraph hg = build_incidence(sessions, n);
    PropagationOperator op = propagation_operator(hg);
    std::vector<double> sums = op.matrix.row_sums();
    for (std::size_t i = 0; i < n; ++i) {
      const double target = hg.vertex_degrees[i] > 0.0 ? 1.0 : 0.0;
      worst = std::max(worst, std::fabs(sums[i] - target));
    }
    // Line-graph side: every session node keeps a self-loop, so every row
    // must sum to exactly one after degree normalization.
    LineGraph lg = build_line_graph(sessions);
    for (double sum : lg.propagation.row_sums())
      worst = std::max(worst, std::fabs(sum - 1.0));
  }
  result.passed = worst <= 1e-9;
  result.detail = fmt("largest row-sum deviation %.3g over 25 corpora", worst);
  return result;
}

CheckResult check_overfit_smoke() {
  CheckResult result{"training", "model memorizes a deterministic toy corpus", false, ""};
  ProcessedDataset ds;
  for (int i = 0; i < 8; ++i) ds.vocab.add("item" + std::to_string(i));
  ds.max_session_len = 10;
  for (std::size_t i = 0; i + 2 < 8; ++i) {
    ds.train_sessions.push_back({i, i + 1, i + 2});
    ds.train_sequences.push_back({{i}, i + 1});
    ds.train_sequences.push_back({{i, i + 1}, i + 2});
  }
  ds.test_sequences = {{{0, 1}, 2}};

  ModelConfig mc;
  mc.embedding_dim = 16;
  mc.layers = 1;
  mc.beta = 0.01;
  mc.max_len = 10;
  TrainConfig tc;
  tc.epochs = 200;
  tc.lr = 0.01;
  tc.eval_each_epoch = false;
  Rng rng(7);
  ModelParams params = ModelParams::init(ds.vocab.size(), mc, rng);
  TrainResult trained = train(params, mc, tc, ds);

  Hypergraph hg = build_incidence(ds.train_sessions, ds.vocab.size());
  PropagationOperator op = propagation_operator(hg);
  Tape scratch(false);
  Tensor x_h = item_representations(scratch, params, mc, op);
  MetricsReport report = evaluate(params, mc, x_h, ds.train_sequences, {1});

  const double p1 = report.precision[0];
  const double final_rec = trained.log.back().mean_rec_loss;
  result.passed = p1 >= 0.9 && final_rec < 0.1;
  result.detail = fmt("training P@1 %.4f, final mean rec loss %.4f", p1, final_rec);
  return result;
}

}  // namespace

std::vector<CheckResult> run_selfchecks(double grad_skew) {
  std::vector<CheckResult> results;
  results.push_back(check_composite_gradients(grad_skew));
  results.push_back(check_joint_gradients(grad_skew));
  results.push_back(check_propagation_oracle());
  results.push_back(check_row_stochasticity());
  results.push_back(check_overfit_smoke());
  return results;
}

std::string format_check_results(const std::vector<CheckResult>& results) {
  std::ostringstream out;
  std::size_t passed = 0;
  for (const CheckResult& r : results) {
    out << (r.passed ? "[PASS] " : "[FAIL] ") << r.module << ": " << r.invariant;
    if (!r.detail.empty()) out << " - " << r.detail;
    out << "\n";
    if (r.passed) ++passed;
  }
  out << "selfcheck: " << passed << "/" << results.size() << " passed\n";
  return out.str();
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const CheckResult& r : results)
    if (!r.passed) return false;
  return true;
}

}  // namespace dhcn
