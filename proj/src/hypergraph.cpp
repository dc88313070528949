#include "dhcn/hypergraph.hpp"

#include <algorithm>

#include "dhcn/common.hpp"

namespace dhcn {

Hypergraph build_incidence(const std::vector<std::vector<std::size_t>>& train_sessions,
                           std::size_t num_items) {
  std::vector<SparseMatrix::Triplet> entries;
  std::size_t edge = 0;
  std::size_t skipped = 0;
  std::vector<double> edge_degrees;
  for (const auto& session : train_sessions) {
    std::vector<std::size_t> distinct = session;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (!distinct.empty() && distinct.back() >= num_items)
      throw ContractError("build_incidence: item index " + std::to_string(distinct.back()) +
                          " outside vocabulary of " + std::to_string(num_items));
    if (distinct.size() < 2) {
      ++skipped;
      continue;
    }
    for (std::size_t item : distinct) entries.push_back({item, edge, 1.0});
    edge_degrees.push_back(static_cast<double>(distinct.size()));
    ++edge;
  }
  if (edge == 0) throw DataError("no session has 2 or more distinct items");

  Hypergraph hg;
  hg.incidence = SparseMatrix::from_triplets(num_items, edge, std::move(entries));
  hg.edge_weights.assign(edge, 1.0);
  hg.edge_degrees = std::move(edge_degrees);
  hg.vertex_degrees.assign(num_items, 0.0);
  for (std::size_t i = 0; i < num_items; ++i)
    for (std::size_t k = hg.incidence.row_ptr[i]; k < hg.incidence.row_ptr[i + 1]; ++k)
      hg.vertex_degrees[i] += hg.edge_weights[hg.incidence.col_idx[k]];
  hg.sessions_skipped = skipped;
  return hg;
}

PropagationOperator propagation_operator(const Hypergraph& hg) {
  const std::size_t n = hg.incidence.rows;
  const std::size_t m = hg.incidence.cols;

  std::vector<double> inv_vertex(n, 0.0);
  std::size_t zero_degree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (hg.vertex_degrees[i] > 0.0)
      inv_vertex[i] = 1.0 / hg.vertex_degrees[i];
    else
      ++zero_degree;
  }
  std::vector<double> weight_over_edge(m);
  for (std::size_t e = 0; e < m; ++e)
    weight_over_edge[e] = hg.edge_weights[e] / hg.edge_degrees[e];

  SparseMatrix left = hg.incidence.scaled_rows(inv_vertex);
  SparseMatrix right = hg.incidence.transposed().scaled_rows(weight_over_edge);

  PropagationOperator op;
  op.matrix = spgemm(left, right);
  op.zero_degree_items = zero_degree;
  return op;
}

namespace {

// shared layer-averaging walk for both channels
Tensor averaged_propagation(Tape& tape, const SparseMatrix& step, const Tensor& x0,
                            std::size_t layers) {
  if (step.cols != x0.rows())
    throw ShapeError("propagation: operator " + shape_str(step.rows, step.cols) +
                     " does not match embeddings " + shape_str(x0.rows(), x0.cols()));
  if (layers == 0) return x0;
  Tensor acc = x0;
  Tensor cur = x0;
  for (std::size_t l = 0; l < layers; ++l) {
    cur = tape.sparse_matmul(step, cur);
    acc = tape.add(acc, cur);
  }
  return tape.scale(acc, 1.0 / static_cast<double>(layers + 1));
}

}  // namespace

Tensor hypergraph_convolve(Tape& tape, const PropagationOperator& op, const Tensor& x0,
                           std::size_t layers) {
  return averaged_propagation(tape, op.matrix, x0, layers);
}

LineGraph build_line_graph(const std::vector<std::vector<std::size_t>>& batch_sessions) {
  const std::size_t n = batch_sessions.size();
  if (n == 0) throw ContractError("build_line_graph: empty batch");

  std::vector<std::vector<std::size_t>> sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    sets[i] = batch_sessions[i];
    std::sort(sets[i].begin(), sets[i].end());
    sets[i].erase(std::unique(sets[i].begin(), sets[i].end()), sets[i].end());
    if (sets[i].empty()) throw ContractError("build_line_graph: empty session set");
  }

  std::vector<SparseMatrix::Triplet> entries;
  for (std::size_t i = 0; i < n; ++i) entries.push_back({i, i, 1.0});
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      std::size_t common = 0;
      auto a = sets[p].begin();
      auto b = sets[q].begin();
      while (a != sets[p].end() && b != sets[q].end()) {
        if (*a < *b)
          ++a;
        else if (*b < *a)
          ++b;
        else {
          ++common;
          ++a;
          ++b;
        }
      }
      if (common == 0) continue;
      const std::size_t unions = sets[p].size() + sets[q].size() - common;
      const double w = static_cast<double>(common) / static_cast<double>(unions);
      entries.push_back({p, q, w});
      entries.push_back({q, p, w});
    }
  }

  LineGraph lg;
  lg.adjacency = SparseMatrix::from_triplets(n, n, std::move(entries));
  lg.degrees = lg.adjacency.row_sums();
  std::vector<double> inv(n);
  for (std::size_t i = 0; i < n; ++i) inv[i] = 1.0 / lg.degrees[i];
  lg.propagation = lg.adjacency.scaled_rows(inv);
  return lg;
}

Tensor line_convolve(Tape& tape, const LineGraph& lg, const Tensor& theta0,
                     std::size_t layers) {
  return averaged_propagation(tape, lg.propagation, theta0, layers);
}

}  // namespace dhcn
