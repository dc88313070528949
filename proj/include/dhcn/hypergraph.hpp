#pragma once

#include <cstddef>
#include <vector>

#include "dhcn/sparse.hpp"
#include "dhcn/tensor.hpp"

namespace dhcn {

/// Item-session incidence structure: items are vertices, each kept session
/// is one hyperedge over its distinct items.
struct Hypergraph {
  SparseMatrix incidence;              // N x M, entries in {0,1}
  std::vector<double> edge_weights;    // length M, all 1.0
  std::vector<double> vertex_degrees;  // length N: weighted edge memberships
  std::vector<double> edge_degrees;    // length M: distinct items in the edge
  std::size_t sessions_skipped = 0;    // had fewer than 2 distinct items
};

/// Builds the global hypergraph over training sessions. Duplicate items in a
/// session collapse to one incidence entry; sessions with fewer than two
/// distinct items contribute no edge and are counted in sessions_skipped.
/// Raises DataError when no session qualifies.
Hypergraph build_incidence(const std::vector<std::vector<std::size_t>>& train_sessions,
                           std::size_t num_items);

/// Row-normalized two-step random walk over the hypergraph.
struct PropagationOperator {
  SparseMatrix matrix;  // N x N; positive-degree rows sum to 1, others are zero
  std::size_t zero_degree_items = 0;
};

PropagationOperator propagation_operator(const Hypergraph& hg);

/// Runs `layers` propagation steps from x0 and returns the average of all
/// layer outputs including layer 0. Differentiable with respect to x0.
Tensor hypergraph_convolve(Tape& tape, const PropagationOperator& op, const Tensor& x0,
                           std::size_t layers);

/// Session-to-session graph over one mini-batch: edge weight is the Jaccard
/// overlap of the sessions' item sets, plus unit self-loops.
struct LineGraph {
  SparseMatrix adjacency;       // n x n, symmetric, diagonal = 1
  std::vector<double> degrees;  // row sums of adjacency, always >= 1
  SparseMatrix propagation;     // adjacency with each row divided by its degree
};

LineGraph build_line_graph(const std::vector<std::vector<std::size_t>>& batch_sessions);

/// Runs `layers` degree-normalized propagation steps from theta0 and returns
/// the average of all layer outputs including layer 0.
Tensor line_convolve(Tape& tape, const LineGraph& lg, const Tensor& theta0,
                     std::size_t layers);

}  // namespace dhcn
