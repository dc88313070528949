#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <vector>

#include "dhcn/common.hpp"
#include "dhcn/hypergraph.hpp"
#include "dhcn/rng.hpp"
#include "dhcn/sparse.hpp"
#include "dhcn/tensor.hpp"
#include "doctest.h"
#include "fd_check.hpp"

using namespace dhcn;
using dhcn::testing::fd_check;

namespace {

// Brute-force propagation entries straight from the elementwise definition:
// P_ij = (1/D_ii) * sum_e H_ie * W_e * (1/B_e) * H_je, zero when D_ii = 0.
std::vector<double> brute_force_propagation(const Hypergraph& hg) {
  const std::size_t n = hg.incidence.rows;
  const std::size_t m = hg.incidence.cols;
  std::vector<double> h = hg.incidence.densify();
  std::vector<double> p(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (hg.vertex_degrees[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t e = 0; e < m; ++e)
        acc += h[i * m + e] * hg.edge_weights[e] * (1.0 / hg.edge_degrees[e]) * h[j * m + e];
      p[i * n + j] = acc / hg.vertex_degrees[i];
    }
  }
  return p;
}

std::vector<std::vector<std::size_t>> random_sessions(std::size_t count, std::size_t num_items,
                                                      Rng& rng) {
  std::vector<std::vector<std::size_t>> sessions(count);
  for (auto& s : sessions) {
    const std::size_t len = 2 + rng.below(4);
    for (std::size_t k = 0; k < len; ++k) s.push_back(rng.below(num_items));
    if (s[0] == s[1] && s.size() == 2) s[1] = (s[1] + 1) % num_items;  // ensure 2 distinct
  }
  return sessions;
}

}  // namespace

TEST_CASE("build_incidence composes columns from distinct session items") {
  Hypergraph hg = build_incidence({{0, 1}, {1, 2}}, 3);
  CHECK(hg.sessions_skipped == 0);
  std::vector<double> h = hg.incidence.densify();
  CHECK(h == std::vector<double>{1, 0, 1, 1, 0, 1});  // [[1,0],[1,1],[0,1]]
  CHECK(hg.vertex_degrees == std::vector<double>{1, 2, 1});
  CHECK(hg.edge_degrees == std::vector<double>{2, 2});
  CHECK(hg.edge_weights == std::vector<double>{1.0, 1.0});

  // duplicates collapse: [2,2,5] is the set {2,5}
  Hypergraph dup = build_incidence({{2, 2, 5}, {0, 5}}, 6);
  CHECK(dup.edge_degrees[0] == 2.0);
  std::vector<double> hd = dup.incidence.densify();
  CHECK(hd[2 * 2 + 0] == 1.0);
  CHECK(hd[5 * 2 + 0] == 1.0);
  CHECK(hd[0 * 2 + 0] == 0.0);

  // order within a session is irrelevant: identical column either way
  Hypergraph fwd = build_incidence({{2, 5}}, 6);
  Hypergraph rev = build_incidence({{5, 2}}, 6);
  CHECK(fwd.incidence.densify() == rev.incidence.densify());

  // single-distinct-item sessions are skipped with a count
  Hypergraph skip = build_incidence({{3, 3, 3}, {0, 1}}, 4);
  CHECK(skip.sessions_skipped == 1);
  CHECK(skip.incidence.cols == 1);

  CHECK_THROWS_AS(build_incidence({{0}, {1, 1}}, 2), DataError);
  CHECK_THROWS_AS(build_incidence({{0, 7}}, 3), ContractError);
}

TEST_CASE("propagation_operator frozen values") {
  Hypergraph hg = build_incidence({{0, 1}, {1, 2}}, 3);
  PropagationOperator op = propagation_operator(hg);
  op.matrix.validate();
  CHECK(op.zero_degree_items == 0);
  std::vector<double> p = op.matrix.densify();
  const std::vector<double> expected = {0.5, 0.5, 0.0, 0.25, 0.5, 0.25, 0.0, 0.5, 0.5};
  REQUIRE(p.size() == expected.size());
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == doctest::Approx(expected[i]));

  // one session: uniform mixing inside the edge
  PropagationOperator single = propagation_operator(build_incidence({{0, 1}}, 2));
  std::vector<double> ps = single.matrix.densify();
  for (double v : ps) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("propagation matches the elementwise double sum on random instances") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + rng.below(6);  // up to 8 items
    const std::size_t m = 1 + rng.below(4);  // up to 4 sessions
    Hypergraph hg = build_incidence(random_sessions(m, n, rng), n);
    PropagationOperator op = propagation_operator(hg);
    std::vector<double> got = op.matrix.densify();
    std::vector<double> want = brute_force_propagation(hg);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
  }
}

TEST_CASE("propagation rows are stochastic or zero") {
  Rng rng(47);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 4 + rng.below(5);
    Hypergraph hg = build_incidence(random_sessions(3, n, rng), n);
    PropagationOperator op = propagation_operator(hg);
    std::vector<double> sums = op.matrix.row_sums();
    std::size_t zero_rows = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (hg.vertex_degrees[i] > 0.0) {
        CHECK(sums[i] == doctest::Approx(1.0).epsilon(1e-9));
      } else {
        CHECK(sums[i] == 0.0);
        ++zero_rows;
      }
    }
    CHECK(zero_rows == op.zero_degree_items);
    for (double v : op.matrix.vals) CHECK(v >= 0.0);
  }
}

TEST_CASE("hypergraph_convolve layer math") {
  Hypergraph hg = build_incidence({{0, 1}, {1, 2}}, 3);
  PropagationOperator op = propagation_operator(hg);
  Tape tape;

  // zero layers: the input comes back untouched
  Rng rng(3);
  Tensor x0 = Tensor::random_uniform(3, 4, -1.0, 1.0, rng);
  Tensor same = hypergraph_convolve(tape, op, x0, 0);
  CHECK(same.same_storage(x0));

  // identity start, one layer: average of I and P
  Tensor eye = Tensor::identity(3);
  Tensor one = hypergraph_convolve(tape, op, eye, 1);
  std::vector<double> p = op.matrix.densify();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const double want = ((i == j ? 1.0 : 0.0) + p[i * 3 + j]) / 2.0;
      CHECK(one(i, j) == doctest::Approx(want).epsilon(1e-12));
    }

  CHECK_THROWS_AS(hypergraph_convolve(tape, op, Tensor(4, 2, 0.0), 1), ShapeError);
}

TEST_CASE("each layer equals the double-sum recurrence on a random instance") {
  Rng rng(59);
  Hypergraph hg = build_incidence(random_sessions(3, 5, rng), 5);
  PropagationOperator op = propagation_operator(hg);
  std::vector<double> p = brute_force_propagation(hg);

  const std::size_t d = 3, layers = 3;
  Tensor x0 = Tensor::random_uniform(5, d, -1.0, 1.0, rng);

  // lockstep: evolve a dense copy by the double-sum matrix, layer by layer
  std::vector<double> cur = x0.values();
  std::vector<double> acc = cur;
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<double> next(5 * d, 0.0);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        for (std::size_t f = 0; f < d; ++f) next[i * d + f] += p[i * 5 + j] * cur[j * d + f];
    cur = next;
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += cur[i];
  }
  for (auto& v : acc) v /= static_cast<double>(layers + 1);

  Tape tape;
  Tensor got = hypergraph_convolve(tape, op, x0, layers);
  for (std::size_t i = 0; i < acc.size(); ++i)
    CHECK(got.values()[i] == doctest::Approx(acc[i]).epsilon(1e-10));
}

TEST_CASE("degree-0 items keep a scaled copy of their start embedding") {
  // item 3 appears in no usable session
  Hypergraph hg = build_incidence({{0, 1}, {1, 2}, {3}}, 4);
  CHECK(hg.sessions_skipped == 1);
  PropagationOperator op = propagation_operator(hg);
  CHECK(op.zero_degree_items == 1);

  Rng rng(8);
  Tensor x0 = Tensor::random_uniform(4, 3, -1.0, 1.0, rng);
  Tape tape;
  Tensor out = hypergraph_convolve(tape, op, x0, 2);
  for (std::size_t f = 0; f < 3; ++f)
    CHECK(out(3, f) == doctest::Approx(x0(3, f) / 3.0).epsilon(1e-12));
}

TEST_CASE("convolution outputs are insensitive to item order within sessions") {
  Rng rng(12);
  std::vector<std::vector<std::size_t>> sessions = {{0, 1, 2}, {2, 3}, {1, 3, 4}};
  std::vector<std::vector<std::size_t>> permuted = {{2, 0, 1}, {3, 2}, {4, 1, 3}};

  PropagationOperator a = propagation_operator(build_incidence(sessions, 5));
  PropagationOperator b = propagation_operator(build_incidence(permuted, 5));
  CHECK(a.matrix.densify() == b.matrix.densify());  // bit-identical

  Tensor x0 = Tensor::random_uniform(5, 3, -1.0, 1.0, rng);
  Tape tape;
  Tensor ca = hypergraph_convolve(tape, a, x0, 2);
  Tensor cb = hypergraph_convolve(tape, b, x0, 2);
  CHECK(ca.values() == cb.values());

  CHECK(build_line_graph(sessions).adjacency.densify() ==
        build_line_graph(permuted).adjacency.densify());
}

TEST_CASE("constant vector is preserved on positive-degree rows") {
  Rng rng(21);
  Hypergraph hg = build_incidence(random_sessions(4, 6, rng), 6);
  PropagationOperator op = propagation_operator(hg);
  Tape tape;
  Tensor ones(6, 1, 1.0);
  Tensor out = tape.sparse_matmul(op.matrix, ones);
  for (std::size_t i = 0; i < 6; ++i) {
    const double want = hg.vertex_degrees[i] > 0.0 ? 1.0 : 0.0;
    CHECK(out(i, 0) == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("build_line_graph computes Jaccard overlaps") {
  LineGraph lg = build_line_graph({{1, 2}, {2, 3}});
  std::vector<double> a = lg.adjacency.densify();
  CHECK(a[0] == 1.0);
  CHECK(a[1] == doctest::Approx(1.0 / 3.0));
  CHECK(a[2] == doctest::Approx(1.0 / 3.0));
  CHECK(a[3] == 1.0);
  CHECK(lg.degrees[0] == doctest::Approx(4.0 / 3.0));

  // disjoint batch: just self-loops
  LineGraph disjoint = build_line_graph({{0, 1}, {2, 3}, {4}});
  CHECK(disjoint.adjacency.densify() == SparseMatrix::identity(3).densify());

  // identical sessions: full overlap
  LineGraph same = build_line_graph({{5, 6}, {6, 5, 6}});
  CHECK(same.adjacency.densify() == std::vector<double>{1, 1, 1, 1});

  CHECK_THROWS_AS(build_line_graph({}), ContractError);
}

TEST_CASE("line graph is symmetric with unit diagonal and matches a set oracle") {
  Rng rng(66);
  std::vector<std::vector<std::size_t>> sessions;
  for (int i = 0; i < 12; ++i) {
    std::vector<std::size_t> s;
    const std::size_t len = 1 + rng.below(5);
    for (std::size_t k = 0; k < len; ++k) s.push_back(rng.below(9));
    sessions.push_back(std::move(s));
  }
  LineGraph lg = build_line_graph(sessions);
  lg.adjacency.validate();
  std::vector<double> a = lg.adjacency.densify();
  const std::size_t n = sessions.size();

  // independent oracle over std::includes-style set ops
  std::vector<std::vector<std::size_t>> sets = sessions;
  for (auto& s : sets) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      CHECK(a[p * n + q] == a[q * n + p]);  // exact symmetry
      if (p == q) {
        CHECK(a[p * n + q] == 1.0);
        continue;
      }
      std::vector<std::size_t> inter, uni;
      std::set_intersection(sets[p].begin(), sets[p].end(), sets[q].begin(), sets[q].end(),
                            std::back_inserter(inter));
      std::set_union(sets[p].begin(), sets[p].end(), sets[q].begin(), sets[q].end(),
                     std::back_inserter(uni));
      const double want =
          inter.empty() ? 0.0
                        : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
      CHECK(a[p * n + q] == doctest::Approx(want).epsilon(1e-12));
      CHECK(a[p * n + q] >= 0.0);
      CHECK(a[p * n + q] <= 1.0);
      if (!inter.empty()) CHECK(a[p * n + q] > 0.0);
    }
  }
}

TEST_CASE("line_convolve normalizes by degree and averages layers") {
  Tape tape;
  Rng rng(9);

  // disjoint batch: identity propagation leaves theta untouched for any L
  LineGraph disjoint = build_line_graph({{0}, {1}, {2}});
  Tensor theta = Tensor::random_uniform(3, 4, -1.0, 1.0, rng);
  Tensor out = line_convolve(tape, disjoint, theta, 3);
  for (std::size_t i = 0; i < theta.size(); ++i)
    CHECK(out.values()[i] == doctest::Approx(theta.values()[i]).epsilon(1e-12));

  // two overlapping sessions: normalized step is [[0.75,0.25],[0.25,0.75]]
  LineGraph pair = build_line_graph({{1, 2}, {2, 3}});
  std::vector<double> norm_step = pair.propagation.densify();
  CHECK(norm_step[0] == doctest::Approx(0.75));
  CHECK(norm_step[1] == doctest::Approx(0.25));
  CHECK(norm_step[2] == doctest::Approx(0.25));
  CHECK(norm_step[3] == doctest::Approx(0.75));
  // stored propagation equals an independent rescale of the adjacency
  std::vector<double> inv = {1.0 / pair.degrees[0], 1.0 / pair.degrees[1]};
  CHECK(pair.adjacency.scaled_rows(inv).densify() == norm_step);

  // row-stochastic fixed point: constant rows stay constant
  Tensor constant(2, 3, 0.0);
  for (std::size_t j = 0; j < 3; ++j) {
    constant(0, j) = 1.5;
    constant(1, j) = 1.5;
  }
  Tensor fixed = line_convolve(tape, pair, constant, 4);
  for (double v : fixed.values()) CHECK(v == doctest::Approx(1.5).epsilon(1e-9));

  CHECK_THROWS_AS(line_convolve(tape, pair, Tensor(3, 2, 0.0), 1), ShapeError);
}

TEST_CASE("both convolutions are differentiable in their start embeddings") {
  Rng rng(71);
  Hypergraph hg = build_incidence(random_sessions(3, 5, rng), 5);
  PropagationOperator op = propagation_operator(hg);
  Tensor x0 = Tensor::random_uniform(5, 3, -0.8, 0.8, rng, true);
  fd_check({x0}, [&](Tape& t) {
    Tensor x = hypergraph_convolve(t, op, x0, 2);
    return t.sum(t.mul(x, x));
  });

  LineGraph lg = build_line_graph({{0, 1}, {1, 2}, {4, 5}});
  Tensor theta = Tensor::random_uniform(3, 3, -0.8, 0.8, rng, true);
  fd_check({theta}, [&](Tape& t) {
    Tensor th = line_convolve(t, lg, theta, 2);
    return t.sum(t.mul(th, th));
  });
}
