#pragma once

#include <numeric>
#include <vector>

#include "graphssm/graphssm.hpp"

namespace graphssm::testing {

/// Random sequence with V nodes, L snapshots, D features and varying edges.
inline SnapshotSequence random_sequence(std::size_t nodes, std::size_t steps, Eigen::Index dim, Rng& rng,
                                        double p = 0.4) {
  std::vector<Snapshot> snaps;
  for (std::size_t l = 0; l < steps; ++l) {
    snaps.push_back(Snapshot{verify::random_graph(nodes, p, rng),
                             rng.normal_matrix(static_cast<Eigen::Index>(nodes), dim),
                             static_cast<double>(l + 1)});
  }
  return SnapshotSequence(std::move(snaps));
}

/// perm[i] is the new id of node i.
inline std::vector<NodeId> random_permutation(std::size_t n, Rng& rng) {
  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  return perm;
}

inline Matrix permute_rows(const Matrix& m, const std::vector<NodeId>& perm) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.row(perm[static_cast<std::size_t>(i)]) = m.row(i);
  return out;
}

inline Graph permute_graph(const Graph& g, const std::vector<NodeId>& perm) {
  std::vector<Edge> edges;
  for (const Edge& e : g.edges()) edges.emplace_back(perm[e.u], perm[e.v]);
  return Graph(g.num_nodes(), std::move(edges));
}

inline SnapshotSequence permute_sequence(const SnapshotSequence& seq, const std::vector<NodeId>& perm) {
  std::vector<Snapshot> out;
  for (const Snapshot& s : seq) out.push_back({permute_graph(s.graph, perm), permute_rows(s.features, perm), s.timestamp});
  return SnapshotSequence(std::move(out));
}

inline double max_abs(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace graphssm::testing
