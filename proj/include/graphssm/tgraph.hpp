#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iterator>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "graphssm/common.hpp"

namespace graphssm {

/// Undirected edge, stored with u < v.
struct Edge {
  NodeId u{};
  NodeId v{};

  Edge() = default;
  Edge(NodeId a, NodeId b) : u(std::min(a, b)), v(std::max(a, b)) {}

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Immutable undirected simple graph on nodes 0..num_nodes-1.
class Graph {
public:
  Graph() = default;

  explicit Graph(std::size_t num_nodes, std::vector<Edge> edges = {})
      : num_nodes_(num_nodes), edges_(std::move(edges)), adjacency_(num_nodes) {
    for (const Edge& e : edges_) {
      require(e.u != e.v, "self-loop on node " + std::to_string(e.u));
      require(e.v < num_nodes_, "edge endpoint " + std::to_string(e.v) + " out of range");
    }
    std::sort(edges_.begin(), edges_.end());
    require(std::adjacent_find(edges_.begin(), edges_.end()) == edges_.end(),
            "multi-edges are not supported");
    for (const Edge& e : edges_) {
      adjacency_[e.u].push_back(e.v);
      adjacency_[e.v].push_back(e.u);
    }
    for (auto& nbrs : adjacency_) {
      std::sort(nbrs.begin(), nbrs.end());
    }
  }

  [[nodiscard]] std::size_t num_nodes() const { return num_nodes_; }
  [[nodiscard]] std::size_t num_edges() const { return edges_.size(); }
  [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }

  [[nodiscard]] std::span<const NodeId> neighbors(NodeId v) const { return adjacency_[v]; }
  [[nodiscard]] std::size_t degree(NodeId v) const { return adjacency_[v].size(); }

  [[nodiscard]] bool has_edge(NodeId a, NodeId b) const {
    const auto& nbrs = adjacency_[a];
    return std::binary_search(nbrs.begin(), nbrs.end(), b);
  }

  /// Dense symmetric 0/1 adjacency.
  [[nodiscard]] Matrix adjacency_matrix() const {
    Matrix a = Matrix::Zero(static_cast<Eigen::Index>(num_nodes_),
                            static_cast<Eigen::Index>(num_nodes_));
    for (const Edge& e : edges_) {
      a(e.u, e.v) = 1.0;
      a(e.v, e.u) = 1.0;
    }
    return a;
  }

  friend bool operator==(const Graph& x, const Graph& y) {
    return x.num_nodes_ == y.num_nodes_ && x.edges_ == y.edges_;
  }

private:
  std::size_t num_nodes_{0};
  std::vector<Edge> edges_;
  std::vector<std::vector<NodeId>> adjacency_;
};

enum class EdgeAction { Insert, Delete };

struct EdgeEvent {
  NodeId u{};
  NodeId v{};
  double time{};
  EdgeAction action{EdgeAction::Insert};
};

/// Continuous-time edge process: an initial graph plus time-ordered
/// insert/delete mutations on [0, horizon].
class EventStream {
public:
  EventStream(std::size_t num_nodes, double horizon, std::vector<Edge> initial_edges,
              std::vector<EdgeEvent> events)
      : initial_(num_nodes, std::move(initial_edges)), horizon_(horizon), events_(std::move(events)) {
    require(num_nodes > 0, "event stream needs at least one node");
    require(std::isfinite(horizon) && horizon > 0.0, "horizon must be positive and finite");
    std::set<Edge> present(initial_.edges().begin(), initial_.edges().end());
    double last = -1.0;
    for (const EdgeEvent& ev : events_) {
      require(std::isfinite(ev.time) && ev.time >= 0.0 && ev.time <= horizon_,
              "event time outside [0, horizon]");
      require(ev.time > last, "event times must be strictly increasing");
      last = ev.time;
      require(ev.u < num_nodes && ev.v < num_nodes, "event node id out of range");
      require(ev.u != ev.v, "event creates a self-loop");
      const Edge e(ev.u, ev.v);
      if (ev.action == EdgeAction::Insert) {
        require(present.insert(e).second, "insert of an edge that is already present");
      } else {
        require(present.erase(e) == 1, "delete of an edge that is absent");
      }
    }
  }

  [[nodiscard]] std::size_t num_nodes() const { return initial_.num_nodes(); }
  [[nodiscard]] double horizon() const { return horizon_; }
  [[nodiscard]] const Graph& initial_graph() const { return initial_; }
  [[nodiscard]] const std::vector<EdgeEvent>& events() const { return events_; }

  /// Graph after replaying every event with time <= t.
  [[nodiscard]] Graph graph_at(double t) const {
    std::set<Edge> present(initial_.edges().begin(), initial_.edges().end());
    for (const EdgeEvent& ev : events_) {
      if (ev.time > t) {
        break;
      }
      if (ev.action == EdgeAction::Insert) {
        present.insert(Edge(ev.u, ev.v));
      } else {
        present.erase(Edge(ev.u, ev.v));
      }
    }
    return Graph(num_nodes(), std::vector<Edge>(present.begin(), present.end()));
  }

  /// Event times strictly inside (begin, end).
  [[nodiscard]] std::vector<double> mutation_times(double begin, double end) const {
    std::vector<double> out;
    for (const EdgeEvent& ev : events_) {
      if (ev.time > begin && ev.time < end) {
        out.push_back(ev.time);
      }
    }
    return out;
  }

private:
  Graph initial_;
  double horizon_;
  std::vector<EdgeEvent> events_;
};

struct Snapshot {
  Graph graph;
  Matrix features;  // [num_nodes x d]
  double timestamp{};
};

/// L observed (graph, features, time) triples sharing node count and feature width.
class SnapshotSequence {
public:
  SnapshotSequence() = default;

  explicit SnapshotSequence(std::vector<Snapshot> snapshots) : snapshots_(std::move(snapshots)) {
    if (snapshots_.empty()) {
      return;
    }
    const std::size_t n = snapshots_.front().graph.num_nodes();
    const Eigen::Index d = snapshots_.front().features.cols();
    for (std::size_t l = 0; l < snapshots_.size(); ++l) {
      const Snapshot& s = snapshots_[l];
      require(s.graph.num_nodes() == n, "snapshots disagree on node count");
      require(s.features.rows() == static_cast<Eigen::Index>(n) && s.features.cols() == d,
              "snapshot feature matrix has the wrong shape");
      require(s.features.allFinite(), "snapshot features must be finite");
      require(std::isfinite(s.timestamp), "snapshot timestamp must be finite");
      if (l > 0) {
        require(s.timestamp > snapshots_[l - 1].timestamp,
                "snapshot timestamps must be strictly increasing");
      }
    }
  }

  [[nodiscard]] std::size_t size() const { return snapshots_.size(); }
  [[nodiscard]] bool empty() const { return snapshots_.empty(); }
  [[nodiscard]] const Snapshot& operator[](std::size_t l) const { return snapshots_[l]; }
  [[nodiscard]] const std::vector<Snapshot>& snapshots() const { return snapshots_; }
  [[nodiscard]] auto begin() const { return snapshots_.begin(); }
  [[nodiscard]] auto end() const { return snapshots_.end(); }

  [[nodiscard]] std::size_t num_nodes() const {
    return snapshots_.empty() ? 0 : snapshots_.front().graph.num_nodes();
  }
  [[nodiscard]] std::size_t feature_dim() const {
    return snapshots_.empty() ? 0 : static_cast<std::size_t>(snapshots_.front().features.cols());
  }

  /// Gaps tau_l - tau_{l-1} for l >= 1 (size L - 1).
  [[nodiscard]] std::vector<double> gaps() const {
    std::vector<double> out;
    for (std::size_t l = 1; l < snapshots_.size(); ++l) {
      out.push_back(snapshots_[l].timestamp - snapshots_[l - 1].timestamp);
    }
    return out;
  }

private:
  std::vector<Snapshot> snapshots_;
};

using FeatureFn = std::function<Matrix(double)>;

/// Replays the stream at each observation time and attaches feature_fn(tau).
inline SnapshotSequence materialize_snapshots(const EventStream& stream,
                                              std::span<const double> observe_times,
                                              const FeatureFn& feature_fn) {
  std::vector<Snapshot> out;
  out.reserve(observe_times.size());
  std::set<Edge> present(stream.initial_graph().edges().begin(),
                         stream.initial_graph().edges().end());
  std::size_t next_event = 0;
  Eigen::Index width = -1;
  for (std::size_t l = 0; l < observe_times.size(); ++l) {
    const double tau = observe_times[l];
    require(tau >= 0.0 && tau <= stream.horizon(), "observation time outside [0, horizon]");
    require(l == 0 || tau > observe_times[l - 1], "observation times must be strictly increasing");
    const auto& events = stream.events();
    while (next_event < events.size() && events[next_event].time <= tau) {
      const EdgeEvent& ev = events[next_event++];
      if (ev.action == EdgeAction::Insert) {
        present.insert(Edge(ev.u, ev.v));
      } else {
        present.erase(Edge(ev.u, ev.v));
      }
    }
    Matrix x = feature_fn(tau);
    if (width < 0) {
      width = x.cols();
    }
    require(x.rows() == static_cast<Eigen::Index>(stream.num_nodes()) && x.cols() == width &&
                width > 0,
            "feature_fn returned a matrix of the wrong shape");
    out.push_back(Snapshot{Graph(stream.num_nodes(), std::vector<Edge>(present.begin(), present.end())),
                           std::move(x), tau});
  }
  return SnapshotSequence(std::move(out));
}

enum class LaplacianKind { Symmetric, RandomWalk };

/// Normalized Laplacian. Rows and columns of isolated nodes are zero.
inline Matrix laplacian(const Graph& g, LaplacianKind kind) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Matrix lap = Matrix::Zero(n, n);
  for (Eigen::Index v = 0; v < n; ++v) {
    if (g.degree(static_cast<NodeId>(v)) > 0) {
      lap(v, v) = 1.0;
    }
  }
  for (const Edge& e : g.edges()) {
    const double du = static_cast<double>(g.degree(e.u));
    const double dv = static_cast<double>(g.degree(e.v));
    if (kind == LaplacianKind::Symmetric) {
      const double w = 1.0 / std::sqrt(du * dv);
      lap(e.u, e.v) = -w;
      lap(e.v, e.u) = -w;
    } else {
      lap(e.u, e.v) = -1.0 / du;
      lap(e.v, e.u) = -1.0 / dv;
    }
  }
  return lap;
}

inline Matrix laplacian(const Snapshot& snap, LaplacianKind kind) {
  return laplacian(snap.graph, kind);
}

struct TemporalContinuity {
  double structure{};
  double feature{};
};

/// Mean Jaccard overlap of consecutive edge sets and mean per-node cosine
/// similarity of consecutive feature rows.
inline TemporalContinuity temporal_continuity(const SnapshotSequence& seq) {
  require(seq.size() >= 2, "temporal continuity needs at least two snapshots");
  double structure = 0.0;
  double feature = 0.0;
  const std::size_t steps = seq.size() - 1;
  for (std::size_t l = 0; l < steps; ++l) {
    const auto& e1 = seq[l].graph.edges();
    const auto& e2 = seq[l + 1].graph.edges();
    std::vector<Edge> common;
    std::set_intersection(e1.begin(), e1.end(), e2.begin(), e2.end(), std::back_inserter(common));
    const std::size_t uni = e1.size() + e2.size() - common.size();
    structure += uni == 0 ? 1.0 : static_cast<double>(common.size()) / static_cast<double>(uni);

    const Matrix& x1 = seq[l].features;
    const Matrix& x2 = seq[l + 1].features;
    double sim = 0.0;
    for (Eigen::Index v = 0; v < x1.rows(); ++v) {
      const double n1 = x1.row(v).norm();
      const double n2 = x2.row(v).norm();
      if (n1 > 0.0 && n2 > 0.0) {
        sim += x1.row(v).dot(x2.row(v)) / (n1 * n2);
      }
    }
    feature += x1.rows() > 0 ? sim / static_cast<double>(x1.rows()) : 0.0;
  }
  return {structure / static_cast<double>(steps), feature / static_cast<double>(steps)};
}

}  // namespace graphssm
