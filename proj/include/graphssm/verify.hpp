#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "graphssm/common.hpp"
#include "graphssm/discretize.hpp"
#include "graphssm/ghippo.hpp"
#include "graphssm/rng.hpp"
#include "graphssm/tgraph.hpp"

namespace graphssm::verify {

struct CheckResult {
  std::string name;
  bool pass{};
  double measured{};
  double tolerance{};
  double seconds{};
  std::string detail;
};

/// "PASS <name> value=<v> tol=<t> time_s=<s> [detail]"
inline std::string format_line(const CheckResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s %s value=%.3e tol=%.1e time_s=%.2f", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                r.measured, r.tolerance, r.seconds);
  std::string line(buf);
  if (!r.detail.empty()) line += " " + r.detail;
  return line;
}

class Stopwatch {
public:
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_{std::chrono::steady_clock::now()};
};

// ---------------------------------------------------------------- random instances

inline Graph random_graph(std::size_t nodes, double p, Rng& rng) {
  std::vector<Edge> edges;
  for (NodeId u = 0; u < nodes; ++u) {
    for (NodeId v = u + 1; v < nodes; ++v) {
      if (rng.uniform() < p) edges.emplace_back(u, v);
    }
  }
  return Graph(nodes, std::move(edges));
}

/// Sorted distinct times in (lo, hi), at least `gap` apart.
inline std::vector<double> random_times(std::size_t count, double lo, double hi, double gap, Rng& rng) {
  while (true) {
    std::vector<double> t;
    for (std::size_t i = 0; i < count; ++i) t.push_back(rng.uniform(lo, hi));
    std::sort(t.begin(), t.end());
    bool ok = true;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] - (i == 0 ? lo : t[i - 1]) < gap || hi - t[i] < gap) ok = false;
    }
    if (ok) return t;
  }
}

/// Stream whose events toggle random node pairs at random interior times.
inline EventStream random_stream(std::size_t nodes, std::size_t mutations, double horizon, Rng& rng) {
  const Graph initial = random_graph(nodes, 0.4, rng);
  std::set<Edge> present(initial.edges().begin(), initial.edges().end());
  std::vector<EdgeEvent> events;
  for (double t : random_times(mutations, 0.05 * horizon, 0.95 * horizon, 0.01 * horizon, rng)) {
    NodeId u{};
    NodeId v{};
    do {
      u = static_cast<NodeId>(rng.below(nodes));
      v = static_cast<NodeId>(rng.below(nodes));
    } while (u == v);
    const Edge e(u, v);
    const bool has = present.contains(e);
    events.push_back(EdgeEvent{e.u, e.v, t, has ? EdgeAction::Delete : EdgeAction::Insert});
    if (has) {
      present.erase(e);
    } else {
      present.insert(e);
    }
  }
  return EventStream(nodes, horizon, std::vector<Edge>(initial.edges().begin(), initial.edges().end()),
                     std::move(events));
}

/// Piecewise path: a per-segment constant that jumps at the stream's
/// mutation times plus a smooth per-node sinusoid.
inline FeaturePath random_path(const EventStream& stream, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(stream.num_nodes());
  std::vector<double> cuts = stream.mutation_times(0.0, stream.horizon());
  std::vector<Vector> levels;
  for (std::size_t i = 0; i <= cuts.size(); ++i) levels.push_back(rng.normal_matrix(n, 1).col(0));
  const Vector amp = rng.normal_matrix(n, 1, 0.5).col(0);
  const Vector freq = rng.uniform_matrix(n, 1, 0.5, 3.0).col(0);
  const Vector phase = rng.uniform_matrix(n, 1, 0.0, 6.283185307179586).col(0);
  return [cuts, levels, amp, freq, phase](double t) {
    const auto piece = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), t) - cuts.begin());
    return Vector(levels[piece].array() + amp.array() * (freq.array() * t + phase.array()).sin());
  };
}

inline MutationSchedule random_schedule(std::size_t nodes, std::size_t mutations, Rng& rng) {
  MutationSchedule s;
  s.begin = rng.uniform(0.0, 2.0);
  s.end = s.begin + rng.uniform(0.2, 2.0);
  const double len = s.end - s.begin;
  s.mutation_times = random_times(mutations, s.begin, s.end, 0.01 * len, rng);
  for (std::size_t i = 0; i <= mutations; ++i) {
    s.graphs.push_back(random_graph(nodes, 0.4, rng));
    s.features.push_back(rng.normal_matrix(static_cast<Eigen::Index>(nodes), 1).col(0));
  }
  return s;
}

inline DiagState random_diag(std::size_t order, Rng& rng) {
  return DiagState(-rng.uniform_matrix(static_cast<Eigen::Index>(order), 1, 0.1, 4.0).col(0));
}

// ---------------------------------------------------------------- suites

struct VerifyConfig {
  std::uint64_t seed{20240601};
  std::size_t instances{20};
  std::size_t schedules{1000};
  std::size_t max_nodes{8};
  std::size_t max_order{8};
  std::size_t max_mutations{5};
  std::vector<double> alphas{0.0, 0.5, 2.0};
  LaplacianKind laplacian{LaplacianKind::Symmetric};
  std::size_t ode_steps{200};
  std::size_t quadrature{2000};
  double horizon{2.0};
  double projection_tol{1e-3};
  double zoh_tol{1e-4};
  double lambda_tol{1e-12};
  double reduction_tol{1e-10};
};

inline std::size_t pick(std::size_t lo, std::size_t hi, Rng& rng) { return lo + rng.below(hi - lo + 1); }

/// GHiPPO integration vs the quadrature projection on random streams.
inline CheckResult check_projection(const VerifyConfig& cfg) {
  Stopwatch clock;
  Rng rng = Rng(cfg.seed).split("projection");
  double worst = 0.0;
  for (std::size_t i = 0; i < cfg.instances; ++i) {
    Rng r = rng.split(i);
    const std::size_t nodes = pick(2, cfg.max_nodes, r);
    const std::size_t order = pick(1, cfg.max_order, r);
    const std::size_t mutations = pick(0, cfg.max_mutations, r);
    const EventStream stream = random_stream(nodes, mutations, cfg.horizon, r);
    const FeaturePath path = random_path(stream, r);
    GhippoConfig g;
    g.order = order;
    g.alpha = cfg.alphas[i % cfg.alphas.size()];
    g.laplacian = cfg.laplacian;
    g.ode_steps_per_unit = cfg.ode_steps;
    g.quadrature_points = cfg.quadrature;
    const Matrix ode = integrate_ghippo(stream, path, g, cfg.horizon).u;
    const Matrix quad = gproj_bruteforce(stream, path, g, cfg.horizon).u;
    const double err = ode.allFinite() ? relative_frobenius(ode, quad) : INFINITY;
    worst = std::max(worst, std::isnan(err) ? INFINITY : err);
  }
  return {"projection_oracle", worst <= cfg.projection_tol, worst, cfg.projection_tol, clock.seconds(),
          "instances=" + std::to_string(cfg.instances)};
}

/// Exact ZOH update across unobserved mutations vs RK4 on the same schedule.
inline CheckResult check_zoh(const VerifyConfig& cfg) {
  Stopwatch clock;
  Rng rng = Rng(cfg.seed).split("zoh");
  double worst = 0.0;
  for (std::size_t i = 0; i < cfg.instances; ++i) {
    Rng r = rng.split(i);
    const std::size_t nodes = pick(2, cfg.max_nodes, r);
    const std::size_t order = pick(1, cfg.max_order, r);
    const MutationSchedule sched = random_schedule(nodes, pick(0, cfg.max_mutations, r), r);
    const DiagState a = random_diag(order, r);
    const Vector b = r.normal_matrix(static_cast<Eigen::Index>(order), 1).col(0);
    const Matrix u0 = r.normal_matrix(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(order));
    const double alpha = cfg.alphas[i % cfg.alphas.size()];
    const Matrix exact = zoh_oracle_step(u0, sched, a, b, alpha, cfg.laplacian);
    const Matrix ode = integrate_schedule(u0, sched, a, b, alpha, cfg.laplacian, cfg.ode_steps);
    const double err = ode.allFinite() ? relative_frobenius(exact, ode) : INFINITY;
    worst = std::max(worst, std::isnan(err) ? INFINITY : err);
  }
  return {"zoh_oracle", worst <= cfg.zoh_tol, worst, cfg.zoh_tol, clock.seconds(),
          "instances=" + std::to_string(cfg.instances)};
}

/// Convexity of the lambda weights on random schedules.
inline CheckResult check_lambda(const VerifyConfig& cfg) {
  Stopwatch clock;
  Rng rng = Rng(cfg.seed).split("lambda");
  double worst_sum = 0.0;
  bool in_range = true;
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < cfg.schedules; ++i) {
    Rng r = rng.split(i);
    MutationSchedule s;
    s.begin = r.uniform(0.0, 5.0);
    s.end = s.begin + r.uniform(1e-3, 5.0);
    s.mutation_times = random_times(pick(0, cfg.max_mutations, r), s.begin, s.end, 1e-6, r);
    const LambdaWeights w = lambda_weights(s, random_diag(pick(1, cfg.max_order, r), r));
    Vector sum = Vector::Zero(w.lambdas.front().size());
    for (const Vector& l : w.lambdas) {
      sum += l;
      in_range = in_range && (l.array() >= 0.0).all() && (l.array() <= 1.0).all();
    }
    worst_sum = std::max(worst_sum, (sum.array() - 1.0).abs().maxCoeff());
    flagged += w.flagged() ? 1 : 0;
  }
  return {"lambda_convexity", in_range && worst_sum <= cfg.lambda_tol, worst_sum, cfg.lambda_tol, clock.seconds(),
          "schedules=" + std::to_string(cfg.schedules) + " entries_in_unit_interval=" + (in_range ? "yes" : "no") +
              " direct_formula_flagged=" + std::to_string(flagged)};
}

/// With the regularizer off (alpha = 0) or without edges, the graph system is
/// V independent copies of the single-input system.
inline CheckResult check_reduction(const VerifyConfig& cfg) {
  Stopwatch clock;
  Rng rng = Rng(cfg.seed).split("reduction");
  double worst = 0.0;
  for (std::size_t i = 0; i < cfg.instances; ++i) {
    Rng r = rng.split(i);
    const std::size_t nodes = pick(2, cfg.max_nodes, r);
    const bool edgeless = i % 2 == 1;
    const EventStream stream = edgeless ? EventStream(nodes, cfg.horizon, {}, {})
                                        : random_stream(nodes, pick(0, cfg.max_mutations, r), cfg.horizon, r);
    const FeaturePath path = random_path(stream, r);
    GhippoConfig g;
    g.order = pick(1, cfg.max_order, r);
    g.alpha = edgeless ? 2.0 : 0.0;
    g.laplacian = cfg.laplacian;
    g.ode_steps_per_unit = cfg.ode_steps;
    const Matrix joint = integrate_ghippo(stream, path, g, cfg.horizon).u;
    const std::vector<double> breaks = stream.mutation_times(g.start_time, cfg.horizon);
    for (std::size_t v = 0; v < nodes; ++v) {
      const auto row = static_cast<Eigen::Index>(v);
      const Vector single = integrate_hippo([&](double t) { return path(t)(row); }, g, cfg.horizon, breaks);
      worst = std::max(worst, (joint.row(row).transpose() - single).cwiseAbs().maxCoeff());
    }
  }
  return {"hippo_reduction", worst <= cfg.reduction_tol, worst, cfg.reduction_tol, clock.seconds(),
          "instances=" + std::to_string(cfg.instances)};
}

}  // namespace graphssm::verify
