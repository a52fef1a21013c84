#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "graphssm/common.hpp"
#include "graphssm/ghippo.hpp"
#include "graphssm/tgraph.hpp"

namespace graphssm {

/// Diagonal of a diagonal state matrix; every entry strictly negative.
class DiagState {
public:
  explicit DiagState(Vector a) : a_(std::move(a)) {
    require(a_.size() >= 1, "diagonal state needs at least one entry");
    require(a_.allFinite() && (a_.array() < 0.0).all(), "diagonal state entries must be strictly negative");
  }

  [[nodiscard]] const Vector& values() const { return a_; }
  [[nodiscard]] Eigen::Index size() const { return a_.size(); }

private:
  Vector a_;
};

/// Observation interval (begin, end] with the (normally unobserved) mutations
/// inside it. Piece i covers [s_i, s_{i+1}) with s_0 = begin,
/// s_i = mutation_times[i-1], s_{M+1} = end, and carries graphs[i], features[i].
struct MutationSchedule {
  double begin{};
  double end{};
  std::vector<double> mutation_times;
  std::vector<Graph> graphs;
  std::vector<Vector> features;  // scalar feature per node

  [[nodiscard]] std::size_t num_mutations() const { return mutation_times.size(); }
  [[nodiscard]] double length() const { return end - begin; }

  /// s_0 .. s_{M+1}
  [[nodiscard]] std::vector<double> boundaries() const {
    std::vector<double> out{begin};
    out.insert(out.end(), mutation_times.begin(), mutation_times.end());
    out.push_back(end);
    return out;
  }

  void validate() const {
    require(std::isfinite(begin) && std::isfinite(end), "schedule interval must be finite");
    require(end > begin, "schedule interval must have positive length");
    double prev = begin;
    for (double t : mutation_times) {
      require(t > prev && t < end, "mutation times must be strictly increasing and interior");
      prev = t;
    }
    require(graphs.size() == mutation_times.size() + 1, "schedule needs one graph per piece");
    require(features.size() == graphs.size(), "schedule needs one feature vector per piece");
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      require(graphs[i].num_nodes() == graphs.front().num_nodes(), "schedule graphs disagree on node count");
      require(features[i].size() == static_cast<Eigen::Index>(graphs[i].num_nodes()),
              "schedule features have the wrong size");
      require(features[i].allFinite(), "schedule features must be finite");
    }
  }
};

struct LambdaWeights {
  std::vector<Vector> lambdas;  // M + 1 vectors of length N
  /// max |sum_i lambda_i - 1| of the directly evaluated closed form, before
  /// the first weight is closed by the sum constraint.
  double direct_residual{};

  [[nodiscard]] bool flagged() const { return direct_residual > 1e-9; }
};

/// Convex weights of the exact ZOH update across unobserved mutations:
///   lambda_i = (e^{(end - s_i) a} - e^{(end - s_{i+1}) a}) / (e^{(end - begin) a} - 1)
/// evaluated elementwise with expm1 for accuracy at small arguments.
inline LambdaWeights lambda_weights(const MutationSchedule& sched, const DiagState& a) {
  require(sched.length() > 0.0, "interval length must be positive");
  double prev = sched.begin;
  for (double t : sched.mutation_times) {
    require(t > prev && t < sched.end, "mutation times must be strictly increasing and interior");
    prev = t;
  }
  const auto s = sched.boundaries();
  const std::size_t pieces = s.size() - 1;
  const Eigen::ArrayXd av = a.values().array();
  const Eigen::ArrayXd denom = (sched.length() * av).unaryExpr([](double x) { return std::expm1(x); });

  LambdaWeights out;
  out.lambdas.resize(pieces);
  Eigen::ArrayXd direct_sum = Eigen::ArrayXd::Zero(av.size());
  for (std::size_t i = 0; i < pieces; ++i) {
    // e^{x} - e^{y} = e^{y} expm1(x - y) with x = (end - s_i) a, y = (end - s_{i+1}) a
    const Eigen::ArrayXd tail = ((sched.end - s[i + 1]) * av).exp();
    const Eigen::ArrayXd inc = ((s[i + 1] - s[i]) * av).unaryExpr([](double x) { return std::expm1(x); });
    out.lambdas[i] = (tail * inc / denom).matrix();
    direct_sum += out.lambdas[i].array();
  }
  out.direct_residual = (direct_sum - 1.0).abs().maxCoeff();

  Eigen::ArrayXd rest = Eigen::ArrayXd::Ones(av.size());
  for (std::size_t i = 1; i < pieces; ++i) {
    rest -= out.lambdas[i].array();
  }
  out.lambdas[0] = rest.max(0.0).min(1.0).matrix();
  return out;
}

/// Exact (oracle) update over one observation interval:
///   U_l = U_{l-1} e^{Delta a} + Xtilde (e^{Delta a} - 1) / a,
///   Xtilde = sum_i (I + alpha L_i)^{-1} x_i (lambda_i * b)^T.
inline Matrix zoh_oracle_step(const Matrix& u_prev, const MutationSchedule& sched, const DiagState& a,
                              const Vector& b, double alpha, LaplacianKind kind) {
  sched.validate();
  require(b.size() == a.size() && u_prev.cols() == a.size(), "state width disagrees with a and b");
  require(u_prev.rows() == static_cast<Eigen::Index>(sched.graphs.front().num_nodes()),
          "state rows disagree with node count");
  require(u_prev.allFinite(), "previous state must be finite");
  require(std::isfinite(alpha) && alpha >= 0.0, "alpha must be finite and non-negative");

  const LambdaWeights w = lambda_weights(sched, a);
  Matrix xtilde = Matrix::Zero(u_prev.rows(), u_prev.cols());
  for (std::size_t i = 0; i < sched.graphs.size(); ++i) {
    const Vector diffused = Resolvent(sched.graphs[i], alpha, kind).solve(sched.features[i]);
    xtilde.noalias() += diffused * w.lambdas[i].cwiseProduct(b).transpose();
  }
  const Eigen::ArrayXd av = a.values().array();
  const Eigen::ArrayXd decay = (sched.length() * av).exp();
  const Eigen::ArrayXd gain = (sched.length() * av).unaryExpr([](double x) { return std::expm1(x); }) / av;
  return u_prev * decay.matrix().asDiagonal() + xtilde * gain.matrix().asDiagonal();
}

inline std::vector<Segment> segments_from_schedule(const MutationSchedule& sched) {
  sched.validate();
  const auto s = sched.boundaries();
  std::vector<Segment> out;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    Vector x = sched.features[i];
    out.push_back(Segment{s[i], s[i + 1], sched.graphs[i], [x](double) { return x; }});
  }
  return out;
}

/// Reference path for zoh_oracle_step: RK4 on the piecewise time-invariant
/// system dU/dt = U diag(a) + (I + alpha L_i)^{-1} x_i b^T, continuous across mutations.
inline Matrix integrate_schedule(const Matrix& u_prev, const MutationSchedule& sched, const DiagState& a,
                                 const Vector& b, double alpha, LaplacianKind kind,
                                 std::size_t steps_per_unit) {
  const auto segments = segments_from_schedule(sched);
  const PiecewiseSystem sys{Matrix(a.values().asDiagonal()), b, alpha, kind};
  return integrate_segments(segments, u_prev, sys, Clock::Linear, BoundaryRule::Continuous, steps_per_unit);
}

struct StepResult {
  Matrix state;   // [V x N]
  Vector output;  // [V]
};

namespace detail {

inline Vector broadcast_delta(const Vector& delta, Eigen::Index nodes) {
  require(delta.size() == 1 || delta.size() == nodes, "delta must be a scalar or one value per node");
  require(delta.allFinite() && (delta.array() >= 0.0).all(), "delta must be non-negative");
  return delta.size() == 1 ? Vector::Constant(nodes, delta(0)) : delta;
}

}  // namespace detail

/// Practical step: u' = u * e^{delta a} + delta x_hat b^T,  y = u' c.
inline StepResult discrete_step(const Matrix& u_prev, const Vector& x_hat, const Vector& delta,
                                const DiagState& a, const Vector& b, const Vector& c) {
  const Eigen::Index nodes = u_prev.rows();
  require(x_hat.size() == nodes, "x_hat must have one entry per node");
  require(u_prev.cols() == a.size() && b.size() == a.size() && c.size() == a.size(), "state width mismatch");
  const Vector d = detail::broadcast_delta(delta, nodes);
  Matrix next(nodes, u_prev.cols());
  for (Eigen::Index v = 0; v < nodes; ++v) {
    next.row(v) = (u_prev.row(v).array() * (d(v) * a.values().transpose().array()).exp() +
                   d(v) * x_hat(v) * b.transpose().array())
                      .matrix();
  }
  return {next, next * c};
}

/// Same step with the exact input gain a^{-1}(e^{delta a} - 1) in place of delta.
inline StepResult zoh_step(const Matrix& u_prev, const Vector& x_hat, const Vector& delta, const DiagState& a,
                           const Vector& b, const Vector& c) {
  const Eigen::Index nodes = u_prev.rows();
  require(x_hat.size() == nodes, "x_hat must have one entry per node");
  require(u_prev.cols() == a.size() && b.size() == a.size() && c.size() == a.size(), "state width mismatch");
  const Vector d = detail::broadcast_delta(delta, nodes);
  const Eigen::ArrayXd av = a.values().array();
  Matrix next(nodes, u_prev.cols());
  for (Eigen::Index v = 0; v < nodes; ++v) {
    const Eigen::ArrayXd gain = (d(v) * av).unaryExpr([](double x) { return std::expm1(x); }) / av;
    next.row(v) = (u_prev.row(v).transpose().array() * (d(v) * av).exp() + gain * x_hat(v) * b.array())
                      .matrix()
                      .transpose();
  }
  return {next, next * c};
}

enum class MixMechanism { Ordinary, FeatureMix, ReprMix };

using GnnFn = std::function<Matrix(const Matrix&, const Graph&)>;
using MixFn = std::function<Matrix(const Matrix& prev, const Matrix& cur)>;

/// Estimate of the diffused drive from the two observed endpoints. With no
/// predecessor (x_prev == nullptr) every mechanism reduces to Ordinary.
inline Matrix mixed_estimate(const Matrix* x_prev, const Matrix& x_cur, const Graph* g_prev, const Graph& g_cur,
                             MixMechanism mechanism, const GnnFn& gnn, const MixFn& mix) {
  if (x_prev == nullptr || mechanism == MixMechanism::Ordinary) {
    return gnn(x_cur, g_cur);
  }
  require(x_prev->rows() == x_cur.rows() && x_prev->cols() == x_cur.cols(), "consecutive features differ in shape");
  if (mechanism == MixMechanism::FeatureMix) {
    return gnn(mix(*x_prev, x_cur), g_cur);
  }
  require(g_prev != nullptr, "representation mixing needs the previous graph");
  return mix(gnn(*x_prev, *g_prev), gnn(x_cur, g_cur));
}

}  // namespace graphssm
