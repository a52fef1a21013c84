#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "graphssm/common.hpp"
#include "graphssm/tgraph.hpp"

namespace graphssm {

/// HiPPO-LegS state matrices (0-based n, k):
///   A_nk = -sqrt((2n+1)(2k+1)) for n > k, -(n+1) for n == k, 0 above the diagonal
///   B_n  = sqrt(2n+1)
struct HippoLegS {
  Matrix a;
  Vector b;

  [[nodiscard]] std::size_t order() const { return static_cast<std::size_t>(b.size()); }
};

inline HippoLegS hippo_legs_matrices(std::size_t order) {
  require(order >= 1, "HiPPO order must be at least 1");
  const auto n = static_cast<Eigen::Index>(order);
  HippoLegS m{Matrix::Zero(n, n), Vector(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    m.b(i) = std::sqrt(2.0 * static_cast<double>(i) + 1.0);
    for (Eigen::Index k = 0; k < i; ++k) {
      m.a(i, k) = -std::sqrt((2.0 * static_cast<double>(i) + 1.0) * (2.0 * static_cast<double>(k) + 1.0));
    }
    m.a(i, i) = -(static_cast<double>(i) + 1.0);
  }
  return m;
}

struct GhippoConfig {
  std::size_t order{8};
  double alpha{0.5};
  LaplacianKind laplacian{LaplacianKind::Symmetric};
  std::size_t ode_steps_per_unit{200};
  std::size_t quadrature_points{2000};
  /// The LegS measure degenerates at t = 0; integration starts here.
  double start_time{1e-3};

  void validate() const {
    require(order >= 1, "order must be >= 1");
    require(std::isfinite(alpha) && alpha >= 0.0, "alpha must be finite and non-negative");
    require(ode_steps_per_unit >= 1, "ode_steps_per_unit must be >= 1");
    require(quadrature_points >= 1, "quadrature_points must be >= 1");
    require(start_time > 0.0, "start_time must be positive");
  }
};

struct CoefficientState {
  Matrix u;  // [N_V x N]
  double time{};
};

/// Scalar-per-node feature path t -> [N_V].
using FeaturePath = std::function<Vector(double)>;

/// Factorized (I + alpha L) for one graph. The random-walk operator is similar
/// to the symmetric one, (I + a L_rw) = D^{-1/2} (I + a L_sym) D^{1/2}, so both
/// kinds go through a Cholesky factor of an SPD matrix.
class Resolvent {
public:
  Resolvent(const Graph& g, double alpha, LaplacianKind kind)
      : alpha_(alpha), kind_(kind), lap_(laplacian(g, kind)) {
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    sqrt_deg_ = Vector::Ones(n);
    for (Eigen::Index v = 0; v < n; ++v) {
      const auto d = g.degree(static_cast<NodeId>(v));
      if (d > 0) {
        sqrt_deg_(v) = std::sqrt(static_cast<double>(d));
      }
    }
    const Matrix sym = kind == LaplacianKind::Symmetric ? lap_ : laplacian(g, LaplacianKind::Symmetric);
    llt_.compute(Matrix::Identity(n, n) + alpha * sym);
    if (llt_.info() != Eigen::Success) {
      throw std::runtime_error("I + alpha L is not positive definite");
    }
  }

  /// (I + alpha L)^{-1} x
  [[nodiscard]] Matrix solve(const Matrix& x) const {
    if (alpha_ == 0.0) {
      return x;
    }
    if (kind_ == LaplacianKind::Symmetric) {
      return llt_.solve(x);
    }
    const Matrix scaled = sqrt_deg_.asDiagonal() * x;
    return sqrt_deg_.cwiseInverse().asDiagonal() * llt_.solve(scaled);
  }

  /// (I + alpha L) x
  [[nodiscard]] Matrix apply(const Matrix& x) const { return x + alpha_ * (lap_ * x); }

private:
  double alpha_;
  LaplacianKind kind_;
  Matrix lap_;
  Vector sqrt_deg_;
  Eigen::LLT<Matrix> llt_;
};

/// One constant-graph piece of a piecewise system.
struct Segment {
  double begin{};
  double end{};
  Graph graph;
  FeaturePath features;
};

/// dU/dt = U A^T + (I + alpha L_i)^{-1} x(t) B^T on each segment.
struct PiecewiseSystem {
  Matrix state_matrix;  // A [N x N]
  Vector input;         // B [N]
  double alpha{0.0};
  LaplacianKind kind{LaplacianKind::Symmetric};
};

enum class Clock {
  /// Integrate in t.
  Linear,
  /// Integrate in s = ln t. The LegS dynamics dU/dt = (1/t)(U A^T + R x B^T)
  /// take exactly the time-invariant form in this variable.
  LogTime,
};

enum class BoundaryRule {
  /// U is continuous across segment boundaries.
  Continuous,
  /// U jumps so that U = (I + alpha L(t))^{-1} Q(t) holds on both sides.
  Reproject,
};

namespace detail {

inline double clamp_into(double t, double begin, double end) {
  const double last = std::nextafter(end, begin);
  return std::clamp(t, begin, std::max(begin, last));
}

inline std::size_t step_count(const Segment& seg, Clock clock, std::size_t steps_per_unit) {
  const double span = clock == Clock::Linear ? seg.end - seg.begin
                                             : std::log(seg.end / seg.begin) + (seg.end - seg.begin);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span * static_cast<double>(steps_per_unit))));
}

}  // namespace detail

/// Classical RK4 over consecutive segments; no step crosses a segment boundary.
inline Matrix integrate_segments(std::span<const Segment> segments, Matrix u,
                                 const PiecewiseSystem& sys, Clock clock, BoundaryRule rule,
                                 std::size_t steps_per_unit) {
  require(steps_per_unit >= 1, "steps_per_unit must be >= 1");
  require(sys.state_matrix.rows() == sys.state_matrix.cols() &&
              sys.state_matrix.rows() == sys.input.size() && u.cols() == sys.input.size(),
          "state matrix, input vector and state width disagree");
  const Matrix at = sys.state_matrix.transpose();
  const RowVector bt = sys.input.transpose();

  std::vector<Resolvent> resolvents;
  resolvents.reserve(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& seg = segments[i];
    require(seg.end > seg.begin, "segment must have positive length");
    require(i == 0 || seg.begin == segments[i - 1].end, "segments must be contiguous");
    require(clock == Clock::Linear || seg.begin > 0.0, "log-time integration needs positive times");
    require(seg.graph.num_nodes() == static_cast<std::size_t>(u.rows()), "graph size disagrees with state");
    resolvents.emplace_back(seg.graph, sys.alpha, sys.kind);
  }

  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& seg = segments[i];
    const Resolvent& res = resolvents[i];
    if (i > 0 && rule == BoundaryRule::Reproject) {
      u = res.solve(resolvents[i - 1].apply(u));
    }
    auto drive = [&](double t) -> Matrix {
      const Vector x = seg.features(detail::clamp_into(t, seg.begin, seg.end));
      require(x.size() == u.rows(), "feature path returned the wrong number of nodes");
      require(x.allFinite(), "feature path returned a non-finite value");
      return res.solve(x) * bt;
    };
    // rhs(t, U) in the integration variable
    auto rhs = [&](double t, const Matrix& state) -> Matrix {
      return state * at + drive(t);
    };

    const std::size_t steps = detail::step_count(seg, clock, steps_per_unit);
    if (clock == Clock::Linear) {
      const double h = (seg.end - seg.begin) / static_cast<double>(steps);
      for (std::size_t k = 0; k < steps; ++k) {
        const double t = seg.begin + static_cast<double>(k) * h;
        const Matrix k1 = rhs(t, u);
        const Matrix k2 = rhs(t + 0.5 * h, u + 0.5 * h * k1);
        const Matrix k3 = rhs(t + 0.5 * h, u + 0.5 * h * k2);
        const Matrix k4 = rhs(t + h, u + h * k3);
        u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
    } else {
      const double s0 = std::log(seg.begin);
      const double h = (std::log(seg.end) - s0) / static_cast<double>(steps);
      for (std::size_t k = 0; k < steps; ++k) {
        const double s = s0 + static_cast<double>(k) * h;
        const Matrix k1 = rhs(std::exp(s), u);
        const Matrix k2 = rhs(std::exp(s + 0.5 * h), u + 0.5 * h * k1);
        const Matrix k3 = rhs(std::exp(s + 0.5 * h), u + 0.5 * h * k2);
        const Matrix k4 = rhs(std::exp(s + h), u + h * k3);
        u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
    }
  }
  return u;
}

/// Splits [begin, end] at the stream's mutation times; each piece carries the
/// graph in force on it (events are right-continuous).
inline std::vector<Segment> segments_from_stream(const EventStream& stream, const FeaturePath& path,
                                                 double begin, double end) {
  std::vector<double> cuts{begin};
  for (double t : stream.mutation_times(begin, end)) {
    cuts.push_back(t);
  }
  cuts.push_back(end);
  std::vector<Segment> segments;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    segments.push_back(Segment{cuts[i], cuts[i + 1], stream.graph_at(cuts[i]), path});
  }
  return segments;
}

/// GHiPPO coefficients U(t_end) = (I + alpha L(t_end))^{-1} Q(t_end), obtained
/// by integrating the LegS system segment by segment. U is re-projected at each
/// mutation so the identity above holds on every segment.
inline CoefficientState integrate_ghippo(const EventStream& stream, const FeaturePath& path,
                                         const GhippoConfig& cfg, double t_end) {
  cfg.validate();
  require(t_end <= stream.horizon(), "t_end beyond the stream horizon");
  require(t_end > cfg.start_time, "t_end must exceed the integration start time");
  const HippoLegS hippo = hippo_legs_matrices(cfg.order);
  const PiecewiseSystem sys{hippo.a, hippo.b, cfg.alpha, cfg.laplacian};

  const auto segments = segments_from_stream(stream, path, cfg.start_time, t_end);
  // A constant history on [0, t0] projects onto the degree-0 basis only.
  const Vector x0 = path(cfg.start_time);
  require(x0.size() == static_cast<Eigen::Index>(stream.num_nodes()), "feature path has the wrong size");
  require(x0.allFinite(), "feature path returned a non-finite value");
  Matrix u0 = Matrix::Zero(x0.size(), hippo.b.size());
  u0.col(0) = Resolvent(segments.front().graph, cfg.alpha, cfg.laplacian).solve(x0);

  Matrix u = integrate_segments(segments, std::move(u0), sys, Clock::LogTime, BoundaryRule::Reproject,
                                cfg.ode_steps_per_unit);
  return {std::move(u), t_end};
}

/// Single-input HiPPO-LegS coefficients of a scalar signal (no graph).
/// Integration is split at `breaks` (e.g. jump times of the signal).
inline Vector integrate_hippo(const std::function<double(double)>& signal, const GhippoConfig& cfg,
                              double t_end, std::span<const double> breaks = {}) {
  cfg.validate();
  require(t_end > cfg.start_time, "t_end must exceed the integration start time");
  const HippoLegS hippo = hippo_legs_matrices(cfg.order);
  const PiecewiseSystem sys{hippo.a, hippo.b, 0.0, cfg.laplacian};
  const FeaturePath path = [&](double t) { return Vector::Constant(1, signal(t)); };
  std::vector<double> cuts{cfg.start_time};
  for (double t : breaks) {
    require(std::isfinite(t), "break times must be finite");
    if (t > cuts.back() && t < t_end) cuts.push_back(t);
  }
  cuts.push_back(t_end);
  std::vector<Segment> segments;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    segments.push_back(Segment{cuts[i], cuts[i + 1], Graph(1), path});
  }
  Matrix u0 = Matrix::Zero(1, hippo.b.size());
  u0(0, 0) = signal(cfg.start_time);
  const Matrix u = integrate_segments(segments, std::move(u0), sys, Clock::LogTime, BoundaryRule::Reproject,
                                      cfg.ode_steps_per_unit);
  return u.row(0).transpose();
}

/// Orthonormal Legendre basis under the uniform probability measure on [0, t]:
/// g_n(s) = sqrt(2n+1) P_n(2s/t - 1), via the three-term recurrence.
inline Vector scaled_legendre(std::size_t order, double s, double t) {
  Vector g(static_cast<Eigen::Index>(order));
  const double x = 2.0 * s / t - 1.0;
  double p_prev = 1.0;
  double p = x;
  for (std::size_t n = 0; n < order; ++n) {
    double pn = 0.0;
    if (n == 0) {
      pn = 1.0;
    } else if (n == 1) {
      pn = x;
    } else {
      const double k = static_cast<double>(n);
      pn = ((2.0 * k - 1.0) * x * p - (k - 1.0) * p_prev) / k;
      p_prev = p;
      p = pn;
    }
    g(static_cast<Eigen::Index>(n)) = std::sqrt(2.0 * static_cast<double>(n) + 1.0) * pn;
  }
  return g;
}

/// Brute-force GHiPPO projection: Q_{v,n} = <x_v, g_n> under mu_t = (1/t) 1_[0,t]
/// by composite trapezoid quadrature (split at mutation times), then
/// U = (I + alpha L(t))^{-1} Q.
inline CoefficientState gproj_bruteforce(const EventStream& stream, const FeaturePath& path,
                                         const GhippoConfig& cfg, double t) {
  cfg.validate();
  require(t > 0.0, "projection time must be positive");
  require(t <= stream.horizon(), "projection time beyond the stream horizon");
  const auto nodes = static_cast<Eigen::Index>(stream.num_nodes());
  const auto order = static_cast<Eigen::Index>(cfg.order);

  std::vector<double> cuts{0.0};
  for (double m : stream.mutation_times(0.0, t)) {
    cuts.push_back(m);
  }
  cuts.push_back(t);

  Matrix q = Matrix::Zero(nodes, order);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i];
    const double b = cuts[i + 1];
    const auto intervals = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(cfg.quadrature_points) * (b - a) / t)));
    const double h = (b - a) / static_cast<double>(intervals);
    for (std::size_t k = 0; k <= intervals; ++k) {
      const double s = k == intervals ? b : a + static_cast<double>(k) * h;
      const double w = (k == 0 || k == intervals) ? 0.5 * h : h;
      const Vector x = path(detail::clamp_into(s, a, b));
      require(x.size() == nodes, "feature path returned the wrong number of nodes");
      require(x.allFinite(), "feature path returned a non-finite value");
      q.noalias() += (w / t) * x * scaled_legendre(cfg.order, s, t).transpose();
    }
  }
  const Resolvent res(stream.graph_at(t), cfg.alpha, cfg.laplacian);
  return {res.solve(q), t};
}

struct ComponentProfile {
  std::vector<NodeId> nodes;
  Vector null_vector;  // unit norm, positive sum
  Vector expected;     // unit norm: sqrt(degree) (Symmetric) or constant (RandomWalk)
  double deviation{};  // max abs difference
};

struct LimitProfile {
  std::size_t null_space_dim{};
  std::vector<ComponentProfile> components;
};

/// Strong-regularization limit: the zero-eigenvalue direction of L on each
/// connected component is the consensus profile the penalty drives toward.
inline LimitProfile laplacian_limit_check(const Graph& g, LaplacianKind kind) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  const Matrix lap = laplacian(g, kind);
  LimitProfile out;
  {
    Eigen::FullPivLU<Matrix> lu(lap);
    lu.setThreshold(1e-10);
    out.null_space_dim = static_cast<std::size_t>(n - lu.rank());
  }

  std::vector<int> comp(static_cast<std::size_t>(n), -1);
  for (Eigen::Index root = 0; root < n; ++root) {
    if (comp[static_cast<std::size_t>(root)] >= 0) {
      continue;
    }
    ComponentProfile prof;
    std::vector<NodeId> stack{static_cast<NodeId>(root)};
    comp[static_cast<std::size_t>(root)] = static_cast<int>(out.components.size());
    while (!stack.empty()) {
      const NodeId v = stack.back();
      stack.pop_back();
      prof.nodes.push_back(v);
      for (NodeId w : g.neighbors(v)) {
        if (comp[w] < 0) {
          comp[w] = comp[static_cast<std::size_t>(root)];
          stack.push_back(w);
        }
      }
    }
    std::sort(prof.nodes.begin(), prof.nodes.end());
    const auto m = static_cast<Eigen::Index>(prof.nodes.size());
    Matrix sub(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        sub(i, j) = lap(prof.nodes[static_cast<std::size_t>(i)], prof.nodes[static_cast<std::size_t>(j)]);
      }
    }
    Vector z;
    if (m == 1) {
      z = Vector::Ones(1);
    } else if (kind == LaplacianKind::Symmetric) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(sub);
      z = eig.eigenvectors().col(0);
    } else {
      Eigen::FullPivLU<Matrix> lu(sub);
      lu.setThreshold(1e-10);
      const Matrix ker = lu.kernel();
      z = ker.col(0);
    }
    z.normalize();
    if (z.sum() < 0.0) {
      z = -z;
    }
    Vector expected(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto d = static_cast<double>(g.degree(prof.nodes[static_cast<std::size_t>(i)]));
      expected(i) = (kind == LaplacianKind::Symmetric && m > 1) ? std::sqrt(d) : 1.0;
    }
    expected.normalize();
    prof.deviation = (z - expected).cwiseAbs().maxCoeff();
    prof.null_vector = std::move(z);
    prof.expected = std::move(expected);
    out.components.push_back(std::move(prof));
  }
  return out;
}

}  // namespace graphssm
