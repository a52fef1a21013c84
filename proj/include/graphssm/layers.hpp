#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "graphssm/common.hpp"
#include "graphssm/discretize.hpp"
#include "graphssm/io.hpp"
#include "graphssm/rng.hpp"
#include "graphssm/scan.hpp"
#include "graphssm/tgraph.hpp"

namespace graphssm {

/// L matrices of shape [V x D], one per snapshot.
using Sequence = std::vector<Matrix>;

inline Sequence features_of(const SnapshotSequence& seq) {
  Sequence out;
  out.reserve(seq.size());
  for (const Snapshot& s : seq) out.push_back(s.features);
  return out;
}

// ---------------------------------------------------------------- GNN

enum class GnnFlavor { GcnLike, SageMeanLike };

struct GnnParams {
  Matrix weight;  // [D_in x D_out]
  Vector bias;    // [D_out]
  GnnFlavor flavor{GnnFlavor::GcnLike};
  double self_mix{0.5};  // neighbor share; the node keeps 1 - self_mix

  [[nodiscard]] Eigen::Index in_dim() const { return weight.rows(); }
  [[nodiscard]] Eigen::Index out_dim() const { return weight.cols(); }

  void validate() const {
    require(bias.size() == weight.cols(), "GNN bias width disagrees with weight");
    require(weight.allFinite() && bias.allFinite(), "GNN parameters must be finite");
    require(self_mix >= 0.0 && self_mix <= 1.0, "GNN self_mix must lie in [0, 1]");
  }
};

/// One aggregate-then-combine round without the affine map.
/// Isolated nodes keep their own features.
inline Matrix gnn_aggregate(const Matrix& x, const Graph& g, GnnFlavor flavor, double self_mix) {
  require(x.rows() == static_cast<Eigen::Index>(g.num_nodes()), "feature rows disagree with node count");
  Matrix out(x.rows(), x.cols());
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    const auto nbrs = g.neighbors(v);
    if (nbrs.empty()) {
      out.row(v) = x.row(v);
      continue;
    }
    RowVector agg = RowVector::Zero(x.cols());
    const double dv = static_cast<double>(nbrs.size());
    for (NodeId u : nbrs) {
      const double w = flavor == GnnFlavor::GcnLike ? 1.0 / std::sqrt(dv * static_cast<double>(g.degree(u)))
                                                    : 1.0 / dv;
      agg += w * x.row(u);
    }
    out.row(v) = (1.0 - self_mix) * x.row(v) + self_mix * agg;
  }
  return out;
}

inline Matrix gnn_diffuse(const Matrix& x, const Graph& g, const GnnParams& p) {
  p.validate();
  require(x.cols() == p.in_dim(), "GNN input width disagrees with weight rows");
  Matrix out = gnn_aggregate(x, g, p.flavor, p.self_mix) * p.weight;
  out.rowwise() += p.bias.transpose();
  return out;
}

// ---------------------------------------------------------------- Mix

enum class MixerKind { Conv1D, Interp };

struct MixParams {
  MixerKind kind{MixerKind::Conv1D};
  Matrix kernel;  // Conv1D: [2 x D], row 0 weights the earlier input
  Matrix w_rho;   // Interp: [2D x D]
  Vector b_rho;
  Matrix w_xi;
  Vector b_xi;

  [[nodiscard]] Eigen::Index dim() const { return kind == MixerKind::Conv1D ? kernel.cols() : w_rho.cols(); }
};

inline Matrix mix_conv1d(const Matrix& z_prev, const Matrix& z_cur, const Matrix& kernel) {
  require(z_prev.rows() == z_cur.rows() && z_prev.cols() == z_cur.cols(), "mix inputs differ in shape");
  require(kernel.rows() == 2 && kernel.cols() == z_cur.cols(), "conv kernel must be [2 x D]");
  return (z_prev.array().rowwise() * kernel.row(0).array() + z_cur.array().rowwise() * kernel.row(1).array())
      .matrix();
}

/// rho * (xi * z1 + (1 - xi) * z2) with rho = softplus(W_rho [z1|z2] + b_rho),
/// xi = sigmoid(W_xi [z1|z2] + b_xi).
inline Matrix mix_interp(const Matrix& z1, const Matrix& z2, const MixParams& p) {
  require(z1.rows() == z2.rows() && z1.cols() == z2.cols(), "mix inputs differ in shape");
  const Eigen::Index d = z1.cols();
  require(p.w_rho.rows() == 2 * d && p.w_rho.cols() == d && p.w_xi.rows() == 2 * d && p.w_xi.cols() == d &&
              p.b_rho.size() == d && p.b_xi.size() == d,
          "interp parameters must be [2D x D] weights and [D] biases");
  Matrix cat(z1.rows(), 2 * d);
  cat << z1, z2;
  Matrix pre_rho = cat * p.w_rho;
  pre_rho.rowwise() += p.b_rho.transpose();
  Matrix pre_xi = cat * p.w_xi;
  pre_xi.rowwise() += p.b_xi.transpose();
  const Eigen::ArrayXXd rho = pre_rho.unaryExpr([](double v) { return softplus(v); }).array();
  const Eigen::ArrayXXd xi = pre_xi.unaryExpr([](double v) { return sigmoid(v); }).array();
  return (rho * (xi * z1.array() + (1.0 - xi) * z2.array())).matrix();
}

inline Matrix mix_apply(const MixParams& p, const Matrix& z_prev, const Matrix& z_cur) {
  return p.kind == MixerKind::Conv1D ? mix_conv1d(z_prev, z_cur, p.kernel) : mix_interp(z_prev, z_cur, p);
}

// ---------------------------------------------------------------- SSM layers

enum class SsmVariant { S4, S5, S6 };
enum class InitKind { S4dReal, S4dConst, Random };

/// Diagonal state init, [rows x n]; column index is the state index.
inline Matrix init_a(InitKind kind, Eigen::Index rows, Eigen::Index n, Rng* rng = nullptr) {
  require(rows >= 1 && n >= 1, "init_a needs a non-empty shape");
  switch (kind) {
    case InitKind::S4dReal: {
      Matrix a(rows, n);
      for (Eigen::Index j = 0; j < n; ++j) a.col(j).setConstant(-static_cast<double>(j + 1));
      return a;
    }
    case InitKind::S4dConst:
      return Matrix::Constant(rows, n, -0.5);
    case InitKind::Random: {
      if (rng == nullptr) throw InvalidInput("random init needs a generator");
      return -rng->glorot(rows, n).array().exp().matrix();
    }
  }
  throw InvalidInput("unknown init kind");
}

struct SsmLayerParams {
  SsmVariant variant{SsmVariant::S4};
  GnnParams gnn;
  MixParams mix;
  MixMechanism mechanism{MixMechanism::Ordinary};
  Matrix a;  // S4/S6 [D x N], S5 [1 x N]
  Matrix b;  // S4/S5 [D x N]
  Matrix c;  // S4 [D x N], S5 [N x D]
  Vector tau_weight;  // S4/S5 [D]
  double tau_bias{};
  GnnParams gnn_delta;  // S6: D_in -> D
  Vector delta_bias;    // S6 [D]
  GnnParams gnn_b;      // S6: D_in -> N
  GnnParams gnn_c;      // S6: D_in -> N

  [[nodiscard]] Eigen::Index in_dim() const { return gnn.in_dim(); }
  [[nodiscard]] Eigen::Index hidden_dim() const { return gnn.out_dim(); }
  [[nodiscard]] Eigen::Index state_dim() const { return a.cols(); }

  void validate() const {
    gnn.validate();
    const Eigen::Index d = hidden_dim();
    const Eigen::Index n = state_dim();
    require(n >= 1 && d >= 1, "layer needs positive hidden and state widths");
    require(a.allFinite() && (a.array() < 0.0).all(), "state matrix entries must be strictly negative");
    if (variant == SsmVariant::S5) {
      require(a.rows() == 1, "S5 state matrix must be [1 x N]");
    } else {
      require(a.rows() == d, "S4/S6 state matrix must be [D x N]");
    }
    if (variant == SsmVariant::S6) {
      gnn_delta.validate();
      gnn_b.validate();
      gnn_c.validate();
      require(gnn_delta.in_dim() == in_dim() && gnn_delta.out_dim() == d, "S6 delta GNN must map D_in -> D");
      require(gnn_b.in_dim() == in_dim() && gnn_b.out_dim() == n, "S6 B GNN must map D_in -> N");
      require(gnn_c.in_dim() == in_dim() && gnn_c.out_dim() == n, "S6 C GNN must map D_in -> N");
      require(delta_bias.size() == d, "S6 delta bias must have width D");
    } else {
      require(b.rows() == d && b.cols() == n, "B must be [D x N]");
      if (variant == SsmVariant::S4) {
        require(c.rows() == d && c.cols() == n, "S4 C must be [D x N]");
      } else {
        require(c.rows() == n && c.cols() == d, "S5 C must be [N x D]");
      }
      require(tau_weight.size() == d, "time-gap projection must have width D");
      require(std::isfinite(tau_bias), "time-gap bias must be finite");
    }
    if (mechanism != MixMechanism::Ordinary) {
      const Eigen::Index want = mechanism == MixMechanism::FeatureMix ? in_dim() : d;
      require(mix.dim() == want, "mix parameters have the wrong width for the mechanism");
    }
  }
};

struct LayerTrace {
  std::vector<Matrix> delta;  // per step: [V x 1] (S4/S5) or [V x D] (S6)
  std::vector<Eigen::Index> state_shape;  // {V, D, N} or {V, N}
  MixMechanism mechanism{MixMechanism::Ordinary};
  Sequence mixed;  // H_l fed to the recurrence
};

namespace detail {

inline Sequence diffuse_and_mix(const SnapshotSequence& seq, const Sequence& x, const SsmLayerParams& p) {
  const GnnFn gnn = [&p](const Matrix& in, const Graph& g) { return gnn_diffuse(in, g, p.gnn); };
  const MixFn mix = [&p](const Matrix& prev, const Matrix& cur) { return mix_apply(p.mix, prev, cur); };
  Sequence h;
  h.reserve(x.size());
  for (std::size_t l = 0; l < x.size(); ++l) {
    const Matrix* x_prev = l == 0 ? nullptr : &x[l - 1];
    const Graph* g_prev = l == 0 ? nullptr : &seq[l - 1].graph;
    h.push_back(mixed_estimate(x_prev, x[l], g_prev, seq[l].graph, p.mechanism, gnn, mix));
  }
  return h;
}

inline void check_inputs(const SnapshotSequence& seq, const Sequence& x, const SsmLayerParams& p,
                         SsmVariant want) {
  require(p.variant == want, "layer parameters are for a different variant");
  p.validate();
  require(!seq.empty() && x.size() == seq.size(), "hidden sequence length disagrees with snapshots");
  for (const Matrix& m : x) {
    require(m.rows() == static_cast<Eigen::Index>(seq.num_nodes()) && m.cols() == p.in_dim(),
            "hidden input has the wrong shape");
  }
}

inline Vector tau_delta(const Matrix& h, const SsmLayerParams& p) {
  return ((h * p.tau_weight).array() + p.tau_bias).unaryExpr([](double v) { return softplus(v); }).matrix();
}

}  // namespace detail

/// SISO recurrence with per-node scalar time gap, state [V x D x N].
inline Sequence s4_forward(const SnapshotSequence& seq, const Sequence& x, const SsmLayerParams& p,
                           const ScanOptions& scan = {}, LayerTrace* trace = nullptr) {
  detail::check_inputs(seq, x, p, SsmVariant::S4);
  const Sequence h = detail::diffuse_and_mix(seq, x, p);
  const Eigen::Index v_count = h.front().rows();
  const Eigen::Index d = p.hidden_dim();
  const Eigen::Index n = p.state_dim();
  const auto steps = static_cast<Eigen::Index>(h.size());
  RecurrenceInputs rec{Matrix(v_count * d * n, steps), Matrix(v_count * d * n, steps),
                       Vector::Zero(v_count * d * n)};
  std::vector<Matrix> deltas;
  for (Eigen::Index l = 0; l < steps; ++l) {
    const Vector delta = detail::tau_delta(h[l], p);
    for (Eigen::Index v = 0; v < v_count; ++v) {
      for (Eigen::Index k = 0; k < d; ++k) {
        const Eigen::Index base = (v * d + k) * n;
        rec.decay.col(l).segment(base, n) = (delta(v) * p.a.row(k).array()).exp().transpose();
        rec.drive.col(l).segment(base, n) = (delta(v) * h[l](v, k)) * p.b.row(k).transpose();
      }
    }
    deltas.push_back(delta);
  }
  const Matrix states = run_scan(rec, scan);
  Sequence y(h.size(), Matrix(v_count, d));
  for (Eigen::Index l = 0; l < steps; ++l) {
    for (Eigen::Index v = 0; v < v_count; ++v) {
      for (Eigen::Index k = 0; k < d; ++k) {
        y[l](v, k) = states.col(l).segment((v * d + k) * n, n).dot(p.c.row(k).transpose());
      }
    }
  }
  if (trace) {
    trace->delta = std::move(deltas);
    trace->state_shape = {v_count, d, n};
    trace->mechanism = p.mechanism;
    trace->mixed = h;
  }
  return y;
}

/// MIMO recurrence with one shared state per node, [V x N].
inline Sequence s5_forward(const SnapshotSequence& seq, const Sequence& x, const SsmLayerParams& p,
                           const ScanOptions& scan = {}, LayerTrace* trace = nullptr) {
  detail::check_inputs(seq, x, p, SsmVariant::S5);
  const Sequence h = detail::diffuse_and_mix(seq, x, p);
  const Eigen::Index v_count = h.front().rows();
  const Eigen::Index n = p.state_dim();
  const auto steps = static_cast<Eigen::Index>(h.size());
  RecurrenceInputs rec{Matrix(v_count * n, steps), Matrix(v_count * n, steps), Vector::Zero(v_count * n)};
  std::vector<Matrix> deltas;
  for (Eigen::Index l = 0; l < steps; ++l) {
    const Vector delta = detail::tau_delta(h[l], p);
    const Matrix hb = h[l] * p.b;  // [V x N]
    for (Eigen::Index v = 0; v < v_count; ++v) {
      rec.decay.col(l).segment(v * n, n) = (delta(v) * p.a.row(0).array()).exp().transpose();
      rec.drive.col(l).segment(v * n, n) = delta(v) * hb.row(v).transpose();
    }
    deltas.push_back(delta);
  }
  const Matrix states = run_scan(rec, scan);
  Sequence y;
  y.reserve(h.size());
  for (Eigen::Index l = 0; l < steps; ++l) {
    const Matrix u = states.col(l).reshaped(n, v_count).transpose();  // [V x N]
    y.push_back(u * p.c);
  }
  if (trace) {
    trace->delta = std::move(deltas);
    trace->state_shape = {v_count, n};
    trace->mechanism = p.mechanism;
    trace->mixed = h;
  }
  return y;
}

/// Selective SISO recurrence: time gap, input and readout maps depend on the
/// snapshot through their own GNNs. State [V x D x N].
inline Sequence s6_forward(const SnapshotSequence& seq, const Sequence& x, const SsmLayerParams& p,
                           const ScanOptions& scan = {}, LayerTrace* trace = nullptr) {
  detail::check_inputs(seq, x, p, SsmVariant::S6);
  const Sequence h = detail::diffuse_and_mix(seq, x, p);
  const Eigen::Index v_count = h.front().rows();
  const Eigen::Index d = p.hidden_dim();
  const Eigen::Index n = p.state_dim();
  const auto steps = static_cast<Eigen::Index>(h.size());
  RecurrenceInputs rec{Matrix(v_count * d * n, steps), Matrix(v_count * d * n, steps),
                       Vector::Zero(v_count * d * n)};
  std::vector<Matrix> deltas;
  std::vector<Matrix> c_sel;
  for (Eigen::Index l = 0; l < steps; ++l) {
    const Graph& g = seq[static_cast<std::size_t>(l)].graph;
    const Matrix& xl = x[static_cast<std::size_t>(l)];
    Matrix delta = gnn_diffuse(xl, g, p.gnn_delta);
    delta.rowwise() += p.delta_bias.transpose();
    delta = delta.unaryExpr([](double v) { return softplus(v); });
    const Matrix b_sel = gnn_diffuse(xl, g, p.gnn_b);  // [V x N]
    c_sel.push_back(gnn_diffuse(xl, g, p.gnn_c));      // [V x N]
    for (Eigen::Index v = 0; v < v_count; ++v) {
      for (Eigen::Index k = 0; k < d; ++k) {
        const Eigen::Index base = (v * d + k) * n;
        rec.decay.col(l).segment(base, n) = (delta(v, k) * p.a.row(k).array()).exp().transpose();
        rec.drive.col(l).segment(base, n) = (delta(v, k) * h[l](v, k)) * b_sel.row(v).transpose();
      }
    }
    deltas.push_back(std::move(delta));
  }
  const Matrix states = run_scan(rec, scan);
  Sequence y(h.size(), Matrix(v_count, d));
  for (Eigen::Index l = 0; l < steps; ++l) {
    for (Eigen::Index v = 0; v < v_count; ++v) {
      for (Eigen::Index k = 0; k < d; ++k) {
        y[l](v, k) = states.col(l).segment((v * d + k) * n, n).dot(c_sel[l].row(v).transpose());
      }
    }
  }
  if (trace) {
    trace->delta = std::move(deltas);
    trace->state_shape = {v_count, d, n};
    trace->mechanism = p.mechanism;
    trace->mixed = h;
  }
  return y;
}

inline Sequence ssm_forward(const SnapshotSequence& seq, const Sequence& x, const SsmLayerParams& p,
                            const ScanOptions& scan = {}, LayerTrace* trace = nullptr) {
  switch (p.variant) {
    case SsmVariant::S4: return s4_forward(seq, x, p, scan, trace);
    case SsmVariant::S5: return s5_forward(seq, x, p, scan, trace);
    case SsmVariant::S6: return s6_forward(seq, x, p, scan, trace);
  }
  throw InvalidInput("unknown SSM variant");
}

// ---------------------------------------------------------------- blocks

enum class Activation { Identity, Relu, Tanh };

inline Matrix activate(const Matrix& m, Activation act) {
  switch (act) {
    case Activation::Identity: return m;
    case Activation::Relu: return m.cwiseMax(0.0);
    case Activation::Tanh: return m.array().tanh().matrix();
  }
  throw InvalidInput("unknown activation");
}

inline Matrix layer_norm(const Matrix& m, const Vector& gamma, const Vector& beta, double eps = 1e-5) {
  require(gamma.size() == m.cols() && beta.size() == m.cols(), "layer norm parameters have the wrong width");
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double mean = m.row(i).mean();
    const double var = (m.row(i).array() - mean).square().mean();
    out.row(i) = ((m.row(i).array() - mean) / std::sqrt(var + eps)).matrix();
  }
  out = (out.array().rowwise() * gamma.transpose().array()).matrix();
  out.rowwise() += beta.transpose();
  return out;
}

struct BlockParams {
  SsmLayerParams layer;
  Matrix res_weight;  // [D_in x D]
  Vector res_bias;    // [D]
  Activation activation{Activation::Relu};
  bool layer_norm{false};
  Vector ln_gamma;
  Vector ln_beta;
};

/// H_out = act(SSM(H_in)) + H_in W + b, then layer norm when enabled.
inline Sequence block_forward(const Sequence& hidden_in, const SnapshotSequence& seq, const BlockParams& p,
                              const ScanOptions& scan = {}, LayerTrace* trace = nullptr) {
  require(p.res_weight.rows() == p.layer.in_dim() && p.res_weight.cols() == p.layer.hidden_dim() &&
              p.res_bias.size() == p.layer.hidden_dim(),
          "residual projection disagrees with the layer widths");
  const Sequence y = ssm_forward(seq, hidden_in, p.layer, scan, trace);
  Sequence out;
  out.reserve(y.size());
  for (std::size_t l = 0; l < y.size(); ++l) {
    Matrix m = activate(y[l], p.activation) + hidden_in[l] * p.res_weight;
    m.rowwise() += p.res_bias.transpose();
    if (p.layer_norm) m = layer_norm(m, p.ln_gamma, p.ln_beta);
    out.push_back(std::move(m));
  }
  return out;
}

struct Model {
  std::vector<BlockParams> blocks;
};

inline Sequence model_forward(const Model& model, const SnapshotSequence& seq, const ScanOptions& scan = {},
                              std::vector<LayerTrace>* traces = nullptr) {
  require(!model.blocks.empty(), "model needs at least one block");
  Sequence h = features_of(seq);
  if (traces) traces->assign(model.blocks.size(), LayerTrace{});
  for (std::size_t k = 0; k < model.blocks.size(); ++k) {
    h = block_forward(h, seq, model.blocks[k], scan, traces ? &(*traces)[k] : nullptr);
  }
  return h;
}

struct ModelConfig {
  SsmVariant variant{SsmVariant::S4};
  std::size_t input_dim{8};
  std::size_t hidden_dim{16};
  std::size_t state_dim{16};
  std::size_t num_blocks{1};
  std::size_t seq_len{16};
  InitKind init{InitKind::S4dReal};
  MixerKind mixer{MixerKind::Conv1D};
  MixMechanism mechanism{MixMechanism::FeatureMix};
  bool mix_first_layer_only{true};
  GnnFlavor flavor{GnnFlavor::GcnLike};
  double self_mix{0.5};
  Activation activation{Activation::Relu};

  void validate() const {
    require(input_dim >= 1 && hidden_dim >= 1 && state_dim >= 1, "model widths must be positive");
    require(num_blocks >= 1, "model needs at least one block");
    require(seq_len >= 1, "sequence length must be positive");
    require(self_mix >= 0.0 && self_mix <= 1.0, "self_mix must lie in [0, 1]");
  }
};

inline GnnParams random_gnn(Eigen::Index in, Eigen::Index out, GnnFlavor flavor, double self_mix, Rng& rng) {
  return GnnParams{rng.glorot(in, out), Vector::Zero(out), flavor, self_mix};
}

inline MixParams random_mix(MixerKind kind, Eigen::Index d, Rng& rng) {
  MixParams m;
  m.kind = kind;
  if (kind == MixerKind::Conv1D) {
    m.kernel = Matrix::Constant(2, d, 0.5);
  } else {
    m.w_rho = rng.glorot(2 * d, d);
    m.b_rho = Vector::Zero(d);
    m.w_xi = rng.glorot(2 * d, d);
    m.b_xi = Vector::Zero(d);
  }
  return m;
}

/// Mechanism used by block k under the config (mixing confined to the first block by default).
inline MixMechanism block_mechanism(const ModelConfig& cfg, std::size_t k) {
  return (k == 0 || !cfg.mix_first_layer_only) ? cfg.mechanism : MixMechanism::Ordinary;
}

inline Model build_model(const ModelConfig& cfg, const Rng& root) {
  cfg.validate();
  Model model;
  const auto d = static_cast<Eigen::Index>(cfg.hidden_dim);
  const auto n = static_cast<Eigen::Index>(cfg.state_dim);
  const double delta_bias = inverse_softplus(1.0 / static_cast<double>(cfg.seq_len));
  for (std::size_t k = 0; k < cfg.num_blocks; ++k) {
    Rng rng = root.split("block").split(k);
    const Eigen::Index in = k == 0 ? static_cast<Eigen::Index>(cfg.input_dim) : d;
    BlockParams blk;
    SsmLayerParams& p = blk.layer;
    p.variant = cfg.variant;
    p.mechanism = block_mechanism(cfg, k);
    p.gnn = random_gnn(in, d, cfg.flavor, cfg.self_mix, rng);
    if (p.mechanism != MixMechanism::Ordinary) {
      p.mix = random_mix(cfg.mixer, p.mechanism == MixMechanism::FeatureMix ? in : d, rng);
    }
    Rng init_rng = rng.split("a");
    p.a = init_a(cfg.init, cfg.variant == SsmVariant::S5 ? 1 : d, n, &init_rng);
    if (cfg.variant == SsmVariant::S6) {
      p.gnn_delta = random_gnn(in, d, cfg.flavor, cfg.self_mix, rng);
      p.delta_bias = Vector::Constant(d, delta_bias);
      p.gnn_b = random_gnn(in, n, cfg.flavor, cfg.self_mix, rng);
      p.gnn_c = random_gnn(in, n, cfg.flavor, cfg.self_mix, rng);
    } else {
      p.b = Matrix::Ones(d, n);
      p.c = cfg.variant == SsmVariant::S4 ? rng.glorot(d, n) : rng.glorot(n, d);
      p.tau_weight = Vector::Zero(d);
      p.tau_bias = delta_bias;
    }
    blk.res_weight = Matrix::Zero(in, d);
    blk.res_bias = Vector::Zero(d);
    blk.activation = cfg.activation;
    blk.layer_norm = cfg.variant == SsmVariant::S6;
    if (blk.layer_norm) {
      blk.ln_gamma = Vector::Ones(d);
      blk.ln_beta = Vector::Zero(d);
    }
    model.blocks.push_back(std::move(blk));
  }
  return model;
}

// ---------------------------------------------------------------- varying node sets

enum class AlignRule { Zero, NeighborMean };

/// Re-indexes memory rows from the sorted node list v_prev to v_new.
/// Surviving nodes keep their rows; new nodes start at zero or at the mean of
/// the states of their surviving neighbors in `graph` (global node ids).
inline Matrix align_memory(const Matrix& u_prev, const std::vector<NodeId>& v_prev,
                           const std::vector<NodeId>& v_new, AlignRule rule, const Graph* graph = nullptr) {
  require(u_prev.rows() == static_cast<Eigen::Index>(v_prev.size()), "memory rows disagree with v_prev");
  require(std::is_sorted(v_prev.begin(), v_prev.end()) &&
              std::adjacent_find(v_prev.begin(), v_prev.end()) == v_prev.end(),
          "v_prev must be sorted and unique");
  require(std::is_sorted(v_new.begin(), v_new.end()) &&
              std::adjacent_find(v_new.begin(), v_new.end()) == v_new.end(),
          "v_new must be sorted and unique");
  require(rule == AlignRule::Zero || graph != nullptr, "neighbor-mean alignment needs a graph");
  std::map<NodeId, Eigen::Index> prev_row;
  for (std::size_t i = 0; i < v_prev.size(); ++i) prev_row[v_prev[i]] = static_cast<Eigen::Index>(i);

  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(v_new.size()), u_prev.cols());
  for (std::size_t i = 0; i < v_new.size(); ++i) {
    const NodeId node = v_new[i];
    const auto row = static_cast<Eigen::Index>(i);
    if (const auto it = prev_row.find(node); it != prev_row.end()) {
      out.row(row) = u_prev.row(it->second);
      continue;
    }
    if (rule == AlignRule::Zero || node >= graph->num_nodes()) continue;
    RowVector acc = RowVector::Zero(u_prev.cols());
    std::size_t count = 0;
    for (NodeId u : graph->neighbors(node)) {
      const auto jt = prev_row.find(u);
      if (jt == prev_row.end() || !std::binary_search(v_new.begin(), v_new.end(), u)) continue;
      acc += u_prev.row(jt->second);
      ++count;
    }
    if (count > 0) out.row(row) = acc / static_cast<double>(count);
  }
  return out;
}

// ---------------------------------------------------------------- checkpoints

inline const char* to_string(SsmVariant v) {
  switch (v) {
    case SsmVariant::S4: return "s4";
    case SsmVariant::S5: return "s5";
    case SsmVariant::S6: return "s6";
  }
  return "?";
}

inline const char* to_string(InitKind k) {
  switch (k) {
    case InitKind::S4dReal: return "hippo";
    case InitKind::S4dConst: return "const";
    case InitKind::Random: return "random";
  }
  return "?";
}

inline const char* to_string(MixMechanism m) {
  switch (m) {
    case MixMechanism::Ordinary: return "ordinary";
    case MixMechanism::FeatureMix: return "feature";
    case MixMechanism::ReprMix: return "repr";
  }
  return "?";
}

inline const char* to_string(MixerKind m) { return m == MixerKind::Conv1D ? "conv1d" : "interp"; }
inline const char* to_string(GnnFlavor f) { return f == GnnFlavor::GcnLike ? "gcn" : "sage"; }

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

template <class E>
E parse_enum(const std::string& text, std::initializer_list<E> values) {
  for (E v : values) {
    if (text == to_string(v)) return v;
  }
  throw InvalidInput("unrecognized value '" + text + "'");
}

namespace detail {

inline void put_gnn(io::ParamFile& pf, const std::string& name, const GnnParams& g) {
  pf.meta[name + ".flavor"] = to_string(g.flavor);
  pf.meta[name + ".self_mix"] = io::detail::format_double(g.self_mix);
  pf.tensors.emplace_back(name + ".weight", g.weight);
  pf.tensors.emplace_back(name + ".bias", g.bias);
}

inline GnnParams get_gnn(const io::ParamFile& pf, const std::string& name) {
  GnnParams g;
  g.flavor = parse_enum(pf.meta_value(name + ".flavor"), {GnnFlavor::GcnLike, GnnFlavor::SageMeanLike});
  g.self_mix = std::stod(pf.meta_value(name + ".self_mix"));
  g.weight = pf.tensor(name + ".weight");
  g.bias = pf.tensor(name + ".bias").col(0);
  return g;
}

}  // namespace detail

inline io::ParamFile model_to_params(const Model& model) {
  io::ParamFile pf;
  pf.meta["blocks"] = std::to_string(model.blocks.size());
  for (std::size_t k = 0; k < model.blocks.size(); ++k) {
    const BlockParams& blk = model.blocks[k];
    const SsmLayerParams& p = blk.layer;
    const std::string pre = "block" + std::to_string(k);
    pf.meta[pre + ".variant"] = to_string(p.variant);
    pf.meta[pre + ".mechanism"] = to_string(p.mechanism);
    pf.meta[pre + ".activation"] = to_string(blk.activation);
    pf.meta[pre + ".layer_norm"] = blk.layer_norm ? "1" : "0";
    detail::put_gnn(pf, pre + ".gnn", p.gnn);
    if (p.mechanism != MixMechanism::Ordinary) {
      pf.meta[pre + ".mixer"] = to_string(p.mix.kind);
      if (p.mix.kind == MixerKind::Conv1D) {
        pf.tensors.emplace_back(pre + ".mix.kernel", p.mix.kernel);
      } else {
        pf.tensors.emplace_back(pre + ".mix.w_rho", p.mix.w_rho);
        pf.tensors.emplace_back(pre + ".mix.b_rho", p.mix.b_rho);
        pf.tensors.emplace_back(pre + ".mix.w_xi", p.mix.w_xi);
        pf.tensors.emplace_back(pre + ".mix.b_xi", p.mix.b_xi);
      }
    }
    pf.tensors.emplace_back(pre + ".a", p.a);
    if (p.variant == SsmVariant::S6) {
      detail::put_gnn(pf, pre + ".gnn_delta", p.gnn_delta);
      detail::put_gnn(pf, pre + ".gnn_b", p.gnn_b);
      detail::put_gnn(pf, pre + ".gnn_c", p.gnn_c);
      pf.tensors.emplace_back(pre + ".delta_bias", p.delta_bias);
    } else {
      pf.tensors.emplace_back(pre + ".b", p.b);
      pf.tensors.emplace_back(pre + ".c", p.c);
      pf.tensors.emplace_back(pre + ".tau_weight", p.tau_weight);
      pf.tensors.emplace_back(pre + ".tau_bias", Matrix::Constant(1, 1, p.tau_bias));
    }
    pf.tensors.emplace_back(pre + ".res_weight", blk.res_weight);
    pf.tensors.emplace_back(pre + ".res_bias", blk.res_bias);
    if (blk.layer_norm) {
      pf.tensors.emplace_back(pre + ".ln_gamma", blk.ln_gamma);
      pf.tensors.emplace_back(pre + ".ln_beta", blk.ln_beta);
    }
  }
  return pf;
}

inline Model model_from_params(const io::ParamFile& pf) {
  Model model;
  std::size_t count{};
  try {
    count = std::stoul(pf.meta_value("blocks"));
  } catch (const std::logic_error&) {
    throw FormatError("checkpoint has a malformed block count");
  }
  try {
    for (std::size_t k = 0; k < count; ++k) {
      const std::string pre = "block" + std::to_string(k);
      BlockParams blk;
      SsmLayerParams& p = blk.layer;
      p.variant = parse_enum(pf.meta_value(pre + ".variant"), {SsmVariant::S4, SsmVariant::S5, SsmVariant::S6});
      p.mechanism = parse_enum(pf.meta_value(pre + ".mechanism"),
                               {MixMechanism::Ordinary, MixMechanism::FeatureMix, MixMechanism::ReprMix});
      blk.activation = parse_enum(pf.meta_value(pre + ".activation"),
                                  {Activation::Identity, Activation::Relu, Activation::Tanh});
      blk.layer_norm = pf.meta_value(pre + ".layer_norm") == "1";
      p.gnn = detail::get_gnn(pf, pre + ".gnn");
      if (p.mechanism != MixMechanism::Ordinary) {
        p.mix.kind = parse_enum(pf.meta_value(pre + ".mixer"), {MixerKind::Conv1D, MixerKind::Interp});
        if (p.mix.kind == MixerKind::Conv1D) {
          p.mix.kernel = pf.tensor(pre + ".mix.kernel");
        } else {
          p.mix.w_rho = pf.tensor(pre + ".mix.w_rho");
          p.mix.b_rho = pf.tensor(pre + ".mix.b_rho").col(0);
          p.mix.w_xi = pf.tensor(pre + ".mix.w_xi");
          p.mix.b_xi = pf.tensor(pre + ".mix.b_xi").col(0);
        }
      }
      p.a = pf.tensor(pre + ".a");
      if (p.variant == SsmVariant::S6) {
        p.gnn_delta = detail::get_gnn(pf, pre + ".gnn_delta");
        p.gnn_b = detail::get_gnn(pf, pre + ".gnn_b");
        p.gnn_c = detail::get_gnn(pf, pre + ".gnn_c");
        p.delta_bias = pf.tensor(pre + ".delta_bias").col(0);
      } else {
        p.b = pf.tensor(pre + ".b");
        p.c = pf.tensor(pre + ".c");
        p.tau_weight = pf.tensor(pre + ".tau_weight").col(0);
        p.tau_bias = pf.tensor(pre + ".tau_bias")(0, 0);
      }
      blk.res_weight = pf.tensor(pre + ".res_weight");
      blk.res_bias = pf.tensor(pre + ".res_bias").col(0);
      if (blk.layer_norm) {
        blk.ln_gamma = pf.tensor(pre + ".ln_gamma").col(0);
        blk.ln_beta = pf.tensor(pre + ".ln_beta").col(0);
      }
      p.validate();
      model.blocks.push_back(std::move(blk));
    }
  } catch (const InvalidInput& err) {
    throw FormatError(std::string("invalid checkpoint: ") + err.what());
  }
  return model;
}

}  // namespace graphssm
