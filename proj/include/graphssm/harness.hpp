#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "graphssm/common.hpp"
#include "graphssm/io.hpp"
#include "graphssm/layers.hpp"
#include "graphssm/rng.hpp"
#include "graphssm/tgraph.hpp"

namespace graphssm {

struct TaskConfig {
  std::size_t num_nodes{200};
  std::size_t num_steps{16};
  std::size_t feature_dim{8};
  std::size_t num_classes{4};
  double drift_rate{0.1};  // centroid rotation per step (radians) and edge rewiring fraction
  double noise{3.0};
  double mean_degree{4.0};
  double homophily{0.8};  // share of edges drawn inside a community
  double train_fraction{0.6};
  double val_fraction{0.2};

  void validate() const {
    require(num_classes >= 2, "task needs at least two classes");
    require(num_nodes >= 4 * num_classes, "task needs at least four nodes per class");
    require(num_steps >= 1 && feature_dim >= 2, "task needs at least one step and two feature dimensions");
    require(drift_rate >= 0.0 && drift_rate <= 1.0, "drift_rate must lie in [0, 1]");
    require(noise >= 0.0 && std::isfinite(noise), "noise must be finite and non-negative");
    require(mean_degree >= 0.0 && mean_degree < static_cast<double>(num_nodes - 1), "mean_degree out of range");
    require(homophily >= 0.0 && homophily <= 1.0, "homophily must lie in [0, 1]");
    require(train_fraction > 0.0 && val_fraction > 0.0 && train_fraction + val_fraction < 1.0,
            "split fractions must be positive and leave room for a test split");
  }
};

struct SyntheticTask {
  SnapshotSequence sequence;
  io::LabelFile labels;

  [[nodiscard]] std::vector<std::size_t> nodes_in(io::Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < labels.splits.size(); ++v) {
      if (labels.splits[v] == split) out.push_back(v);
    }
    return out;
  }
};

namespace detail {

template <class T>
void shuffle(std::vector<T>& xs, Rng& rng) {
  for (std::size_t i = xs.size(); i > 1; --i) {
    std::swap(xs[i - 1], xs[rng.below(i)]);
  }
}

inline Edge random_edge(const std::vector<std::vector<NodeId>>& members, const std::vector<int>& label,
                        double homophily, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(label.size());
  while (true) {
    const auto u = static_cast<NodeId>(rng.below(n));
    NodeId v{};
    if (rng.uniform() < homophily) {
      const auto& pool = members[static_cast<std::size_t>(label[u])];
      v = pool[rng.below(pool.size())];
    } else {
      v = static_cast<NodeId>(rng.below(n));
    }
    if (u != v) return Edge(u, v);
  }
}

}  // namespace detail

/// Planted-partition temporal graph. Communities are fixed; edges rewire at
/// drift_rate per step; features are a slowly rotating class centroid plus
/// fresh Gaussian noise at every step.
inline SyntheticTask gen_synthetic(std::uint64_t seed, const TaskConfig& cfg) {
  cfg.validate();
  const Rng root(seed);
  Rng label_rng = root.split("labels");
  Rng graph_rng = root.split("graph");
  Rng feat_rng = root.split("features");
  const std::size_t n = cfg.num_nodes;
  const std::size_t c = cfg.num_classes;
  const auto d = static_cast<Eigen::Index>(cfg.feature_dim);

  std::vector<int> label(n);
  for (std::size_t v = 0; v < n; ++v) label[v] = static_cast<int>(v % c);
  detail::shuffle(label, label_rng);
  std::vector<std::vector<NodeId>> members(c);
  for (std::size_t v = 0; v < n; ++v) members[static_cast<std::size_t>(label[v])].push_back(static_cast<NodeId>(v));

  io::LabelFile lf;
  lf.num_classes = c;
  lf.labels = label;
  lf.splits.assign(n, io::Split::Test);
  for (auto pool : members) {
    detail::shuffle(pool, label_rng);
    const auto train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(pool.size())));
    const auto val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(pool.size())));
    for (std::size_t i = 0; i < pool.size(); ++i) {
      lf.splits[pool[i]] = i < train ? io::Split::Train : i < train + val ? io::Split::Val : io::Split::Test;
    }
  }

  const Matrix centroids = feat_rng.normal_matrix(static_cast<Eigen::Index>(c), d);
  const auto target_edges = static_cast<std::size_t>(std::llround(cfg.mean_degree * static_cast<double>(n) / 2.0));
  std::set<Edge> edges;
  while (edges.size() < target_edges) edges.insert(detail::random_edge(members, label, cfg.homophily, graph_rng));

  std::vector<Snapshot> snaps;
  for (std::size_t l = 0; l < cfg.num_steps; ++l) {
    if (l > 0) {
      std::vector<Edge> current(edges.begin(), edges.end());
      for (const Edge& e : current) {
        if (graph_rng.uniform() < cfg.drift_rate) edges.erase(e);
      }
      while (edges.size() < target_edges) edges.insert(detail::random_edge(members, label, cfg.homophily, graph_rng));
    }
    // rotate each consecutive coordinate pair by drift_rate * l
    const double angle = cfg.drift_rate * static_cast<double>(l);
    Matrix rotated = centroids;
    for (Eigen::Index j = 0; j + 1 < d; j += 2) {
      rotated.col(j) = std::cos(angle) * centroids.col(j) - std::sin(angle) * centroids.col(j + 1);
      rotated.col(j + 1) = std::sin(angle) * centroids.col(j) + std::cos(angle) * centroids.col(j + 1);
    }
    Matrix x = feat_rng.normal_matrix(static_cast<Eigen::Index>(n), d, cfg.noise);
    for (std::size_t v = 0; v < n; ++v) x.row(static_cast<Eigen::Index>(v)) += rotated.row(label[v]);
    snaps.push_back(Snapshot{Graph(n, std::vector<Edge>(edges.begin(), edges.end())), std::move(x),
                             static_cast<double>(l + 1)});
  }
  return SyntheticTask{SnapshotSequence(std::move(snaps)), std::move(lf)};
}

/// Last-step representation of the frozen model, [V x D].
inline Matrix extract_features(const SyntheticTask& task, const Model& model, const ScanOptions& scan = {}) {
  return model_forward(model, task.sequence, scan).back();
}

/// Static baseline: the first block's GNN on the last snapshot only.
inline Matrix static_features(const SyntheticTask& task, const Model& model) {
  require(!model.blocks.empty(), "model needs at least one block");
  const Snapshot& last = task.sequence[task.sequence.size() - 1];
  return gnn_diffuse(last.features, last.graph, model.blocks.front().layer.gnn);
}

// ---------------------------------------------------------------- readout

struct ReadoutParams {
  Matrix weight;  // [D x C]
  Vector bias;    // [C]
};

struct ReadoutConfig {
  double lr{0.5};
  std::size_t epochs{300};
  double l2{1e-3};
};

struct LossAndGrad {
  double loss{};
  Matrix grad_weight;
  Vector grad_bias;
};

inline Matrix readout_logits(const Matrix& x, const ReadoutParams& p) {
  Matrix logits = x * p.weight;
  logits.rowwise() += p.bias.transpose();
  return logits;
}

/// Mean softmax cross-entropy over `rows` plus (l2 / 2) ||W||^2, with its gradient.
inline LossAndGrad readout_loss(const Matrix& x, const std::vector<int>& labels, const std::vector<std::size_t>& rows,
                                const ReadoutParams& p, double l2) {
  require(!rows.empty(), "readout loss needs at least one row");
  const Eigen::Index c = p.weight.cols();
  LossAndGrad out{0.0, Matrix::Zero(p.weight.rows(), c), Vector::Zero(c)};
  for (std::size_t r : rows) {
    const auto i = static_cast<Eigen::Index>(r);
    RowVector z = x.row(i) * p.weight + p.bias.transpose();
    const double zmax = z.maxCoeff();
    RowVector e = (z.array() - zmax).exp().matrix();
    const double total = e.sum();
    RowVector prob = e / total;
    out.loss += -(z(labels[r]) - zmax - std::log(total));
    prob(labels[r]) -= 1.0;
    out.grad_weight.noalias() += x.row(i).transpose() * prob;
    out.grad_bias += prob.transpose();
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  out.loss = out.loss * inv + 0.5 * l2 * p.weight.squaredNorm();
  out.grad_weight = out.grad_weight * inv + l2 * p.weight;
  out.grad_bias *= inv;
  return out;
}

inline std::vector<int> predict(const Matrix& x, const ReadoutParams& p) {
  const Matrix logits = readout_logits(x, p);
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best{};
    logits.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

struct F1Scores {
  double micro{};
  double macro{};
};

/// Classes absent from both predictions and labels contribute 0 to macro-F1.
inline F1Scores f1_scores(const std::vector<int>& preds, const std::vector<int>& labels, std::size_t num_classes) {
  require(preds.size() == labels.size(), "predictions and labels differ in length");
  require(!labels.empty(), "f1 needs at least one label");
  std::vector<double> tp(num_classes), fp(num_classes), fn(num_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    require(preds[i] >= 0 && static_cast<std::size_t>(preds[i]) < num_classes && labels[i] >= 0 &&
                static_cast<std::size_t>(labels[i]) < num_classes,
            "class id out of range");
    if (preds[i] == labels[i]) {
      tp[static_cast<std::size_t>(preds[i])] += 1.0;
    } else {
      fp[static_cast<std::size_t>(preds[i])] += 1.0;
      fn[static_cast<std::size_t>(labels[i])] += 1.0;
    }
  }
  double tp_all = 0.0;
  double fp_all = 0.0;
  double fn_all = 0.0;
  double macro = 0.0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    tp_all += tp[k];
    fp_all += fp[k];
    fn_all += fn[k];
    const double denom = 2.0 * tp[k] + fp[k] + fn[k];
    macro += denom > 0.0 ? 2.0 * tp[k] / denom : 0.0;
  }
  return {2.0 * tp_all / (2.0 * tp_all + fp_all + fn_all), macro / static_cast<double>(num_classes)};
}

inline F1Scores evaluate(const Matrix& x, const ReadoutParams& p, const std::vector<int>& labels,
                         const std::vector<std::size_t>& rows, std::size_t num_classes) {
  const std::vector<int> all = predict(x, p);
  std::vector<int> preds;
  std::vector<int> truth;
  for (std::size_t r : rows) {
    preds.push_back(all[r]);
    truth.push_back(labels[r]);
  }
  return f1_scores(preds, truth, num_classes);
}

/// Full-batch gradient descent from zero; keeps the parameters with the best
/// validation micro-F1 (first occurrence wins ties).
inline ReadoutParams train_readout(const Matrix& features, const io::LabelFile& labels, const ReadoutConfig& cfg) {
  require(cfg.lr > 0.0 && std::isfinite(cfg.lr), "learning rate must be positive");
  require(labels.labels.size() == static_cast<std::size_t>(features.rows()), "labels disagree with feature rows");
  require(features.allFinite(), "features must be finite");
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  for (std::size_t v = 0; v < labels.splits.size(); ++v) {
    if (labels.splits[v] == io::Split::Train) train.push_back(v);
    if (labels.splits[v] == io::Split::Val) val.push_back(v);
  }
  require(!train.empty(), "training split is empty");
  const auto c = static_cast<Eigen::Index>(labels.num_classes);
  ReadoutParams p{Matrix::Zero(features.cols(), c), Vector::Zero(c)};
  ReadoutParams best = p;
  double best_score = -1.0;
  for (std::size_t epoch = 0; epoch <= cfg.epochs; ++epoch) {
    const double score = val.empty() ? 0.0 : evaluate(features, p, labels.labels, val, labels.num_classes).micro;
    if (score > best_score) {
      best_score = score;
      best = p;
    }
    if (epoch == cfg.epochs) break;
    const LossAndGrad lg = readout_loss(features, labels.labels, train, p, cfg.l2);
    p.weight -= cfg.lr * lg.grad_weight;
    p.bias -= cfg.lr * lg.grad_bias;
  }
  return val.empty() ? p : best;
}

/// Column-wise standardization using statistics of the given rows.
inline Matrix standardize(const Matrix& x, const std::vector<std::size_t>& rows) {
  require(!rows.empty(), "standardize needs at least one row");
  RowVector mean = RowVector::Zero(x.cols());
  for (std::size_t r : rows) mean += x.row(static_cast<Eigen::Index>(r));
  mean /= static_cast<double>(rows.size());
  RowVector var = RowVector::Zero(x.cols());
  for (std::size_t r : rows) var += (x.row(static_cast<Eigen::Index>(r)) - mean).array().square().matrix();
  var /= static_cast<double>(rows.size());
  const RowVector scale = var.unaryExpr([](double s) { return s > 1e-24 ? 1.0 / std::sqrt(s) : 1.0; });
  return ((x.rowwise() - mean).array().rowwise() * scale.array()).matrix();
}

// ---------------------------------------------------------------- gradient checking

/// max_i |g_i - n_i| / max(|n_i|, 1e-6) where n is the central difference.
inline double finite_diff_check(const std::function<double(const Vector&)>& fn, const Vector& params,
                                const Vector& analytic, double eps) {
  require(eps > 0.0 && std::isfinite(eps), "eps must be positive");
  require(analytic.size() == params.size(), "gradient and parameters differ in size");
  double worst = 0.0;
  Vector probe = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    probe(i) = params(i) + eps;
    const double up = fn(probe);
    probe(i) = params(i) - eps;
    const double down = fn(probe);
    probe(i) = params(i);
    require(std::isfinite(up) && std::isfinite(down), "function value is not finite");
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(analytic(i) - numeric) / std::max(std::abs(numeric), 1e-6));
  }
  return worst;
}

inline Vector flatten(const ReadoutParams& p) {
  Vector out(p.weight.size() + p.bias.size());
  out << p.weight.reshaped(), p.bias;
  return out;
}

inline ReadoutParams unflatten(const Vector& flat, Eigen::Index rows, Eigen::Index cols) {
  require(flat.size() == rows * cols + cols, "flat parameter vector has the wrong size");
  return {flat.head(rows * cols).reshaped(rows, cols), flat.tail(cols)};
}

// ---------------------------------------------------------------- pipeline

struct ResultRow {
  std::uint64_t seed{};
  std::string variant;
  std::string init;
  double micro_f1{};
  double macro_f1{};
};

struct RunConfig {
  TaskConfig task;
  ModelConfig model;
  ReadoutConfig readout;
  ScanOptions scan;
  std::vector<std::uint64_t> seeds;
  std::vector<InitKind> inits{InitKind::S4dReal};
  bool include_static{true};
};

inline F1Scores fit_and_score(const Matrix& raw, const SyntheticTask& task, const ReadoutConfig& rc) {
  const std::vector<std::size_t> train = task.nodes_in(io::Split::Train);
  const Matrix x = standardize(raw, train);
  const ReadoutParams p = train_readout(x, task.labels, rc);
  return evaluate(x, p, task.labels.labels, task.nodes_in(io::Split::Test), task.labels.num_classes);
}

/// One row per (seed, init) plus one static-baseline row per seed.
inline std::vector<ResultRow> run_pipeline(const RunConfig& cfg) {
  require(!cfg.seeds.empty(), "run needs at least one seed");
  std::vector<ResultRow> rows;
  for (std::uint64_t seed : cfg.seeds) {
    const SyntheticTask task = gen_synthetic(seed, cfg.task);
    ModelConfig mc = cfg.model;
    mc.input_dim = cfg.task.feature_dim;
    mc.seq_len = cfg.task.num_steps;
    const Rng model_rng = Rng(seed).split("model");
    bool baseline_done = !cfg.include_static;
    for (InitKind init : cfg.inits) {
      mc.init = init;
      const Model model = build_model(mc, model_rng);
      const F1Scores s = fit_and_score(extract_features(task, model, cfg.scan), task, cfg.readout);
      rows.push_back({seed, to_string(mc.variant), to_string(init), s.micro, s.macro});
      if (!baseline_done) {
        const F1Scores b = fit_and_score(static_features(task, model), task, cfg.readout);
        rows.push_back({seed, "static", "-", b.micro, b.macro});
        baseline_done = true;
      }
    }
  }
  return rows;
}

inline void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "seed,variant,init,micro_f1,macro_f1\n";
  for (const ResultRow& r : rows) {
    out << r.seed << ',' << r.variant << ',' << r.init << ',' << io::detail::format_double(r.micro_f1) << ','
        << io::detail::format_double(r.macro_f1) << '\n';
  }
}

}  // namespace graphssm
