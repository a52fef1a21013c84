#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"

namespace {

using namespace graphssm;
using graphssm::testing::max_abs;

TEST(GenSynthetic, Deterministic) {
  TaskConfig cfg;
  cfg.num_nodes = 60;
  cfg.num_steps = 5;
  const auto a = gen_synthetic(7, cfg);
  const auto b = gen_synthetic(7, cfg);
  ASSERT_EQ(a.sequence.size(), b.sequence.size());
  for (std::size_t l = 0; l < a.sequence.size(); ++l) {
    EXPECT_EQ(a.sequence[l].features, b.sequence[l].features);
    EXPECT_EQ(a.sequence[l].graph.edges(), b.sequence[l].graph.edges());
  }
  EXPECT_EQ(a.labels.labels, b.labels.labels);
  EXPECT_EQ(a.labels.splits, b.labels.splits);
  EXPECT_NE(gen_synthetic(8, cfg).sequence[0].features, a.sequence[0].features);
}

TEST(GenSynthetic, DefaultMajorityRate) {
  const auto task = gen_synthetic(1, TaskConfig{});
  std::map<int, int> counts;
  for (int y : task.labels.labels) ++counts[y];
  int majority = 0;
  for (const auto& [label, n] : counts) majority = std::max(majority, n);
  EXPECT_LE(majority / 200.0, 0.30);
  EXPECT_EQ(task.sequence.size(), 16u);
  EXPECT_EQ(task.sequence.num_nodes(), 200u);
}

TEST(GenSynthetic, StratifiedSplits) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TaskConfig cfg;
    cfg.num_nodes = 103;
    cfg.num_classes = 5;
    const auto task = gen_synthetic(seed, cfg);
    std::map<int, double> class_size;
    for (int y : task.labels.labels) class_size[y] += 1.0;
    for (io::Split split : {io::Split::Train, io::Split::Val, io::Split::Test}) {
      const auto nodes = task.nodes_in(split);
      std::map<int, double> count;
      for (std::size_t v : nodes) count[task.labels.labels[v]] += 1.0;
      for (const auto& [label, size] : class_size) {
        const double exact = static_cast<double>(nodes.size()) * size / cfg.num_nodes;
        EXPECT_LE(std::abs(count[label] - exact), 1.0) << "class " << label;
      }
    }
  }
}

TEST(GenSynthetic, NoiselessStaticTaskIsSeparable) {
  TaskConfig cfg;
  cfg.noise = 0.0;
  cfg.drift_rate = 0.0;
  const auto task = gen_synthetic(3, cfg);
  const Matrix& x = task.sequence[task.sequence.size() - 1].features;
  for (std::size_t u = 0; u < cfg.num_nodes; ++u) {
    for (std::size_t v = 0; v < cfg.num_nodes; ++v) {
      const bool same = (x.row(u) - x.row(v)).norm() == 0.0;
      EXPECT_EQ(same, task.labels.labels[u] == task.labels.labels[v]);
    }
  }
  const ReadoutParams p = train_readout(x, task.labels, ReadoutConfig{});
  std::vector<std::size_t> all(cfg.num_nodes);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_DOUBLE_EQ(evaluate(x, p, task.labels.labels, all, cfg.num_classes).micro, 1.0);
}

TEST(GenSynthetic, RejectsInfeasibleConfig) {
  TaskConfig cfg;
  cfg.num_nodes = 10;
  cfg.num_classes = 4;
  EXPECT_THROW(gen_synthetic(1, cfg), InvalidInput);
}

io::LabelFile all_train(const std::vector<int>& labels, std::size_t classes) {
  return {classes, labels, std::vector<io::Split>(labels.size(), io::Split::Train)};
}

TEST(TrainReadout, SeparableReachesFullAccuracy) {
  Rng rng(5);
  const int per_class = 30;
  Matrix x(3 * per_class, 2);
  std::vector<int> labels;
  const double centers[3][2] = {{4, 0}, {-4, 4}, {-4, -4}};
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < per_class; ++i) {
      x.row(c * per_class + i) << centers[c][0] + rng.uniform(-1, 1), centers[c][1] + rng.uniform(-1, 1);
      labels.push_back(c);
    }
  }
  ReadoutConfig rc;
  rc.epochs = 500;
  const ReadoutParams p = train_readout(x, all_train(labels, 3), rc);
  const auto preds = predict(x, p);
  int correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += preds[i] == labels[i];
  EXPECT_GE(correct / double(labels.size()), 0.99);
}

TEST(TrainReadout, ZeroFeaturesPredictBiasArgmax) {
  const std::vector<int> labels{0, 1, 1, 2, 1, 0, 1, 2};
  const Matrix x = Matrix::Zero(8, 3);
  const ReadoutParams p = train_readout(x, all_train(labels, 3), ReadoutConfig{});
  Eigen::Index top = 0;
  p.bias.maxCoeff(&top);
  EXPECT_EQ(top, 1);
  const auto preds = predict(x, p);
  int correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    EXPECT_EQ(preds[i], top);
    correct += preds[i] == labels[i];
  }
  EXPECT_DOUBLE_EQ(correct / 8.0, 0.5);
}

TEST(TrainReadout, RejectsBadInputs) {
  const io::LabelFile none{2, {0, 1}, {io::Split::Test, io::Split::Val}};
  EXPECT_THROW(train_readout(Matrix::Zero(2, 1), none, ReadoutConfig{}), InvalidInput);
  ReadoutConfig rc;
  rc.lr = 0.0;
  EXPECT_THROW(train_readout(Matrix::Zero(2, 1), all_train({0, 1}, 2), rc), InvalidInput);
}

TEST(FiniteDiff, QuadraticIsExact) {
  Rng rng(6);
  const Matrix m = rng.normal_matrix(5, 5);
  const Matrix q = m * m.transpose();
  const Vector g = rng.normal_matrix(5, 1).col(0);
  const Vector x = rng.normal_matrix(5, 1).col(0);
  const auto fn = [&](const Vector& p) { return 0.5 * p.dot(q * p) + g.dot(p); };
  EXPECT_LE(finite_diff_check(fn, x, q * x + g, 1e-5), 1e-8);
}

TEST(FiniteDiff, ReadoutLossGradient) {
  Rng rng(7);
  const Matrix x = rng.normal_matrix(20, 4);
  std::vector<int> labels;
  std::vector<std::size_t> rows;
  for (int i = 0; i < 20; ++i) {
    labels.push_back(static_cast<int>(rng.below(3)));
    rows.push_back(static_cast<std::size_t>(i));
  }
  const ReadoutParams p{rng.normal_matrix(4, 3), rng.normal_matrix(3, 1).col(0)};
  const auto lg = readout_loss(x, labels, rows, p, 0.01);
  Vector analytic(15);
  analytic << lg.grad_weight.reshaped(), lg.grad_bias;
  const auto fn = [&](const Vector& flat) { return readout_loss(x, labels, rows, unflatten(flat, 4, 3), 0.01).loss; };
  EXPECT_LE(finite_diff_check(fn, flatten(p), analytic, 1e-5), 1e-4);
  EXPECT_NEAR(finite_diff_check(fn, flatten(p), 2.0 * analytic, 1e-5), 1.0, 1e-3);
}

TEST(FiniteDiff, RejectsBadArguments) {
  const auto fn = [](const Vector& p) { return p.squaredNorm(); };
  EXPECT_THROW(finite_diff_check(fn, Vector::Ones(2), Vector::Ones(2), 0.0), InvalidInput);
  EXPECT_THROW(finite_diff_check(fn, Vector::Ones(2), Vector::Ones(3), 1e-5), InvalidInput);
  EXPECT_THROW(finite_diff_check([](const Vector&) { return std::nan(""); }, Vector::Ones(1), Vector::Ones(1), 1e-5),
               InvalidInput);
}

TEST(F1, PerfectPredictions) {
  const std::vector<int> y{0, 1, 2, 2, 1};
  const auto s = f1_scores(y, y, 3);
  EXPECT_DOUBLE_EQ(s.micro, 1.0);
  EXPECT_DOUBLE_EQ(s.macro, 1.0);
}

TEST(F1, SingleClassPredictions) {
  const auto s = f1_scores({0, 0, 0, 0}, {0, 1, 0, 1}, 2);
  EXPECT_DOUBLE_EQ(s.micro, 0.5);
  EXPECT_NEAR(s.macro, (2.0 / 3.0 + 0.0) / 2.0, 1e-15);
}

TEST(F1, HandCountedFixture) {
  const std::vector<int> labels{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};
  const std::vector<int> preds{0, 0, 1, 2, 1, 1, 1, 0, 2, 2, 0, 1};
  // class  tp fp fn  precision recall f1
  //   0     2  2  2  1/2       1/2    1/2
  //   1     3  2  1  3/5       3/4    2/3
  //   2     2  1  2  2/3       1/2    4/7
  const auto s = f1_scores(preds, labels, 3);
  EXPECT_NEAR(s.micro, 7.0 / 12.0, 1e-15);
  EXPECT_NEAR(s.macro, (0.5 + 2.0 / 3.0 + 4.0 / 7.0) / 3.0, 1e-15);
  const auto padded = f1_scores(preds, labels, 4);
  EXPECT_NEAR(padded.macro, (0.5 + 2.0 / 3.0 + 4.0 / 7.0) / 4.0, 1e-15);
  EXPECT_THROW(f1_scores({0}, {0, 1}, 2), InvalidInput);
}

TaskConfig small_task() {
  TaskConfig cfg;
  cfg.num_nodes = 40;
  cfg.num_steps = 6;
  cfg.feature_dim = 4;
  return cfg;
}

ModelConfig small_model(const TaskConfig& t) {
  ModelConfig mc;
  mc.input_dim = t.feature_dim;
  mc.hidden_dim = 5;
  mc.state_dim = 3;
  mc.seq_len = t.num_steps;
  return mc;
}

TEST(ExtractFeatures, ZeroModelGivesZero) {
  const TaskConfig tc = small_task();
  const auto task = gen_synthetic(2, tc);
  Model model = build_model(small_model(tc), Rng(1));
  model.blocks[0].layer.gnn.weight.setZero();
  const Matrix f = extract_features(task, model);
  EXPECT_EQ(f, Matrix::Zero(40, 5));
}

TEST(ExtractFeatures, ResidualOnlyIsAffine) {
  const TaskConfig tc = small_task();
  const auto task = gen_synthetic(2, tc);
  Rng rng(4);
  Model model = build_model(small_model(tc), rng);
  BlockParams& blk = model.blocks[0];
  blk.layer.gnn.weight.setZero();
  blk.res_weight = rng.normal_matrix(4, 5);
  blk.res_bias = rng.normal_matrix(5, 1).col(0);
  Matrix want = task.sequence[tc.num_steps - 1].features * blk.res_weight;
  want.rowwise() += blk.res_bias.transpose();
  EXPECT_LT(max_abs(extract_features(task, model), want), 1e-13);
}

TEST(ExtractFeatures, MatchesManualComposition) {
  const TaskConfig tc = small_task();
  const auto task = gen_synthetic(3, tc);
  ModelConfig mc = small_model(tc);
  mc.num_blocks = 2;
  mc.variant = SsmVariant::S5;
  const Model model = build_model(mc, Rng(9));
  Sequence h = features_of(task.sequence);
  for (const BlockParams& blk : model.blocks) {
    const Sequence y = s5_forward(task.sequence, h, blk.layer);
    for (std::size_t l = 0; l < h.size(); ++l) {
      Matrix m = y[l].cwiseMax(0.0) + h[l] * blk.res_weight;
      m.rowwise() += blk.res_bias.transpose();
      h[l] = m;
    }
  }
  EXPECT_LT(max_abs(extract_features(task, model), h.back()), 1e-13);
  EXPECT_EQ(static_features(task, model),
            gnn_diffuse(task.sequence[tc.num_steps - 1].features, task.sequence[tc.num_steps - 1].graph,
                        model.blocks[0].layer.gnn));
}

TEST(Standardize, UsesGivenRows) {
  Matrix x(4, 2);
  x << 1, 10, 3, 10, 100, -5, 7, 0;
  const Matrix z = standardize(x, {0, 1});
  EXPECT_DOUBLE_EQ(z(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(z(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(z(2, 0), 98.0);
  EXPECT_DOUBLE_EQ(z(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(z(3, 1), -10.0);
}

TEST(RunPipeline, DeterministicRows) {
  RunConfig cfg;
  cfg.task = small_task();
  cfg.model = small_model(cfg.task);
  cfg.readout.epochs = 50;
  cfg.seeds = {1, 2};
  cfg.inits = {InitKind::S4dReal, InitKind::Random};
  const auto rows = run_pipeline(cfg);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[1].variant, "static");
  std::ostringstream a, b;
  write_results_csv(a, rows);
  write_results_csv(b, run_pipeline(cfg));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "seed,variant,init,micro_f1,macro_f1");
  for (const auto& r : rows) {
    EXPECT_GE(r.micro_f1, 0.0);
    EXPECT_LE(r.micro_f1, 1.0);
  }
}

}  // namespace
