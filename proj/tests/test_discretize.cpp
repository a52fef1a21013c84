#include <cmath>

#include <gtest/gtest.h>

#include "support.hpp"

namespace {

using namespace graphssm;
using graphssm::testing::max_abs;

MutationSchedule two_piece_schedule() {
  MutationSchedule s;
  s.begin = 0.0;
  s.end = 2.0;
  s.mutation_times = {1.0};
  s.graphs = {Graph(1), Graph(1)};
  s.features = {Vector::Ones(1), Vector::Ones(1)};
  return s;
}

TEST(LambdaWeights, MidpointExample) {
  const auto w = lambda_weights(two_piece_schedule(), DiagState(Vector::Constant(1, -1.0)));
  ASSERT_EQ(w.lambdas.size(), 2u);
  const double last = (std::exp(-1.0) - 1.0) / (std::exp(-2.0) - 1.0);
  EXPECT_NEAR(w.lambdas[1](0), last, 1e-15);
  EXPECT_NEAR(w.lambdas[1](0), 0.7311, 1e-4);
  EXPECT_NEAR(w.lambdas[0](0), 1.0 - last, 1e-15);
  EXPECT_NEAR(w.lambdas[0](0), 0.2689, 1e-4);
  EXPECT_FALSE(w.flagged());
}

TEST(LambdaWeights, NoMutationsGivesOnes) {
  MutationSchedule s;
  s.begin = 0.3;
  s.end = 1.1;
  s.graphs = {Graph(2)};
  s.features = {Vector::Zero(2)};
  Vector a(3);
  a << -0.2, -1.0, -7.0;
  const auto w = lambda_weights(s, DiagState(a));
  ASSERT_EQ(w.lambdas.size(), 1u);
  EXPECT_EQ(w.lambdas[0], Vector::Ones(3));
}

TEST(LambdaWeights, ConvexOnRandomSchedules) {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const MutationSchedule s = verify::random_schedule(3, rng.below(6), rng);
    const DiagState a = verify::random_diag(1 + rng.below(8), rng);
    const auto w = lambda_weights(s, a);
    Vector sum = Vector::Zero(a.size());
    for (const Vector& l : w.lambdas) {
      EXPECT_TRUE((l.array() >= 0.0).all() && (l.array() <= 1.0).all());
      sum += l;
    }
    EXPECT_LE((sum.array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_LE(w.direct_residual, 1e-12);
  }
}

TEST(LambdaWeights, IndependentOfFeaturesAndGraphs) {
  Rng rng(5);
  MutationSchedule s = verify::random_schedule(4, 3, rng);
  const DiagState a = verify::random_diag(5, rng);
  const auto before = lambda_weights(s, a);
  for (auto& x : s.features) x = rng.normal_matrix(4, 1, 10.0).col(0);
  for (auto& g : s.graphs) g = verify::random_graph(4, 0.9, rng);
  const auto after = lambda_weights(s, a);
  for (std::size_t i = 0; i < before.lambdas.size(); ++i) EXPECT_EQ(before.lambdas[i], after.lambdas[i]);
}

TEST(LambdaWeights, RejectsBadSchedules) {
  MutationSchedule s = two_piece_schedule();
  s.mutation_times = {2.5};
  EXPECT_THROW(lambda_weights(s, DiagState(Vector::Constant(1, -1.0))), InvalidInput);
  EXPECT_THROW(DiagState(Vector::Constant(2, 0.0)), InvalidInput);
}

TEST(ZohOracle, TinyIntervalKeepsState) {
  Rng rng(7);
  MutationSchedule s;
  s.begin = 1.0;
  s.end = 1.0 + 1e-12;
  s.graphs = {verify::random_graph(4, 0.5, rng)};
  s.features = {rng.normal_matrix(4, 1).col(0)};
  const Matrix u = rng.normal_matrix(4, 3);
  const Matrix next = zoh_oracle_step(u, s, verify::random_diag(3, rng), Vector::Ones(3), 0.5, LaplacianKind::Symmetric);
  EXPECT_LT(max_abs(next, u), 1e-10);
}

TEST(ZohOracle, SingleSegmentAlphaZeroIsScalarZoh) {
  Rng rng(9);
  MutationSchedule s;
  s.begin = 0.5;
  s.end = 1.25;
  s.graphs = {verify::random_graph(3, 0.7, rng)};
  s.features = {rng.normal_matrix(3, 1).col(0)};
  const DiagState a = verify::random_diag(4, rng);
  const Vector b = rng.normal_matrix(4, 1).col(0);
  const Matrix u = rng.normal_matrix(3, 4);
  const Matrix next = zoh_oracle_step(u, s, a, b, 0.0, LaplacianKind::Symmetric);
  for (int v = 0; v < 3; ++v) {
    for (int n = 0; n < 4; ++n) {
      const double an = a.values()(n);
      const double want = u(v, n) * std::exp(0.75 * an) + (std::exp(0.75 * an) - 1.0) / an * b(n) * s.features[0](v);
      EXPECT_NEAR(next(v, n), want, 1e-13);
    }
  }
}

TEST(ZohOracle, MatchesPiecewiseIntegration) {
  Rng rng(11);
  for (double alpha : {0.0, 0.5, 2.0}) {
    const MutationSchedule s = verify::random_schedule(6, 3, rng);
    const DiagState a = verify::random_diag(5, rng);
    const Vector b = rng.normal_matrix(5, 1).col(0);
    const Matrix u = rng.normal_matrix(6, 5);
    const Matrix oracle = zoh_oracle_step(u, s, a, b, alpha, LaplacianKind::Symmetric);
    const Matrix ode = integrate_schedule(u, s, a, b, alpha, LaplacianKind::Symmetric, 200);
    EXPECT_LE(relative_frobenius(oracle, ode), 1e-4) << "alpha " << alpha;
  }
}

TEST(ZohOracle, Semigroup) {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    MutationSchedule first = verify::random_schedule(5, rng.below(3), rng);
    MutationSchedule second = verify::random_schedule(5, rng.below(3), rng);
    const double shift = first.end - second.begin;
    second.begin += shift;
    second.end += shift;
    for (double& t : second.mutation_times) t += shift;
    MutationSchedule joined;
    joined.begin = first.begin;
    joined.end = second.end;
    joined.mutation_times = first.mutation_times;
    joined.mutation_times.push_back(first.end);
    joined.mutation_times.insert(joined.mutation_times.end(), second.mutation_times.begin(), second.mutation_times.end());
    joined.graphs = first.graphs;
    joined.graphs.insert(joined.graphs.end(), second.graphs.begin(), second.graphs.end());
    joined.features = first.features;
    joined.features.insert(joined.features.end(), second.features.begin(), second.features.end());

    const DiagState a = verify::random_diag(4, rng);
    const Vector b = rng.normal_matrix(4, 1).col(0);
    const Matrix u = rng.normal_matrix(5, 4);
    const Matrix two = zoh_oracle_step(zoh_oracle_step(u, first, a, b, 0.7, LaplacianKind::Symmetric), second, a, b,
                                       0.7, LaplacianKind::Symmetric);
    const Matrix one = zoh_oracle_step(u, joined, a, b, 0.7, LaplacianKind::Symmetric);
    EXPECT_LE(relative_frobenius(two, one), 1e-10);
  }
}

TEST(DiscreteStep, ZeroDeltaIsIdentity) {
  Rng rng(17);
  const Matrix u = rng.normal_matrix(3, 2);
  const Vector c = rng.normal_matrix(2, 1).col(0);
  const auto r = discrete_step(u, Vector::Ones(3), Vector::Zero(1), DiagState(Vector::Constant(2, -1.0)),
                               Vector::Ones(2), c);
  EXPECT_EQ(r.state, u);
  EXPECT_LT(max_abs(r.output, u * c), 1e-15);
}

TEST(DiscreteStep, ZeroDynamics) {
  const auto r = discrete_step(Matrix::Zero(4, 3), Vector::Zero(4), Vector::Constant(4, 0.3),
                               DiagState(Vector::Constant(3, -2.0)), Vector::Ones(3), Vector::Ones(3));
  EXPECT_EQ(r.state, Matrix::Zero(4, 3));
  EXPECT_EQ(r.output, Vector::Zero(4));
}

TEST(DiscreteStep, ScalarExample) {
  for (double u0 : {0.0, 1.0, -3.5}) {
    const auto r = discrete_step(Matrix::Constant(1, 1, u0), Vector::Ones(1), Vector::Ones(1),
                                 DiagState(Vector::Constant(1, -1.0)), Vector::Ones(1), Vector::Ones(1));
    EXPECT_NEAR(r.state(0, 0), u0 * std::exp(-1.0) + 1.0, 1e-15);
    EXPECT_NEAR(r.output(0), u0 * std::exp(-1.0) + 1.0, 1e-15);
  }
}

TEST(DiscreteStep, PerNodeDelta) {
  Vector delta(2);
  delta << 0.5, 2.0;
  const auto r = discrete_step(Matrix::Ones(2, 1), Vector::Zero(2), delta, DiagState(Vector::Constant(1, -1.0)),
                               Vector::Ones(1), Vector::Ones(1));
  EXPECT_NEAR(r.state(0, 0), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(r.state(1, 0), std::exp(-2.0), 1e-15);
  EXPECT_THROW(discrete_step(Matrix::Ones(2, 1), Vector::Zero(2), Vector::Ones(3), DiagState(Vector::Constant(1, -1.0)),
                             Vector::Ones(1), Vector::Ones(1)),
               InvalidInput);
  EXPECT_THROW(discrete_step(Matrix::Ones(2, 1), Vector::Zero(2), Vector::Constant(1, -1.0),
                             DiagState(Vector::Constant(1, -1.0)), Vector::Ones(1), Vector::Ones(1)),
               InvalidInput);
}

TEST(DiscreteStep, EulerGainDiffersAtSecondOrder) {
  Rng rng(19);
  const DiagState a = verify::random_diag(4, rng);
  const Vector b = rng.normal_matrix(4, 1).col(0);
  const Vector c = rng.normal_matrix(4, 1).col(0);
  const Matrix u = rng.normal_matrix(3, 4);
  const Vector x = rng.normal_matrix(3, 1).col(0);
  const auto gap = [&](double delta) {
    const Vector d = Vector::Constant(1, delta);
    return max_abs(discrete_step(u, x, d, a, b, c).state, zoh_step(u, x, d, a, b, c).state);
  };
  double prev = gap(0.1);
  for (double delta : {0.05, 0.025, 0.0125}) {
    const double cur = gap(delta);
    EXPECT_NEAR(prev / cur, 4.0, 0.25) << delta;
    prev = cur;
  }
}

TEST(DiscreteStep, ZohStepMatchesOracleWithoutMutations) {
  Rng rng(23);
  MutationSchedule s;
  s.begin = 0.0;
  s.end = 0.4;
  s.graphs = {Graph(3)};
  s.features = {rng.normal_matrix(3, 1).col(0)};
  const DiagState a = verify::random_diag(3, rng);
  const Vector b = rng.normal_matrix(3, 1).col(0);
  const Matrix u = rng.normal_matrix(3, 3);
  const auto r = zoh_step(u, s.features[0], Vector::Constant(1, 0.4), a, b, Vector::Ones(3));
  EXPECT_LT(max_abs(r.state, zoh_oracle_step(u, s, a, b, 1.0, LaplacianKind::Symmetric)), 1e-14);
}

const GnnFn kGnn = [](const Matrix& x, const Graph& g) {
  return gnn_diffuse(x, g, GnnParams{Matrix::Identity(x.cols(), x.cols()) * 1.5, Vector::Zero(x.cols()),
                                     GnnFlavor::GcnLike, 0.5});
};

TEST(MixedEstimate, SecondArgumentMixIsOrdinary) {
  Rng rng(29);
  const Matrix x0 = rng.normal_matrix(5, 3);
  const Matrix x1 = rng.normal_matrix(5, 3);
  const Graph g0 = verify::random_graph(5, 0.5, rng);
  const Graph g1 = verify::random_graph(5, 0.5, rng);
  const MixFn second = [](const Matrix&, const Matrix& cur) { return cur; };
  const Matrix ordinary = mixed_estimate(&x0, x1, &g0, g1, MixMechanism::Ordinary, kGnn, second);
  EXPECT_EQ(mixed_estimate(&x0, x1, &g0, g1, MixMechanism::FeatureMix, kGnn, second), ordinary);
  EXPECT_EQ(mixed_estimate(nullptr, x1, nullptr, g1, MixMechanism::ReprMix, kGnn, second), ordinary);
}

TEST(MixedEstimate, ReprMixZeroInterpScalesByLn2) {
  Rng rng(31);
  const Matrix x = rng.normal_matrix(4, 2);
  const Graph g = verify::random_graph(4, 0.6, rng);
  MixParams p;
  p.kind = MixerKind::Interp;
  p.w_rho = Matrix::Zero(4, 2);
  p.w_xi = Matrix::Zero(4, 2);
  p.b_rho = Vector::Zero(2);
  p.b_xi = Vector::Zero(2);
  const MixFn mix = [&](const Matrix& a, const Matrix& b) { return mix_apply(p, a, b); };
  const Matrix ordinary = mixed_estimate(&x, x, &g, g, MixMechanism::Ordinary, kGnn, mix);
  const Matrix repr = mixed_estimate(&x, x, &g, g, MixMechanism::ReprMix, kGnn, mix);
  EXPECT_LT(max_abs(repr, std::log(2.0) * ordinary), 1e-14);
}

TEST(MixedEstimate, ReprMixComposes) {
  Rng rng(37);
  const Matrix x0 = rng.normal_matrix(6, 3);
  const Matrix x1 = rng.normal_matrix(6, 3);
  const Graph g0 = verify::random_graph(6, 0.5, rng);
  const Graph g1 = verify::random_graph(6, 0.5, rng);
  const Matrix kernel = rng.normal_matrix(2, 3);
  const MixFn mix = [&](const Matrix& a, const Matrix& b) { return mix_conv1d(a, b, kernel); };
  const Matrix z0 = kGnn(x0, g0);
  const Matrix z1 = kGnn(x1, g1);
  Matrix want(6, 3);
  for (int v = 0; v < 6; ++v) {
    for (int d = 0; d < 3; ++d) want(v, d) = kernel(0, d) * z0(v, d) + kernel(1, d) * z1(v, d);
  }
  EXPECT_LT(max_abs(mixed_estimate(&x0, x1, &g0, g1, MixMechanism::ReprMix, kGnn, mix), want), 1e-14);
  EXPECT_LT(max_abs(mixed_estimate(&x0, x1, &g0, g1, MixMechanism::FeatureMix, kGnn, mix), kGnn(mix(x0, x1), g1)),
            1e-14);
}

}  // namespace
