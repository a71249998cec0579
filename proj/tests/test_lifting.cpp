#include <doctest.h>

#include <Eigen/Dense>

#include "liftnet/data.hpp"
#include "liftnet/lifting.hpp"
#include "test_util.hpp"

using namespace liftnet;
using testutil::fig2_spec;

namespace {

LiftedBatch random_batch(const ArchitectureSpec& spec, int n, Rng& rng) {
  Dataset ds;
  ds.features = Eigen::MatrixXd::Zero(n, spec.input_dim());
  for (int i = 0; i < n; ++i) {
    ds.features.row(i) =
        testutil::random_vector(rng, spec.input_dim()).cwiseAbs().transpose();
  }
  ds.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ds.labels[static_cast<std::size_t>(i)] =
        static_cast<int>(rng.uniform_int(spec.num_classes()));
  }
  ds.num_classes = spec.num_classes();
  LiftedBatch batch = lift_dataset(spec, ds);
  for (int k = 1; k < batch.num_blocks(); ++k) {
    for (Eigen::Index i = 0; i < batch.u.cols(); ++i) {
      batch.block(k).col(i) =
          testutil::random_vector(rng, spec.dims[k]).cwiseAbs();
    }
  }
  return batch;
}

}  // namespace

TEST_CASE("zero weights and unit gammas reduce the form to sum |u_n|^2") {
  const ArchitectureSpec spec = fig2_spec(5, 2);
  WeightSet ws = init_weights(spec, 0, 0.0);
  // identity skips still contribute; silence them by a pure-chain spec
  ArchitectureSpec chain = spec;
  chain.inputs = {{{0, EdgeKind::Learnable}},
                  {{1, EdgeKind::Learnable}},
                  {{2, EdgeKind::Learnable}}};
  WeightSet cws = init_weights(chain, 0, 0.0);
  const LiftedQuadratic q(chain, cws, {1.0, 1.0, 1.0});

  Rng rng(7);
  const Eigen::VectorXd u = testutil::random_vector(rng, q.dim());
  const auto off = chain.block_offsets();
  double expected = 0.0;
  for (int n = 1; n <= 3; ++n) {
    expected += u.segment(off[n], chain.dims[n]).squaredNorm();
  }
  CHECK(q.quadratic_form(u) == doctest::Approx(expected).epsilon(1e-12));

  // and the factor is then just the stacked hidden blocks
  const Eigen::VectorXd gu = q.tikhonov_factor(u);
  CHECK(gu.size() == q.factor_dim());
  CHECK((gu - u.tail(q.factor_dim())).cwiseAbs().maxCoeff() == 0.0);
  (void)ws;
}

TEST_CASE("paper network with gamma 0.1 matches the direct penalty sum") {
  const ArchitectureSpec spec = fig2_spec(6, 3);
  Rng rng(42);
  const WeightSet ws = testutil::random_weights(spec, rng);
  const std::vector<double> gammas(3, 0.1);
  const LiftedQuadratic q(spec, ws, gammas);

  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd u = testutil::random_vector(rng, q.dim());
    const double direct = testutil::naive_penalty(spec, ws, gammas, u);
    CHECK(q.quadratic_form(u) ==
          doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("PSD and factorization on random instances") {
  const ArchitectureSpec spec = fig2_spec(5, 2);
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const WeightSet ws = testutil::random_weights(spec, rng, 1.0);
    const LiftedQuadratic q(spec, ws, {0.3, 1.2, 0.8});
    const Eigen::VectorXd u = testutil::random_vector(rng, q.dim());
    const double quad = q.quadratic_form(u);
    CHECK(quad >= -1e-10 * u.squaredNorm());
    const double factor = q.tikhonov_factor(u).squaredNorm();
    CHECK(factor == doctest::Approx(quad).epsilon(1e-10));
    const double via_apply = u.dot(q.apply(u));
    CHECK(via_apply == doctest::Approx(quad).epsilon(1e-9));
  }
}

TEST_CASE("densified Q is symmetric PSD and matches the operator") {
  const ArchitectureSpec spec = fig2_spec(4, 2);
  Rng rng(9);
  const WeightSet ws = testutil::random_weights(spec, rng, 1.0);
  const std::vector<double> gammas{0.5, 1.0, 0.25};
  const LiftedQuadratic q(spec, ws, gammas);

  const Eigen::MatrixXd Q = testutil::densify_quadratic(spec, ws, gammas);
  CHECK((Q - Q.transpose()).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10 * es.eigenvalues().maxCoeff());

  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd u = testutil::random_vector(rng, q.dim());
    const Eigen::VectorXd qu = q.apply(u);
    CHECK((qu - Q * u).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(q.quadratic_form(u) ==
          doctest::Approx(u.dot(Q * u)).epsilon(1e-9));
  }
}

TEST_CASE("reduced apply equals zeroed-block full apply") {
  const ArchitectureSpec spec = fig2_spec(5, 2);
  Rng rng(13);
  const WeightSet ws = testutil::random_weights(spec, rng);
  const LiftedQuadratic q(spec, ws, {0.1, 0.1, 0.1});
  const int d0 = spec.input_dim();

  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd v = testutil::random_vector(rng, q.dim());
    v.head(d0).setZero();
    Eigen::VectorXd full, reduced;
    q.apply(v, full, false);
    full.head(d0).setZero();
    q.apply(v, reduced, true);
    CHECK((full - reduced).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("tikhonov factor edge cases") {
  const ArchitectureSpec spec = fig2_spec(4, 2);
  Rng rng(5);
  const WeightSet ws = testutil::random_weights(spec, rng);
  const LiftedQuadratic q(spec, ws, {1.0, 1.0, 1.0});

  CHECK(q.tikhonov_factor(Eigen::VectorXd::Zero(q.dim())).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK_THROWS_AS(q.tikhonov_factor(Eigen::VectorXd::Zero(3)),
                  std::invalid_argument);
}

TEST_CASE("select_output returns block N") {
  const ArchitectureSpec spec = fig2_spec(3, 2);
  Rng rng(1);
  const auto off = spec.block_offsets();

  Eigen::VectorXd u = Eigen::VectorXd::Zero(spec.lifted_dim());
  u.segment(off[3], 3) << 1.0, 2.0, 3.0;
  const Eigen::VectorXd out = select_output(spec, u);
  CHECK(out.size() == 3);
  CHECK(out[0] == 1.0);
  CHECK(out[2] == 3.0);

  CHECK(select_output(spec, Eigen::VectorXd::Zero(spec.lifted_dim())).norm() ==
        0.0);

  // selector/embedding adjointness round trip
  const Eigen::VectorXd v = testutil::random_vector(rng, 3);
  Eigen::VectorXd embedded = Eigen::VectorXd::Zero(spec.lifted_dim());
  embedded.segment(off[3], 3) = v;
  CHECK((select_output(spec, embedded) - v).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(select_output(spec, v), std::invalid_argument);
}

TEST_CASE("full objective: empty batch, analytic case, naive oracle") {
  const ArchitectureSpec spec = fig2_spec(4, 3);
  Rng rng(17);
  const WeightSet ws = testutil::random_weights(spec, rng);
  const std::vector<double> gammas{0.1, 0.1, 0.1};
  const LiftedQuadratic q(spec, ws, gammas);

  SUBCASE("empty batch gives zero") {
    LiftedBatch empty;
    empty.u = Eigen::MatrixXd::Zero(q.dim(), 0);
    empty.targets = Eigen::MatrixXd::Zero(3, 0);
    empty.offsets = spec.block_offsets();
    CHECK(full_objective(empty, q, ws.classifier) == 0.0);
  }

  SUBCASE("zero classifier and zero hidden blocks leave 1/2 per sample") {
    // With u_n = 0 for n >= 1 and x = 0, every residual vanishes and the
    // loss is 1/2 |onehot|^2 = 1/2 per sample.
    Dataset ds;
    const int n = 7;
    ds.features = Eigen::MatrixXd::Zero(n, spec.input_dim());
    ds.labels.assign(static_cast<std::size_t>(n), 1);
    ds.num_classes = 3;
    const LiftedBatch batch = lift_dataset(spec, ds);
    const Eigen::MatrixXd V0 = Eigen::MatrixXd::Zero(3, spec.feature_dim());
    CHECK(full_objective(batch, q, V0) == doctest::Approx(0.5 * n));
  }

  SUBCASE("random instance matches a scalar-loop evaluation") {
    LiftedBatch batch = random_batch(spec, 6, rng);
    const double got = full_objective(batch, q, ws.classifier);

    double expected = 0.0;
    for (int i = 0; i < batch.n(); ++i) {
      const Eigen::VectorXd u = batch.u.col(i);
      const Eigen::VectorXd scores =
          ws.classifier * select_output(spec, u);
      expected += 0.5 * (batch.targets.col(i) - scores).squaredNorm();
      expected += 0.5 * testutil::naive_penalty(spec, ws, gammas, u);
    }
    CHECK(got == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("block multi-convexity via second-order central differences") {
  const ArchitectureSpec spec = fig2_spec(4, 2);
  Rng rng(23);
  const WeightSet ws = testutil::random_weights(spec, rng);
  const std::vector<double> gammas{0.2, 0.7, 0.4};
  LiftedBatch batch = random_batch(spec, 4, rng);
  const double h = 0.1;

  auto objective = [&](const LiftedBatch& b, const WeightSet& w) {
    return full_objective(b, LiftedQuadratic(spec, w, gammas), w.classifier);
  };

  SUBCASE("u block") {
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::MatrixXd dir = testutil::random_matrix(
          rng, batch.u.rows(), batch.u.cols());
      dir /= dir.norm();
      LiftedBatch plus = batch, minus = batch;
      plus.u += h * dir;
      minus.u -= h * dir;
      const double second = objective(plus, ws) - 2.0 * objective(batch, ws) +
                            objective(minus, ws);
      CHECK(second >= -1e-8);
    }
  }
  SUBCASE("V block") {
    for (int trial = 0; trial < 100; ++trial) {
      WeightSet plus = ws, minus = ws;
      Eigen::MatrixXd dir = testutil::random_matrix(
          rng, ws.classifier.rows(), ws.classifier.cols());
      dir /= dir.norm();
      plus.classifier += h * dir;
      minus.classifier -= h * dir;
      const double second = objective(batch, plus) -
                            2.0 * objective(batch, ws) + objective(batch, minus);
      CHECK(second >= -1e-8);
    }
  }
  SUBCASE("each W block") {
    for (const auto& [key, w] : ws.hidden) {
      for (int trial = 0; trial < 100; ++trial) {
        WeightSet plus = ws, minus = ws;
        Eigen::MatrixXd dir =
            testutil::random_matrix(rng, w.rows(), w.cols());
        dir /= dir.norm();
        plus.hidden[key] += h * dir;
        minus.hidden[key] -= h * dir;
        const double second = objective(batch, plus) -
                              2.0 * objective(batch, ws) +
                              objective(batch, minus);
        CHECK(second >= -1e-8);
      }
    }
  }
}

TEST_CASE("Q depends only on hidden weights, never on the classifier") {
  const ArchitectureSpec spec = fig2_spec(4, 2);
  Rng rng(31);
  WeightSet ws = testutil::random_weights(spec, rng);
  const LiftedQuadratic q1(spec, ws, {0.1, 0.1, 0.1});
  ws.classifier.setConstant(99.0);
  const LiftedQuadratic q2(spec, ws, {0.1, 0.1, 0.1});
  const Eigen::VectorXd u = testutil::random_vector(rng, q1.dim());
  CHECK(q1.quadratic_form(u) == q2.quadratic_form(u));
}

TEST_CASE("construction rejects bad gammas") {
  const ArchitectureSpec spec = fig2_spec(4, 2);
  Rng rng(37);
  const WeightSet ws = testutil::random_weights(spec, rng);
  CHECK_THROWS_AS(LiftedQuadratic(spec, ws, {0.1, -0.1, 0.1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(LiftedQuadratic(spec, ws, {0.1, 0.1}), std::invalid_argument);
}
