#include <doctest.h>

#include <Eigen/Dense>

#include "liftnet/baseline.hpp"
#include "liftnet/inference.hpp"
#include "test_util.hpp"

using namespace liftnet;

namespace {

// Loss under perturbation of a single weight entry, for finite differences.
double loss_at(const ArchitectureSpec& spec, WeightSet ws, const Dataset& ds,
               bool classifier, std::pair<int, int> edge, int r, int c,
               double delta) {
  if (classifier) {
    ws.classifier(r, c) += delta;
  } else {
    ws.hidden.at(edge)(r, c) += delta;
  }
  return sgd_loss(spec, ws, ds);
}

// All preactivations of every sample, for kink avoidance.
double min_abs_preactivation(const ArchitectureSpec& spec, const WeightSet& ws,
                             const Dataset& ds) {
  double min_abs = std::numeric_limits<double>::infinity();
  for (int i = 0; i < ds.n(); ++i) {
    std::vector<Eigen::VectorXd> u(static_cast<std::size_t>(spec.N()) + 1);
    u[0] = ds.features.row(i).transpose();
    for (int n = 1; n <= spec.N(); ++n) {
      Eigen::VectorXd pre = Eigen::VectorXd::Zero(spec.dims[n]);
      for (const auto& in : spec.layer_inputs(n)) {
        if (in.kind == EdgeKind::FixedIdentity) {
          pre += u[static_cast<std::size_t>(in.source)];
        } else {
          pre += ws.hidden.at({n, in.source}) * u[static_cast<std::size_t>(in.source)];
        }
      }
      min_abs = std::min(min_abs, pre.cwiseAbs().minCoeff());
      u[static_cast<std::size_t>(n)] = pre.cwiseMax(0.0);
    }
  }
  return min_abs;
}

}  // namespace

TEST_CASE("zero learning signal gives zero gradients") {
  const ArchitectureSpec spec = testutil::tiny_spec(3, 4, 2);
  Rng rng(900);
  WeightSet ws = testutil::random_weights(spec, rng, 0.6);

  Dataset ds;
  ds.features = testutil::random_vector(rng, 3).cwiseAbs().transpose();
  ds.labels = {0};
  ds.num_classes = 2;

  // Pick V so that V u_N equals the one-hot target exactly.
  const auto u = forward_batch(spec, ws, ds.features.transpose());
  const Eigen::VectorXd feat = u.back().col(0);
  Eigen::VectorXd y(2);
  y << 1.0, 0.0;
  ws.classifier = y * feat.transpose() / feat.squaredNorm();

  const GradientSet grads = backprop_grads(spec, ws, ds);
  CHECK(grads.classifier.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(grads.hidden.at({1, 0}).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("classifier gradient matches the analytic last-layer form") {
  const ArchitectureSpec spec = testutil::fig2_spec(4, 3);
  Rng rng(901);
  const WeightSet ws = testutil::random_weights(spec, rng, 0.5);
  const Dataset ds = make_synthetic(8, 4, 3, 11);

  const GradientSet grads = backprop_grads(spec, ws, ds);
  const auto u = forward_batch(spec, ws, ds.features.transpose());
  const Eigen::MatrixXd targets = one_hot(ds.labels, 3);
  const Eigen::MatrixXd expected =
      (ws.classifier * u.back() - targets) * u.back().transpose();
  CHECK((grads.classifier - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gradients match central finite differences away from kinks") {
  Rng rng(902);
  const double h = 1e-5;
  int nets_checked = 0;
  for (int attempt = 0; attempt < 40 && nets_checked < 5; ++attempt) {
    const bool use_skip = rng.uniform() < 0.5;
    const ArchitectureSpec spec =
        use_skip ? testutil::fig2_spec(3, 2) : testutil::tiny_spec(3, 3, 2);
    const WeightSet ws = testutil::random_weights(spec, rng, 0.8);
    Dataset ds = make_synthetic(4, 3, 2, 1000 + attempt);
    if (min_abs_preactivation(spec, ws, ds) < 1e-3) continue;
    ++nets_checked;

    const GradientSet grads = backprop_grads(spec, ws, ds);
    for (const auto& [edge, g] : grads.hidden) {
      for (int r = 0; r < g.rows(); ++r) {
        for (int c = 0; c < g.cols(); ++c) {
          const double plus = loss_at(spec, ws, ds, false, edge, r, c, h);
          const double minus = loss_at(spec, ws, ds, false, edge, r, c, -h);
          const double fd = (plus - minus) / (2 * h);
          CHECK(std::abs(g(r, c) - fd) <=
                1e-4 * std::max({1e-6, std::abs(fd), std::abs(g(r, c))}));
        }
      }
    }
    for (int r = 0; r < ws.classifier.rows(); ++r) {
      for (int c = 0; c < ws.classifier.cols(); ++c) {
        const double plus = loss_at(spec, ws, ds, true, {0, 0}, r, c, h);
        const double minus = loss_at(spec, ws, ds, true, {0, 0}, r, c, -h);
        const double fd = (plus - minus) / (2 * h);
        CHECK(std::abs(grads.classifier(r, c) - fd) <=
              1e-4 * std::max({1e-6, std::abs(fd),
                               std::abs(grads.classifier(r, c))}));
      }
    }
  }
  CHECK(nets_checked == 5);
}

TEST_CASE("zero learning rate leaves weights untouched") {
  const ArchitectureSpec spec = testutil::tiny_spec(4, 5, 2);
  const Dataset ds = make_synthetic(20, 4, 2, 3);
  SgdConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  cfg.seed = 9;
  const auto [ws, trace] = train_sgd(ds, spec, cfg);
  const WeightSet init = init_weights(spec, cfg.seed, cfg.init_scale);
  CHECK((ws.classifier.array() == init.classifier.array()).all());
  CHECK((ws.hidden.at({1, 0}).array() == init.hidden.at({1, 0}).array()).all());
  CHECK(trace.rows.size() == 3);
}

TEST_CASE("pure linear model converges to the least-squares optimum") {
  // One hidden layer fed by an identity edge on nonnegative data: the model
  // is exactly y ~ V x and SGD faces a convex quadratic.
  ArchitectureSpec spec;
  spec.num_hidden_layers = 1;
  spec.dims = {4, 4, 2};
  spec.inputs = {{{0, EdgeKind::FixedIdentity}}};
  const Dataset ds = make_synthetic(60, 4, 2, 13);

  SgdConfig cfg;
  cfg.learning_rate = 0.02;
  cfg.momentum = 0.9;
  cfg.batch_size = 60;  // full batch: plain deterministic gradient descent
  cfg.epochs = 1500;
  cfg.seed = 4;
  const auto [ws, trace] = train_sgd(ds, spec, cfg);
  REQUIRE(!trace.aborted);

  const Eigen::MatrixXd X = ds.features.transpose();
  const Eigen::MatrixXd T = one_hot(ds.labels, 2);
  const Eigen::MatrixXd Vstar =
      (T * X.transpose()) *
      (X * X.transpose()).ldlt().solve(Eigen::MatrixXd::Identity(4, 4));
  const double optimal = 0.5 * (Vstar * X - T).squaredNorm();
  CHECK(trace.rows.back().objective <=
        optimal + 1e-3 * std::max(1.0, optimal));
}

TEST_CASE("same seed twice gives identical traces") {
  const ArchitectureSpec spec = testutil::fig2_spec(5, 2);
  const Dataset ds = make_synthetic(30, 5, 2, 17);
  SgdConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.epochs = 6;
  cfg.seed = 21;
  const auto [w1, t1] = train_sgd(ds, spec, cfg);
  const auto [w2, t2] = train_sgd(ds, spec, cfg);
  REQUIRE(t1.rows.size() == t2.rows.size());
  for (std::size_t i = 0; i < t1.rows.size(); ++i) {
    CHECK(t1.rows[i].objective == t2.rows[i].objective);
    CHECK(t1.rows[i].dV == t2.rows[i].dV);
    CHECK(t1.rows[i].dW == t2.rows[i].dW);
  }
  CHECK((w1.classifier.array() == w2.classifier.array()).all());
}

TEST_CASE("divergence aborts with the trace so far") {
  // Identity edge keeps the feature path alive, so an absurd step size
  // drives the classifier into overflow instead of dying at zero.
  ArchitectureSpec spec;
  spec.num_hidden_layers = 1;
  spec.dims = {4, 4, 2};
  spec.inputs = {{{0, EdgeKind::FixedIdentity}}};
  const Dataset ds = make_synthetic(20, 4, 2, 3);
  SgdConfig cfg;
  cfg.learning_rate = 1e6;
  cfg.epochs = 200;
  const auto [ws, trace] = train_sgd(ds, spec, cfg);
  CHECK(trace.aborted);
  CHECK(trace.rows.size() < 200);
  (void)ws;
}

TEST_CASE("config validation") {
  const ArchitectureSpec spec = testutil::tiny_spec(4, 5, 2);
  const Dataset ds = make_synthetic(10, 4, 2, 3);
  SgdConfig cfg;
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(train_sgd(ds, spec, cfg), std::invalid_argument);
  cfg.momentum = 0.5;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train_sgd(ds, spec, cfg), std::invalid_argument);
}
