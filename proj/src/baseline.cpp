#include "liftnet/baseline.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "liftnet/inference.hpp"
#include "liftnet/lifting.hpp"
#include "liftnet/rng.hpp"

namespace liftnet {

namespace {

double nnz_fraction(const Eigen::MatrixXd& w) {
  if (w.size() == 0) return 0.0;
  return static_cast<double>((w.cwiseAbs().array() > kNonzeroThreshold).count()) /
         static_cast<double>(w.size());
}

}  // namespace

GradientSet backprop_grads(const ArchitectureSpec& spec,
                           const WeightSet& weights, const Dataset& batch) {
  require_valid(spec);
  const int N = spec.N();
  const int nb = batch.n();
  const Eigen::MatrixXd X0 = batch.features.transpose();

  // Forward with cached preactivation signs.
  std::vector<Eigen::MatrixXd> u(static_cast<std::size_t>(N) + 1);
  std::vector<Eigen::ArrayXXd> mask(static_cast<std::size_t>(N) + 1);
  u[0] = X0;
  for (int n = 1; n <= N; ++n) {
    Eigen::MatrixXd pre = Eigen::MatrixXd::Zero(spec.dims[n], nb);
    for (const auto& in : spec.layer_inputs(n)) {
      if (in.kind == EdgeKind::FixedIdentity) {
        pre += u[static_cast<std::size_t>(in.source)];
      } else {
        pre.noalias() += weights.hidden.at({n, in.source}) *
                         u[static_cast<std::size_t>(in.source)];
      }
    }
    mask[static_cast<std::size_t>(n)] = (pre.array() > 0.0).cast<double>();
    u[static_cast<std::size_t>(n)] = pre.cwiseMax(0.0);
  }

  const Eigen::MatrixXd targets = one_hot(batch.labels, spec.num_classes());
  const Eigen::MatrixXd err = weights.classifier * u[static_cast<std::size_t>(N)] -
                              targets;  // dL/d(Vu_N)

  GradientSet grads;
  grads.classifier = err * u[static_cast<std::size_t>(N)].transpose();

  // Reverse pass: g[n] accumulates dL/du_n from all consumers.
  std::vector<Eigen::MatrixXd> g(static_cast<std::size_t>(N) + 1);
  for (int n = 0; n <= N; ++n) {
    g[static_cast<std::size_t>(n)] = Eigen::MatrixXd::Zero(spec.dims[n], nb);
  }
  g[static_cast<std::size_t>(N)] = weights.classifier.transpose() * err;
  for (int n = N; n >= 1; --n) {
    const Eigen::MatrixXd delta =
        (g[static_cast<std::size_t>(n)].array() * mask[static_cast<std::size_t>(n)])
            .matrix();
    for (const auto& in : spec.layer_inputs(n)) {
      if (in.kind == EdgeKind::FixedIdentity) {
        g[static_cast<std::size_t>(in.source)] += delta;
      } else {
        grads.hidden[{n, in.source}] =
            delta * u[static_cast<std::size_t>(in.source)].transpose();
        g[static_cast<std::size_t>(in.source)].noalias() +=
            weights.hidden.at({n, in.source}).transpose() * delta;
      }
    }
  }
  return grads;
}

double sgd_loss(const ArchitectureSpec& spec, const WeightSet& weights,
                const Dataset& ds) {
  const auto blocks = forward_batch(spec, weights, ds.features.transpose());
  const Eigen::MatrixXd targets = one_hot(ds.labels, spec.num_classes());
  return 0.5 * (weights.classifier * blocks.back() - targets).squaredNorm();
}

std::pair<WeightSet, TrainTrace> train_sgd(const Dataset& data,
                                           const ArchitectureSpec& spec,
                                           const SgdConfig& config) {
  require_valid(spec);
  if (data.n() == 0) throw std::invalid_argument("train_sgd: empty dataset");
  if (!(config.learning_rate >= 0.0)) {
    throw std::invalid_argument("train_sgd: learning rate must be >= 0");
  }
  if (!(config.momentum >= 0.0 && config.momentum < 1.0)) {
    throw std::invalid_argument("train_sgd: momentum must be in [0, 1)");
  }
  if (config.batch_size < 1) {
    throw std::invalid_argument("train_sgd: batch size must be >= 1");
  }

  WeightSet ws = init_weights(spec, config.seed, config.init_scale);
  GradientSet vel;
  for (const auto& [key, w] : ws.hidden) {
    vel.hidden[key] = Eigen::MatrixXd::Zero(w.rows(), w.cols());
  }
  vel.classifier =
      Eigen::MatrixXd::Zero(ws.classifier.rows(), ws.classifier.cols());

  TrainTrace trace;
  for (const auto& [key, w] : ws.hidden) {
    trace.nnz_names.push_back("w" + std::to_string(key.first) + "_" +
                              std::to_string(key.second));
    (void)w;
  }

  Rng rng(config.seed ^ 0x5deece66dULL);
  std::vector<int> order(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) order[static_cast<std::size_t>(i)] = i;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start_time = std::chrono::steady_clock::now();
    const WeightSet before = ws;

    for (std::size_t i = order.size(); i > 1; --i) {  // Fisher-Yates, pinned RNG
      std::swap(order[i - 1], order[rng.uniform_int(i)]);
    }

    for (int lo = 0; lo < data.n(); lo += config.batch_size) {
      const int hi = std::min(data.n(), lo + config.batch_size);
      Dataset mb;
      mb.features.resize(hi - lo, data.dim());
      mb.labels.resize(static_cast<std::size_t>(hi - lo));
      mb.num_classes = data.num_classes;
      for (int k = lo; k < hi; ++k) {
        mb.features.row(k - lo) =
            data.features.row(order[static_cast<std::size_t>(k)]);
        mb.labels[static_cast<std::size_t>(k - lo)] =
            data.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
      }
      const GradientSet grads = backprop_grads(spec, ws, mb);
      for (auto& [key, v] : vel.hidden) {
        v = config.momentum * v - config.learning_rate * grads.hidden.at(key);
        ws.hidden[key] += v;
      }
      vel.classifier = config.momentum * vel.classifier -
                       config.learning_rate * grads.classifier;
      ws.classifier += vel.classifier;
    }

    TrainTraceRow row;
    row.iter = epoch;
    row.objective = sgd_loss(spec, ws, data);
    row.du = 0.0;
    row.dV = (ws.classifier - before.classifier).norm();
    row.dW = 0.0;
    for (const auto& [key, w] : ws.hidden) {
      row.dW += (w - before.hidden.at(key)).norm();
    }
    row.theta = 0.0;
    row.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start_time)
                      .count();
    for (const auto& [key, w] : ws.hidden) {
      row.nnz.push_back(nnz_fraction(w));
      (void)key;
    }
    trace.rows.push_back(std::move(row));

    if (!std::isfinite(trace.rows.back().objective)) {
      trace.aborted = true;
      trace.abort_reason = "non-finite loss at epoch " + std::to_string(epoch);
      break;
    }
  }
  return {std::move(ws), std::move(trace)};
}

}  // namespace liftnet
