#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <utility>

#include "liftnet/arch.hpp"
#include "liftnet/data.hpp"
#include "liftnet/trace.hpp"

namespace liftnet {

// Plain SGD with momentum on the identical architecture and MSE loss; the
// comparison anchor for the block coordinate trainers.
struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 32;
  int epochs = 100;
  std::uint64_t seed = 0;
  double init_scale = 0.01;
};

struct GradientSet {
  std::map<std::pair<int, int>, Eigen::MatrixXd> hidden;
  Eigen::MatrixXd classifier;
};

// Gradients of 1/2 sum_i |y_i - V u_{i,N}|^2 w.r.t. V and every learnable
// W_{n,m}, with the ReLU subgradient 1{preactivation > 0} (0 at the kink).
GradientSet backprop_grads(const ArchitectureSpec& spec,
                           const WeightSet& weights, const Dataset& batch);

// Full-batch loss 1/2 sum_i |y_i - V u_{i,N}|^2 under feed-forward
// evaluation.
double sgd_loss(const ArchitectureSpec& spec, const WeightSet& weights,
                const Dataset& ds);

// Mini-batch SGD with momentum; one trace row per epoch holding the
// full-batch loss and parameter delta norms. Aborts with the trace so far
// if the loss leaves the finite range. Deterministic in config.seed.
std::pair<WeightSet, TrainTrace> train_sgd(const Dataset& data,
                                           const ArchitectureSpec& spec,
                                           const SgdConfig& config);

}  // namespace liftnet
