#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "liftnet/arch.hpp"
#include "liftnet/data.hpp"
#include "liftnet/lifting.hpp"
#include "liftnet/trace.hpp"

namespace liftnet {

struct TrainConfig {
  double schedule_power = 2.0;   // p > 1, theta_t = 1/(t+1)^p
  std::vector<double> gammas;    // one per hidden layer, or one broadcast value
  int max_epochs = 100;          // one epoch = one block-coordinate iteration
  std::uint64_t seed = 0;
  bool sparse = false;           // BCD-S: l1 row constraints on hidden weights
  double init_scale = 0.01;
  double nnqp_tol = 1e-6;
  int nnqp_max_iter = 2000;
  double w_tol = 1e-6;
  int w_max_iter = 2000;
  double l1_radius = 1.0;
  double weight_decay = 0.0;  // optional lambda/2 |W|^2 on V and hidden weights

  // Test hook: overrides the theta schedule when set.
  std::function<double(int)> theta_override;
};

// theta_t = (1/(t+1))^p. Shifted by one relative to the 1/t^p example so
// that theta stays strictly below 1 and theta_t/(1-theta_t) is finite from
// t = 1 while keeping the p > 1 summability that the convergence rate
// needs. Requires t >= 1, p > 1.
double theta_schedule(int t, double p);

// Per-iteration observer for tests and diagnostics; all pointers are valid
// only during the callback.
struct IterationInfo {
  int iter = 0;
  double theta = 0.0;
  const LiftedBatch* u_star = nullptr;
  const Eigen::MatrixXd* v_star = nullptr;
  const WeightSet* w_star = nullptr;
  const LiftedBatch* u_next = nullptr;
  const Eigen::MatrixXd* v_next = nullptr;
  const WeightSet* w_next = nullptr;
};

struct TrainResult {
  WeightSet weights;
  TrainTrace trace;
};

// Block coordinate descent with proximal sub-problems and convex
// combination updates, in the fixed order u, V, W within one iteration:
//   x_new* = argmin of the block sub-problem with the 1/2 (1-theta_t)^2
//            proximal term, then x^{(t)} = x^{(t-1)} + theta_t (x* - x^{(t-1)}).
// The lifted variables are initialized by the feed-forward pass of the
// initial weights; block 0 stays pinned to the inputs and floating-point
// dust below zero is clamped after every combination. Aborts with the
// trace so far on sub-solver failure or a non-finite objective.
TrainResult train(const Dataset& data, const ArchitectureSpec& spec,
                  const TrainConfig& config,
                  const std::function<void(const IterationInfo&)>& observer = {});

struct ConvergenceReport {
  double C = 0.0;           // max_t total_delta_t / (theta_t/(1-theta_t))
  bool dominated = false;   // C is finite over the window
  std::vector<double> ratios;     // per-iteration delta / (theta/(1-theta))
  std::vector<double> tail_sums;  // sum_{k>=t} theta_k/(1-theta_k) over window
};

// Fits the smallest C with total block delta <= C theta_t/(1-theta_t) over
// the recorded window and reports the tail sums of the step-bound series.
// Requires at least 10 iterations of trace.
ConvergenceReport convergence_report(const TrainTrace& trace);

}  // namespace liftnet
