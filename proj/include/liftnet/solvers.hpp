#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "liftnet/arch.hpp"
#include "liftnet/lifting.hpp"

namespace liftnet {

// Entrywise max{0, x}; the unique minimizer of |u - x|^2 over u >= 0.
Eigen::VectorXd relu_project(const Eigen::VectorXd& x);

// Exact Euclidean projection of w onto {v : |v|_1 <= radius}, by sorted
// soft-threshold search. radius must be positive.
Eigen::VectorXd project_l1_ball_row(const Eigen::VectorXd& w, double radius);

// min 1/2 u'Hu - b'u  subject to u_j >= 0 on free coordinates and
// u_j = fixed_values_j where fixed_j is set. H must be symmetric PSD.
struct NnqpProblem {
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> hessian_apply;
  Eigen::VectorXd linear;          // b
  std::vector<char> fixed;         // per coordinate; empty = all free
  Eigen::VectorXd fixed_values;    // only read where fixed is set
  double lipschitz = 0.0;          // upper bound on the free-block spectrum;
                                   // 0 = estimate internally by power iteration
};

struct NnqpResult {
  Eigen::VectorXd x;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;   // projected-gradient residual at x
  double objective = 0.0;  // 1/2 x'Hx - b'x
};

// Accelerated projected gradient with step 1/L (L from 30 power iterations
// when not supplied) and restart on non-monotone steps. Stops when the
// projected-gradient residual drops below tol * (1 + |b|); on iteration
// exhaustion returns the best iterate with converged = false. The result
// satisfies the componentwise KKT conditions at the reported residual:
// x_j > 0 => |(Hx-b)_j| <= res, x_j = 0 => (Hx-b)_j >= -res.
NnqpResult solve_nnqp(const NnqpProblem& p, const Eigen::VectorXd& start,
                      double tol, int max_iter);

// Spectral-norm estimate of a symmetric PSD operator by power iteration.
double estimate_operator_norm(
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply,
    int dim, int iterations = 30, const std::vector<char>* zero_mask = nullptr);

struct SubproblemReport {
  bool all_converged = true;
  int num_failed = 0;
  int max_iterations = 0;
  double max_residual = 0.0;
};

// Per-sample proximal u sub-problem:
//   min_{u in U} 1/2 |y_i - V P u|^2 + 1/2 u'Qu + 1/2 (1-theta)^2 |u - u_i^prev|^2
// i.e. an NNQP with H = P'V'VP + Q + (1-theta)^2 I and
// b = P'V'y_i + (1-theta)^2 u_i^prev, block 0 pinned to x_i. `batch`
// supplies inputs and targets, `prev` the proximal centers and warm starts.
// Samples are independent; results equal sequential per-sample solves for
// every thread count.
LiftedBatch solve_u_subproblem(const LiftedBatch& batch,
                               const LiftedQuadratic& q,
                               const Eigen::MatrixXd& V, double theta,
                               const LiftedBatch& prev, double tol,
                               int max_iter = 2000,
                               SubproblemReport* report = nullptr);

// Classifier sub-problem
//   min_V sum_i 1/2 |y_i - V u_{i,N}|^2 + 1/2 (1-theta)^2 |V - V_prev|_F^2
// solved in closed form: V* = (sum_i y_i u' + (1-theta)^2 V_prev)
// (sum_i u u' + (1-theta)^2 I)^{-1}, falling back to the spectral
// pseudo-inverse (minimum-norm solution) when theta = 1 leaves the Gram
// matrix singular. weight_decay adds an optional lambda/2 |V|_F^2 term.
Eigen::MatrixXd solve_v_subproblem(const LiftedBatch& batch,
                                   const Eigen::MatrixXd& V_prev, double theta,
                                   double weight_decay = 0.0);

// Per-layer weight sub-problem
//   min_W sum_i gamma_n/2 |c_{i,n} - W_n z_{i,n}|^2
//         + 1/2 (1-theta)^2 |W_n - W_n^prev|_F^2
// with c_{i,n} = u_{i,n} - sum_{identity m} u_{i,m} and z_{i,n} the
// concatenation of u_{i,m} over learnable m. Dense mode solves the ridge
// system in closed form; sparse mode runs accelerated projected gradient
// with every row of every edge block projected onto the l1 ball of the
// given radius after each step. Layers without learnable edges keep their
// (empty) weights untouched.
WeightSet solve_w_subproblem(const LiftedBatch& batch,
                             const ArchitectureSpec& spec,
                             const WeightSet& W_prev,
                             const std::vector<double>& gammas, double theta,
                             bool sparse, double tol = 1e-6,
                             int max_iter = 2000, double l1_radius = 1.0,
                             double weight_decay = 0.0,
                             SubproblemReport* report = nullptr);

// RHS * (G + ridge I)^{-1} for symmetric PSD G; uses the spectral
// pseudo-inverse when ridge vanishes (minimum-norm solution).
Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& G,
                            const Eigen::MatrixXd& rhs, double ridge);

}  // namespace liftnet
