#pragma once

#include <Eigen/Core>
#include <vector>

#include "liftnet/arch.hpp"
#include "liftnet/data.hpp"

namespace liftnet {

// Per-sample lifted vectors u_i = [u_{i,0}; ...; u_{i,N}] held column-wise,
// plus one-hot targets. Block 0 of every column is pinned to the sample
// input x_i; blocks n >= 1 are constrained entrywise nonnegative.
struct LiftedBatch {
  Eigen::MatrixXd u;        // D x n, column i = u_i
  Eigen::MatrixXd targets;  // C x n one-hot
  std::vector<int> labels;
  std::vector<int> offsets;  // block offsets 0..N (+ terminal D)

  int n() const { return static_cast<int>(u.cols()); }
  int dim() const { return static_cast<int>(u.rows()); }
  int num_blocks() const { return static_cast<int>(offsets.size()) - 1; }

  Eigen::Block<Eigen::MatrixXd> block(int k) {
    return u.middleRows(offsets[k], offsets[k + 1] - offsets[k]);
  }
  Eigen::Block<const Eigen::MatrixXd> block(int k) const {
    return u.middleRows(offsets[k], offsets[k + 1] - offsets[k]);
  }
};

// Builds a batch with block 0 = x_i and all other blocks zero.
LiftedBatch lift_dataset(const ArchitectureSpec& spec, const Dataset& ds);

// Violations of the batch invariants (block-0 pinning is implicit in the
// representation; this verifies nonnegativity and finiteness).
std::vector<std::string> validate_batch(const LiftedBatch& batch);

// Block representation of the quadratic penalty
//   u' Q(W) u = sum_n gamma_n || u_n - sum_{m in M_n} W_{n,m} u_m ||^2
// applied matrix-free through the per-layer residual operators
// A_n = S_n - sum_m W_{n,m} S_m (identity edges contribute S_m with unit
// weight). Q = Gamma' Gamma with Gamma stacking sqrt(gamma_n) A_n, so the
// form is positive semidefinite by construction. The one-half in front of
// u'Qu in the full objective reproduces the gamma_n/2 penalty exactly.
class LiftedQuadratic {
 public:
  LiftedQuadratic(const ArchitectureSpec& spec, const WeightSet& weights,
                  std::vector<double> gammas);

  int dim() const { return total_dim_; }
  // Rows of the Tikhonov factor: sum of d_n over n >= 1.
  int factor_dim() const { return factor_dim_; }
  const std::vector<double>& gammas() const { return gammas_; }
  const ArchitectureSpec& spec() const { return spec_; }

  // u' Q u, always >= 0 up to roundoff.
  double quadratic_form(const Eigen::VectorXd& u) const;

  // Q u. With reduce_input_block set the operator acts as the principal
  // submatrix over blocks 1..N embedded in full dimension: block 0 of the
  // input is treated as structurally zero (its products are skipped) and
  // block 0 of the output stays zero. The u sub-problem eliminates the
  // pinned input block this way and folds its constant contribution into
  // the linear term once per sample.
  void apply(const Eigen::VectorXd& u, Eigen::VectorXd& out,
             bool reduce_input_block = false) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& u) const;

  // Gamma u: stacked blocks sqrt(gamma_n) * A_n u; |Gamma u|^2 = u'Qu.
  Eigen::VectorXd tikhonov_factor(const Eigen::VectorXd& u) const;

  // Block u_N of a lifted vector (the P selector of the output block).
  Eigen::VectorXd select_output(const Eigen::VectorXd& u) const;

  // sum_i u_i' Q u_i over the columns of U, computed with batched residuals.
  double batch_quadratic(const Eigen::MatrixXd& U) const;

 private:
  // Layer residual r_n = u_n - sum_m W_{n,m} u_m into a preallocated vector.
  template <class Vec>
  void layer_residual(int n, const Eigen::VectorXd& u, Vec&& r,
                      bool skip_input_sources = false) const;

  ArchitectureSpec spec_;
  WeightSet weights_;  // learnable matrices only; identity edges are structural
  std::vector<double> gammas_;
  std::vector<int> offsets_;
  int total_dim_ = 0;
  int factor_dim_ = 0;
};

LiftedQuadratic build_quadratic(const ArchitectureSpec& spec,
                                const WeightSet& weights,
                                std::vector<double> gammas);

// Block u_N given the architecture's lifted layout.
Eigen::VectorXd select_output(const ArchitectureSpec& spec,
                              const Eigen::VectorXd& u);

// sum_i [ 1/2 |y_i - V u_{i,N}|^2 + 1/2 u_i' Q u_i ].
double full_objective(const LiftedBatch& batch, const LiftedQuadratic& q,
                      const Eigen::MatrixXd& V);

// One-hot encoding of integer labels.
Eigen::MatrixXd one_hot(const std::vector<int>& labels, int num_classes);

}  // namespace liftnet
