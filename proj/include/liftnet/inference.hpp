#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "liftnet/arch.hpp"
#include "liftnet/data.hpp"

namespace liftnet {

// Feed-forward pass: u_0 = x, u_n = max{0, sum_{m in M_n} W_{n,m} u_m}
// (identity edges contribute u_m directly). Returns all blocks u_0..u_N;
// the last one is the feature vector.
std::vector<Eigen::VectorXd> forward(const ArchitectureSpec& spec,
                                     const WeightSet& weights,
                                     const Eigen::VectorXd& x);

// Batched feature extraction: row i = u_N for sample i of the dataset.
Eigen::MatrixXd extract_features(const ArchitectureSpec& spec,
                                 const WeightSet& weights, const Dataset& ds);

// Batched forward over columns of X0 (d_0 x n); returns all blocks.
std::vector<Eigen::MatrixXd> forward_batch(const ArchitectureSpec& spec,
                                           const WeightSet& weights,
                                           const Eigen::MatrixXd& X0);

// One-vs-rest linear classifier with a squared-hinge loss,
//   f_c(w) = 1/n sum_i max(0, 1 - s_i w'phi_i)^2 + reg/2 |w|^2,
// on bias-augmented features phi = [x; 1]. Trained by accelerated gradient
// descent from zero to the requested gradient norm; deterministic.
struct LinearClassifier {
  Eigen::MatrixXd weights;  // C x d
  Eigen::VectorXd bias;     // C
  int feature_dim = 0;
  int num_classes = 0;
};

LinearClassifier fit_linear_svm(const Eigen::MatrixXd& features,
                                const std::vector<int>& labels, double reg,
                                double grad_tol = 1e-5, int max_iter = 50000);

// Class scores for one feature vector.
Eigen::VectorXd classifier_scores(const LinearClassifier& clf,
                                  const Eigen::VectorXd& feature);

struct EvalMetrics {
  double error = 0.0;  // top-1 error rate in [0, 1]
  std::vector<int> per_class_total;
  std::vector<int> per_class_correct;
  int n = 0;
};

// Top-1 error of classifier(features(x)) over the dataset.
EvalMetrics evaluate(const ArchitectureSpec& spec, const WeightSet& weights,
                     const LinearClassifier& clf, const Dataset& ds);

// Diagnostic implementation of the per-label decision rule
// argmin_y min_u 1/2|onehot(y) - V P u|^2 + 1/2 u'Qu with u_0 = x, u >= 0.
// One constrained solve per candidate label; intended for tiny instances.
int ideal_decision(const ArchitectureSpec& spec, const WeightSet& weights,
                   const std::vector<double>& gammas, const Eigen::VectorXd& x);

// Versioned flat binary weight container. Layout (all little-endian):
//   magic "LNWB", u32 version = 1, u32 N, u32 dims[N+2],
//   u32 edge_count, edges (u32 layer, u32 source, u8 kind),
//   then for each learnable edge in sorted (layer, source) order the
//   d_layer x d_source matrix as row-major f64, then V (C x d_N row-major).
void save_weights(const ArchitectureSpec& spec, const WeightSet& weights,
                  const std::string& path);

// Loads and validates against the given architecture; throws on any
// mismatch or corruption.
WeightSet load_weights(const ArchitectureSpec& spec, const std::string& path);

}  // namespace liftnet
