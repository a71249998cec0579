#include "liftnet/lifting.hpp"

#include <cmath>
#include <stdexcept>

namespace liftnet {

Eigen::MatrixXd one_hot(const std::vector<int>& labels, int num_classes) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(num_classes, labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw std::invalid_argument("label out of range: " +
                                  std::to_string(labels[i]));
    }
    t(labels[i], static_cast<Eigen::Index>(i)) = 1.0;
  }
  return t;
}

LiftedBatch lift_dataset(const ArchitectureSpec& spec, const Dataset& ds) {
  require_valid(spec);
  if (ds.dim() != spec.input_dim()) {
    throw std::invalid_argument("dataset dim " + std::to_string(ds.dim()) +
                                " != architecture input dim " +
                                std::to_string(spec.input_dim()));
  }
  LiftedBatch batch;
  batch.offsets = spec.block_offsets();
  batch.u = Eigen::MatrixXd::Zero(spec.lifted_dim(), ds.n());
  batch.u.topRows(spec.input_dim()) = ds.features.transpose();
  batch.labels = ds.labels;
  batch.targets = one_hot(ds.labels, spec.num_classes());
  return batch;
}

std::vector<std::string> validate_batch(const LiftedBatch& batch) {
  std::vector<std::string> errors;
  if (!batch.u.allFinite()) errors.push_back("non-finite lifted values");
  for (int k = 1; k < batch.num_blocks(); ++k) {
    if ((batch.block(k).array() < 0.0).any()) {
      errors.push_back("block " + std::to_string(k) + " has negative entries");
    }
  }
  if (batch.targets.cols() != batch.u.cols()) {
    errors.push_back("target count mismatch");
  }
  return errors;
}

LiftedQuadratic::LiftedQuadratic(const ArchitectureSpec& spec,
                                 const WeightSet& weights,
                                 std::vector<double> gammas)
    : spec_(spec), gammas_(std::move(gammas)) {
  require_valid(spec_);
  const auto werrors = validate_weights(spec_, weights);
  if (!werrors.empty()) {
    throw std::invalid_argument("bad weights for quadratic: " + werrors.front());
  }
  if (static_cast<int>(gammas_.size()) != spec_.N()) {
    throw std::invalid_argument("need one gamma per hidden layer");
  }
  for (double g : gammas_) {
    if (!(g >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  }
  weights_.hidden = weights.hidden;  // classifier not part of Q
  offsets_ = spec_.block_offsets();
  total_dim_ = spec_.lifted_dim();
  factor_dim_ = total_dim_ - spec_.input_dim();
}

template <class Vec>
void LiftedQuadratic::layer_residual(int n, const Eigen::VectorXd& u, Vec&& r,
                                     bool skip_input_sources) const {
  r = u.segment(offsets_[n], spec_.dims[n]);
  for (const auto& in : spec_.layer_inputs(n)) {
    if (skip_input_sources && in.source == 0) continue;
    const auto um = u.segment(offsets_[in.source], spec_.dims[in.source]);
    if (in.kind == EdgeKind::FixedIdentity) {
      r -= um;
    } else {
      r.noalias() -= weights_.hidden.at({n, in.source}) * um;
    }
  }
}

double LiftedQuadratic::quadratic_form(const Eigen::VectorXd& u) const {
  if (u.size() != total_dim_) {
    throw std::invalid_argument("quadratic_form: expected dim " +
                                std::to_string(total_dim_));
  }
  double sum = 0.0;
  Eigen::VectorXd r;
  for (int n = 1; n <= spec_.N(); ++n) {
    layer_residual(n, u, r);
    sum += gammas_[n - 1] * r.squaredNorm();
  }
  return sum;
}

void LiftedQuadratic::apply(const Eigen::VectorXd& u, Eigen::VectorXd& out,
                            bool reduce_input_block) const {
  if (u.size() != total_dim_) {
    throw std::invalid_argument("apply: expected dim " +
                                std::to_string(total_dim_));
  }
  out.setZero(total_dim_);
  Eigen::VectorXd r;
  for (int n = 1; n <= spec_.N(); ++n) {
    layer_residual(n, u, r, reduce_input_block);
    r *= gammas_[n - 1];
    out.segment(offsets_[n], spec_.dims[n]) += r;
    for (const auto& in : spec_.layer_inputs(n)) {
      if (reduce_input_block && in.source == 0) continue;
      auto om = out.segment(offsets_[in.source], spec_.dims[in.source]);
      if (in.kind == EdgeKind::FixedIdentity) {
        om -= r;
      } else {
        om.noalias() -= weights_.hidden.at({n, in.source}).transpose() * r;
      }
    }
  }
}

Eigen::VectorXd LiftedQuadratic::apply(const Eigen::VectorXd& u) const {
  Eigen::VectorXd out;
  apply(u, out);
  return out;
}

Eigen::VectorXd LiftedQuadratic::tikhonov_factor(const Eigen::VectorXd& u) const {
  if (u.size() != total_dim_) {
    throw std::invalid_argument("tikhonov_factor: expected dim " +
                                std::to_string(total_dim_));
  }
  Eigen::VectorXd out(factor_dim_);
  int row = 0;
  for (int n = 1; n <= spec_.N(); ++n) {
    auto r = out.segment(row, spec_.dims[n]);
    layer_residual(n, u, r);
    r *= std::sqrt(gammas_[n - 1]);
    row += spec_.dims[n];
  }
  return out;
}

Eigen::VectorXd LiftedQuadratic::select_output(const Eigen::VectorXd& u) const {
  if (u.size() != total_dim_) {
    throw std::invalid_argument("select_output: expected dim " +
                                std::to_string(total_dim_));
  }
  return u.segment(offsets_[spec_.N()], spec_.feature_dim());
}

double LiftedQuadratic::batch_quadratic(const Eigen::MatrixXd& U) const {
  if (U.rows() != total_dim_) {
    throw std::invalid_argument("batch_quadratic: expected dim " +
                                std::to_string(total_dim_));
  }
  double sum = 0.0;
  Eigen::MatrixXd r;
  for (int n = 1; n <= spec_.N(); ++n) {
    r = U.middleRows(offsets_[n], spec_.dims[n]);
    for (const auto& in : spec_.layer_inputs(n)) {
      const auto um = U.middleRows(offsets_[in.source], spec_.dims[in.source]);
      if (in.kind == EdgeKind::FixedIdentity) {
        r -= um;
      } else {
        r.noalias() -= weights_.hidden.at({n, in.source}) * um;
      }
    }
    sum += gammas_[n - 1] * r.squaredNorm();
  }
  return sum;
}

LiftedQuadratic build_quadratic(const ArchitectureSpec& spec,
                                const WeightSet& weights,
                                std::vector<double> gammas) {
  return LiftedQuadratic(spec, weights, std::move(gammas));
}

Eigen::VectorXd select_output(const ArchitectureSpec& spec,
                              const Eigen::VectorXd& u) {
  if (u.size() != spec.lifted_dim()) {
    throw std::invalid_argument("select_output: expected dim " +
                                std::to_string(spec.lifted_dim()));
  }
  const auto off = spec.block_offsets();
  return u.segment(off[spec.N()], spec.feature_dim());
}

double full_objective(const LiftedBatch& batch, const LiftedQuadratic& q,
                      const Eigen::MatrixXd& V) {
  if (batch.n() == 0) return 0.0;
  if (batch.dim() != q.dim()) {
    throw std::invalid_argument("batch/quadratic dimension mismatch");
  }
  const int N = q.spec().N();
  const Eigen::MatrixXd scores = V * batch.block(N);
  const double loss = 0.5 * (batch.targets - scores).squaredNorm();
  return loss + 0.5 * q.batch_quadratic(batch.u);
}

}  // namespace liftnet
