#pragma once

// Shared fixtures and independent oracles for the unit suites. Oracles here
// re-derive quantities from first principles (explicit loops over layers,
// dense matrices, finite differences) and must not reuse the library's
// operator plumbing beyond plain data access.

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "liftnet/arch.hpp"
#include "liftnet/lifting.hpp"
#include "liftnet/rng.hpp"

namespace liftnet::testutil {

// The paper-figure topology at arbitrary width: three hidden layers, skip
// identities (2,0), (3,0), (3,1); all hidden dims equal d, input dim d.
inline ArchitectureSpec fig2_spec(int d = 6, int classes = 3) {
  ArchitectureSpec spec;
  spec.num_hidden_layers = 3;
  spec.dims = {d, d, d, d, classes};
  spec.inputs = {
      {{0, EdgeKind::Learnable}},
      {{0, EdgeKind::FixedIdentity}, {1, EdgeKind::Learnable}},
      {{0, EdgeKind::FixedIdentity},
       {1, EdgeKind::FixedIdentity},
       {2, EdgeKind::Learnable}},
  };
  return spec;
}

// Single hidden layer, one learnable edge.
inline ArchitectureSpec tiny_spec(int d0, int d1, int classes) {
  ArchitectureSpec spec;
  spec.num_hidden_layers = 1;
  spec.dims = {d0, d1, classes};
  spec.inputs = {{{0, EdgeKind::Learnable}}};
  return spec;
}

inline Eigen::VectorXd random_vector(Rng& rng, int d, double scale = 1.0) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = scale * rng.normal();
  return v;
}

inline Eigen::MatrixXd random_matrix(Rng& rng, int r, int c, double scale = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

inline WeightSet random_weights(const ArchitectureSpec& spec, Rng& rng,
                                double scale = 0.5) {
  WeightSet ws;
  for (const auto& [n, m] : spec.learnable_edges()) {
    ws.hidden[{n, m}] = random_matrix(rng, spec.dims[n], spec.dims[m], scale);
  }
  ws.classifier = random_matrix(rng, spec.num_classes(), spec.feature_dim(), scale);
  return ws;
}

// Naive penalty sum, straight from the constraint residuals:
//   sum_n gamma_n |u_n - sum_{m in M_n} W_{n,m} u_m|^2
// written with scalar loops so it shares nothing with LiftedQuadratic.
inline double naive_penalty(const ArchitectureSpec& spec, const WeightSet& ws,
                            const std::vector<double>& gammas,
                            const Eigen::VectorXd& u) {
  const auto off = spec.block_offsets();
  double total = 0.0;
  for (int n = 1; n <= spec.N(); ++n) {
    for (int r = 0; r < spec.dims[n]; ++r) {
      double resid = u[off[n] + r];
      for (const auto& in : spec.layer_inputs(n)) {
        if (in.kind == EdgeKind::FixedIdentity) {
          resid -= u[off[in.source] + r];
        } else {
          const Eigen::MatrixXd& w = ws.hidden.at({n, in.source});
          for (int c = 0; c < spec.dims[in.source]; ++c) {
            resid -= w(r, c) * u[off[in.source] + c];
          }
        }
      }
      total += gammas[static_cast<std::size_t>(n) - 1] * resid * resid;
    }
  }
  return total;
}

// Dense D x D materialization of Q by probing the penalty against basis
// vectors of the Tikhonov factor structure: Q_ij from polarization of the
// naive penalty, usable on small dims only.
inline Eigen::MatrixXd densify_quadratic(const ArchitectureSpec& spec,
                                         const WeightSet& ws,
                                         const std::vector<double>& gammas) {
  const int D = spec.lifted_dim();
  Eigen::MatrixXd Q(D, D);
  std::vector<double> diag(static_cast<std::size_t>(D));
  for (int i = 0; i < D; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(D);
    e[i] = 1.0;
    diag[static_cast<std::size_t>(i)] = naive_penalty(spec, ws, gammas, e);
  }
  for (int i = 0; i < D; ++i) {
    Q(i, i) = diag[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < D; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(D);
      e[i] = 1.0;
      e[j] = 1.0;
      const double q = naive_penalty(spec, ws, gammas, e);
      Q(i, j) = Q(j, i) = 0.5 * (q - diag[static_cast<std::size_t>(i)] -
                                 diag[static_cast<std::size_t>(j)]);
    }
  }
  return Q;
}

}  // namespace liftnet::testutil
