#include "liftnet/solvers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "apg.hpp"
#include "liftnet/parallel.hpp"
#include "liftnet/rng.hpp"

namespace liftnet {

Eigen::VectorXd relu_project(const Eigen::VectorXd& x) {
  return x.cwiseMax(0.0);
}

Eigen::VectorXd project_l1_ball_row(const Eigen::VectorXd& w, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("l1 radius must be > 0");
  const Eigen::VectorXd mag = w.cwiseAbs();
  if (mag.sum() <= radius) return w;

  // Duchi et al. sorted soft-threshold: tau = (cum_rho - radius)/rho with
  // rho the largest prefix keeping mu_j - tau positive.
  std::vector<double> mu(mag.data(), mag.data() + mag.size());
  std::sort(mu.begin(), mu.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    cum += mu[j];
    const double t = (cum - radius) / static_cast<double>(j + 1);
    if (mu[j] - t > 0.0) tau = t;
  }
  Eigen::VectorXd out(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double m = std::abs(w[i]) - tau;
    out[i] = m > 0.0 ? (w[i] > 0.0 ? m : -m) : 0.0;
  }
  return out;
}

double estimate_operator_norm(
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply,
    int dim, int iterations, const std::vector<char>* zero_mask) {
  Rng rng(0x243f6a8885a308d3ULL);  // fixed stream: estimates are reproducible
  Eigen::VectorXd v(dim), w(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  if (zero_mask) {
    for (int i = 0; i < dim; ++i) {
      if ((*zero_mask)[i]) v[i] = 0.0;
    }
  }
  double norm = v.norm();
  if (norm <= 0.0) return 0.0;
  v /= norm;
  for (int it = 0; it < iterations; ++it) {
    apply(v, w);
    if (zero_mask) {
      for (int i = 0; i < dim; ++i) {
        if ((*zero_mask)[i]) w[i] = 0.0;
      }
    }
    norm = w.norm();
    if (norm <= 1e-300) return 0.0;
    v = w / norm;
  }
  return norm;
}

namespace {

// Componentwise projected-gradient residual for nonnegativity constraints:
// active coordinates contribute min(g, 0), strictly positive ones g itself.
double nnqp_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double r = x[j] > 0.0 ? g[j] : std::min(g[j], 0.0);
    sum += r * r;
  }
  return std::sqrt(sum);
}

}  // namespace

NnqpResult solve_nnqp(const NnqpProblem& p, const Eigen::VectorXd& start,
                      double tol, int max_iter) {
  const Eigen::Index dim = p.linear.size();
  if (start.size() != dim) {
    throw std::invalid_argument("solve_nnqp: start/linear dimension mismatch");
  }
  const bool has_fixed =
      !p.fixed.empty() &&
      std::any_of(p.fixed.begin(), p.fixed.end(), [](char c) { return c != 0; });
  if (!p.fixed.empty() && static_cast<Eigen::Index>(p.fixed.size()) != dim) {
    throw std::invalid_argument("solve_nnqp: fixed mask size mismatch");
  }

  auto zero_fixed = [&](Eigen::VectorXd& v) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      if (p.fixed[static_cast<std::size_t>(j)]) v[j] = 0.0;
    }
  };

  // The pinned coordinates are eliminated: the operator acts on the free
  // principal block (fixed coordinates zeroed on both sides) and their
  // constant cross-term moves into the linear part.
  Eigen::VectorXd b = p.linear;
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> op;
  Eigen::VectorXd scratch(dim);
  if (has_fixed) {
    Eigen::VectorXd embedded = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
      if (p.fixed[static_cast<std::size_t>(j)]) embedded[j] = p.fixed_values[j];
    }
    Eigen::VectorXd shift(dim);
    p.hessian_apply(embedded, shift);
    b -= shift;
    zero_fixed(b);
    op = [&p, dim, work = Eigen::VectorXd(dim)](const Eigen::VectorXd& v,
                                                Eigen::VectorXd& out) mutable {
      work = v;
      for (Eigen::Index j = 0; j < dim; ++j) {
        if (p.fixed[static_cast<std::size_t>(j)]) work[j] = 0.0;
      }
      p.hessian_apply(work, out);
      for (Eigen::Index j = 0; j < dim; ++j) {
        if (p.fixed[static_cast<std::size_t>(j)]) out[j] = 0.0;
      }
    };
  } else {
    op = p.hessian_apply;
  }

  double L = p.lipschitz;
  if (L <= 0.0) {
    L = 1.1 * estimate_operator_norm(op, static_cast<int>(dim), 30,
                                     has_fixed ? &p.fixed : nullptr);
  }

  Eigen::VectorXd x0 = start;
  if (has_fixed) zero_fixed(x0);

  auto project = [](Eigen::VectorXd& v) { v = v.cwiseMax(0.0); };
  const double tol_abs = tol * (1.0 + p.linear.norm());

  auto r = detail::apg_minimize<Eigen::VectorXd>(op, b, x0, L, tol_abs,
                                                 max_iter, project,
                                                 nnqp_residual);

  NnqpResult result;
  result.converged = r.converged;
  result.iterations = r.iterations;
  result.residual = r.residual;
  result.x = std::move(r.x);
  if (has_fixed) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      if (p.fixed[static_cast<std::size_t>(j)]) result.x[j] = p.fixed_values[j];
    }
    p.hessian_apply(result.x, scratch);
    result.objective = 0.5 * result.x.dot(scratch) - p.linear.dot(result.x);
  } else {
    result.objective = r.objective;
  }
  return result;
}

LiftedBatch solve_u_subproblem(const LiftedBatch& batch,
                               const LiftedQuadratic& q,
                               const Eigen::MatrixXd& V, double theta,
                               const LiftedBatch& prev, double tol,
                               int max_iter, SubproblemReport* report) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw std::invalid_argument("theta must be in [0, 1]");
  }
  if (batch.dim() != q.dim() || prev.dim() != q.dim() ||
      batch.n() != prev.n()) {
    throw std::invalid_argument("solve_u_subproblem: shape mismatch");
  }
  const ArchitectureSpec& spec = q.spec();
  const auto off = spec.block_offsets();
  const int d0 = spec.input_dim();
  const int dN = spec.feature_dim();
  const int offN = off[spec.N()];
  const int D = q.dim();
  const int n = batch.n();
  if (V.rows() != spec.num_classes() || V.cols() != dN) {
    throw std::invalid_argument("solve_u_subproblem: bad classifier shape");
  }

  const double prox = (1.0 - theta) * (1.0 - theta);
  const Eigen::MatrixXd VtV = V.transpose() * V;
  const Eigen::MatrixXd Vt_targets = V.transpose() * batch.targets;

  // Shared reduced Hessian H = P'V'VP + Q + prox I over blocks >= 1.
  auto hessian = [&q, &VtV, offN, dN, prox](const Eigen::VectorXd& v,
                                            Eigen::VectorXd& out) {
    q.apply(v, out, /*reduce_input_block=*/true);
    out.segment(offN, dN).noalias() += VtV * v.segment(offN, dN);
    out += prox * v;
  };
  std::vector<char> input_mask(static_cast<std::size_t>(D), 0);
  std::fill(input_mask.begin(), input_mask.begin() + d0, 1);
  const double L =
      1.1 * estimate_operator_norm(hessian, D, 30, &input_mask);

  LiftedBatch out = batch;
  std::vector<char> converged(static_cast<std::size_t>(n), 1);
  std::vector<int> iterations(static_cast<std::size_t>(n), 0);
  std::vector<double> residuals(static_cast<std::size_t>(n), 0.0);

  auto project = [](Eigen::VectorXd& v) { v = v.cwiseMax(0.0); };

  parallel_chunks(static_cast<std::size_t>(n), 32, [&](std::size_t lo,
                                                       std::size_t hi) {
    Eigen::VectorXd b(D), pinned(D), shift(D), start(D);
    for (std::size_t i = lo; i < hi; ++i) {
      const Eigen::Index col = static_cast<Eigen::Index>(i);
      // Full linear term b = P'V'y_i + prox u_i^prev, then reduction: the
      // pinned block's cross-term folds in via one full Q apply.
      b = prox * prev.u.col(col);
      b.segment(offN, dN) += Vt_targets.col(col);
      const double b_norm = b.norm();

      pinned.setZero();
      pinned.head(d0) = batch.u.col(col).head(d0);
      q.apply(pinned, shift, /*reduce_input_block=*/false);
      b -= shift;
      b.head(d0).setZero();

      start = prev.u.col(col);
      start.head(d0).setZero();

      auto r = detail::apg_minimize<Eigen::VectorXd>(
          hessian, b, start, L, tol * (1.0 + b_norm), max_iter, project,
          nnqp_residual);

      out.u.col(col) = r.x;
      out.u.col(col).head(d0) = batch.u.col(col).head(d0);
      converged[i] = r.converged ? 1 : 0;
      iterations[i] = r.iterations;
      residuals[i] = r.residual;
    }
  });

  if (report) {
    *report = SubproblemReport{};
    for (int i = 0; i < n; ++i) {
      if (!converged[static_cast<std::size_t>(i)]) {
        report->all_converged = false;
        ++report->num_failed;
      }
      report->max_iterations =
          std::max(report->max_iterations, iterations[static_cast<std::size_t>(i)]);
      report->max_residual =
          std::max(report->max_residual, residuals[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& G,
                            const Eigen::MatrixXd& rhs, double ridge) {
  if (G.rows() != G.cols() || rhs.cols() != G.rows()) {
    throw std::invalid_argument("ridge_solve: shape mismatch");
  }
  if (ridge > 0.0) {
    Eigen::MatrixXd M = G;
    M.diagonal().array() += ridge;
    return M.ldlt().solve(rhs.transpose()).transpose();
  }
  // Singular Gram: spectral pseudo-inverse gives the minimum-norm solution.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  const Eigen::VectorXd& vals = es.eigenvalues();
  const double lmax = vals.size() ? vals.maxCoeff() : 0.0;
  if (lmax <= 0.0) return Eigen::MatrixXd::Zero(rhs.rows(), rhs.cols());
  const double cutoff =
      lmax * static_cast<double>(G.rows()) * std::numeric_limits<double>::epsilon();
  Eigen::VectorXd inv = vals.unaryExpr(
      [cutoff](double v) { return v > cutoff ? 1.0 / v : 0.0; });
  return ((rhs * es.eigenvectors()) * inv.asDiagonal()) *
         es.eigenvectors().transpose();
}

Eigen::MatrixXd solve_v_subproblem(const LiftedBatch& batch,
                                   const Eigen::MatrixXd& V_prev, double theta,
                                   double weight_decay) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw std::invalid_argument("theta must be in [0, 1]");
  }
  const int N = batch.num_blocks() - 1;
  const auto UN = batch.block(N);
  if (V_prev.cols() != UN.rows() || V_prev.rows() != batch.targets.rows()) {
    throw std::invalid_argument("solve_v_subproblem: bad V_prev shape");
  }
  const double ridge0 = (1.0 - theta) * (1.0 - theta);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(UN.rows(), UN.rows());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(UN);
  gram.triangularView<Eigen::StrictlyUpper>() =
      gram.triangularView<Eigen::StrictlyLower>().transpose();
  const Eigen::MatrixXd rhs = batch.targets * UN.transpose() + ridge0 * V_prev;
  return ridge_solve(gram, rhs, ridge0 + weight_decay);
}

WeightSet solve_w_subproblem(const LiftedBatch& batch,
                             const ArchitectureSpec& spec,
                             const WeightSet& W_prev,
                             const std::vector<double>& gammas, double theta,
                             bool sparse, double tol, int max_iter,
                             double l1_radius, double weight_decay,
                             SubproblemReport* report) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw std::invalid_argument("theta must be in [0, 1]");
  }
  if (static_cast<int>(gammas.size()) != spec.N()) {
    throw std::invalid_argument("need one gamma per hidden layer");
  }
  if (batch.dim() != spec.lifted_dim()) {
    throw std::invalid_argument("solve_w_subproblem: batch dim mismatch");
  }
  if (report) *report = SubproblemReport{};

  const double ridge0 = (1.0 - theta) * (1.0 - theta);
  WeightSet result;
  result.classifier = W_prev.classifier;

  for (int n = 1; n <= spec.N(); ++n) {
    std::vector<int> sources;
    for (const auto& in : spec.layer_inputs(n)) {
      if (in.kind == EdgeKind::Learnable) sources.push_back(in.source);
    }
    std::sort(sources.begin(), sources.end());
    if (sources.empty()) continue;  // identity-only layer: nothing to optimize

    const int dn = spec.dims[n];
    int K = 0;
    for (int m : sources) K += spec.dims[m];

    // Identity contributions move to the target side; learnable inputs stack.
    Eigen::MatrixXd c = batch.block(n);
    for (const auto& in : spec.layer_inputs(n)) {
      if (in.kind == EdgeKind::FixedIdentity) c -= batch.block(in.source);
    }
    Eigen::MatrixXd Z(K, batch.n());
    Eigen::MatrixXd Wp(dn, K);
    {
      int row = 0;
      for (int m : sources) {
        Z.middleRows(row, spec.dims[m]) = batch.block(m);
        Wp.middleCols(row, spec.dims[m]) = W_prev.hidden.at({n, m});
        row += spec.dims[m];
      }
    }

    const double gamma = gammas[static_cast<std::size_t>(n) - 1];
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(K, K);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(Z);
    gram.triangularView<Eigen::StrictlyUpper>() =
        gram.triangularView<Eigen::StrictlyLower>().transpose();
    const Eigen::MatrixXd czt = c * Z.transpose();
    const Eigen::MatrixXd rhs = gamma * czt + ridge0 * Wp;

    Eigen::MatrixXd W;
    if (!sparse) {
      W = ridge_solve(gamma * gram, rhs, ridge0 + weight_decay);
    } else {
      const double ridge = ridge0 + weight_decay;
      auto hessian = [&gram, gamma, ridge](const Eigen::MatrixXd& X,
                                           Eigen::MatrixXd& out) {
        out.noalias() = gamma * (X * gram);
        out += ridge * X;
      };
      auto gram_apply = [&gram](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
        out.noalias() = gram * v;
      };
      const double L =
          1.1 * gamma * estimate_operator_norm(gram_apply, K, 30) + ridge;

      auto project = [&sources, &spec, l1_radius](Eigen::MatrixXd& X) {
        int col = 0;
        for (int m : sources) {
          const int dm = spec.dims[m];
          for (Eigen::Index r = 0; r < X.rows(); ++r) {
            Eigen::VectorXd row = X.row(r).segment(col, dm).transpose();
            if (row.cwiseAbs().sum() > l1_radius) {
              X.row(r).segment(col, dm) =
                  project_l1_ball_row(row, l1_radius).transpose();
            }
          }
          col += dm;
        }
      };
      // Gradient-mapping residual at the initial step length.
      auto residual = [&project, L](const Eigen::MatrixXd& X,
                                    const Eigen::MatrixXd& g) {
        Eigen::MatrixXd stepped = X - g / L;
        project(stepped);
        return L * (X - stepped).norm();
      };
      // Warm start from the better of the previous iterate and the
      // row-projected dense ridge solution; the latter is one cheap solve
      // and usually sits close to the constrained optimum, which matters
      // on the badly conditioned first iteration.
      auto core_value = [&](const Eigen::MatrixXd& X) {
        Eigen::MatrixXd AX(X.rows(), X.cols());
        hessian(X, AX);
        return 0.5 * AX.cwiseProduct(X).sum() - rhs.cwiseProduct(X).sum();
      };
      Eigen::MatrixXd start = Wp;
      project(start);
      Eigen::MatrixXd projected_dense =
          ridge_solve(gamma * gram, rhs, ridge > 0.0 ? ridge : 1e-12);
      project(projected_dense);
      if (core_value(projected_dense) < core_value(start)) {
        start = std::move(projected_dense);
      }
      auto r = detail::apg_minimize<Eigen::MatrixXd>(
          hessian, rhs, start, L, tol * (1.0 + rhs.norm()), max_iter, project,
          residual);
      W = std::move(r.x);
      if (report) {
        if (!r.converged) {
          report->all_converged = false;
          ++report->num_failed;
        }
        report->max_iterations = std::max(report->max_iterations, r.iterations);
        report->max_residual = std::max(report->max_residual, r.residual);
      }
    }

    int col = 0;
    for (int m : sources) {
      result.hidden[{n, m}] = W.middleCols(col, spec.dims[m]);
      col += spec.dims[m];
    }
  }
  return result;
}

}  // namespace liftnet
