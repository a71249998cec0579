#include "liftnet/bcd.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "liftnet/inference.hpp"
#include "liftnet/solvers.hpp"

namespace liftnet {

double theta_schedule(int t, double p) {
  if (t < 1) throw std::invalid_argument("theta: t must be >= 1");
  if (!(p > 1.0)) throw std::invalid_argument("theta: p must be > 1");
  return std::pow(1.0 / (t + 1), p);
}

namespace {

double nnz_fraction(const Eigen::MatrixXd& w) {
  if (w.size() == 0) return 0.0;
  return static_cast<double>((w.cwiseAbs().array() > kNonzeroThreshold).count()) /
         static_cast<double>(w.size());
}

std::vector<double> resolve_gammas(const TrainConfig& config, int N) {
  if (config.gammas.empty()) {
    throw std::invalid_argument("train: gammas must not be empty");
  }
  std::vector<double> g = config.gammas;
  if (g.size() == 1) g.assign(static_cast<std::size_t>(N), g[0]);
  if (static_cast<int>(g.size()) != N) {
    throw std::invalid_argument("train: need 1 or N gamma values");
  }
  for (double v : g) {
    if (!(v >= 0.0)) throw std::invalid_argument("train: gamma must be >= 0");
  }
  return g;
}

// Convex combination of feasible points stays feasible; anything below
// zero after the u combination is floating-point dust and gets clamped.
void combine_u(LiftedBatch& cur, const LiftedBatch& star, double theta,
               int input_dim) {
  cur.u = cur.u + theta * (star.u - cur.u);
  cur.u.bottomRows(cur.u.rows() - input_dim) =
      cur.u.bottomRows(cur.u.rows() - input_dim).cwiseMax(0.0);
}

void check_feasible(const LiftedBatch& batch, const WeightSet& ws, bool sparse,
                    double l1_radius, int iter) {
  for (int k = 1; k < batch.num_blocks(); ++k) {
    if ((batch.block(k).array() < 0.0).any()) {
      throw std::logic_error("iterate infeasible at iteration " +
                             std::to_string(iter) + ": negative u block " +
                             std::to_string(k));
    }
  }
  if (!sparse) return;
  for (const auto& [key, w] : ws.hidden) {
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      if (w.row(r).cwiseAbs().sum() > l1_radius + 1e-10) {
        throw std::logic_error(
            "iterate infeasible at iteration " + std::to_string(iter) +
            ": l1 row bound violated in w" + std::to_string(key.first) + "_" +
            std::to_string(key.second));
      }
    }
  }
}

}  // namespace

TrainResult train(const Dataset& data, const ArchitectureSpec& spec,
                  const TrainConfig& config,
                  const std::function<void(const IterationInfo&)>& observer) {
  require_valid(spec);
  if (data.n() == 0) throw std::invalid_argument("train: empty dataset");
  const int N = spec.N();
  const std::vector<double> gammas = resolve_gammas(config, N);
  if (!config.theta_override && !(config.schedule_power > 1.0)) {
    throw std::invalid_argument("train: schedule power p must be > 1");
  }

  WeightSet weights =
      init_weights(spec, config.seed, config.init_scale, config.sparse);
  Eigen::MatrixXd V = weights.classifier;

  // Lifted variables start at the feed-forward pass of the initial weights
  // (feasible by construction and deterministic in the seed).
  LiftedBatch batch = lift_dataset(spec, data);
  {
    const auto blocks = forward_batch(spec, weights, batch.block(0));
    for (int n = 1; n <= N; ++n) {
      batch.block(n) = blocks[static_cast<std::size_t>(n)];
    }
  }

  TrainTrace trace;
  for (const auto& [key, w] : weights.hidden) {
    trace.nnz_names.push_back("w" + std::to_string(key.first) + "_" +
                              std::to_string(key.second));
    (void)w;
  }

  const int d0 = spec.input_dim();
  double prev_objective = std::numeric_limits<double>::infinity();
  int increase_streak = 0;

  for (int t = 1; t <= config.max_epochs; ++t) {
    const auto start_time = std::chrono::steady_clock::now();
    const double theta = config.theta_override
                             ? config.theta_override(t)
                             : theta_schedule(t, config.schedule_power);
    if (!(theta >= 0.0 && theta <= 1.0)) {
      throw std::invalid_argument("train: theta outside [0, 1]");
    }

    const LiftedQuadratic q(spec, weights, gammas);

    // (a) lifted-variable block
    SubproblemReport u_report;
    const LiftedBatch u_star =
        solve_u_subproblem(batch, q, V, theta, batch, config.nnqp_tol,
                           config.nnqp_max_iter, &u_report);
    if (!u_report.all_converged) {
      trace.aborted = true;
      trace.abort_reason = "u sub-problem failed for " +
                           std::to_string(u_report.num_failed) +
                           " samples at iteration " + std::to_string(t) +
                           " (residual " + std::to_string(u_report.max_residual) +
                           ")";
      break;
    }
    double du = 0.0;
    {
      const Eigen::MatrixXd delta = theta * (u_star.u - batch.u);
      const auto off = batch.offsets;
      for (int n = 1; n <= N; ++n) {
        du += delta.middleRows(off[n], spec.dims[n]).colwise().norm().sum();
      }
    }
    combine_u(batch, u_star, theta, d0);

    // (b) classifier block
    const Eigen::MatrixXd v_star =
        solve_v_subproblem(batch, V, theta, config.weight_decay);
    const double dV = theta * (v_star - V).norm();
    V += theta * (v_star - V);

    // (c) hidden-weight block
    SubproblemReport w_report;
    const WeightSet w_star = solve_w_subproblem(
        batch, spec, weights, gammas, theta, config.sparse, config.w_tol,
        config.w_max_iter, config.l1_radius, config.weight_decay, &w_report);
    if (!w_report.all_converged) {
      trace.aborted = true;
      trace.abort_reason = "w sub-problem failed at iteration " +
                           std::to_string(t) + " (residual " +
                           std::to_string(w_report.max_residual) + ")";
      break;
    }
    double dW = 0.0;
    for (auto& [key, w] : weights.hidden) {
      const Eigen::MatrixXd delta = theta * (w_star.hidden.at(key) - w);
      dW += delta.norm();
      w += delta;
    }
    weights.classifier = V;

    check_feasible(batch, weights, config.sparse, config.l1_radius, t);

    bool finite = batch.u.allFinite() && V.allFinite();
    for (const auto& [key, w] : weights.hidden) {
      finite = finite && w.allFinite();
      (void)key;
    }
    if (!finite) {
      trace.aborted = true;
      trace.abort_reason =
          "non-finite iterate at iteration " + std::to_string(t);
      break;
    }

    const LiftedQuadratic q_next(spec, weights, gammas);
    const double objective = full_objective(batch, q_next, V);

    TrainTraceRow row;
    row.iter = t;
    row.objective = objective;
    row.du = du;
    row.dV = dV;
    row.dW = dW;
    row.theta = theta;
    row.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start_time)
                      .count();
    for (const auto& [key, w] : weights.hidden) {
      row.nnz.push_back(nnz_fraction(w));
      (void)key;
    }
    trace.rows.push_back(std::move(row));

    if (observer) {
      IterationInfo info;
      info.iter = t;
      info.theta = theta;
      info.u_star = &u_star;
      info.v_star = &v_star;
      info.w_star = &w_star;
      info.u_next = &batch;
      info.v_next = &V;
      info.w_next = &weights;
      observer(info);
    }

    if (!std::isfinite(objective)) {
      trace.aborted = true;
      trace.abort_reason =
          "non-finite objective at iteration " + std::to_string(t);
      break;
    }
    // The theory does not promise monotone descent, but a persistent
    // increase means a sub-solver is returning garbage; dump context and
    // stop rather than burn the remaining budget.
    if (objective > prev_objective * (1.0 + 1e-6)) {
      ++increase_streak;
    } else {
      increase_streak = 0;
    }
    if (increase_streak >= 5) {
      std::ostringstream diag;
      diag << "objective increased for 5 consecutive iterations (iteration "
           << t << ")\n  recent objectives:";
      const std::size_t lo = trace.rows.size() >= 6 ? trace.rows.size() - 6 : 0;
      for (std::size_t i = lo; i < trace.rows.size(); ++i) {
        diag << ' ' << trace.rows[i].objective;
      }
      diag << "\n  theta=" << theta << " du=" << du << " dV=" << dV
           << " dW=" << dW;
      std::cerr << "liftnet: " << diag.str() << std::endl;
      trace.aborted = true;
      trace.abort_reason = diag.str();
      break;
    }
    prev_objective = objective;
  }

  return {std::move(weights), std::move(trace)};
}

ConvergenceReport convergence_report(const TrainTrace& trace) {
  if (trace.rows.size() < 10) {
    throw std::invalid_argument("convergence_report: need >= 10 iterations");
  }
  ConvergenceReport report;
  report.dominated = true;
  std::vector<double> step_bounds;
  for (const auto& row : trace.rows) {
    const double total = row.du + row.dV + row.dW;
    const double bound = row.theta < 1.0
                             ? row.theta / (1.0 - row.theta)
                             : std::numeric_limits<double>::infinity();
    step_bounds.push_back(bound);
    double ratio;
    if (total == 0.0) {
      ratio = 0.0;
    } else if (bound > 0.0 && std::isfinite(bound)) {
      ratio = total / bound;
    } else {
      ratio = std::numeric_limits<double>::infinity();
    }
    report.ratios.push_back(ratio);
    if (!std::isfinite(ratio)) report.dominated = false;
    report.C = std::max(report.C, ratio);
  }
  report.tail_sums.resize(step_bounds.size());
  double tail = 0.0;
  for (std::size_t i = step_bounds.size(); i-- > 0;) {
    tail += step_bounds[i];
    report.tail_sums[i] = tail;
  }
  return report;
}

}  // namespace liftnet
