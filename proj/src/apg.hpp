#pragma once

// Internal: one accelerated projected-gradient loop shared by the quadratic
// sub-problem solvers. Minimizes f(x) = 1/2 <x, A x> - <b, x> over a convex
// set given by a projection, where A is symmetric PSD. Momentum follows the
// usual t-sequence; a non-monotone step triggers a restart (and repeated
// restarts bump the step-size estimate, guarding against an underestimated
// Lipschitz constant from power iteration).

#include <cmath>
#include <utility>

namespace liftnet::detail {

template <class Point>
struct ApgResult {
  Point x;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
  double objective = 0.0;  // 1/2 <x, Ax> - <b, x>
};

template <class A, class B>
double frob_dot(const A& a, const B& b) {
  return a.cwiseProduct(b).sum();
}

// apply(v, out): out = A v. project(x): in-place projection onto the
// feasible set. residual(x, g): optimality measure at feasible x with
// gradient g = Ax - b; the loop stops once it drops to tol_abs.
template <class Point, class ApplyFn, class ProjectFn, class ResidualFn>
ApgResult<Point> apg_minimize(const ApplyFn& apply, const Point& linear,
                              const Point& start, double lipschitz,
                              double tol_abs, int max_iter,
                              const ProjectFn& project,
                              const ResidualFn& residual) {
  double L = std::max(lipschitz, 1e-12);

  Point x = start;
  project(x);
  Point Ax = x;
  apply(x, Ax);
  double fx = 0.5 * frob_dot(x, Ax) - frob_dot(linear, x);

  Point g = Ax - linear;
  double res = residual(x, g);
  if (res <= tol_abs || max_iter <= 0) {
    return {std::move(x), res <= tol_abs, 0, res, fx};
  }

  Point xm = x, Axm = Ax;  // previous iterate (momentum history)
  Point y = x, Ay = Ax, xn = x, Axn = Ax;
  double t = 1.0;
  int restarts_in_a_row = 0;

  for (int k = 1; k <= max_iter; ++k) {
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;

    y = x + beta * (x - xm);
    Ay = Ax + beta * (Ax - Axm);
    xn = y - (Ay - linear) / L;
    project(xn);
    apply(xn, Axn);
    double fn = 0.5 * frob_dot(xn, Axn) - frob_dot(linear, xn);

    // Ascent below the roundoff floor of the objective is not a real
    // overshoot; restarting on it shrinks the step into a stall.
    const double f_slack = 1e-12 * (1.0 + std::abs(fx));
    if (fn > fx + f_slack) {
      // momentum overshot: fall back to a plain step from x
      xn = x - (Ax - linear) / L;
      project(xn);
      apply(xn, Axn);
      fn = 0.5 * frob_dot(xn, Axn) - frob_dot(linear, xn);
      t_next = 1.0;
      if (++restarts_in_a_row >= 3) {
        L *= 1.5;
        restarts_in_a_row = 0;
      }
      if (fn > fx + f_slack) {
        // even the plain step ascended: L is too small for this operator
        L *= 2.0;
        continue;
      }
    } else {
      restarts_in_a_row = 0;
    }

    g = Axn - linear;
    res = residual(xn, g);

    xm.swap(x);
    Axm.swap(Ax);
    x.swap(xn);
    Ax.swap(Axn);
    fx = fn;
    t = t_next;

    if (res <= tol_abs) {
      return {std::move(x), true, k, res, fx};
    }
  }
  return {std::move(x), false, max_iter, res, fx};
}

}  // namespace liftnet::detail
