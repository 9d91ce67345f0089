#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace mirrorqed {

struct LeastSquaresOptions {
  int max_iterations = 500;
  double relative_cost_tolerance = 1e-12;
  double initial_damping = 1e-3;
  double jacobian_step = 1e-7;
  /// Marquardt scaling (damping on diag(J^T J)); otherwise lambda * max diag * I.
  bool marquardt_scaling = true;
  /// Stop once 0.5 ||r||^2 falls below this.
  double absolute_cost_tolerance = 0.0;
};

struct LeastSquaresResult {
  Eigen::VectorXd x;
  double cost = 0.0;  ///< 0.5 * ||r(x)||^2
  int iterations = 0;
  bool converged = false;
};

/// Levenberg-Marquardt on a real residual vector with a central-difference
/// Jacobian. Parameters should be pre-scaled to O(1).
inline LeastSquaresResult levenberg_marquardt(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residuals, Eigen::VectorXd x0,
    const LeastSquaresOptions& opts = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  LeastSquaresResult out;
  out.x = std::move(x0);
  VectorXd r = residuals(out.x);
  double cost = 0.5 * r.squaredNorm();
  double lambda = opts.initial_damping;
  const Eigen::Index n = out.x.size();

  for (int it = 1; it <= opts.max_iterations; ++it) {
    out.iterations = it;
    MatrixXd jac(r.size(), n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double h = opts.jacobian_step * std::max(1.0, std::abs(out.x[j]));
      VectorXd xp = out.x, xm = out.x;
      xp[j] += h;
      xm[j] -= h;
      jac.col(j) = (residuals(xp) - residuals(xm)) / (2.0 * h);
    }
    const MatrixXd jtj = jac.transpose() * jac;
    const VectorXd grad = jac.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() <= 1e-15 * std::max(1.0, cost)) {
      out.converged = true;
      break;
    }

    bool improved = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      MatrixXd damped = jtj;
      if (opts.marquardt_scaling)
        damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      else
        damped.diagonal().array() += lambda * std::max(jtj.diagonal().maxCoeff(), 1e-300);
      const VectorXd step = damped.ldlt().solve(-grad);
      const VectorXd trial = out.x + step;
      const VectorXd r_trial = residuals(trial);
      const double trial_cost = 0.5 * r_trial.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost <= cost) {
        const double rel = (cost - trial_cost) / std::max(cost, std::numeric_limits<double>::min());
        out.x = trial;
        r = r_trial;
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
        if (rel < opts.relative_cost_tolerance || cost <= opts.absolute_cost_tolerance) out.converged = true;
        break;
      }
      lambda *= 4.0;
    }
    // No downhill step exists at any damping: x is a local minimum to
    // working precision.
    if (!improved) out.converged = true;
    if (out.converged) break;
  }
  out.cost = cost;
  return out;
}

}  // namespace mirrorqed
