#include "dynbath/least_squares.hpp"

#include <cmath>
#include <limits>

#include "dynbath/error.hpp"

namespace dynbath {

Eigen::MatrixXd numeric_jacobian(const ResidualFn& f, const Eigen::VectorXd& p, Eigen::Index m) {
  Eigen::MatrixXd jac(m, p.size());
  Eigen::VectorXd rp(m), rm(m);
  Eigen::VectorXd q = p;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(p[k]));
    q[k] = p[k] + h;
    f(q, rp);
    q[k] = p[k] - h;
    f(q, rm);
    q[k] = p[k];
    jac.col(k) = (rp - rm) / (2.0 * h);
  }
  return jac;
}

LeastSquaresResult levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd p0, Eigen::Index m,
                                       const LeastSquaresOptions& opts) {
  if (m < 1) throw ValidationError("least squares needs at least one residual");
  LeastSquaresResult res;
  res.params = std::move(p0);
  res.residuals.resize(m);
  f(res.params, res.residuals);
  if (!res.residuals.allFinite()) throw ValidationError("initial residuals are not finite");
  res.cost = 0.5 * res.residuals.squaredNorm();
  res.jacobian = numeric_jacobian(f, res.params, m);

  double lambda = -1.0;
  Eigen::VectorXd trial_r(m);
  res.status = "iteration limit reached";
  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    const Eigen::MatrixXd jtj = res.jacobian.transpose() * res.jacobian;
    const Eigen::VectorXd g = res.jacobian.transpose() * res.residuals;
    if (g.cwiseAbs().maxCoeff() <= opts.gradient_tolerance) {
      res.converged = true;
      res.status = "gradient tolerance reached";
      break;
    }
    const Eigen::VectorXd scale = jtj.diagonal().cwiseMax(1e-12 * std::max(1.0, jtj.diagonal().maxCoeff()));
    if (lambda < 0.0) lambda = 1e-3;
    bool improved = false;
    bool tiny_step = false;
    for (int inner = 0; inner < 40; ++inner) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * scale;
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      if (step.norm() <= opts.step_tolerance * (res.params.norm() + opts.step_tolerance)) {
        tiny_step = true;
        break;
      }
      const Eigen::VectorXd trial = res.params + step;
      f(trial, trial_r);
      const double trial_cost = trial_r.allFinite() ? 0.5 * trial_r.squaredNorm()
                                                    : std::numeric_limits<double>::infinity();
      if (trial_cost < res.cost) {
        res.params = trial;
        res.residuals = trial_r;
        res.cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
        break;
      }
      lambda *= 4.0;
      if (lambda > 1e16) break;
    }
    if (!improved) {
      res.converged = true;
      res.status = tiny_step ? "step tolerance reached" : "no further decrease";
      break;
    }
    res.jacobian = numeric_jacobian(f, res.params, m);
  }
  return res;
}

LeastSquaresResult best_of(const ResidualFn& f, const std::vector<Eigen::VectorXd>& starts,
                           Eigen::Index m, const LeastSquaresOptions& opts) {
  if (starts.empty()) throw ValidationError("no starting points for the fit");
  LeastSquaresResult best;
  bool have = false;
  for (const auto& s : starts) {
    LeastSquaresResult r;
    try {
      r = levenberg_marquardt(f, s, m, opts);
    } catch (const ValidationError&) {
      continue;
    }
    if (!have || r.cost < best.cost) {
      best = std::move(r);
      have = true;
    }
  }
  if (!have) throw ConvergenceError("every starting point produced non-finite residuals");
  return best;
}

Eigen::MatrixXd parameter_covariance(const LeastSquaresResult& fit, bool scale_by_residual) {
  const Eigen::MatrixXd jtj = fit.jacobian.transpose() * fit.jacobian;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jtj);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double cutoff = 1e-14 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd inv(ev.size());
  for (Eigen::Index k = 0; k < ev.size(); ++k) inv[k] = ev[k] > cutoff ? 1.0 / ev[k] : 1.0 / cutoff;
  Eigen::MatrixXd cov = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::Index dof = fit.residuals.size() - fit.params.size();
  if (scale_by_residual && dof > 0) cov *= 2.0 * fit.cost / static_cast<double>(dof);
  return cov;
}

}  // namespace dynbath
