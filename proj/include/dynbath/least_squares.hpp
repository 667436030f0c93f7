#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dynbath {

struct LeastSquaresOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-10;  // on max |J^T r|
  double step_tolerance = 1e-14;      // relative parameter change
};

// Fills r (already sized) with residuals at p.
using ResidualFn = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r)>;

struct LeastSquaresResult {
  Eigen::VectorXd params;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  double cost = 0.0;  // 0.5 |r|^2
  int iterations = 0;
  bool converged = false;
  std::string status;
};

// Central-difference Jacobian.
Eigen::MatrixXd numeric_jacobian(const ResidualFn& f, const Eigen::VectorXd& p, Eigen::Index m);

// Damped Gauss-Newton with Marquardt diagonal scaling.
LeastSquaresResult levenberg_marquardt(const ResidualFn& f, Eigen::VectorXd p0, Eigen::Index m,
                                       const LeastSquaresOptions& opts = {});

// Runs every start and keeps the lowest cost; ties keep the earliest start.
LeastSquaresResult best_of(const ResidualFn& f, const std::vector<Eigen::VectorXd>& starts,
                           Eigen::Index m, const LeastSquaresOptions& opts = {});

// (J^T J)^{-1}, scaled by the residual variance 2 cost / (m - n) when requested.
// Uses a pseudo-inverse so rank-deficient fits give large, finite entries.
Eigen::MatrixXd parameter_covariance(const LeastSquaresResult& fit, bool scale_by_residual);

}  // namespace dynbath
