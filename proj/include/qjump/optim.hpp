#pragma once

#include <functional>

#include <Eigen/Dense>

namespace qjump::optim {

struct LmOptions {
  int max_iter = 200;
  double tol = 1e-12;        // relative decrease of the squared residual
  double step_tol = 1e-12;   // relative parameter step
  double fd_step = 1e-6;     // forward-difference step (relative)
};

struct LmResult {
  Eigen::VectorXd params;
  double residual_norm = 0.0;  // sqrt of the final squared residual
  int iterations = 0;
  bool converged = false;
};

/// Small dense Levenberg-Marquardt solver with a forward-difference Jacobian.
/// residual_fn maps parameters to the residual vector to be minimized in the
/// least-squares sense.
LmResult levenberg_marquardt(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual_fn,
    Eigen::VectorXd init, const LmOptions& opts = {});

}  // namespace qjump::optim
