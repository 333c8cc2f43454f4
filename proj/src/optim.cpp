#include "qjump/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace qjump::optim {

LmResult levenberg_marquardt(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual_fn,
    Eigen::VectorXd init, const LmOptions& opts) {
  const Eigen::Index n_params = init.size();
  Eigen::VectorXd params = std::move(init);
  Eigen::VectorXd r = residual_fn(params);
  double cost = r.squaredNorm();
  if (!std::isfinite(cost)) throw std::invalid_argument("levenberg_marquardt: non-finite initial residual");

  double lambda = 1e-3;
  LmResult result;
  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    // Forward-difference Jacobian.
    Eigen::MatrixXd jac(r.size(), n_params);
    for (Eigen::Index j = 0; j < n_params; ++j) {
      const double h = opts.fd_step * (std::abs(params(j)) + opts.fd_step);
      Eigen::VectorXd p2 = params;
      p2(j) += h;
      jac.col(j) = (residual_fn(p2) - r) / h;
    }
    Eigen::MatrixXd jtj = jac.transpose() * jac;
    Eigen::VectorXd jtr = jac.transpose() * r;

    bool stepped = false;
    for (int tries = 0; tries < 12; ++tries) {
      Eigen::MatrixXd a = jtj;
      a.diagonal().array() += lambda * (jtj.diagonal().array() + 1e-12);
      Eigen::VectorXd step = a.ldlt().solve(-jtr);
      Eigen::VectorXd candidate = params + step;
      Eigen::VectorXd rc = residual_fn(candidate);
      double cost_c = rc.squaredNorm();
      if (std::isfinite(cost_c) && cost_c < cost) {
        const double rel_drop = (cost - cost_c) / (cost + 1e-300);
        const double rel_step = step.norm() / (params.norm() + 1e-300);
        params = std::move(candidate);
        r = std::move(rc);
        cost = cost_c;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (rel_drop < opts.tol || rel_step < opts.step_tol) {
          result.converged = true;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (result.converged || !stepped) {
      if (!stepped) result.converged = true;  // stuck at a (local) minimum
      ++iter;
      break;
    }
  }
  result.params = params;
  result.residual_norm = std::sqrt(cost);
  result.iterations = iter;
  return result;
}

}  // namespace qjump::optim
