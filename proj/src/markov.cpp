#include "qjump/markov.hpp"

#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace qjump::markov {

Eigen::MatrixXd generator(const Eigen::MatrixXd& rates) {
  if (rates.rows() != rates.cols())
    throw std::invalid_argument("generator: rate matrix must be square");
  Eigen::MatrixXd q = rates;
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    q(i, i) = 0.0;
    q(i, i) = -q.row(i).sum();
  }
  return q;
}

Eigen::MatrixXd propagator(const Eigen::MatrixXd& gen, double dt) {
  if (dt < 0.0) throw std::invalid_argument("propagator: negative dt");
  return (gen * dt).exp();
}

Eigen::VectorXd propagate(const Eigen::VectorXd& p, const Eigen::MatrixXd& trans) {
  Eigen::VectorXd out = trans.transpose() * p;
  double s = out.sum();
  if (s > 0.0) out /= s;
  return out;
}

Eigen::VectorXd stationary(const Eigen::MatrixXd& gen) {
  const Eigen::Index n = gen.rows();
  // pi * Q = 0 with sum(pi) = 1, solved as an overdetermined system.
  Eigen::MatrixXd a(n + 1, n);
  a.topRows(n) = gen.transpose();
  a.row(n).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
  b(n) = 1.0;
  Eigen::VectorXd pi = a.colPivHouseholderQr().solve(b);
  pi = pi.cwiseMax(0.0);
  double s = pi.sum();
  if (!(s > 0.0)) throw std::runtime_error("stationary: singular generator");
  return pi / s;
}

GeneratorEstimate generator_log(const Eigen::MatrixXd& trans, double dt) {
  if (trans.rows() != trans.cols())
    throw std::invalid_argument("generator_log: matrix must be square");
  if (!(dt > 0.0)) throw std::invalid_argument("generator_log: dt must be > 0");

  const Eigen::Index n = trans.rows();
  GeneratorEstimate est;

  Eigen::MatrixXd logm = trans.log();
  bool ok = logm.allFinite();
  if (ok) {
    Eigen::MatrixXd rates = logm / dt;
    // Tiny negative off-diagonals are numerical noise; larger ones mean no
    // valid generator exists on the principal branch.
    const double floor = -1e-9 * (1.0 + rates.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < n && ok; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        if (rates(i, j) < floor) { ok = false; break; }
        if (rates(i, j) < 0.0) rates(i, j) = 0.0;
      }
    if (ok) {
      est.rates = generator(rates);
      // Round trip: matrices with eigenvalues on the negative real axis have
      // no principal logarithm, but Eigen silently returns the real part,
      // which can still look like a generator. Only exp(Q dt) == trans proves
      // the log was genuine.
      const Eigen::MatrixXd round_trip = (est.rates * dt).exp();
      if ((round_trip - trans).cwiseAbs().maxCoeff() <= 1e-8) {
        est.valid = true;
        return est;
      }
    }
  }

  // First-order fallback: rate_ij = trans_ij / dt.
  Eigen::MatrixXd rates = trans / dt;
  for (Eigen::Index i = 0; i < n; ++i) rates(i, i) = 0.0;
  est.rates = generator(rates);
  est.valid = false;
  return est;
}

}  // namespace qjump::markov
