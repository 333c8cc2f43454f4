#pragma once

#include <Eigen/Dense>

namespace qjump::markov {

/// Build the generator Q of a continuous-time chain from a rate matrix whose
/// entry (i,j), i != j, is the transition rate i -> j in 1/s. The diagonal of
/// the input is ignored; Q_ii is set to minus the row sum. Probability row
/// vectors evolve as p(t) = p(0) * exp(Q t).
Eigen::MatrixXd generator(const Eigen::MatrixXd& rates);

/// Transition-probability matrix exp(Q * dt) for a generator Q.
Eigen::MatrixXd propagator(const Eigen::MatrixXd& gen, double dt);

/// Propagate a probability row vector by a precomputed transition matrix.
Eigen::VectorXd propagate(const Eigen::VectorXd& p, const Eigen::MatrixXd& trans);

/// Stationary distribution of the generator: the normalized solution of
/// pi * Q = 0. Solved in least-squares sense so reducible chains return one
/// valid stationary vector.
Eigen::VectorXd stationary(const Eigen::MatrixXd& gen);

struct GeneratorEstimate {
  Eigen::MatrixXd rates;  // (i,j): rate i -> j; diagonal = -row sum
  bool valid = false;     // true when the matrix log yields a proper generator
};

/// Estimate the continuous generator from a transition-probability matrix
/// observed at time step dt. Uses the principal matrix logarithm when it
/// exists and produces non-negative off-diagonal rates; otherwise falls back
/// to the first-order estimate rate_ij = trans_ij / dt with valid = false.
GeneratorEstimate generator_log(const Eigen::MatrixXd& trans, double dt);

}  // namespace qjump::markov
