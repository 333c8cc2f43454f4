#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qjump/filter.hpp"
#include "qjump/signal.hpp"

namespace qjump::hmm {

/// Discrete-time hidden Markov model over binned counts with one Poisson
/// mean per hidden state.
struct PoissonHmm {
  Eigen::MatrixXd trans;      // row-stochastic per-bin transition probabilities
  std::vector<double> means;  // mean counts per bin, one per state
  Eigen::VectorXd initial;    // probability vector
  double bin_width = 0.0;     // s

  int n_states() const { return static_cast<int>(means.size()); }
  void validate() const;
};

/// Exact marginal log-likelihood of a trace via the scaled forward recursion.
/// Returns -inf only when the data is impossible under the model.
double log_likelihood(const PoissonHmm& model, const signal::BinnedTrace& trace);

/// Smoothed (forward-backward) per-bin state probabilities.
filter::ProbabilityTrace posterior_marginals(const PoissonHmm& model,
                                             const signal::BinnedTrace& trace);

struct HmmFitResult {
  PoissonHmm model;
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> ll_history;   // one entry per EM iteration, non-decreasing
  std::vector<int> starved_states;  // frozen for lack of expected occupancy
};

/// Baum-Welch EM from an explicit starting model. The log-likelihood is
/// checked to be non-decreasing every iteration; NaNs abort with diagnostics.
HmmFitResult em_fit(const std::vector<signal::BinnedTrace>& traces,
                    const PoissonHmm& init, double tol = 1e-6, int max_iter = 500);

/// EM with multiple restarts: means initialized from the quantile spread of
/// the observed counts, near-uniform transitions, per-restart jitter. Returns
/// the best restart by log-likelihood.
HmmFitResult em_fit(const std::vector<signal::BinnedTrace>& traces, int n_states,
                    std::uint64_t seed, int restarts = 5, double tol = 1e-6,
                    int max_iter = 500);

enum class Criterion { aic, bic };

struct OrderScore {
  int n_states = 0;
  double log_likelihood = 0.0;
  int n_params = 0;  // N^2 + N - 1: transitions, means, initial
  double score = 0.0;
  HmmFitResult fit;
};

/// Fit every candidate order and rank by the penalized criterion, best first.
std::vector<OrderScore> compare_orders(const std::vector<signal::BinnedTrace>& traces,
                                       const std::vector<int>& orders,
                                       Criterion criterion, std::uint64_t seed,
                                       int restarts = 5, double tol = 1e-6,
                                       int max_iter = 500);

struct GeneratorEstimate {
  Eigen::MatrixXd rates;  // 1/s
  bool valid = false;     // false: first-order fallback trans_ij / bin_width
};

/// Continuous transition rates from the per-bin transition matrix via the
/// principal matrix logarithm, with a flagged first-order fallback.
GeneratorEstimate rates_from_transitions(const PoissonHmm& model);

/// Sample a synthetic trace (and its hidden path) from the model.
std::pair<signal::BinnedTrace, std::vector<int>> sample(const PoissonHmm& model,
                                                        std::size_t n_bins,
                                                        std::uint64_t seed);

}  // namespace qjump::hmm
