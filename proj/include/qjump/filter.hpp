#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "qjump/signal.hpp"

namespace qjump::filter {

enum class PredictMode { exact, linear };

/// Per-state photon-count distribution for one bin width: parametric Poisson
/// or an empirical histogram. Empirical models get a probability floor of
/// 1e-6 on unseen counts up to twice the largest observed count, applied
/// before normalization, so finite histogram statistics cannot lock the
/// filter out of a state.
struct EmissionModel {
  enum class Kind { poisson, empirical };
  Kind kind = Kind::poisson;
  double bin_width = 0.0;         // s
  double mean = 0.0;              // poisson only: mean counts per bin
  std::vector<double> table;      // empirical only: probs over 0..cap

  static EmissionModel poisson(double mean_counts, double bin_width);
  static EmissionModel empirical(const signal::CountHistogram& hist);

  double prob(long n) const;
  double log_prob(long n) const;
};

/// Everything the Bayes filter needs: rate matrix over the hidden states,
/// one emission model per state, initial distribution, predict mode.
struct FilterConfig {
  Eigen::MatrixXd rates;  // (i,j): rate i -> j in 1/s
  std::vector<EmissionModel> emissions;
  Eigen::VectorXd initial;
  PredictMode predict_mode = PredictMode::exact;

  void validate(double trace_bin_width) const;
};

/// Posterior state probabilities attached to bin midpoints.
struct ProbabilityTrace {
  std::vector<double> times;  // s
  Eigen::MatrixXd probs;      // rows: bins, cols: states; each row sums to 1

  std::size_t n_bins() const { return times.size(); }
  int n_states() const { return static_cast<int>(probs.cols()); }
};

/// Propagate a probability vector through the rate equations over dt.
/// exact: matrix-exponential propagator, valid for any dt. linear: the
/// first-order update p + (inflow - outflow)*dt, rejected when
/// dt * max_rate > 0.5. Both renormalize the output.
Eigen::VectorXd predict(const Eigen::VectorXd& p, const Eigen::MatrixXd& rates,
                        double dt, PredictMode mode);

struct UpdateResult {
  Eigen::VectorXd posterior;
  double likelihood = 0.0;  // predictive probability of the observed count
  bool flagged = false;     // zero likelihood under every state: update skipped
};

/// Bayes update: posterior_a ~ P(n|a) * prior_a. When the observed count is
/// impossible under every emission model the update is skipped (likelihoods
/// treated as 1) and the result is flagged.
UpdateResult update(const Eigen::VectorXd& prior, long n,
                    const std::vector<EmissionModel>& emissions);

struct FilterResult {
  ProbabilityTrace trace;
  std::vector<double> log_predictive;   // per-bin log predictive likelihood
  std::vector<std::size_t> flagged_bins;
};

/// Alternating predict/update over all bins. Probabilities refer to bin
/// midpoints, so the first predict step covers half a bin and subsequent
/// steps a full bin.
FilterResult run_filter(const signal::BinnedTrace& trace, const FilterConfig& cfg);

struct EntropyResult {
  std::vector<double> series;  // natural-log entropy per bin
  double mean = 0.0;
};

/// Shannon entropy -sum_a p_a ln p_a per bin and its average; 0*ln 0 = 0.
EntropyResult entropy_trace(const ProbabilityTrace& pt);

/// Baseline classifier: index of the threshold interval containing each bin
/// count (0 = below the first threshold). Thresholds must be strictly
/// increasing.
std::vector<int> threshold_classify(const signal::BinnedTrace& trace,
                                    const std::vector<double>& thresholds);

}  // namespace qjump::filter
