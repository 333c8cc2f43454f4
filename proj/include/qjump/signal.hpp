#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "qjump/simulate.hpp"

namespace qjump::signal {

/// Counts per fixed time bin. Raw binned data holds integers; ensemble
/// averages reuse the type with fractional values.
struct BinnedTrace {
  double bin_width = 0.0;   // s
  double start_time = 0.0;  // s, left edge of the first bin
  std::vector<double> counts;

  double midpoint(std::size_t i) const {
    return start_time + (static_cast<double>(i) + 0.5) * bin_width;
  }
};

/// Normalized photon-count histogram for one bin width.
struct CountHistogram {
  double bin_width = 0.0;  // s
  std::map<long, double> probs;
  long total_bins = 0;

  double prob(long n) const;
  long max_count() const;  // largest count with nonzero probability
  void validate() const;   // probabilities >= 0, sum = 1 within 1e-9
};

/// Second-order correlation g2(tau) on a lag grid, tau > 0.
struct CorrelationCurve {
  std::vector<double> lags;    // s, strictly increasing
  std::vector<double> values;  // dimensionless
};

/// Count clicks into bins of width bin_width starting at t = 0. The trailing
/// partial bin is dropped, never padded.
BinnedTrace bin_clicks(const simulate::ClickRecord& record, double bin_width);

/// Empirical normalized distribution of the counts in a trace (or pooled over
/// an ensemble of traces with one bin width). Counts must be integral.
CountHistogram histogram(const BinnedTrace& trace);
CountHistogram histogram(const std::vector<BinnedTrace>& traces);

/// Truncated Poisson count histogram with the given mean per bin; normalized.
CountHistogram poisson_histogram(double mean, double bin_width);

/// Normalized count-count correlator <n(t) n(t+tau)> / (<n(t)><n(t+tau)>)
/// for integer lags up to max_lag. The lag-0 shot-noise self term is excluded.
CorrelationCurve g2(const BinnedTrace& trace, double max_lag);

/// Average of per-trace g2 curves over an ensemble of equal-shape traces.
CorrelationCurve g2(const std::vector<BinnedTrace>& traces, double max_lag);

/// Result of a nonlinear least-squares fit of A*exp(-r*t) + c.
struct ExpFitResult {
  double amplitude = 0.0;
  double rate = 0.0;       // 1/s
  double offset = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;  // flat input: amplitude ~ 0, rate unidentifiable
};

ExpFitResult fit_exponential_decay(const std::vector<double>& t,
                                   const std::vector<double>& y);
ExpFitResult fit_exponential_decay(const CorrelationCurve& curve);

/// Per-bin arithmetic mean over traces with equal bin widths; lengths are
/// truncated to the shortest trace. Output counts are fractional.
BinnedTrace ensemble_average(const std::vector<BinnedTrace>& traces);

}  // namespace qjump::signal
