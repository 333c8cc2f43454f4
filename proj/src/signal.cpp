#include "qjump/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qjump/optim.hpp"

namespace qjump::signal {

void CountHistogram::validate() const {
  if (bin_width <= 0.0) throw std::domain_error("CountHistogram: bin_width must be positive");
  double total = 0.0;
  for (const auto& [count, prob] : probs) {
    if (count < 0) throw std::domain_error("CountHistogram: negative count key");
    if (prob < 0.0) throw std::domain_error("CountHistogram: negative probability");
    total += prob;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::domain_error("CountHistogram: probabilities must sum to 1");
}

double CountHistogram::prob(long count) const {
  auto it = probs.find(count);
  return it == probs.end() ? 0.0 : it->second;
}

long CountHistogram::max_count() const {
  if (probs.empty()) return 0;
  return probs.rbegin()->first;
}

BinnedTrace bin_clicks(const simulate::ClickRecord& clicks, double bin_width) {
  if (bin_width <= 0.0) throw std::domain_error("bin_clicks: bin_width must be positive");
  if (clicks.duration <= 0.0) throw std::domain_error("bin_clicks: record duration must be positive");
  // Trailing partial bin is dropped; the epsilon keeps an exact multiple intact.
  const auto n_bins = static_cast<std::size_t>(std::floor(clicks.duration / bin_width + 1e-9));
  BinnedTrace trace;
  trace.bin_width = bin_width;
  trace.start_time = 0.0;
  trace.counts.assign(n_bins, 0.0);
  double t = 0.0;
  for (double gap : clicks.intervals) {
    t += gap;
    const auto idx = static_cast<std::size_t>(std::floor(t / bin_width));
    if (idx < n_bins) trace.counts[idx] += 1.0;
  }
  return trace;
}

CountHistogram histogram(const BinnedTrace& trace) {
  return histogram(std::vector<BinnedTrace>{trace});
}

CountHistogram histogram(const std::vector<BinnedTrace>& traces) {
  if (traces.empty()) throw std::invalid_argument("histogram: no traces");
  const double bin_width = traces.front().bin_width;
  std::map<long, double> tally;
  long total = 0;
  for (const auto& trace : traces) {
    if (std::abs(trace.bin_width - bin_width) > 1e-12 * bin_width)
      throw std::invalid_argument("histogram: traces must share one bin width");
    for (double c : trace.counts) {
      const double rounded = std::round(c);
      if (std::abs(c - rounded) > 1e-9 || rounded < 0.0)
        throw std::domain_error("histogram: counts must be non-negative integers");
      tally[static_cast<long>(rounded)] += 1.0;
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("histogram: traces contain no bins");
  CountHistogram hist;
  hist.bin_width = bin_width;
  hist.total_bins = total;
  for (auto& [count, n] : tally) hist.probs[count] = n / static_cast<double>(total);
  return hist;
}

CountHistogram poisson_histogram(double mean, double bin_width) {
  if (mean < 0.0) throw std::domain_error("poisson_histogram: mean must be non-negative");
  if (bin_width <= 0.0) throw std::domain_error("poisson_histogram: bin_width must be positive");
  CountHistogram hist;
  hist.bin_width = bin_width;
  hist.total_bins = 0;
  double p = std::exp(-mean);
  double cum = 0.0;
  long k = 0;
  while (cum < 1.0 - 1e-12) {
    hist.probs[k] = p;
    cum += p;
    ++k;
    p *= mean / static_cast<double>(k);
    if (k > 10000) break;
  }
  double norm = 0.0;
  for (auto& [count, prob] : hist.probs) norm += prob;
  for (auto& [count, prob] : hist.probs) prob /= norm;
  return hist;
}

CorrelationCurve g2(const BinnedTrace& trace, double max_lag) {
  return g2(std::vector<BinnedTrace>{trace}, max_lag);
}

CorrelationCurve g2(const std::vector<BinnedTrace>& traces, double max_lag) {
  if (traces.empty()) throw std::invalid_argument("g2: no traces");
  const double bin_width = traces.front().bin_width;
  if (max_lag < bin_width) throw std::invalid_argument("g2: max_lag below one bin");
  const auto n_lags = static_cast<std::size_t>(std::floor(max_lag / bin_width + 1e-9));
  for (const auto& trace : traces) {
    if (std::abs(trace.bin_width - bin_width) > 1e-12 * bin_width)
      throw std::invalid_argument("g2: traces must share one bin width");
    if (trace.counts.size() <= n_lags)
      throw std::invalid_argument("g2: max_lag must be smaller than the shortest trace");
  }
  CorrelationCurve curve;
  curve.lags.resize(n_lags);
  curve.values.resize(n_lags);
  for (std::size_t lag = 1; lag <= n_lags; ++lag) {
    double cross = 0.0, head = 0.0, tail = 0.0;
    std::size_t n = 0;
    for (const auto& trace : traces) {
      const std::size_t m = trace.counts.size() - lag;
      for (std::size_t i = 0; i < m; ++i) {
        cross += trace.counts[i] * trace.counts[i + lag];
        head += trace.counts[i];
        tail += trace.counts[i + lag];
      }
      n += m;
    }
    const double denom = (head / n) * (tail / n);
    curve.lags[lag - 1] = static_cast<double>(lag) * bin_width;
    curve.values[lag - 1] =
        denom > 0.0 ? (cross / n) / denom : std::numeric_limits<double>::quiet_NaN();
  }
  return curve;
}

ExpFitResult fit_exponential_decay(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size()) throw std::invalid_argument("fit_exponential_decay: size mismatch");
  if (t.size() < 3) throw std::invalid_argument("fit_exponential_decay: need at least 3 points");
  const std::size_t n = t.size();

  // Offset guess: mean of the last quarter of the curve.
  const std::size_t tail_start = n - std::max<std::size_t>(1, n / 4);
  double offset0 = 0.0;
  for (std::size_t i = tail_start; i < n; ++i) offset0 += y[i];
  offset0 /= static_cast<double>(n - tail_start);
  const double amp0 = y.front() - offset0;

  ExpFitResult out;
  const double y_scale = std::max({std::abs(y.front()), std::abs(offset0), 1e-12});
  if (std::abs(amp0) < 1e-6 * y_scale) {
    // Essentially flat: report the mean level and flag it.
    out.degenerate = true;
    out.amplitude = 0.0;
    out.rate = 0.0;
    double mean = 0.0;
    for (double v : y) mean += v;
    out.offset = mean / static_cast<double>(n);
    double ss = 0.0;
    for (double v : y) ss += (v - out.offset) * (v - out.offset);
    out.residual_norm = std::sqrt(ss);
    out.converged = true;
    return out;
  }

  // Rate guess from the log of the first stretch above the offset.
  double rate0 = 0.0;
  {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (y[i] - offset0) / amp0;
      if (d > 1e-3) {
        lx.push_back(t[i]);
        ly.push_back(std::log(d));
      }
    }
    if (lx.size() >= 2) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
      }
      const double m = static_cast<double>(lx.size());
      const double denom = m * sxx - sx * sx;
      if (denom > 0.0) rate0 = -(m * sxy - sx * sy) / denom;
    }
    const double span = t.back() - t.front();
    if (!(rate0 > 0.0) || !std::isfinite(rate0)) rate0 = span > 0.0 ? 2.0 / span : 1.0;
  }

  // Fit a*exp(-exp(rho)*t)+c with rho = log(rate) to keep the rate positive.
  auto residual = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(n);
    const double rate = std::exp(p(1));
    for (std::size_t i = 0; i < n; ++i)
      r(static_cast<Eigen::Index>(i)) = p(0) * std::exp(-rate * t[i]) + p(2) - y[i];
    return r;
  };
  Eigen::VectorXd init(3);
  init << amp0, std::log(rate0), offset0;
  optim::LmOptions opts;
  auto lm = optim::levenberg_marquardt(residual, init, opts);

  out.amplitude = lm.params(0);
  out.rate = std::exp(lm.params(1));
  out.offset = lm.params(2);
  out.residual_norm = lm.residual_norm;
  out.iterations = lm.iterations;
  out.converged = lm.converged;
  return out;
}

ExpFitResult fit_exponential_decay(const CorrelationCurve& curve) {
  return fit_exponential_decay(curve.lags, curve.values);
}

BinnedTrace ensemble_average(const std::vector<BinnedTrace>& traces) {
  if (traces.empty()) throw std::invalid_argument("ensemble_average: no traces");
  const double bin_width = traces.front().bin_width;
  std::size_t n_bins = traces.front().counts.size();
  for (const auto& trace : traces) {
    if (std::abs(trace.bin_width - bin_width) > 1e-12 * bin_width)
      throw std::invalid_argument("ensemble_average: traces must share one bin width");
    n_bins = std::min(n_bins, trace.counts.size());
  }
  BinnedTrace avg;
  avg.bin_width = bin_width;
  avg.start_time = traces.front().start_time;
  avg.counts.assign(n_bins, 0.0);
  for (const auto& trace : traces)
    for (std::size_t i = 0; i < n_bins; ++i) avg.counts[i] += trace.counts[i];
  const double inv = 1.0 / static_cast<double>(traces.size());
  for (double& c : avg.counts) c *= inv;
  return avg;
}

}  // namespace qjump::signal
