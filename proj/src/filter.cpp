#include "qjump/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qjump/markov.hpp"

namespace qjump::filter {

EmissionModel EmissionModel::poisson(double mean_counts, double bin_width) {
  if (mean_counts < 0.0) throw std::domain_error("EmissionModel: mean must be non-negative");
  if (bin_width <= 0.0) throw std::domain_error("EmissionModel: bin_width must be positive");
  EmissionModel m;
  m.kind = Kind::poisson;
  m.bin_width = bin_width;
  m.mean = mean_counts;
  return m;
}

EmissionModel EmissionModel::empirical(const signal::CountHistogram& hist) {
  hist.validate();
  EmissionModel m;
  m.kind = Kind::empirical;
  m.bin_width = hist.bin_width;
  const long cap = 2 * hist.max_count();
  m.table.assign(static_cast<std::size_t>(cap) + 1, 0.0);
  for (long n = 0; n <= cap; ++n)
    m.table[static_cast<std::size_t>(n)] = std::max(hist.prob(n), 1e-6);
  double norm = 0.0;
  for (double p : m.table) norm += p;
  for (double& p : m.table) p /= norm;
  return m;
}

double EmissionModel::prob(long n) const {
  if (n < 0) return 0.0;
  if (kind == Kind::empirical) {
    const auto idx = static_cast<std::size_t>(n);
    return idx < table.size() ? table[idx] : 0.0;
  }
  if (mean == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(log_prob(n));
}

double EmissionModel::log_prob(long n) const {
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  if (n < 0) return neg_inf;
  if (kind == Kind::empirical) {
    const auto idx = static_cast<std::size_t>(n);
    return idx < table.size() ? std::log(table[idx]) : neg_inf;
  }
  if (mean == 0.0) return n == 0 ? 0.0 : neg_inf;
  const double x = static_cast<double>(n);
  return -mean + x * std::log(mean) - std::lgamma(x + 1.0);
}

void FilterConfig::validate(double trace_bin_width) const {
  const auto n = static_cast<std::size_t>(rates.rows());
  if (rates.cols() != rates.rows() || n < 2)
    throw std::domain_error("FilterConfig: rates must be square, >= 2 states");
  for (Eigen::Index i = 0; i < rates.rows(); ++i)
    for (Eigen::Index j = 0; j < rates.cols(); ++j)
      if (i != j && rates(i, j) < 0.0)
        throw std::domain_error("FilterConfig: negative transition rate");
  if (emissions.size() != n)
    throw std::domain_error("FilterConfig: one emission model per state required");
  if (static_cast<std::size_t>(initial.size()) != n)
    throw std::domain_error("FilterConfig: initial size mismatch");
  if (initial.minCoeff() < 0.0 || std::abs(initial.sum() - 1.0) > 1e-9)
    throw std::domain_error("FilterConfig: initial must be a probability vector");
  for (const auto& em : emissions) {
    if (std::abs(em.bin_width - trace_bin_width) > 1e-9 * trace_bin_width)
      throw std::domain_error("FilterConfig: emission bin width does not match the trace");
    if (em.kind == EmissionModel::Kind::empirical && em.table.empty())
      throw std::domain_error("FilterConfig: empty empirical emission table");
  }
}

namespace {

double max_exit_rate(const Eigen::MatrixXd& rates) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < rates.rows(); ++i) {
    double exit = 0.0;
    for (Eigen::Index j = 0; j < rates.cols(); ++j)
      if (i != j) exit += rates(i, j);
    best = std::max(best, exit);
  }
  return best;
}

Eigen::VectorXd clip_normalize(Eigen::VectorXd p) {
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = std::max(p(i), 0.0);
  const double s = p.sum();
  if (s <= 0.0) throw std::runtime_error("predict: probability mass vanished");
  return p / s;
}

}  // namespace

Eigen::VectorXd predict(const Eigen::VectorXd& p, const Eigen::MatrixXd& rates,
                        double dt, PredictMode mode) {
  if (p.size() != rates.rows() || rates.rows() != rates.cols())
    throw std::invalid_argument("predict: shape mismatch");
  if (dt < 0.0) throw std::domain_error("predict: dt must be non-negative");
  if (mode == PredictMode::exact) {
    const Eigen::MatrixXd gen = markov::generator(rates);
    return markov::propagate(p, markov::propagator(gen, dt));
  }
  if (dt * max_exit_rate(rates) > 0.5)
    throw std::domain_error("predict: linear mode invalid, dt * max_rate > 0.5");
  Eigen::VectorXd next = p;
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    double inflow = 0.0, outflow = 0.0;
    for (Eigen::Index b = 0; b < p.size(); ++b) {
      if (b == a) continue;
      inflow += p(b) * rates(b, a);
      outflow += p(a) * rates(a, b);
    }
    next(a) += (inflow - outflow) * dt;
  }
  return clip_normalize(std::move(next));
}

UpdateResult update(const Eigen::VectorXd& prior, long n,
                    const std::vector<EmissionModel>& emissions) {
  if (static_cast<std::size_t>(prior.size()) != emissions.size())
    throw std::invalid_argument("update: one emission model per state required");
  if (n < 0) throw std::domain_error("update: negative count");
  UpdateResult out;
  Eigen::VectorXd weighted(prior.size());
  for (Eigen::Index a = 0; a < prior.size(); ++a)
    weighted(a) = prior(a) * emissions[static_cast<std::size_t>(a)].prob(n);
  const double norm = weighted.sum();
  if (norm <= 0.0) {
    // Count impossible under every state: skip the update, flag the bin.
    out.posterior = prior;
    out.likelihood = 1.0;
    out.flagged = true;
    return out;
  }
  out.posterior = weighted / norm;
  out.likelihood = norm;
  return out;
}

FilterResult run_filter(const signal::BinnedTrace& trace, const FilterConfig& cfg) {
  cfg.validate(trace.bin_width);
  const std::size_t n_bins = trace.counts.size();
  const auto n_states = static_cast<Eigen::Index>(cfg.emissions.size());

  FilterResult out;
  out.trace.times.resize(n_bins);
  out.trace.probs.resize(static_cast<Eigen::Index>(n_bins), n_states);
  out.log_predictive.resize(n_bins);

  // Fixed bin width: the exact propagators can be built once. The first
  // predict covers half a bin so probabilities sit at bin midpoints.
  Eigen::MatrixXd half_prop, full_prop;
  if (cfg.predict_mode == PredictMode::exact) {
    const Eigen::MatrixXd gen = markov::generator(cfg.rates);
    half_prop = markov::propagator(gen, 0.5 * trace.bin_width);
    full_prop = markov::propagator(gen, trace.bin_width);
  }

  Eigen::VectorXd p = cfg.initial;
  for (std::size_t i = 0; i < n_bins; ++i) {
    if (cfg.predict_mode == PredictMode::exact) {
      p = markov::propagate(p, i == 0 ? half_prop : full_prop);
    } else {
      p = predict(p, cfg.rates, i == 0 ? 0.5 * trace.bin_width : trace.bin_width,
                  PredictMode::linear);
    }
    const double c = trace.counts[i];
    const double rounded = std::round(c);
    if (std::abs(c - rounded) > 1e-9 || rounded < 0.0)
      throw std::domain_error("run_filter: counts must be non-negative integers (bin " +
                              std::to_string(i) + ")");
    UpdateResult ur;
    try {
      ur = update(p, static_cast<long>(rounded), cfg.emissions);
    } catch (const std::exception& e) {
      throw std::runtime_error("run_filter: bin " + std::to_string(i) + ": " + e.what());
    }
    p = ur.posterior;
    if (ur.flagged) out.flagged_bins.push_back(i);
    out.log_predictive[i] = ur.flagged ? 0.0 : std::log(ur.likelihood);
    out.trace.times[i] = trace.midpoint(i);
    out.trace.probs.row(static_cast<Eigen::Index>(i)) = p.transpose();
  }
  return out;
}

EntropyResult entropy_trace(const ProbabilityTrace& pt) {
  if (pt.n_bins() == 0) throw std::invalid_argument("entropy_trace: empty trace");
  EntropyResult out;
  out.series.resize(pt.n_bins());
  double total = 0.0;
  for (std::size_t i = 0; i < pt.n_bins(); ++i) {
    double s = 0.0;
    for (Eigen::Index a = 0; a < pt.probs.cols(); ++a) {
      const double p = pt.probs(static_cast<Eigen::Index>(i), a);
      if (p > 0.0) s -= p * std::log(p);
    }
    out.series[i] = s;
    total += s;
  }
  out.mean = total / static_cast<double>(pt.n_bins());
  return out;
}

std::vector<int> threshold_classify(const signal::BinnedTrace& trace,
                                    const std::vector<double>& thresholds) {
  for (std::size_t k = 1; k < thresholds.size(); ++k)
    if (!(thresholds[k] > thresholds[k - 1]))
      throw std::invalid_argument("threshold_classify: thresholds must be strictly increasing");
  std::vector<int> classes(trace.counts.size());
  for (std::size_t i = 0; i < trace.counts.size(); ++i) {
    const double c = trace.counts[i];
    int cls = 0;
    for (double t : thresholds)
      if (c >= t) ++cls;
    classes[i] = cls;
  }
  return classes;
}

}  // namespace qjump::filter
