#include "qjump/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "qjump/markov.hpp"
#include "qjump/rng.hpp"

namespace qjump::hmm {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

std::vector<long> integer_counts(const signal::BinnedTrace& trace) {
  std::vector<long> counts(trace.counts.size());
  for (std::size_t i = 0; i < trace.counts.size(); ++i) {
    const double c = trace.counts[i];
    const double rounded = std::round(c);
    if (std::abs(c - rounded) > 1e-9 || rounded < 0.0)
      throw std::domain_error("hmm: counts must be non-negative integers");
    counts[i] = static_cast<long>(rounded);
  }
  return counts;
}

// log n! for every count up to the largest observed one.
std::vector<double> log_factorials(long max_n) {
  std::vector<double> lf(static_cast<std::size_t>(max_n) + 1);
  for (long n = 0; n <= max_n; ++n)
    lf[static_cast<std::size_t>(n)] = std::lgamma(static_cast<double>(n) + 1.0);
  return lf;
}

// Per-bin log emission probabilities, one column per state.
Eigen::MatrixXd log_emissions(const PoissonHmm& model, const std::vector<long>& counts,
                              const std::vector<double>& lf) {
  const auto t_len = static_cast<Eigen::Index>(counts.size());
  const auto n = static_cast<Eigen::Index>(model.n_states());
  Eigen::MatrixXd lb(t_len, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const double mean = model.means[static_cast<std::size_t>(a)];
    if (mean == 0.0) {
      for (Eigen::Index t = 0; t < t_len; ++t)
        lb(t, a) = counts[static_cast<std::size_t>(t)] == 0 ? 0.0 : neg_inf;
    } else {
      const double log_mean = std::log(mean);
      for (Eigen::Index t = 0; t < t_len; ++t) {
        const long c = counts[static_cast<std::size_t>(t)];
        lb(t, a) = -mean + static_cast<double>(c) * log_mean - lf[static_cast<std::size_t>(c)];
      }
    }
  }
  return lb;
}

struct ForwardPass {
  double ll = neg_inf;
  bool possible = false;
  Eigen::MatrixXd alpha;  // scaled forward variables, rows: bins
  Eigen::MatrixXd w;      // emission weights shifted by the per-bin max
  Eigen::VectorXd scale;  // per-bin normalizers of alpha
};

ForwardPass forward(const PoissonHmm& model, const Eigen::MatrixXd& lb) {
  const Eigen::Index t_len = lb.rows();
  const Eigen::Index n = lb.cols();
  ForwardPass fp;
  fp.alpha.resize(t_len, n);
  fp.w.resize(t_len, n);
  fp.scale.resize(t_len);
  double ll = 0.0;
  Eigen::RowVectorXd pred(n);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const double m = lb.row(t).maxCoeff();
    if (m == neg_inf) return fp;  // count impossible under every state
    fp.w.row(t) = (lb.row(t).array() - m).exp();
    if (t == 0)
      pred = model.initial.transpose();
    else
      pred = fp.alpha.row(t - 1) * model.trans;
    const Eigen::RowVectorXd raw = pred.cwiseProduct(fp.w.row(t));
    const double s = raw.sum();
    if (!(s > 0.0)) return fp;
    fp.alpha.row(t) = raw / s;
    fp.scale(t) = s;
    ll += m + std::log(s);
  }
  fp.ll = ll;
  fp.possible = true;
  return fp;
}

}  // namespace

void PoissonHmm::validate() const {
  const auto n = static_cast<Eigen::Index>(means.size());
  if (n < 1) throw std::domain_error("PoissonHmm: at least one state required");
  if (trans.rows() != n || trans.cols() != n)
    throw std::domain_error("PoissonHmm: trans must be n_states x n_states");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (trans.row(i).minCoeff() < 0.0)
      throw std::domain_error("PoissonHmm: negative transition probability");
    if (std::abs(trans.row(i).sum() - 1.0) > 1e-9)
      throw std::domain_error("PoissonHmm: trans rows must sum to 1");
  }
  for (double m : means)
    if (m < 0.0 || !std::isfinite(m)) throw std::domain_error("PoissonHmm: invalid mean");
  if (initial.size() != n || initial.minCoeff() < 0.0 ||
      std::abs(initial.sum() - 1.0) > 1e-9)
    throw std::domain_error("PoissonHmm: initial must be a probability vector");
  if (bin_width <= 0.0) throw std::domain_error("PoissonHmm: bin_width must be positive");
}

double log_likelihood(const PoissonHmm& model, const signal::BinnedTrace& trace) {
  model.validate();
  if (std::abs(trace.bin_width - model.bin_width) > 1e-9 * model.bin_width)
    throw std::invalid_argument("log_likelihood: bin widths do not match");
  const auto counts = integer_counts(trace);
  if (counts.empty()) throw std::invalid_argument("log_likelihood: empty trace");
  const auto lf = log_factorials(*std::max_element(counts.begin(), counts.end()));
  return forward(model, log_emissions(model, counts, lf)).ll;
}

filter::ProbabilityTrace posterior_marginals(const PoissonHmm& model,
                                             const signal::BinnedTrace& trace) {
  model.validate();
  if (std::abs(trace.bin_width - model.bin_width) > 1e-9 * model.bin_width)
    throw std::invalid_argument("posterior_marginals: bin widths do not match");
  const auto counts = integer_counts(trace);
  if (counts.empty()) throw std::invalid_argument("posterior_marginals: empty trace");
  const auto lf = log_factorials(*std::max_element(counts.begin(), counts.end()));
  const auto fp = forward(model, log_emissions(model, counts, lf));
  if (!fp.possible)
    throw std::runtime_error("posterior_marginals: trace impossible under the model");

  const auto t_len = static_cast<Eigen::Index>(counts.size());
  const auto n = static_cast<Eigen::Index>(model.n_states());
  filter::ProbabilityTrace pt;
  pt.times.resize(counts.size());
  pt.probs.resize(t_len, n);
  for (std::size_t i = 0; i < counts.size(); ++i) pt.times[i] = trace.midpoint(i);

  Eigen::RowVectorXd beta = Eigen::RowVectorXd::Ones(n);
  pt.probs.row(t_len - 1) = fp.alpha.row(t_len - 1);
  for (Eigen::Index t = t_len - 2; t >= 0; --t) {
    const Eigen::RowVectorXd wb = fp.w.row(t + 1).cwiseProduct(beta) / fp.scale(t + 1);
    beta = (model.trans * wb.transpose()).transpose();
    Eigen::RowVectorXd gamma = fp.alpha.row(t).cwiseProduct(beta);
    pt.probs.row(t) = gamma / gamma.sum();
  }
  return pt;
}

namespace {

struct EmAccumulators {
  Eigen::MatrixXd xi;         // expected transition counts
  Eigen::VectorXd gamma_sum;  // expected occupancy, all bins
  Eigen::VectorXd gamma_n;    // occupancy-weighted counts
  Eigen::VectorXd gamma0;     // summed first-bin posteriors
  double ll = 0.0;

  explicit EmAccumulators(Eigen::Index n)
      : xi(Eigen::MatrixXd::Zero(n, n)),
        gamma_sum(Eigen::VectorXd::Zero(n)),
        gamma_n(Eigen::VectorXd::Zero(n)),
        gamma0(Eigen::VectorXd::Zero(n)) {}
};

void accumulate_trace(const PoissonHmm& model, const std::vector<long>& counts,
                      const std::vector<double>& lf, EmAccumulators& acc) {
  const auto fp = forward(model, log_emissions(model, counts, lf));
  if (!fp.possible)
    throw std::runtime_error("em_fit: trace impossible under the current model");
  acc.ll += fp.ll;

  const auto t_len = static_cast<Eigen::Index>(counts.size());
  const auto n = static_cast<Eigen::Index>(model.n_states());
  Eigen::RowVectorXd beta = Eigen::RowVectorXd::Ones(n);
  Eigen::RowVectorXd gamma = fp.alpha.row(t_len - 1);
  acc.gamma_sum += gamma.transpose();
  acc.gamma_n += gamma.transpose() * static_cast<double>(counts[static_cast<std::size_t>(t_len - 1)]);
  if (t_len == 1) {
    acc.gamma0 += gamma.transpose();
    return;
  }
  for (Eigen::Index t = t_len - 2; t >= 0; --t) {
    const Eigen::RowVectorXd wb = fp.w.row(t + 1).cwiseProduct(beta) / fp.scale(t + 1);
    Eigen::MatrixXd xi =
        fp.alpha.row(t).transpose().asDiagonal() * model.trans * wb.asDiagonal();
    xi /= xi.sum();
    acc.xi += xi;
    beta = (model.trans * wb.transpose()).transpose();
    gamma = fp.alpha.row(t).cwiseProduct(beta);
    gamma /= gamma.sum();
    acc.gamma_sum += gamma.transpose();
    acc.gamma_n += gamma.transpose() * static_cast<double>(counts[static_cast<std::size_t>(t)]);
    if (t == 0) acc.gamma0 += gamma.transpose();
  }
}

}  // namespace

HmmFitResult em_fit(const std::vector<signal::BinnedTrace>& traces, const PoissonHmm& init,
                    double tol, int max_iter) {
  init.validate();
  if (traces.empty()) throw std::invalid_argument("em_fit: no traces");
  if (max_iter < 1) throw std::invalid_argument("em_fit: max_iter must be >= 1");
  std::vector<std::vector<long>> counts;
  counts.reserve(traces.size());
  long max_n = 0;
  for (const auto& trace : traces) {
    if (std::abs(trace.bin_width - init.bin_width) > 1e-9 * init.bin_width)
      throw std::invalid_argument("em_fit: bin widths do not match");
    counts.push_back(integer_counts(trace));
    if (counts.back().empty()) throw std::invalid_argument("em_fit: empty trace");
    max_n = std::max(max_n, *std::max_element(counts.back().begin(), counts.back().end()));
  }
  const auto lf = log_factorials(max_n);
  const auto n = static_cast<Eigen::Index>(init.n_states());

  HmmFitResult result;
  result.model = init;
  std::vector<bool> starved(static_cast<std::size_t>(n), false);
  double prev_ll = neg_inf;
  for (int iter = 0; iter < max_iter; ++iter) {
    EmAccumulators acc(n);
    for (const auto& c : counts) accumulate_trace(result.model, c, lf, acc);
    result.ll_history.push_back(acc.ll);
    if (iter > 0 && acc.ll < prev_ll - (1e-8 + 1e-10 * std::abs(prev_ll)))
      throw std::runtime_error("em_fit: log-likelihood decreased at iteration " +
                               std::to_string(iter) + " (" + std::to_string(prev_ll) +
                               " -> " + std::to_string(acc.ll) + ")");
    if (iter > 0 && acc.ll - prev_ll < tol) {
      result.converged = true;
      prev_ll = acc.ll;
      break;
    }
    prev_ll = acc.ll;
    if (iter == max_iter - 1) break;  // budget spent; model matches the last ll

    // M-step. Starved states keep their parameters so EM stays monotone.
    PoissonHmm next = result.model;
    for (Eigen::Index a = 0; a < n; ++a) {
      if (acc.gamma_sum(a) < 1e-8) {
        if (!starved[static_cast<std::size_t>(a)]) {
          starved[static_cast<std::size_t>(a)] = true;
          result.starved_states.push_back(static_cast<int>(a));
        }
        continue;
      }
      next.means[static_cast<std::size_t>(a)] = acc.gamma_n(a) / acc.gamma_sum(a);
      const double row_sum = acc.xi.row(a).sum();
      if (row_sum > 0.0) next.trans.row(a) = acc.xi.row(a) / row_sum;
    }
    next.initial = acc.gamma0 / acc.gamma0.sum();
    if (!next.trans.allFinite() || !next.initial.allFinite() ||
        std::any_of(next.means.begin(), next.means.end(),
                    [](double m) { return !std::isfinite(m); }))
      throw std::runtime_error("em_fit: NaN in parameters at iteration " +
                               std::to_string(iter));
    result.model = next;
  }
  std::sort(result.starved_states.begin(), result.starved_states.end());
  result.log_likelihood = prev_ll;
  result.iterations = static_cast<int>(result.ll_history.size());
  return result;
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

HmmFitResult em_fit(const std::vector<signal::BinnedTrace>& traces, int n_states,
                    std::uint64_t seed, int restarts, double tol, int max_iter) {
  if (n_states < 1) throw std::invalid_argument("em_fit: n_states must be >= 1");
  if (restarts < 1) throw std::invalid_argument("em_fit: restarts must be >= 1");
  if (traces.empty()) throw std::invalid_argument("em_fit: no traces");
  std::vector<double> all_counts;
  for (const auto& trace : traces)
    all_counts.insert(all_counts.end(), trace.counts.begin(), trace.counts.end());
  std::sort(all_counts.begin(), all_counts.end());

  HmmFitResult best;
  bool have_best = false;
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 eng(rng::substream(seed, static_cast<std::uint64_t>(r)));
    PoissonHmm init;
    init.bin_width = traces.front().bin_width;
    init.means.resize(static_cast<std::size_t>(n_states));
    for (int a = 0; a < n_states; ++a) {
      double q = (static_cast<double>(a) + 0.5) / static_cast<double>(n_states);
      if (r > 0) q += (rng::uniform01(eng) - 0.5) * 0.5 / static_cast<double>(n_states);
      q = std::clamp(q, 0.01, 0.99);
      double mean = std::max(quantile(all_counts, q), 0.05);
      if (a > 0) {
        const double prev = init.means[static_cast<std::size_t>(a - 1)];
        mean = std::max(mean, prev * 1.05 + 0.1);
      }
      init.means[static_cast<std::size_t>(a)] = mean;
    }
    init.trans.resize(n_states, n_states);
    for (int i = 0; i < n_states; ++i) {
      for (int j = 0; j < n_states; ++j)
        init.trans(i, j) = 1.0 + (r > 0 ? 0.2 * rng::uniform01(eng) : 0.0);
      init.trans.row(i) /= init.trans.row(i).sum();
    }
    init.initial = Eigen::VectorXd::Constant(n_states, 1.0 / n_states);

    auto fit = em_fit(traces, init, tol, max_iter);
    if (!have_best || fit.log_likelihood > best.log_likelihood) {
      best = std::move(fit);
      have_best = true;
    }
  }
  return best;
}

std::vector<OrderScore> compare_orders(const std::vector<signal::BinnedTrace>& traces,
                                       const std::vector<int>& orders, Criterion criterion,
                                       std::uint64_t seed, int restarts, double tol,
                                       int max_iter) {
  if (orders.empty()) throw std::invalid_argument("compare_orders: no candidate orders");
  std::size_t n_obs = 0;
  for (const auto& trace : traces) n_obs += trace.counts.size();
  if (n_obs == 0) throw std::invalid_argument("compare_orders: no data");

  std::vector<OrderScore> scores;
  scores.reserve(orders.size());
  for (int n : orders) {
    OrderScore os;
    os.n_states = n;
    os.fit = em_fit(traces, n, rng::substream(seed, 1000 + static_cast<std::uint64_t>(n)),
                    restarts, tol, max_iter);
    os.log_likelihood = os.fit.log_likelihood;
    os.n_params = n * n + n - 1;
    const double penalty = criterion == Criterion::aic
                               ? 2.0 * os.n_params
                               : static_cast<double>(os.n_params) * std::log(static_cast<double>(n_obs));
    os.score = penalty - 2.0 * os.log_likelihood;
    scores.push_back(std::move(os));
  }
  std::stable_sort(scores.begin(), scores.end(),
                   [](const OrderScore& a, const OrderScore& b) { return a.score < b.score; });
  return scores;
}

GeneratorEstimate rates_from_transitions(const PoissonHmm& model) {
  model.validate();
  const auto est = markov::generator_log(model.trans, model.bin_width);
  GeneratorEstimate out;
  out.rates = est.rates;
  out.valid = est.valid;
  return out;
}

std::pair<signal::BinnedTrace, std::vector<int>> sample(const PoissonHmm& model,
                                                        std::size_t n_bins,
                                                        std::uint64_t seed) {
  model.validate();
  if (n_bins == 0) throw std::invalid_argument("sample: n_bins must be positive");
  const auto n = static_cast<std::size_t>(model.n_states());
  std::vector<double> initial(n), row(n);
  for (std::size_t a = 0; a < n; ++a) initial[a] = model.initial(static_cast<Eigen::Index>(a));

  std::mt19937_64 eng(rng::substream(seed, 0));
  signal::BinnedTrace trace;
  trace.bin_width = model.bin_width;
  trace.counts.resize(n_bins);
  std::vector<int> hidden(n_bins);
  std::size_t state = rng::categorical(eng, initial);
  for (std::size_t t = 0; t < n_bins; ++t) {
    hidden[t] = static_cast<int>(state);
    trace.counts[t] = static_cast<double>(rng::poisson(eng, model.means[state]));
    for (std::size_t j = 0; j < n; ++j)
      row[j] = model.trans(static_cast<Eigen::Index>(state), static_cast<Eigen::Index>(j));
    state = rng::categorical(eng, row);
  }
  return {std::move(trace), std::move(hidden)};
}

}  // namespace qjump::hmm
