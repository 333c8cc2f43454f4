#include "qjump/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "qjump/markov.hpp"
#include "qjump/optim.hpp"

namespace qjump::estimate {

namespace {

// Stack observed and component histograms on a shared count grid 0..K.
struct HistStack {
  Eigen::VectorXd y;
  Eigen::MatrixXd a;  // columns: components
};

HistStack stack_histograms(const signal::CountHistogram& observed,
                           const std::vector<signal::CountHistogram>& components) {
  if (components.size() < 2)
    throw std::invalid_argument("fit_mixture: need at least 2 components");
  observed.validate();
  long k_max = observed.max_count();
  for (const auto& comp : components) {
    comp.validate();
    if (std::abs(comp.bin_width - observed.bin_width) > 1e-12 * observed.bin_width)
      throw std::invalid_argument("fit_mixture: histograms must share one bin width");
    k_max = std::max(k_max, comp.max_count());
  }
  HistStack s;
  s.y.resize(k_max + 1);
  s.a.resize(k_max + 1, static_cast<Eigen::Index>(components.size()));
  for (long n = 0; n <= k_max; ++n) {
    s.y(n) = observed.prob(n);
    for (std::size_t c = 0; c < components.size(); ++c)
      s.a(n, static_cast<Eigen::Index>(c)) = components[c].prob(n);
  }
  return s;
}

bool components_identifiable(const Eigen::MatrixXd& a) {
  for (Eigen::Index i = 0; i < a.cols(); ++i)
    for (Eigen::Index j = i + 1; j < a.cols(); ++j)
      if ((a.col(i) - a.col(j)).lpNorm<Eigen::Infinity>() < 1e-9) return false;
  return true;
}

}  // namespace

MixtureFit fit_mixture(const signal::CountHistogram& observed,
                       const std::vector<signal::CountHistogram>& components) {
  const HistStack s = stack_histograms(observed, components);
  const auto m = static_cast<int>(components.size());
  if (m > 16) throw std::invalid_argument("fit_mixture: too many components");

  // Exact simplex-constrained least squares: solve the equality-constrained
  // problem on every support set, keep the best feasible solution.
  MixtureFit best;
  best.weights = Eigen::VectorXd::Zero(m);
  double best_cost = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << m); ++mask) {
    std::vector<int> support;
    for (int c = 0; c < m; ++c)
      if (mask & (1u << c)) support.push_back(c);
    const auto k = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd as(s.a.rows(), k);
    for (Eigen::Index c = 0; c < k; ++c) as.col(c) = s.a.col(support[static_cast<std::size_t>(c)]);
    // KKT system for min ||y - As w||^2 with 1'w = 1.
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
    kkt.topLeftCorner(k, k) = 2.0 * as.transpose() * as;
    kkt.topRightCorner(k, 1).setOnes();
    kkt.bottomLeftCorner(1, k).setOnes();
    Eigen::VectorXd rhs(k + 1);
    rhs.head(k) = 2.0 * as.transpose() * s.y;
    rhs(k) = 1.0;
    Eigen::VectorXd sol = kkt.colPivHouseholderQr().solve(rhs);
    Eigen::VectorXd w = sol.head(k);
    if (w.minCoeff() < -1e-10) continue;
    w = w.cwiseMax(0.0);
    w /= w.sum();
    const double cost = (s.y - as * w).squaredNorm();
    if (cost < best_cost - 1e-15) {
      best_cost = cost;
      best.weights.setZero();
      for (Eigen::Index c = 0; c < k; ++c) best.weights(support[static_cast<std::size_t>(c)]) = w(c);
    }
  }
  if (!std::isfinite(best_cost))
    throw std::runtime_error("fit_mixture: no feasible solution found");
  best.residual = std::sqrt(best_cost);
  best.identifiable = components_identifiable(s.a);
  return best;
}

MixtureFit fit_mixture_ml(const signal::CountHistogram& observed,
                          const std::vector<signal::CountHistogram>& components) {
  const HistStack s = stack_histograms(observed, components);
  const auto m = static_cast<Eigen::Index>(components.size());
  const double total = observed.total_bins > 0 ? static_cast<double>(observed.total_bins) : 1.0;

  Eigen::VectorXd w = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  for (int iter = 0; iter < 10000; ++iter) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
    double mass = 0.0;
    for (Eigen::Index n = 0; n < s.y.size(); ++n) {
      const double cn = s.y(n) * total;
      if (cn <= 0.0) continue;
      const Eigen::VectorXd num = w.cwiseProduct(s.a.row(n).transpose());
      const double denom = num.sum();
      if (denom <= 0.0) continue;  // count impossible under the mixture
      acc += cn * num / denom;
      mass += cn;
    }
    if (mass <= 0.0) throw std::runtime_error("fit_mixture_ml: no usable counts");
    Eigen::VectorXd w_next = acc / mass;
    const double delta = (w_next - w).lpNorm<Eigen::Infinity>();
    w = std::move(w_next);
    if (delta < 1e-12) break;
  }
  MixtureFit fit;
  fit.weights = w;
  fit.residual = (s.y - s.a * w).norm();
  fit.identifiable = components_identifiable(s.a);
  return fit;
}

Eigen::MatrixXd RateSet::rate_matrix() const {
  if (kind == Kind::one_atom) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(2, 2);
    r(1, 0) = r10;
    r(0, 1) = r01;
    return r;
  }
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(3, 3);
  r(0, 1) = 2.0 * r_rep;
  r(1, 2) = r_rep;
  r(1, 0) = r10;
  r(2, 1) = r21;
  return r;
}

int RateSet::n_states() const { return kind == Kind::one_atom ? 2 : 3; }

RateSet decompose_rates(double total, const MixtureFit& weights) {
  if (total <= 0.0) throw std::domain_error("decompose_rates: total rate must be positive");
  if (weights.weights.size() != 2)
    throw std::invalid_argument("decompose_rates: one-atom decomposition needs 2 weights");
  RateSet rs;
  rs.kind = RateSet::Kind::one_atom;
  rs.r10 = weights.weights(0) * total;
  rs.r01 = weights.weights(1) * total;
  return rs;
}

namespace {

// p(t)^T = p(0)^T V exp(Lambda t) V^-1 on the given grid; falls back to the
// scaling-and-squaring propagator when the eigenbasis is ill-conditioned.
Eigen::MatrixXd generator_curves(const Eigen::MatrixXd& gen, const Eigen::VectorXd& initial,
                                 const std::vector<double>& times, bool& fallback) {
  const Eigen::Index n = gen.rows();
  Eigen::MatrixXd probs(static_cast<Eigen::Index>(times.size()), n);
  Eigen::EigenSolver<Eigen::MatrixXd> es(gen);
  bool ok = es.info() == Eigen::Success;
  Eigen::MatrixXcd v, vinv;
  if (ok) {
    v = es.eigenvectors();
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(v);
    ok = lu.isInvertible() && lu.rcond() > 1e-12;
    if (ok) vinv = lu.inverse();
  }
  fallback = !ok;
  if (ok) {
    const Eigen::VectorXcd lambda = es.eigenvalues();
    const Eigen::RowVectorXcd c = initial.cast<std::complex<double>>().transpose() * v;
    for (std::size_t i = 0; i < times.size(); ++i) {
      Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(n);
      for (Eigen::Index k = 0; k < n; ++k)
        row += c(k) * std::exp(lambda(k) * times[i]) * vinv.row(k);
      probs.row(static_cast<Eigen::Index>(i)) = row.real();
    }
  } else {
    for (std::size_t i = 0; i < times.size(); ++i) {
      const Eigen::MatrixXd prop = markov::propagator(gen, times[i]);
      probs.row(static_cast<Eigen::Index>(i)) =
          (prop.transpose() * initial).transpose();
    }
  }
  return probs;
}

}  // namespace

ThreeStateCurves solve_three_state(const RateSet& rates, const Eigen::VectorXd& initial,
                                   const std::vector<double>& times) {
  if (rates.kind != RateSet::Kind::two_atom)
    throw std::invalid_argument("solve_three_state: two-atom RateSet required");
  if (initial.size() != 3 || initial.minCoeff() < 0.0 ||
      std::abs(initial.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("solve_three_state: initial must be a 3-state probability vector");
  for (double t : times)
    if (t < 0.0) throw std::domain_error("solve_three_state: negative time");
  ThreeStateCurves out;
  out.times = times;
  out.probs = generator_curves(markov::generator(rates.rate_matrix()), initial, times,
                               out.series_fallback);
  return out;
}

namespace {

Eigen::VectorXd rates_as_vector(const RateSet& rs) {
  if (rs.kind == RateSet::Kind::one_atom) {
    Eigen::VectorXd v(2);
    v << rs.r10, rs.r01;
    return v;
  }
  Eigen::VectorXd v(3);
  v << rs.r10, rs.r21, rs.r_rep;
  return v;
}

RateSet rates_from_vector(RateSet::Kind kind, const Eigen::VectorXd& v) {
  RateSet rs;
  rs.kind = kind;
  if (kind == RateSet::Kind::one_atom) {
    rs.r10 = v(0);
    rs.r01 = v(1);
  } else {
    rs.r10 = v(0);
    rs.r21 = v(1);
    rs.r_rep = v(2);
  }
  return rs;
}

}  // namespace

RateFitResult iterative_rate_fit(const std::vector<signal::BinnedTrace>& traces,
                                 const std::vector<filter::EmissionModel>& emissions,
                                 const RateSet& initial_guess, double tol, int max_iter) {
  if (traces.empty()) throw std::invalid_argument("iterative_rate_fit: no traces");
  if (rates_as_vector(initial_guess).minCoeff() <= 0.0)
    throw std::domain_error("iterative_rate_fit: initial guess must be positive");
  const int n = initial_guess.n_states();
  if (emissions.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("iterative_rate_fit: one emission model per state required");

  const double bin_width = traces.front().bin_width;
  std::size_t n_bins = traces.front().counts.size();
  for (const auto& trace : traces) {
    if (std::abs(trace.bin_width - bin_width) > 1e-12 * bin_width)
      throw std::invalid_argument("iterative_rate_fit: traces must share one bin width");
    n_bins = std::min(n_bins, trace.counts.size());
  }
  if (n_bins == 0) throw std::invalid_argument("iterative_rate_fit: empty traces");

  std::vector<double> times(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) times[i] = (static_cast<double>(i) + 0.5) * bin_width;
  Eigen::VectorXd start = Eigen::VectorXd::Zero(n);
  start(n - 1) = 1.0;  // prepared with every atom coupled

  RateFitResult out;
  RateSet current = initial_guess;
  const auto kind = initial_guess.kind;
  for (int iter = 0; iter < max_iter; ++iter) {
    filter::FilterConfig cfg;
    cfg.rates = current.rate_matrix();
    cfg.emissions = emissions;
    cfg.initial = start;
    cfg.predict_mode = filter::PredictMode::exact;

    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_bins), n);
    for (const auto& trace : traces) {
      const auto res = filter::run_filter(trace, cfg);
      avg += res.trace.probs.topRows(static_cast<Eigen::Index>(n_bins));
    }
    avg /= static_cast<double>(traces.size());

    auto residual = [&](const Eigen::VectorXd& theta) {
      const RateSet rs = rates_from_vector(kind, theta.array().exp().matrix());
      bool fb = false;
      const Eigen::MatrixXd model =
          generator_curves(markov::generator(rs.rate_matrix()), start, times, fb);
      Eigen::MatrixXd diff = model - avg;
      return Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(diff.data(), diff.size()));
    };
    Eigen::VectorXd theta0 = rates_as_vector(current).array().log().matrix();
    optim::LmOptions opts;
    opts.tol = 1e-10;
    const auto lm = optim::levenberg_marquardt(residual, theta0, opts);
    const RateSet next = rates_from_vector(kind, lm.params.array().exp().matrix());

    const Eigen::VectorXd prev_v = rates_as_vector(current);
    const Eigen::VectorXd next_v = rates_as_vector(next);
    double rel_change = 0.0;
    for (Eigen::Index k = 0; k < prev_v.size(); ++k)
      rel_change = std::max(rel_change,
                            std::abs(next_v(k) - prev_v(k)) / std::max(prev_v(k), 1e-12));
    out.history.push_back({next, lm.residual_norm, rel_change});
    current = next;
    if (rel_change < tol) {
      out.converged = true;
      break;
    }
    // Period-2 cycle: the new iterate matches the one two steps back.
    if (out.history.size() >= 3) {
      const Eigen::VectorXd back2 = rates_as_vector(out.history[out.history.size() - 3].rates);
      double cycle = 0.0;
      for (Eigen::Index k = 0; k < next_v.size(); ++k)
        cycle = std::max(cycle, std::abs(next_v(k) - back2(k)) / std::max(back2(k), 1e-12));
      if (cycle < tol) {
        out.oscillating = true;
        break;
      }
    }
  }
  out.iterations = static_cast<int>(out.history.size());
  if (out.converged) {
    out.rates = current;
  } else {
    const auto best = std::min_element(out.history.begin(), out.history.end(),
                                       [](const RateFitIteration& a, const RateFitIteration& b) {
                                         return a.residual < b.residual;
                                       });
    out.rates = best->rates;
  }
  return out;
}

double predicted_r21(double r10, double t1, double t2) {
  if (t1 <= 0.0) throw std::domain_error("predicted_r21: t1 must be positive");
  return 2.0 * (t2 / t1) * r10;
}

RateSet initial_guess_two_atom(const std::vector<signal::BinnedTrace>& no_repumper_traces,
                               double t1, double t2) {
  const auto avg = signal::ensemble_average(no_repumper_traces);
  std::vector<double> times(avg.counts.size());
  for (std::size_t i = 0; i < times.size(); ++i) times[i] = avg.midpoint(i);
  const auto fit = signal::fit_exponential_decay(times, avg.counts);
  if (fit.degenerate || !(fit.rate > 0.0))
    throw std::runtime_error("initial_guess_two_atom: ensemble decay rate not identifiable");
  RateSet rs;
  rs.kind = RateSet::Kind::two_atom;
  rs.r10 = fit.rate;
  rs.r21 = predicted_r21(fit.rate, t1, t2);
  rs.r_rep = fit.rate;
  return rs;
}

}  // namespace qjump::estimate
