#include "qjump/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qjump/rng.hpp"

namespace qjump::simulate {

void JumpProcessSpec::validate() const {
  const auto n = static_cast<Eigen::Index>(states.size());
  if (n == 0) throw std::invalid_argument("JumpProcessSpec: no states");
  if (rates.rows() != n || rates.cols() != n)
    throw std::invalid_argument("JumpProcessSpec: rate matrix shape mismatch");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && rates(i, j) < 0.0)
        throw std::invalid_argument("JumpProcessSpec: negative transition rate");
  if (flux.size() != states.size())
    throw std::invalid_argument("JumpProcessSpec: flux size mismatch");
  for (double f : flux)
    if (f < 0.0) throw std::invalid_argument("JumpProcessSpec: negative flux");
  if (!(duration > 0.0))
    throw std::invalid_argument("JumpProcessSpec: duration must be > 0");
  if (initial.size() != n)
    throw std::invalid_argument("JumpProcessSpec: initial distribution size mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (initial(i) < 0.0)
      throw std::invalid_argument("JumpProcessSpec: negative initial probability");
    sum += initial(i);
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("JumpProcessSpec: initial distribution must sum to 1");
}

int JumpProcessSpec::index_of(StateLabel label) const {
  for (std::size_t i = 0; i < states.size(); ++i)
    if (states[i] == label) return static_cast<int>(i);
  return -1;
}

void JumpProcessSpec::set_initial(StateLabel label) {
  int idx = index_of(label);
  if (idx < 0) throw std::invalid_argument("set_initial: state not in spec");
  initial = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(states.size()));
  initial(idx) = 1.0;
}

int Trajectory::state_at(double t) const {
  int s = initial_state;
  for (const auto& e : events) {
    if (e.time > t) break;
    s = e.state;
  }
  return s;
}

std::vector<double> ClickRecord::click_times() const {
  std::vector<double> times;
  times.reserve(intervals.size());
  double t = 0.0;
  for (double dt : intervals) {
    t += dt;
    times.push_back(t);
  }
  return times;
}

Trajectory sample_trajectory(const JumpProcessSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(spec.states.size());
  std::mt19937_64 eng(seed);

  Trajectory traj;
  traj.states = spec.states;
  traj.duration = spec.duration;

  // Initial state: categorical draw from the initial distribution.
  std::vector<double> init(spec.initial.data(), spec.initial.data() + n);
  traj.initial_state = static_cast<int>(rng::categorical(eng, init));

  std::vector<double> out_rates(static_cast<std::size_t>(n));
  int current = traj.initial_state;
  double t = 0.0;
  while (true) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      double r = (j == current) ? 0.0 : spec.rates(current, j);
      out_rates[static_cast<std::size_t>(j)] = r;
      total += r;
    }
    if (total <= 0.0) break;  // absorbing state: hold for the rest of the run
    t += rng::exponential(eng, total);
    if (t >= spec.duration) break;
    current = static_cast<int>(rng::categorical(eng, out_rates));
    traj.events.push_back({t, current});
  }
  return traj;
}

ClickRecord emit_clicks(const Trajectory& traj, const std::vector<double>& flux,
                        std::uint64_t seed) {
  if (flux.size() < traj.states.size())
    throw std::invalid_argument("emit_clicks: flux missing for some states");
  for (double f : flux)
    if (f < 0.0) throw std::invalid_argument("emit_clicks: negative flux");

  std::mt19937_64 eng(seed);
  std::vector<double> times;
  traj.for_each_segment([&](double t0, double t1, int state) {
    const double f = flux[static_cast<std::size_t>(state)];
    if (!(f > 0.0)) return;
    double t = t0;
    while (true) {
      t += rng::exponential(eng, f);
      if (t >= t1) break;
      times.push_back(t);
    }
  });

  ClickRecord record;
  record.duration = traj.duration;
  record.intervals.reserve(times.size());
  double prev = 0.0;
  for (double t : times) {
    record.intervals.push_back(t - prev);
    prev = t;
  }
  return record;
}

JumpProcessSpec make_one_atom_spec(double r10, double r01, double flux0,
                                   double flux1, double duration) {
  if (r10 < 0.0 || r01 < 0.0)
    throw std::invalid_argument("make_one_atom_spec: rates must be >= 0");
  if (flux0 < 0.0 || flux1 < 0.0)
    throw std::invalid_argument("make_one_atom_spec: fluxes must be >= 0");
  JumpProcessSpec spec;
  spec.states = {{0, 0}, {1, 0}};
  spec.rates = Eigen::MatrixXd::Zero(2, 2);
  spec.rates(0, 1) = r01;
  spec.rates(1, 0) = r10;
  spec.flux = {flux0, flux1};
  spec.duration = duration;
  spec.set_initial({1, 0});  // the atom starts in the coupled state
  if (flux0 <= flux1)
    spec.warnings.push_back(
        "flux0 <= flux1: the coupled state does not lower the count rate, "
        "telegraph steps will not be visible");
  return spec;
}

JumpProcessSpec make_two_atom_spec(double r10, double r21, double r_rep,
                                   double flux0, double flux1, double flux2,
                                   double duration) {
  if (r10 < 0.0 || r21 < 0.0 || r_rep < 0.0)
    throw std::invalid_argument("make_two_atom_spec: rates must be >= 0");
  if (flux0 < 0.0 || flux1 < 0.0 || flux2 < 0.0)
    throw std::invalid_argument("make_two_atom_spec: fluxes must be >= 0");
  JumpProcessSpec spec;
  spec.states = {{0, 0}, {1, 0}, {2, 0}};
  spec.rates = Eigen::MatrixXd::Zero(3, 3);
  // Repumping acts per atom: two candidates in alpha=0, one in alpha=1.
  spec.rates(0, 1) = 2.0 * r_rep;
  spec.rates(1, 2) = r_rep;
  spec.rates(1, 0) = r10;
  spec.rates(2, 1) = r21;
  spec.flux = {flux0, flux1, flux2};
  spec.duration = duration;
  spec.set_initial({2, 0});  // both atoms prepared in the coupled state
  return spec;
}

JumpProcessSpec split_state(const JumpProcessSpec& spec, int target_alpha,
                            const std::vector<double>& site_fluxes,
                            double hop_rate) {
  spec.validate();
  if (site_fluxes.empty())
    throw std::invalid_argument("split_state: need at least one site flux");
  for (double f : site_fluxes)
    if (f < 0.0) throw std::invalid_argument("split_state: negative site flux");
  if (hop_rate < 0.0)
    throw std::invalid_argument("split_state: negative hop rate");
  const int target = spec.index_of({target_alpha, 0});
  if (target < 0)
    throw std::invalid_argument("split_state: target_alpha has no state in spec");

  const int k = static_cast<int>(site_fluxes.size());
  const auto n_old = static_cast<int>(spec.states.size());
  const int n_new = n_old - 1 + k;

  // New state table: target expanded in place into sites 0..k-1.
  JumpProcessSpec out;
  out.duration = spec.duration;
  out.warnings = spec.warnings;
  out.states.reserve(static_cast<std::size_t>(n_new));
  out.flux.reserve(static_cast<std::size_t>(n_new));
  std::vector<int> map_old(static_cast<std::size_t>(n_old), -1);  // old -> new (site 0 for target)
  for (int i = 0; i < n_old; ++i) {
    if (i == target) {
      map_old[static_cast<std::size_t>(i)] = static_cast<int>(out.states.size());
      for (int s = 0; s < k; ++s) {
        out.states.push_back({target_alpha, s});
        out.flux.push_back(site_fluxes[static_cast<std::size_t>(s)]);
      }
    } else {
      map_old[static_cast<std::size_t>(i)] = static_cast<int>(out.states.size());
      out.states.push_back(spec.states[static_cast<std::size_t>(i)]);
      out.flux.push_back(spec.flux[static_cast<std::size_t>(i)]);
    }
  }

  out.rates = Eigen::MatrixXd::Zero(n_new, n_new);
  const int base = map_old[static_cast<std::size_t>(target)];
  for (int i = 0; i < n_old; ++i) {
    for (int j = 0; j < n_old; ++j) {
      if (i == j) continue;
      const double r = spec.rates(i, j);
      if (r == 0.0) continue;
      if (i == target) {
        // Out of the group: every site exits at the full rate, so the
        // dwell time in the group is unchanged.
        for (int s = 0; s < k; ++s)
          out.rates(base + s, map_old[static_cast<std::size_t>(j)]) = r;
      } else if (j == target) {
        // Into the group: split evenly so the total inflow is unchanged.
        for (int s = 0; s < k; ++s)
          out.rates(map_old[static_cast<std::size_t>(i)], base + s) = r / k;
      } else {
        out.rates(map_old[static_cast<std::size_t>(i)], map_old[static_cast<std::size_t>(j)]) = r;
      }
    }
  }
  // Nearest-neighbor hopping along the site chain.
  for (int s = 0; s + 1 < k; ++s) {
    out.rates(base + s, base + s + 1) = hop_rate;
    out.rates(base + s + 1, base + s) = hop_rate;
  }

  out.initial = Eigen::VectorXd::Zero(n_new);
  for (int i = 0; i < n_old; ++i) {
    const double p = spec.initial(i);
    if (i == target) {
      for (int s = 0; s < k; ++s) out.initial(base + s) = p / k;
    } else {
      out.initial(map_old[static_cast<std::size_t>(i)]) = p;
    }
  }
  return out;
}

}  // namespace qjump::simulate
