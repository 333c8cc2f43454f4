#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qjump::simulate {

/// Hidden-state label: alpha = number of atoms in the coupled hyperfine
/// state, site = positional sublabel (0 when the state is not split).
struct StateLabel {
  int alpha = 0;
  int site = 0;
  auto operator<=>(const StateLabel&) const = default;
};

/// Continuous-time jump-process description: states, transition rates,
/// per-state detected photon flux, duration and initial distribution.
struct JumpProcessSpec {
  std::vector<StateLabel> states;
  Eigen::MatrixXd rates;    // (i,j): rate i -> j in 1/s; diagonal ignored
  std::vector<double> flux; // detected counts per second, one per state
  double duration = 0.0;    // s
  Eigen::VectorXd initial;  // probability vector over states
  std::vector<std::string> warnings;  // non-fatal diagnostics from builders

  void validate() const;  // throws std::invalid_argument on violations
  int index_of(StateLabel label) const;  // -1 when absent
  void set_initial(StateLabel label);    // delta distribution on one state
};

struct JumpEvent {
  double time = 0.0;  // s
  int state = 0;      // index into the state table
};

/// One realization of the hidden process. Events carry the state entered at
/// each jump time; between events the state is constant.
struct Trajectory {
  std::vector<StateLabel> states;  // state table copied from the spec
  int initial_state = 0;
  double duration = 0.0;
  std::vector<JumpEvent> events;   // strictly increasing times in (0, duration)

  int state_at(double t) const;

  /// Visit constant-state segments in order: f(t_begin, t_end, state_index).
  template <class F>
  void for_each_segment(F&& f) const {
    double t = 0.0;
    int s = initial_state;
    for (const auto& e : events) {
      f(t, e.time, s);
      t = e.time;
      s = e.state;
    }
    f(t, duration, s);
  }
};

/// Raw detector output: photon inter-arrival times. The first interval is
/// measured from t = 0.
struct ClickRecord {
  std::vector<double> intervals;  // s, each > 0, cumulative sum <= duration
  double duration = 0.0;          // s

  std::vector<double> click_times() const;  // absolute times, ascending
};

/// Sample one trajectory with exact exponential holding times and categorical
/// jump choices (Gillespie). States with zero total exit rate simply hold.
/// Deterministic for a fixed (spec, seed).
Trajectory sample_trajectory(const JumpProcessSpec& spec, std::uint64_t seed);

/// Generate detector clicks conditioned on a trajectory: within each
/// constant-state segment the clicks form a Poisson process with the state's
/// flux. flux is indexed like the trajectory's state table.
ClickRecord emit_clicks(const Trajectory& traj, const std::vector<double>& flux,
                        std::uint64_t seed);

/// Two-state telegraph spec, states alpha = 0, 1, prepared in alpha = 1.
/// Adds a warning (no rejection) when flux0 <= flux1, which makes the
/// telegraph invisible.
JumpProcessSpec make_one_atom_spec(double r10, double r01, double flux0,
                                   double flux1, double duration);

/// Three-state chain 0 <-> 1 <-> 2, prepared in alpha = 2. Repumping enters
/// as rates(0->1) = 2*r_rep and rates(1->2) = r_rep; downward rates are r10
/// and r21.
JumpProcessSpec make_two_atom_spec(double r10, double r21, double r_rep,
                                   double flux0, double flux1, double flux2,
                                   double duration);

/// Replace state (target_alpha, 0) by sites (target_alpha, 0..K-1) with the
/// given per-site fluxes and uniform nearest-neighbor hopping. Incoming
/// external rates are divided evenly over the sites and outgoing rates are
/// copied, so total in/out rates are preserved.
JumpProcessSpec split_state(const JumpProcessSpec& spec, int target_alpha,
                            const std::vector<double>& site_fluxes,
                            double hop_rate);

}  // namespace qjump::simulate
