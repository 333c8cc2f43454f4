#pragma once

namespace qjump::physics {

inline constexpr double two_pi = 6.283185307179586476925286766559;

/// Frequencies are stored internally as angular frequencies in rad/s.
/// The CLI and most quoted values use MHz meaning 2*pi*MHz.
inline double mhz_to_angular(double mhz) { return mhz * two_pi * 1.0e6; }
inline double angular_to_mhz(double w) { return w / (two_pi * 1.0e6); }

/// Atom-cavity parameters: coupling, decay rates and mode waist.
struct CavityParams {
  double g0;     // rad/s, nominal maximum coupling
  double kappa;  // rad/s, cavity field decay rate
  double gamma;  // rad/s, atomic dipole decay rate
  double waist;  // m, mode waist w0

  void validate() const;  // throws std::domain_error unless all positive

  /// Single-atom cooperativity C1 = g0^2 / (2 kappa gamma).
  double cooperativity() const;
};

/// Operating point: cavity-atom detuning and effective coupling.
struct DetuningPoint {
  double delta_ca;  // rad/s
  double g_eff;     // rad/s, >= 0
};

/// Normalized transmission for 0, 1, 2 atoms coupled in the bright state.
struct TransmissionLevels {
  double t0 = 1.0;
  double t1 = 1.0;
  double t2 = 1.0;
};

/// Normalized one-atom transmission for a probe resonant with the empty
/// cavity: kappa^2 (Delta^2 + gamma^2) / ((gamma kappa + g^2)^2 + (Delta kappa)^2).
/// Evaluated as num / (num + g^2 (2 gamma kappa + g^2)) so the decoupled-atom
/// value is exactly 1.
double transmission_one_atom(const CavityParams& p, const DetuningPoint& d);

/// Dispersive-limit transmission: 1 / (1 + (n g^2 / (kappa Delta))^2) with
/// n = 1 or 2 atoms. Valid for Delta_ca >> gamma; not enforced.
double transmission_dispersive(const CavityParams& p, const DetuningPoint& d, int n_atoms);

/// Dispersive level difference T1 - T2. Maximal (1/3) at g^2/(kappa Delta) = 1/sqrt(2).
double level_difference(const CavityParams& p, const DetuningPoint& d);

/// Gaussian-mode coupling at transverse displacement dy from the mode center:
/// g_center * exp(-dy^2 / w0^2).
double coupling_at_offset(const CavityParams& p, double g_center, double dy);

/// Displacement that maximizes the dispersive level difference:
/// w0 * sqrt(ln(sqrt(2) g_center^2 / (Delta kappa)) / 2). Returns 0 when the
/// log argument is <= 1, in which case the center is already optimal.
double optimal_offset(const CavityParams& p, double g_center, double delta_ca);

}  // namespace qjump::physics
