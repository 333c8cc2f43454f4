#include "qjump/physics.hpp"

#include <cmath>
#include <stdexcept>

namespace qjump::physics {

void CavityParams::validate() const {
  if (!(g0 > 0.0) || !(kappa > 0.0) || !(gamma > 0.0) || !(waist > 0.0))
    throw std::domain_error("CavityParams: g0, kappa, gamma, waist must all be > 0");
}

double CavityParams::cooperativity() const {
  validate();
  return g0 * g0 / (2.0 * kappa * gamma);
}

double transmission_one_atom(const CavityParams& p, const DetuningPoint& d) {
  if (!(p.kappa > 0.0) || !(p.gamma > 0.0))
    throw std::domain_error("transmission_one_atom: kappa and gamma must be > 0");
  if (d.g_eff < 0.0)
    throw std::domain_error("transmission_one_atom: g_eff must be >= 0");
  const double g2 = d.g_eff * d.g_eff;
  const double num = p.kappa * p.kappa * (d.delta_ca * d.delta_ca + p.gamma * p.gamma);
  // Denominator written as num + g^2 (2 gamma kappa + g^2): same algebra as
  // (gamma kappa + g^2)^2 + (Delta kappa)^2, and exact at g_eff = 0.
  return num / (num + g2 * (2.0 * p.gamma * p.kappa + g2));
}

double transmission_dispersive(const CavityParams& p, const DetuningPoint& d, int n_atoms) {
  if (n_atoms != 1 && n_atoms != 2)
    throw std::invalid_argument("transmission_dispersive: n_atoms must be 1 or 2");
  if (d.delta_ca == 0.0)
    throw std::domain_error("transmission_dispersive: delta_ca must be nonzero");
  if (!(p.kappa > 0.0))
    throw std::domain_error("transmission_dispersive: kappa must be > 0");
  if (d.g_eff < 0.0)
    throw std::domain_error("transmission_dispersive: g_eff must be >= 0");
  const double x = static_cast<double>(n_atoms) * d.g_eff * d.g_eff /
                   (p.kappa * d.delta_ca);
  return 1.0 / (1.0 + x * x);
}

double level_difference(const CavityParams& p, const DetuningPoint& d) {
  return transmission_dispersive(p, d, 1) - transmission_dispersive(p, d, 2);
}

double coupling_at_offset(const CavityParams& p, double g_center, double dy) {
  if (!(p.waist > 0.0))
    throw std::domain_error("coupling_at_offset: waist must be > 0");
  const double u = dy / p.waist;
  return g_center * std::exp(-u * u);
}

double optimal_offset(const CavityParams& p, double g_center, double delta_ca) {
  if (!(delta_ca > 0.0))
    throw std::domain_error("optimal_offset: delta_ca must be > 0");
  if (!(p.waist > 0.0) || !(p.kappa > 0.0))
    throw std::domain_error("optimal_offset: waist and kappa must be > 0");
  const double arg = std::sqrt(2.0) * g_center * g_center / (delta_ca * p.kappa);
  if (arg <= 1.0) return 0.0;  // the center already maximizes the difference
  return p.waist * std::sqrt(0.5 * std::log(arg));
}

}  // namespace qjump::physics
