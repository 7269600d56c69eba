#pragma once

// Tweezer power budget and photon-scattering infidelity for ground-state
// qubits. Physical units (SI) are used throughout this header.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "tweezer/bands.hpp"
#include "tweezer/chain.hpp"
#include "tweezer/constants.hpp"
#include "tweezer/error.hpp"

namespace tweezer {

struct Transition {
  double wavelength_nm = 0.0;
  double linewidth = 0.0;  ///< Einstein A coefficient (s^-1)
};

struct SpeciesData {
  std::string name;
  double mass_amu = 0.0;
  std::vector<Transition> transitions;  ///< S -> P lines
  double tweezer_wavelength_nm = 0.0;   ///< default operating wavelength
  std::string source;

  void validate() const {
    detail::require(!name.empty(), "species needs a name");
    detail::require(mass_amu > 0, "species mass must be positive");
    detail::require(!transitions.empty(), "species " + name + " needs at least one transition");
    for (const auto& t : transitions)
      detail::require(t.wavelength_nm > 0 && t.linewidth > 0, "transition data of " + name + " must be positive");
  }
};

struct OpticsConfig {
  double numerical_aperture = 0.7;
  double omega_x = 2.0 * std::numbers::pi * 3e6;  ///< rad/s
  /// Multiply the scattering rate by (omega / omega_j)^3. Off by default,
  /// which reproduces the published power and infidelity table.
  bool frequency_ratio = false;

  void validate() const {
    detail::require(numerical_aperture > 0 && numerical_aperture <= 1.0, "numerical aperture must lie in (0, 1]");
    detail::require(omega_x > 0, "omega_x must be positive");
  }
};

inline double angular_frequency(double wavelength_nm) {
  return 2.0 * std::numbers::pi * si::speed_of_light / (wavelength_nm * 1e-9);
}

/// W0 = 0.41 lambda / NA, in meters.
inline double beam_waist(double wavelength_nm, double na) {
  detail::require(wavelength_nm > 0 && na > 0, "beam waist needs positive wavelength and NA");
  return 0.41 * wavelength_nm * 1e-9 / na;
}

namespace detail {

/// Sum over lines of Gamma_j / (omega_j - omega) + Gamma_j / (omega_j + omega),
/// weighted by the dipole prefactor 3 pi c^2 / (2 omega_j^3).
inline double dipole_coefficient(const SpeciesData& s, double omega) {
  double c = 0.0;
  for (const auto& t : s.transitions) {
    const double wj = angular_frequency(t.wavelength_nm);
    const double wc = si::speed_of_light;
    c += 3.0 * std::numbers::pi * wc * wc / (2.0 * wj * wj * wj) * (t.linewidth / (wj - omega) + t.linewidth / (wj + omega));
  }
  return c;
}

inline void check_off_resonance(const SpeciesData& s, double wavelength_nm) {
  for (const auto& t : s.transitions)
    require(std::abs(wavelength_nm - t.wavelength_nm) > 1e-3,
            s.name + ": tweezer wavelength sits on a resonance");
}

}  // namespace detail

/// Beam power (W) whose Gaussian focus gives a transverse trap frequency
/// nu0 * omega_x: U0 = m omega0^2 W0^2 / 4 and U0 = coeff * I0, I0 = 2P / (pi W0^2).
inline double required_power(const SpeciesData& s, double wavelength_nm, double nu0, const OpticsConfig& o) {
  s.validate();
  o.validate();
  detail::check_off_resonance(s, wavelength_nm);
  detail::require(nu0 > 0, "nu0 must be positive");
  const double coeff = detail::dipole_coefficient(s, angular_frequency(wavelength_nm));
  if (coeff <= 0.0) throw ConfigError(s.name + ": net polarizability is anti-trapping at this wavelength");
  const double w0 = beam_waist(wavelength_nm, o.numerical_aperture);
  const double m = s.mass_amu * si::atomic_mass_unit;
  const double omega0 = nu0 * o.omega_x;
  const double u0 = m * omega0 * omega0 * w0 * w0 / 4.0;
  return u0 / coeff * std::numbers::pi * w0 * w0 / 2.0;
}

/// Peak photon scattering rate (s^-1) at power P, lines summed incoherently.
inline double scattering_rate(const SpeciesData& s, double wavelength_nm, double power, const OpticsConfig& o) {
  const double omega = angular_frequency(wavelength_nm);
  const double w0 = beam_waist(wavelength_nm, o.numerical_aperture);
  const double intensity = 2.0 * power / (std::numbers::pi * w0 * w0);
  double rate = 0.0;
  for (const auto& t : s.transitions) {
    const double wj = angular_frequency(t.wavelength_nm);
    const double a = t.linewidth / (wj - omega) + t.linewidth / (wj + omega);
    const double wc = si::speed_of_light;
    double term = 3.0 * std::numbers::pi * wc * wc / (2.0 * si::hbar * wj * wj * wj) * a * a;
    if (o.frequency_ratio) term *= std::pow(omega / wj, 3);
    rate += term * intensity;
  }
  return rate;
}

/// Gate duration (s) of the flat-band stretch gate: 2 pi / (nu_com - nu_stretch) / omega_x.
inline double flat_band_gate_time(double epsilon, double nu0, double omega_x) {
  const auto [com, stretch] = flat_band_frequencies(epsilon, nu0);
  return 2.0 * std::numbers::pi / (com - stretch) / omega_x;
}

/// delta F_sc = (3/2) Gamma_sc tau at the power that realizes nu0.
inline double scattering_infidelity(const SpeciesData& s, double wavelength_nm, double nu0, double epsilon,
                                    const OpticsConfig& o) {
  detail::require(epsilon > 0 && epsilon < 1, "epsilon must lie in (0, 1)");
  const double p = required_power(s, wavelength_nm, nu0, o);
  return 1.5 * scattering_rate(s, wavelength_nm, p, o) * flat_band_gate_time(epsilon, nu0, o.omega_x);
}

struct FeasibilityRow {
  std::string species;
  double wavelength_nm = 0.0;
  double waist_m = 0.0;
  double power_w = 0.0;
  double deltaF_sc = 0.0;
  double spacing_m = 0.0;
};

inline FeasibilityRow feasibility_row(const SpeciesData& s, double wavelength_nm, double nu0, double epsilon,
                                      const OpticsConfig& o) {
  FeasibilityRow r;
  r.species = s.name;
  r.wavelength_nm = wavelength_nm;
  r.waist_m = beam_waist(wavelength_nm, o.numerical_aperture);
  r.power_w = required_power(s, wavelength_nm, nu0, o);
  r.deltaF_sc = scattering_infidelity(s, wavelength_nm, nu0, epsilon, o);
  r.spacing_m = spacing_for_epsilon(epsilon, s.mass_amu, o.omega_x);
  return r;
}

struct ScanPoint {
  double wavelength_nm = 0.0;
  double power_w = 0.0;
  double deltaF_sc = 0.0;
};

/// Infidelity versus wavelength on [lo, hi], red of every line. Points with
/// anti-trapping polarizability are skipped.
inline std::vector<ScanPoint> wavelength_scan(const SpeciesData& s, double lo_nm, double hi_nm, int points,
                                              double nu0, double epsilon, const OpticsConfig& o) {
  detail::require(points >= 2 && hi_nm > lo_nm, "wavelength scan needs hi > lo and >= 2 points");
  std::vector<ScanPoint> out;
  for (int k = 0; k < points; ++k) {
    const double lam = lo_nm + (hi_nm - lo_nm) * k / (points - 1);
    try {
      ScanPoint pt{lam, required_power(s, lam, nu0, o), 0.0};
      pt.deltaF_sc = scattering_infidelity(s, lam, nu0, epsilon, o);
      out.push_back(pt);
    } catch (const ConfigError&) {
    }
  }
  return out;
}

}  // namespace tweezer
