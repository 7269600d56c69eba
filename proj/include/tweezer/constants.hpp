#pragma once

#include <numbers>

namespace tweezer::si {

// CODATA 2018.
inline constexpr double elementary_charge = 1.602176634e-19;   // C
inline constexpr double vacuum_permittivity = 8.8541878128e-12; // F/m
inline constexpr double speed_of_light = 2.99792458e8;          // m/s
inline constexpr double hbar = 1.054571817e-34;                 // J s
inline constexpr double atomic_mass_unit = 1.66053906660e-27;   // kg

/// e^2 / (4 pi eps0), in J m.
inline constexpr double coulomb_constant_e2 =
    elementary_charge * elementary_charge / (4.0 * std::numbers::pi * vacuum_permittivity);

}  // namespace tweezer::si
