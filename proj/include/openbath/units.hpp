#pragma once

// Unit conventions: hbar = 1, energies and frequencies in cm^-1, time in fs,
// temperature in K. Public interfaces take these units; conversion to angular
// rates (rad/fs) happens inside the propagators only.

#include <numbers>

#include "openbath/errors.hpp"

namespace openbath {

struct PhysConstants {
    // CODATA 2018: k_B / (h c) = 0.695034800 cm^-1 K^-1
    static constexpr double kB_wavenumber_per_kelvin = 0.695034800;
    // c = 2.99792458e-5 cm/fs, so one cm^-1 corresponds to 2 pi c rad/fs
    static constexpr double speed_of_light_cm_per_fs = 2.99792458e-5;
    static constexpr double angular_rate_per_wavenumber =
        2.0 * std::numbers::pi * speed_of_light_cm_per_fs;
};

// k_B T in cm^-1.
inline double thermal_energy(double temperature_K) {
    if (!(temperature_K > 0.0))
        throw DomainError("thermal_energy: temperature must be positive");
    return PhysConstants::kB_wavenumber_per_kelvin * temperature_K;
}

// cm^-1 -> rad/fs
constexpr double to_angular(double wavenumber) noexcept {
    return wavenumber * PhysConstants::angular_rate_per_wavenumber;
}

// rad/fs -> cm^-1
constexpr double from_angular(double rate) noexcept {
    return rate / PhysConstants::angular_rate_per_wavenumber;
}

} // namespace openbath
