#pragma once

// Target -> trap transport: geometric skimmer acceptance, effusive velocities
// and time-of-flight arrival profiles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ablatron/ablation.hpp"
#include "ablatron/config.hpp"
#include "ablatron/rng.hpp"

namespace ablatron {

/// Fraction of a Lambertian emitter's atoms that pass the skimmer stack,
/// collapsed to one far-field aperture.
inline double acceptance_fraction(const BeamGeometry& g) {
    return g.aperture_width * g.aperture_height * std::cos(g.emission_axis_tilt) /
           (constants::pi * g.target_trap_distance * g.target_trap_distance);
}

/// sqrt(2 kT / m), the scale of the effusive distribution.
inline double thermal_velocity_scale(double temperature, double mass) {
    return std::sqrt(2.0 * constants::boltzmann * temperature / mass);
}

/// Mean of the flux-weighted density v^3 exp(-m v^2 / 2kT).
inline double mean_flux_velocity(double temperature, double mass) {
    return 0.75 * std::sqrt(constants::pi) * thermal_velocity_scale(temperature, mass);
}

/// Draw from f(v) ~ v^3 exp(-m v^2 / 2kT). With u = m v^2 / 2kT the density is
/// u e^{-u}, a Gamma(2, 1), i.e. a sum of two unit exponentials.
inline double sample_velocity(double temperature, double mass, Engine& rng) {
    const double u = -std::log1p(-uniform01(rng)) - std::log1p(-uniform01(rng));
    return thermal_velocity_scale(temperature, mass) * std::sqrt(u);
}

inline double sample_velocity(double temperature, const SpeciesData& species, Engine& rng) {
    return sample_velocity(temperature, mean_mass(species), rng);
}

struct ArrivalBin {
    double time = 0.0;          // bin start
    double flux = 0.0;          // atoms/s
    double mean_velocity = 0.0; // m/s, 0 for empty bins
};

struct ArrivalProfile {
    double emission_time = 0.0;
    std::uint64_t n_emitted = 0;
    std::uint64_t n_accepted = 0;
    std::uint64_t n_rejected = 0;
    std::vector<double> arrival_times;  // per accepted atom, sorted
    std::vector<double> velocities;     // same order as arrival_times
    std::vector<ArrivalBin> bins;

    double mean_delay() const {
        if (arrival_times.empty()) return 0.0;
        double s = 0.0;
        for (double t : arrival_times) s += t - emission_time;
        return s / static_cast<double>(arrival_times.size());
    }
};

struct ArrivalOptions {
    double bin_width = 10e-6;
    std::optional<double> velocity_override;
};

inline ArrivalProfile arrival_profile(const AtomBurst& burst, const BeamGeometry& geometry, const SpeciesData& species,
                                      Engine& rng, const ArrivalOptions& opts = {}) {
    ArrivalProfile prof;
    prof.emission_time = burst.emission_time;
    prof.n_emitted = burst.n_atoms;
    prof.n_accepted = sample_binomial(rng, burst.n_atoms, acceptance_fraction(geometry));
    prof.n_rejected = prof.n_emitted - prof.n_accepted;
    if (prof.n_accepted == 0) return prof;

    const double mass = mean_mass(species);
    std::vector<std::pair<double, double>> atoms;
    atoms.reserve(prof.n_accepted);
    for (std::uint64_t i = 0; i < prof.n_accepted; ++i) {
        const double v = opts.velocity_override ? *opts.velocity_override
                                                : sample_velocity(burst.surface_temperature, mass, rng);
        atoms.emplace_back(burst.emission_time + geometry.target_trap_distance / v, v);
    }
    std::sort(atoms.begin(), atoms.end());
    for (const auto& [t, v] : atoms) {
        prof.arrival_times.push_back(t);
        prof.velocities.push_back(v);
    }

    const double t0 = atoms.front().first;
    const auto n_bins = static_cast<std::size_t>((atoms.back().first - t0) / opts.bin_width) + 1;
    prof.bins.resize(n_bins);
    std::vector<double> vsum(n_bins, 0.0);
    std::vector<std::uint64_t> count(n_bins, 0);
    for (const auto& [t, v] : atoms) {
        auto k = std::min(n_bins - 1, static_cast<std::size_t>((t - t0) / opts.bin_width));
        ++count[k];
        vsum[k] += v;
    }
    for (std::size_t k = 0; k < n_bins; ++k) {
        prof.bins[k].time = t0 + static_cast<double>(k) * opts.bin_width;
        prof.bins[k].flux = static_cast<double>(count[k]) / opts.bin_width;
        prof.bins[k].mean_velocity = count[k] ? vsum[k] / static_cast<double>(count[k]) : 0.0;
    }
    return prof;
}

}  // namespace ablatron
