#pragma once

// Laser pulse -> atom burst. Surface heating uses the 1-D constant-flux
// conduction peak; emission is Hertz-Knudsen with one free yield scale.

#include <cmath>
#include <cstdint>
#include <utility>

#include "ablatron/config.hpp"
#include "ablatron/error.hpp"
#include "ablatron/rng.hpp"
#include "ablatron/units.hpp"

namespace ablatron {

enum class Regime { Thermal, Plasma };

inline const char* to_string(Regime r) { return r == Regime::Thermal ? "thermal" : "plasma"; }

struct PulseSpec {
    double energy = 0.0;     // J
    double duration = 0.0;   // s
    double spot_area = 0.0;  // m^2
    double fluence = 0.0;    // J/m^2, peak
    double time = 0.0;       // s
};

struct AtomBurst {
    std::uint64_t n_atoms = 0;
    double emission_time = 0.0;
    double surface_temperature = 0.0;
    double ground_fraction = 1.0;
    double rydberg_fraction = 0.0;
    Regime regime = Regime::Thermal;
};

struct TargetState {
    double removed_depth = 0.0;         // m, evaporative removal over the spot
    double contaminant_coverage = 0.0;  // fraction of the dithered area
    std::uint64_t pulses_fired = 0;
    std::uint64_t atoms_emitted = 0;
};

inline TargetState initial_target(const TargetParams& p) {
    TargetState s;
    s.contaminant_coverage = p.initial_contaminant_coverage;
    return s;
}

/// Pulse at the configured operating point.
inline PulseSpec make_pulse(const AblationLaserSpec& laser, double fluence, double time) {
    PulseSpec p;
    p.fluence = fluence;
    p.energy = energy_from_fluence(laser, fluence);
    p.duration = laser.pulse_duration;
    p.spot_area = spot_area(laser);
    p.time = time;
    return p;
}

/// Plasma iff fluence strictly exceeds the threshold.
inline Regime classify_regime(double fluence, double threshold = 600.0 * units::mJ_per_cm2) {
    return fluence > threshold ? Regime::Plasma : Regime::Thermal;
}

inline double surface_temperature(const PulseSpec& pulse, const SpeciesData& species, double ambient) {
    const double absorbed = 2.0 * (1.0 - species.reflectivity_1064) * pulse.fluence;
    const double effusivity = std::sqrt(constants::pi * species.density * species.specific_heat *
                                        species.thermal_conductivity * pulse.duration);
    return ambient + absorbed / effusivity;
}

/// Abundance-weighted atomic mass.
inline double mean_mass(const SpeciesData& species) {
    double m = 0.0;
    for (const auto& iso : species.isotopes) m += iso.mass * iso.natural_abundance;
    return m;
}

/// Hertz-Knudsen emitted atom count (expectation, not rounded).
inline double atoms_per_pulse(double temperature, double area, double effective_time, const SpeciesData& species,
                              double yield_scale) {
    const double p_pa = species.vapor_pressure.at(temperature) * units::mbar;
    const double m = mean_mass(species);
    const double flux = p_pa / std::sqrt(2.0 * constants::pi * m * constants::boltzmann * temperature);
    return yield_scale * area * effective_time * flux;
}

inline bool in_gate(const std::vector<GateInterval>& gates, double t) {
    for (const auto& g : gates)
        if (t >= g.on_start && t < g.on_end) return true;
    return false;
}

namespace detail {

inline TargetState advance_target(TargetState s, std::uint64_t pulses, std::uint64_t atoms, const RunConfig& cfg,
                                  const PulseSpec& pulse) {
    const double m = mean_mass(cfg.species);
    s.removed_depth += static_cast<double>(atoms) * m / (cfg.species.density * pulse.spot_area);
    s.contaminant_coverage *= std::pow(1.0 - cfg.target.contaminant_decay_per_pulse, static_cast<double>(pulses));
    s.pulses_fired += pulses;
    s.atoms_emitted += atoms;
    return s;
}

}  // namespace detail

struct BurstResult {
    AtomBurst burst;
    TargetState state;
};

/// One pulse. Counts are Poisson around the Hertz-Knudsen mean, or the rounded
/// mean in mean-field mode.
inline BurstResult emit_burst(const PulseSpec& pulse, const TargetState& state, const RunConfig& cfg, Engine& rng) {
    if (!in_gate(cfg.effective_gates(), pulse.time))
        throw Error(ErrorKind::PulseOutsideGate, "gating",
                    "pulse at t=" + std::to_string(pulse.time) + " s is outside every on-interval");
    AtomBurst b;
    b.emission_time = pulse.time;
    b.regime = classify_regime(pulse.fluence, cfg.ablation.plasma_threshold);
    b.surface_temperature = surface_temperature(pulse, cfg.species, cfg.ablation.ambient_temperature);
    b.rydberg_fraction = b.regime == Regime::Plasma ? cfg.ablation.rydberg_fraction : 0.0;
    b.ground_fraction = 1.0 - b.rydberg_fraction;
    const double mean =
        atoms_per_pulse(b.surface_temperature, pulse.spot_area, pulse.duration, cfg.species, cfg.ablation.yield_scale);
    b.n_atoms = cfg.ablation.mean_field ? static_cast<std::uint64_t>(std::llround(mean)) : sample_poisson(rng, mean);
    return {b, detail::advance_target(state, 1, b.n_atoms, cfg, pulse)};
}

/// n identical pulses at once. The total of n independent Poisson draws is a
/// single Poisson draw with n times the mean, so this is exact in distribution.
struct TrainResult {
    std::uint64_t n_atoms = 0;
    TargetState state;
};

inline TrainResult emit_pulse_train(const PulseSpec& pulse, std::uint64_t n_pulses, const TargetState& state,
                                    const RunConfig& cfg, Engine& rng, CarryCounter* mean_field = nullptr) {
    if (n_pulses == 0) return {0, state};
    const double temperature = surface_temperature(pulse, cfg.species, cfg.ablation.ambient_temperature);
    const double mean = static_cast<double>(n_pulses) *
                        atoms_per_pulse(temperature, pulse.spot_area, pulse.duration, cfg.species, cfg.ablation.yield_scale);
    const std::uint64_t n = mean_field ? mean_field->take(mean) : sample_poisson(rng, mean);
    return {n, detail::advance_target(state, n_pulses, n, cfg, pulse)};
}

/// Crater depth after n pulses: hinge above threshold plus a bounded
/// sub-threshold churn term.
inline double accumulate_depth(double fluence, double n_pulses, const DepthModel& model) {
    if (n_pulses <= 0.0) return 0.0;
    const double hinge = n_pulses * std::max(0.0, model.slope * (fluence - model.threshold));
    const double churn = model.threshold > 0.0 ? model.melt_churn * std::min(1.0, std::max(0.0, fluence) / model.threshold)
                                               : model.melt_churn;
    return hinge + churn;
}

}  // namespace ablatron
