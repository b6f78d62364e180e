#pragma once

// Run configuration: species data, laser/trap/geometry settings and the
// validation rules that every config document must satisfy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ablatron/error.hpp"
#include "ablatron/units.hpp"

namespace ablatron {

struct Isotope {
    std::string name;
    double mass = 0.0;               // kg
    double natural_abundance = 0.0;  // fraction
    double isotope_shift_272 = 0.0;  // Hz, relative to the reference isotope
    bool operator==(const Isotope&) const = default;
};

/// log10(P[mbar]) = a - b / T[K]
struct VaporPressure {
    double a = 0.0;
    double b = 0.0;
    double at(double temperature) const { return std::pow(10.0, a - b / temperature); }
    bool operator==(const VaporPressure&) const = default;
};

struct SpeciesData {
    std::vector<Isotope> isotopes;
    double ionization_potential = 0.0;  // eV
    // Named levels in eV above the neutral ground state. ion_* levels sit at
    // ionization_potential + ionic excitation.
    std::map<std::string, double> level_energies;
    VaporPressure vapor_pressure;
    double density = 0.0;               // kg/m^3
    double specific_heat = 0.0;         // J/(kg K)
    double thermal_conductivity = 0.0;  // W/(m K)
    double reflectivity_1064 = 0.0;
    bool operator==(const SpeciesData&) const = default;

    double level(const std::string& name) const {
        auto it = level_energies.find(name);
        if (it == level_energies.end()) throw Error(ErrorKind::UnknownTransition, name, "no such level");
        return it->second;
    }
    std::size_t isotope_index(std::string_view name) const {
        for (std::size_t i = 0; i < isotopes.size(); ++i)
            if (isotopes[i].name == name) return i;
        throw Error(ErrorKind::UnknownIsotope, name, "isotope not in species table");
    }
};

/// Calcium defaults. Level energies from the NIST atomic spectra tables; the
/// 272 nm isotope shifts are stand-ins scaled from the 423 nm line, and the
/// vapor-pressure pair is a two-term fit to solid Ca near 400 K.
inline SpeciesData calcium() {
    const double u = constants::atomic_mass_unit;
    SpeciesData s;
    s.isotopes = {
        {"40Ca", 39.962590863 * u, 0.96941, 0.0},
        {"42Ca", 41.95861783 * u, 0.00647, 393.1e6},
        {"43Ca", 42.95876644 * u, 0.00135, 611.8e6},
        {"44Ca", 43.95548156 * u, 0.02086, 773.8e6},
        {"46Ca", 45.953689 * u, 0.00004, 1159.8e6},
        {"48Ca", 47.95252276 * u, 0.00187, 1513.0e6},
    };
    s.ionization_potential = 6.11316;
    s.level_energies = {
        {"ground", 0.0},
        {"resonant_272_upper", 4.55412},
        {"metastable_1D2", 2.70902},
        {"ion_S12", 6.11316},
        {"ion_P12", 6.11316 + 3.12333},
        {"ion_D32", 6.11316 + 1.69241},
    };
    s.vapor_pressure = {8.86, 9270.0};
    s.density = 1550.0;
    s.specific_heat = 647.0;
    s.thermal_conductivity = 200.0;
    s.reflectivity_1064 = 0.9;
    return s;
}

struct AblationLaserSpec {
    double wavelength = 1064e-9;
    double max_pulse_energy = 80e-6;
    double knee_rate = 3e3;
    double inverse_rate = 15e3;
    double max_rep_rate = 200e3;
    double pulse_duration = 40e-9;
    double waist = 75e-6;
    double incidence_angle = 30.0 * units::degree;
    double dither_area = 1e-6;
    bool operator==(const AblationLaserSpec&) const = default;
};

/// Operating point and source model of the ablation run.
struct AblationSettings {
    double rep_rate = 25e3;                      // Hz
    double fluence = 240.0 * units::mJ_per_cm2;  // J/m^2; 0 means "maximum energy at rep_rate"
    double plasma_threshold = 600.0 * units::mJ_per_cm2;
    double yield_scale = 1.0;
    double rydberg_fraction = 0.0;  // f_R, only used in the plasma regime
    double ambient_temperature = 293.0;
    bool mean_field = false;
    bool operator==(const AblationSettings&) const = default;
};

struct DepthModel {
    double threshold = 600.0 * units::mJ_per_cm2;  // J/m^2
    double slope = 2.5e-15;                        // m per pulse per J/m^2 above threshold
    double melt_churn = 0.0;                       // m, bounded sub-threshold term
    bool operator==(const DepthModel&) const = default;
};

struct TargetParams {
    double initial_contaminant_coverage = 0.0;
    double contaminant_decay_per_pulse = 1e-5;
    DepthModel depth;
    bool operator==(const TargetParams&) const = default;
};

struct IonLaserSpec {
    double wavelength = 0.0;
    double power = 0.0;
    double waist_at_trap = 0.0;
    double detuning = 0.0;  // Hz
    double linewidth = 0.0; // Hz
    bool operator==(const IonLaserSpec&) const = default;
};

inline IonLaserSpec default_pi_laser() {
    // Detuning compensates the mean Doppler shift of the 12 degree path at the
    // 240 mJ/cm^2 surface temperature.
    return {272e-9, 15e-3, 160e-6, -4.1e8, 1e6};
}
inline IonLaserSpec default_cooling_laser() { return {396.96e-9, 1e-3, 1e-3, -10e6, 20.7e6}; }
inline IonLaserSpec default_repumper() { return {866.45e-9, 1e-3, 1e-3, 0.0, 1.7e6}; }

struct BeamGeometry {
    double target_trap_distance = 0.13;
    double aperture_width = 1.0e-3;
    double aperture_height = 1.5e-3;
    double beam_pi_laser_angle = 12.0 * units::degree;  // deviation from perpendicular
    double emission_axis_tilt = 0.0;
    bool operator==(const BeamGeometry&) const = default;
};

struct PhotoionizationParams {
    double resonant_linewidth = 30e6;            // Hz, FWHM of the 272 nm Lorentzian
    double saturation_intensity = 1e6;           // W/m^2, resonant step
    double ionization_cross_section = 1e-21;     // m^2, second step
    double rydberg_saturation_power = 5e-3;      // W of 397 nm
    double rydberg_max_probability = 0.7;        // per Rydberg atom at P >> P_sat
    double rydberg_binding = 0.1;                // eV
    double autoionization_width = 0.01;          // eV, acceptance window of the broad resonances
    bool operator==(const PhotoionizationParams&) const = default;
};

struct TrapParams {
    double r0 = 2.35e-3;
    double drive_frequency = 4.0e6;
    double rf_amplitude = 200.0;
    double endcap_voltage = 10.0;
    double geometric_efficiency = 1.0;
    double depth_prefactor = 1.0;    // kappa
    double heating_time = 0.2;       // s, tau_heat
    double dark_rate_per_mbar = 2.5e7;
    double dark_dwell = 0.3;         // s
    bool operator==(const TrapParams&) const = default;
};

struct VacuumParams {
    double base_pressure = 4e-10;           // mbar
    double pump_speed = 100.0;              // L/s
    double chamber_volume = 50.0;           // L
    double gas_per_pulse = 1.5e-8 / 23e3;   // mbar L per pulse
    double contaminant_gas_per_pulse = 4e-11;
    bool operator==(const VacuumParams&) const = default;
};

struct DetectorParams {
    int window = 8;               // bins
    double threshold_sigma = 6.0;
    double min_separation = 0.25; // s
    bool operator==(const DetectorParams&) const = default;
};

struct DiagnosticsParams {
    double detection_efficiency = 1e-3;
    double bin_width = 5e-3;
    double background_rate = 200.0;  // counts/s
    double suppressed_fraction = 0.0;
    double ion_count_interval = 0.1;
    DetectorParams detector;
    bool operator==(const DiagnosticsParams&) const = default;
};

/// Optional sinusoidal drift of the photo-ionization laser detuning.
struct DriftParams {
    double amplitude = 0.0;  // Hz
    double period = 60.0;    // s
    bool operator==(const DriftParams&) const = default;
};

enum class ControllerMode { Gated, SingleIonAutoShutter, Continuous };

struct ControllerParams {
    ControllerMode mode = ControllerMode::SingleIonAutoShutter;
    int target_ion_count = 1;
    double shutter_latency = 0.05;
    double settle_time = 1.0;  // s simulated after the shutter closes
    bool operator==(const ControllerParams&) const = default;
};

struct GateInterval {
    double on_start = 0.0;
    double on_end = 0.0;
    bool operator==(const GateInterval&) const = default;
};

struct DepthScanParams {
    std::vector<double> fluences;  // J/m^2
    double n_pulses = 4.6e6;
    bool operator==(const DepthScanParams&) const = default;
};

struct RunConfig {
    std::string name = "run";
    SpeciesData species = calcium();
    AblationLaserSpec ablation_laser;
    AblationSettings ablation;
    TargetParams target;
    IonLaserSpec pi_laser = default_pi_laser();
    IonLaserSpec cooling_laser = default_cooling_laser();
    IonLaserSpec repumper = default_repumper();
    BeamGeometry geometry;
    PhotoionizationParams photoionization;
    TrapParams trap;
    VacuumParams vacuum;
    DiagnosticsParams diagnostics;
    DriftParams drift;
    DepthScanParams depth_scan;
    std::uint64_t rng_seed = 1;
    double time_step = 1e-3;
    double duration = 10.0;
    std::vector<GateInterval> gating_schedule;  // empty: on for the whole run
    std::optional<ControllerParams> controller;
    bool operator==(const RunConfig&) const = default;

    /// The explicit schedule, or a single interval covering the run.
    std::vector<GateInterval> effective_gates() const {
        if (!gating_schedule.empty()) return gating_schedule;
        return {{0.0, duration}};
    }
};

/// hc/lambda in eV.
inline double photon_energy(double wavelength) {
    return units::joule_to_ev(constants::planck * constants::speed_of_light / wavelength);
}

/// Maximum pulse energy the ablation laser delivers at repetition rate f.
/// Flat to the knee, 1/f beyond inverse_rate, log-log exponent ramp between.
inline double pulse_energy_at_rate(const AblationLaserSpec& spec, double f) {
    if (!(f > 0.0) || f > spec.max_rep_rate)
        throw Error(ErrorKind::RateOutOfRange, "ablation.rep_rate",
                    "rate " + std::to_string(f) + " Hz outside (0, max_rep_rate]");
    const double knee = spec.knee_rate;
    const double inv = spec.inverse_rate;
    auto ramp = [&](double rate) {
        double beta = std::log(rate / knee) / std::log(inv / knee);
        beta = std::clamp(beta, 0.0, 1.0);
        return spec.max_pulse_energy * std::pow(knee / rate, beta);
    };
    if (f <= knee) return spec.max_pulse_energy;
    if (f < inv) return ramp(f);
    return spec.max_pulse_energy * (knee / inv) * inv / f;
}

/// Elliptical spot: the waist is stretched by 1/cos(incidence) along one axis.
inline double spot_area(const AblationLaserSpec& spec) {
    return constants::pi * spec.waist * spec.waist / std::cos(spec.incidence_angle);
}

/// Peak fluence, 2 E cos(theta) / (pi w^2).
inline double fluence_from_energy(const AblationLaserSpec& spec, double energy) {
    return 2.0 * energy * std::cos(spec.incidence_angle) / (constants::pi * spec.waist * spec.waist);
}

inline double energy_from_fluence(const AblationLaserSpec& spec, double fluence) {
    return fluence * constants::pi * spec.waist * spec.waist / (2.0 * std::cos(spec.incidence_angle));
}

/// Fluence actually delivered by the configured operating point.
inline double operating_fluence(const RunConfig& cfg) {
    if (cfg.ablation.fluence > 0.0) return cfg.ablation.fluence;
    return fluence_from_energy(cfg.ablation_laser, pulse_energy_at_rate(cfg.ablation_laser, cfg.ablation.rep_rate));
}

namespace detail {

inline void require(bool ok, std::string_view key, const std::string& constraint) {
    if (!ok) throw Error(ErrorKind::InvariantViolation, key, constraint);
}

}  // namespace detail

inline void validate(const SpeciesData& s) {
    using detail::require;
    require(!s.isotopes.empty(), "species.isotope_masses", "at least one isotope");
    double sum = 0.0;
    for (const auto& iso : s.isotopes) sum += iso.natural_abundance;
    require(std::abs(sum - 1.0) <= 1e-9, "species.abundances",
            "abundances must sum to 1 (got " + std::to_string(sum) + ")");
    for (const auto& iso : s.isotopes) {
        require(iso.mass > 0.0, "species.isotope_masses", "masses must be > 0");
        require(iso.natural_abundance >= 0.0, "species.abundances", "abundances must be >= 0");
    }
    require(s.reflectivity_1064 >= 0.0 && s.reflectivity_1064 < 1.0, "species.reflectivity_1064",
            "0 <= reflectivity < 1");
    require(s.ionization_potential > 0.0, "species.ionization_potential", "must be > 0");
    for (const auto& [name, e] : s.level_energies) {
        if (name.rfind("ion_", 0) == 0) continue;
        require(e < s.ionization_potential, "species.level." + name,
                "bound level must lie below the ionization potential");
        require(e >= 0.0, "species.level." + name, "level energy must be >= 0");
    }
    require(s.density > 0.0, "species.density", "must be > 0");
    require(s.specific_heat > 0.0, "species.specific_heat", "must be > 0");
    require(s.thermal_conductivity > 0.0, "species.thermal_conductivity", "must be > 0");
}

inline void validate(const RunConfig& c) {
    using detail::require;
    validate(c.species);

    const auto& al = c.ablation_laser;
    require(al.knee_rate > 0.0 && al.knee_rate < al.inverse_rate, "ablation_laser.knee_rate",
            "0 < knee_rate < inverse_rate");
    require(al.inverse_rate <= al.max_rep_rate, "ablation_laser.inverse_rate", "inverse_rate <= max_rep_rate");
    require(al.waist > 0.0, "ablation_laser.waist", "waist must be > 0");
    require(al.incidence_angle >= 0.0 && al.incidence_angle < constants::pi / 2, "ablation_laser.incidence_angle",
            "0 <= angle < 90 deg");
    require(al.max_pulse_energy > 0.0, "ablation_laser.max_pulse_energy", "must be > 0");
    require(al.pulse_duration > 0.0, "ablation_laser.pulse_duration", "must be > 0");
    require(al.wavelength > 0.0, "ablation_laser.wavelength", "must be > 0");

    const auto& ab = c.ablation;
    require(ab.rep_rate > 0.0 && ab.rep_rate <= al.max_rep_rate, "ablation.rep_rate", "0 < rep_rate <= max_rep_rate");
    require(ab.fluence >= 0.0, "ablation.fluence", "must be >= 0");
    require(ab.plasma_threshold > 0.0, "ablation.plasma_threshold", "must be > 0");
    require(ab.yield_scale >= 0.0, "ablation.yield_scale", "must be >= 0");
    require(ab.rydberg_fraction >= 0.0 && ab.rydberg_fraction <= 1.0, "ablation.rydberg_fraction", "in [0, 1]");
    require(ab.ambient_temperature > 0.0, "ablation.ambient_temperature", "must be > 0");

    const auto& tg = c.target;
    require(tg.initial_contaminant_coverage >= 0.0 && tg.initial_contaminant_coverage <= 1.0,
            "target.initial_contaminant_coverage", "in [0, 1]");
    require(tg.contaminant_decay_per_pulse >= 0.0 && tg.contaminant_decay_per_pulse < 1.0,
            "target.contaminant_decay_per_pulse", "in [0, 1)");
    require(tg.depth.slope >= 0.0, "target.depth_slope", "must be >= 0");
    require(tg.depth.melt_churn >= 0.0, "target.melt_churn", "must be >= 0");

    auto check_laser = [&](const IonLaserSpec& l, const std::string& sec) {
        require(l.power >= 0.0, sec + ".power", "power must be >= 0");
        require(l.waist_at_trap > 0.0, sec + ".waist", "waist must be > 0");
        require(l.wavelength > 0.0, sec + ".wavelength", "must be > 0");
        require(l.linewidth >= 0.0, sec + ".linewidth", "must be >= 0");
    };
    check_laser(c.pi_laser, "pi_laser");
    check_laser(c.cooling_laser, "cooling_laser");
    check_laser(c.repumper, "repumper");
    require(c.cooling_laser.linewidth > 0.0, "cooling_laser.linewidth", "must be > 0");

    const auto& g = c.geometry;
    require(g.target_trap_distance > 0.0, "geometry.distance", "must be > 0");
    require(g.aperture_width > 0.0, "geometry.aperture_width", "must be > 0");
    require(g.aperture_height > 0.0, "geometry.aperture_height", "must be > 0");
    require(g.beam_pi_laser_angle >= 0.0 && g.beam_pi_laser_angle < constants::pi / 2, "geometry.pi_laser_angle",
            "0 <= angle < 90 deg");
    require(g.emission_axis_tilt >= 0.0 && g.emission_axis_tilt < constants::pi / 2, "geometry.emission_axis_tilt",
            "0 <= angle < 90 deg");

    const auto& pi = c.photoionization;
    require(pi.resonant_linewidth > 0.0, "photoionization.resonant_linewidth", "must be > 0");
    require(pi.ionization_cross_section > 0.0, "photoionization.cross_section", "must be > 0");
    require(pi.saturation_intensity > 0.0, "photoionization.saturation_intensity", "must be > 0");
    require(pi.rydberg_saturation_power > 0.0, "photoionization.rydberg_saturation_power", "must be > 0");
    require(pi.rydberg_max_probability >= 0.0 && pi.rydberg_max_probability <= 1.0,
            "photoionization.rydberg_max_probability", "in [0, 1]");
    require(pi.rydberg_binding >= 0.0, "photoionization.rydberg_binding", "must be >= 0");
    require(pi.autoionization_width > 0.0, "photoionization.autoionization_width", "must be > 0");

    const auto& t = c.trap;
    require(t.r0 > 0.0, "trap.r0", "must be > 0");
    require(t.drive_frequency > 0.0, "trap.drive_frequency", "must be > 0");
    require(t.rf_amplitude > 0.0, "trap.rf_amplitude", "must be > 0");
    require(t.endcap_voltage > 0.0, "trap.endcap_voltage", "must be > 0");
    require(t.geometric_efficiency > 0.0, "trap.geometric_efficiency", "must be > 0");
    require(t.depth_prefactor > 0.0, "trap.depth_prefactor", "must be > 0");
    require(t.heating_time >= 0.0, "trap.heating_time", "must be >= 0");
    require(t.dark_rate_per_mbar >= 0.0, "trap.dark_rate_per_mbar", "must be >= 0");
    require(t.dark_dwell >= 0.0, "trap.dark_dwell", "must be >= 0");

    const auto& v = c.vacuum;
    require(v.base_pressure > 0.0, "vacuum.base_pressure", "must be > 0");
    require(v.pump_speed > 0.0, "vacuum.pump_speed", "must be > 0");
    require(v.chamber_volume > 0.0, "vacuum.chamber_volume", "must be > 0");
    require(v.gas_per_pulse >= 0.0, "vacuum.gas_per_pulse", "must be >= 0");
    require(v.contaminant_gas_per_pulse >= 0.0, "vacuum.contaminant_gas_per_pulse", "must be >= 0");

    const auto& d = c.diagnostics;
    require(d.detection_efficiency > 0.0 && d.detection_efficiency <= 1.0, "diagnostics.detection_efficiency",
            "in (0, 1]");
    require(d.bin_width > 0.0, "diagnostics.bin_width", "must be > 0");
    require(d.background_rate >= 0.0, "diagnostics.background_rate", "must be >= 0");
    require(d.suppressed_fraction >= 0.0 && d.suppressed_fraction <= 1.0, "diagnostics.suppressed_fraction",
            "in [0, 1]");
    require(d.ion_count_interval > 0.0, "diagnostics.ion_count_interval", "must be > 0");
    require(d.detector.window >= 2, "diagnostics.window", "window >= 2 bins");
    require(d.detector.threshold_sigma > 0.0, "diagnostics.threshold_sigma", "must be > 0");
    require(d.detector.min_separation >= 0.0, "diagnostics.min_separation", "must be >= 0");

    require(c.drift.amplitude >= 0.0, "drift.amplitude", "must be >= 0");
    require(c.drift.period > 0.0, "drift.period", "must be > 0");
    require(c.depth_scan.n_pulses >= 0.0, "depth_scan.n_pulses", "must be >= 0");

    require(c.time_step > 0.0, "run.time_step", "time_step must be > 0");
    require(c.duration > 0.0, "run.duration", "duration must be > 0");
    double prev_end = -1.0;
    for (const auto& gi : c.gating_schedule) {
        require(gi.on_end > gi.on_start, "gating.intervals", "each interval needs on_end > on_start");
        require(gi.on_start >= prev_end, "gating.intervals", "intervals must be sorted and non-overlapping");
        prev_end = gi.on_end;
    }
    if (!c.gating_schedule.empty())
        require(c.duration >= c.gating_schedule.back().on_end, "run.duration",
                "duration must cover the last gating interval");
    if (c.controller && c.controller->mode == ControllerMode::SingleIonAutoShutter)
        require(c.controller->target_ion_count >= 1, "controller.target_ion_count", "target >= 1 for auto-shutter");
    if (c.controller) require(c.controller->shutter_latency >= 0.0, "controller.shutter_latency", "must be >= 0");
}

}  // namespace ablatron
