#pragma once

// Ionization channels at the trap centre:
//  * resonant two-photon 272 nm ionization of ground-state atoms, isotope
//    selective through the first (Lorentzian) step;
//  * 397 nm excitation of Rydberg atoms to auto-ionizing doubly-excited
//    states, modelled in the spectator-electron approximation.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ablatron/beam.hpp"
#include "ablatron/config.hpp"
#include "ablatron/error.hpp"
#include "ablatron/rng.hpp"

namespace ablatron {

/// Signed first-order Doppler shift for an atom whose path deviates from
/// perpendicular to the laser by `deviation`.
inline double doppler_shift(double velocity, double deviation, double wavelength) {
    return velocity * std::sin(deviation) / wavelength;
}

struct AtomSample {
    double velocity = 0.0;           // m/s along the beam
    std::size_t isotope = 0;         // index into SpeciesData::isotopes
    double transverse_offset = 0.0;  // m from the laser axis, perpendicular to both beams
};

/// Peak intensity of a Gaussian beam, 2P / (pi w^2).
inline double peak_intensity(const IonLaserSpec& laser) {
    return 2.0 * laser.power / (constants::pi * laser.waist_at_trap * laser.waist_at_trap);
}

namespace detail {

/// Integral of the ionization rate along the atom's path through the 272 nm
/// beam, times velocity (so independent of transit time).
inline double path_rate_integral(double offset, double detuning, const IonLaserSpec& laser,
                                 const PhotoionizationParams& pi, double deviation) {
    const double w = laser.waist_at_trap;
    const double i0 = peak_intensity(laser);
    const double photon_flux_per_intensity = laser.wavelength / (constants::planck * constants::speed_of_light);
    const double lorentz = 2.0 * detuning / pi.resonant_linewidth;
    const double cosd = std::cos(deviation);
    const double half_len = 4.0 * w / cosd;
    constexpr int n = 64;  // Simpson intervals
    const double h = 2.0 * half_len / n;
    double sum = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double s = -half_len + k * h;
        const double along = s * cosd;
        const double intensity = i0 * std::exp(-2.0 * (offset * offset + along * along) / (w * w));
        const double sat = intensity / pi.saturation_intensity;
        const double excited = 0.5 * sat / (1.0 + sat + lorentz * lorentz);
        const double rate = excited * pi.ionization_cross_section * intensity * photon_flux_per_intensity;
        const double weight = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        sum += weight * rate;
    }
    return sum * h / 3.0;
}

}  // namespace detail

/// Total 272 nm detuning seen by an atom: laser detuning + isotope shift + Doppler.
inline double total_detuning(const AtomSample& atom, const IonLaserSpec& laser, const BeamGeometry& geometry,
                             const SpeciesData& species, double extra_detuning = 0.0) {
    if (atom.isotope >= species.isotopes.size())
        throw Error(ErrorKind::UnknownIsotope, "isotope", "index " + std::to_string(atom.isotope) + " out of range");
    return laser.detuning + extra_detuning + species.isotopes[atom.isotope].isotope_shift_272 +
           doppler_shift(atom.velocity, geometry.beam_pi_laser_angle, laser.wavelength);
}

/// Probability that a ground-state atom is ionized on one transit of the
/// 272 nm beam (rate equations, steady-state excited fraction).
inline double two_photon_ionization_prob(const AtomSample& atom, const IonLaserSpec& laser,
                                         const PhotoionizationParams& pi, const BeamGeometry& geometry,
                                         const SpeciesData& species, double extra_detuning = 0.0) {
    const double delta = total_detuning(atom, laser, geometry, species, extra_detuning);
    if (!(laser.power > 0.0) || !(atom.velocity > 0.0)) return 0.0;
    const double g =
        detail::path_rate_integral(atom.transverse_offset, delta, laser, pi, geometry.beam_pi_laser_angle) /
        atom.velocity;
    return -std::expm1(-g);
}

/// Beam-averaged 272 nm ionization probability for one surface temperature,
/// tabulated over (isotope, velocity, transverse offset). Also draws the
/// attributes of atoms conditioned on having been ionized.
class IonizationTable {
public:
    IonizationTable() = default;

    IonizationTable(double temperature, const IonLaserSpec& laser, const PhotoionizationParams& pi,
                    const BeamGeometry& geometry, const SpeciesData& species, double extra_detuning = 0.0,
                    int velocity_cells = 1500, int offset_cells = 24)
        : temperature_(temperature), nu_(velocity_cells), ny_(offset_cells), half_height_(geometry.aperture_height / 2) {
        const std::size_t n_iso = species.isotopes.size();
        scale_.resize(n_iso);
        cumulative_.reserve(n_iso * nu_ * ny_);
        double total = 0.0;
        const double du = u_max / nu_;
        for (std::size_t i = 0; i < n_iso; ++i) {
            const auto& iso = species.isotopes[i];
            scale_[i] = thermal_velocity_scale(temperature, iso.mass);
            for (int j = 0; j < nu_; ++j) {
                const double lo = j * du, hi = lo + du;
                // Gamma(2,1) cell mass: F(u) = 1 - (1+u) e^{-u}
                const double cell = (1.0 + lo) * std::exp(-lo) - (1.0 + hi) * std::exp(-hi);
                const double v = scale_[i] * std::sqrt(0.5 * (lo + hi));
                for (int k = 0; k < ny_; ++k) {
                    const double y = (k + 0.5) / ny_ * half_height_;
                    double p = 0.0;
                    if (iso.natural_abundance > 0.0 && cell > 0.0)
                        p = two_photon_ionization_prob({v, i, y}, laser, pi, geometry, species, extra_detuning);
                    total += iso.natural_abundance * cell * p / ny_;
                    cumulative_.push_back(total);
                }
            }
        }
        mean_probability_ = total;
    }

    double temperature() const { return temperature_; }

    /// E[p] over the isotope mix, flux-weighted velocities and a uniform offset
    /// across the aperture.
    double mean_probability() const { return mean_probability_; }

    /// An atom drawn from the ionized sub-population.
    AtomSample sample_ionized(Engine& rng) const {
        const double target = uniform01(rng) * mean_probability_;
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
        auto idx = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative_.begin(),
                                                                     static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
        const std::size_t per_iso = static_cast<std::size_t>(nu_) * ny_;
        const std::size_t iso = idx / per_iso;
        const std::size_t j = (idx % per_iso) / ny_;
        const std::size_t k = idx % ny_;
        const double du = u_max / nu_;
        const double u = (j + uniform01(rng)) * du;
        const double y = (k + uniform01(rng)) / ny_ * half_height_;
        const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
        return {scale_[iso] * std::sqrt(u), iso, sign * y};
    }

private:
    static constexpr double u_max = 20.0;
    double temperature_ = 0.0;
    int nu_ = 0;
    int ny_ = 0;
    double half_height_ = 0.0;
    std::vector<double> scale_;
    std::vector<double> cumulative_;
    double mean_probability_ = 0.0;
};

// ---------------------------------------------------------------------------
// Rydberg channel

struct RydbergLevelModel {
    double rydberg_binding = 0.0;  // eV below the Ca+ ground continuum
    std::map<std::string, double> ion_transition_energies;  // "S12-P12", "D32-P12"
};

inline RydbergLevelModel rydberg_model(const SpeciesData& species, double binding) {
    RydbergLevelModel m;
    m.rydberg_binding = binding;
    const double s = species.level("ion_S12"), p = species.level("ion_P12"), d = species.level("ion_D32");
    m.ion_transition_energies["S12-P12"] = p - s;
    m.ion_transition_energies["D32-P12"] = p - d;
    return m;
}

struct AutoionizingTransition {
    double photon_energy = 0.0;  // eV
    double wavelength = 0.0;     // m
    bool ionizing = false;
};

/// Photon energy that drives the core transition of a Rydberg atom. In the
/// spectator approximation the outer electron shifts both core levels equally,
/// so this is the bare ionic transition energy. Atoms leave the target with the
/// core in S1/2; only transitions out of that core reach a state above the
/// continuum.
inline AutoionizingTransition autoionizing_photon_energy(const RydbergLevelModel& model,
                                                         const std::string& core_transition) {
    auto it = model.ion_transition_energies.find(core_transition);
    if (it == model.ion_transition_energies.end())
        throw Error(ErrorKind::UnknownTransition, core_transition, "no such core transition");
    AutoionizingTransition t;
    t.photon_energy = it->second;
    t.wavelength = constants::planck * constants::speed_of_light / units::ev_to_joule(t.photon_energy);
    const bool ground_core = core_transition.rfind("S12", 0) == 0;
    // final energy relative to the first ionization limit: -binding + photon
    t.ionizing = ground_core && t.photon_energy > model.rydberg_binding;
    return t;
}

/// Strict: equality of photon energy and gap does not ionize.
inline bool can_photoionize(double initial_level_energy, double ionization_potential, double wavelength) {
    return photon_energy(wavelength) > ionization_potential - initial_level_energy;
}

inline double rydberg_loading_rate(double power, double max_rate, double saturation_power) {
    if (!(power > 0.0)) return 0.0;
    return max_rate * power / (power + saturation_power);
}

/// True when a laser at `wavelength` sits on an ionizing auto-ionizing
/// resonance of the model (within the broad resonance width).
inline bool drives_autoionization(const RydbergLevelModel& model, double wavelength, double width) {
    for (const auto& [name, energy] : model.ion_transition_energies) {
        const auto t = autoionizing_photon_energy(model, name);
        if (t.ionizing && std::abs(photon_energy(wavelength) - energy) <= width) return true;
    }
    return false;
}

/// Per-Rydberg-atom ionization probability from the cooling and repumper beams.
inline double rydberg_ionization_prob(const IonLaserSpec& cooling, const IonLaserSpec& repumper,
                                      const RydbergLevelModel& model, const PhotoionizationParams& pi) {
    auto one = [&](const IonLaserSpec& l) {
        if (!drives_autoionization(model, l.wavelength, pi.autoionization_width)) return 0.0;
        return rydberg_loading_rate(l.power, pi.rydberg_max_probability, pi.rydberg_saturation_power);
    };
    return 1.0 - (1.0 - one(cooling)) * (1.0 - one(repumper));
}

}  // namespace ablatron
