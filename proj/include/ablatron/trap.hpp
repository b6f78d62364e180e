#pragma once

// Linear RF trap: Mathieu q, pseudopotential depth, capture of freshly made
// ions and the trapped ensemble (bright/dark/hot bookkeeping, crystal volume).

#include <algorithm>
#include <cmath>
#include <functional>
#include <cstdint>
#include <optional>
#include <queue>
#include <vector>

#include "ablatron/config.hpp"
#include "ablatron/error.hpp"
#include "ablatron/rng.hpp"

namespace ablatron {

inline constexpr double mathieu_stability_limit = 0.908;

/// q = 2 e eta V_rf / (m Omega^2 r0^2), a-parameter neglected.
inline double mathieu_q(const TrapParams& trap, double mass) {
    const double omega = 2.0 * constants::pi * trap.drive_frequency;
    return 2.0 * constants::elementary_charge * trap.geometric_efficiency * trap.rf_amplitude /
           (mass * omega * omega * trap.r0 * trap.r0);
}

inline bool stable(double q) { return q > 0.0 && q < mathieu_stability_limit; }

inline void require_stable(const TrapParams& trap, double mass) {
    const double q = mathieu_q(trap, mass);
    if (!stable(q)) throw Error(ErrorKind::UnstableTrap, "trap.rf_amplitude", "q = " + std::to_string(q) + " outside (0, 0.908)");
}

/// Zero-temperature charged-liquid density eps0 (eta V)^2 / (m Omega^2 r0^4).
inline double crystal_density(const TrapParams& trap, double mass) {
    require_stable(trap, mass);
    const double omega = 2.0 * constants::pi * trap.drive_frequency;
    const double v = trap.geometric_efficiency * trap.rf_amplitude;
    return constants::vacuum_permittivity * v * v / (mass * omega * omega * std::pow(trap.r0, 4));
}

inline double volume_from_count(std::uint64_t n, const TrapParams& trap, double mass) {
    if (n == 0) return 0.0;
    return static_cast<double>(n) / crystal_density(trap, mass);
}

inline std::uint64_t count_from_volume(double volume, const TrapParams& trap, double mass) {
    const double n0 = crystal_density(trap, mass);
    if (!(volume > 0.0)) return 0;
    return static_cast<std::uint64_t>(std::llround(n0 * volume));
}

/// Pseudopotential depth at the trap centre in eV: kappa q eta V_rf / 8.
inline double trap_depth_ev(const TrapParams& trap, double mass) {
    return trap.depth_prefactor * mathieu_q(trap, mass) * trap.geometric_efficiency * trap.rf_amplitude / 8.0;
}

struct IonBirth {
    double radial_offset = 0.0;   // m from the trap axis
    double kinetic_energy = 0.0;  // eV
};

/// Captured iff born inside r0 with kinetic energy below the local depth
/// D (1 - (r/r0)^2).
inline bool attempt_capture(const IonBirth& birth, const TrapParams& trap, double mass) {
    require_stable(trap, mass);
    const double r = std::abs(birth.radial_offset);
    if (r >= trap.r0) return false;
    const double local = trap_depth_ev(trap, mass) * (1.0 - (r / trap.r0) * (r / trap.r0));
    return birth.kinetic_energy < local;
}

struct TrappedIon {
    std::size_t isotope = 0;
    bool bright = true;
    double dark_until = 0.0;
};

/// Trapped ensemble. A new ion heats every ion already present, so the hot
/// window is shared: is_hot(now) applies to all ions.
class IonCrystal {
public:
    IonCrystal() = default;
    IonCrystal(const TrapParams& trap, double reference_mass) : density_(crystal_density(trap, reference_mass)) {}

    std::size_t count() const { return ions_.size(); }
    const std::vector<TrappedIon>& ions() const { return ions_; }
    double hot_until() const { return hot_until_; }
    bool is_hot(double now) const { return now < hot_until_; }
    std::size_t bright_count() const { return ions_.size() - n_dark_; }
    std::size_t dark_count() const { return n_dark_; }
    double density() const { return density_; }
    double volume() const { return ions_.empty() ? 0.0 : static_cast<double>(ions_.size()) / density_; }

    void add_ion(std::size_t isotope, double now, double heating_time) {
        ions_.push_back({isotope, true, 0.0});
        hot_until_ = std::max(hot_until_, now + heating_time);
    }

    /// Returns ions to the bright state whose dark dwell has ended by `now`.
    void recover(double now) {
        while (!dark_queue_.empty() && dark_queue_.top().first <= now) {
            auto idx = dark_queue_.top().second;
            dark_queue_.pop();
            ions_[idx].bright = true;
            --n_dark_;
        }
    }

    void make_dark(std::size_t idx, double until) {
        if (!ions_[idx].bright) return;
        ions_[idx].bright = false;
        ions_[idx].dark_until = until;
        dark_queue_.emplace(until, idx);
        ++n_dark_;
    }

private:
    using DarkEntry = std::pair<double, std::size_t>;
    std::vector<TrappedIon> ions_;
    std::priority_queue<DarkEntry, std::vector<DarkEntry>, std::greater<>> dark_queue_;
    std::size_t n_dark_ = 0;
    double hot_until_ = -1.0;
    double density_ = 1.0;
};

struct NewIon {
    std::size_t isotope = 0;
};

/// One step of collisional dark transitions (probability lambda dt per bright
/// ion, lambda proportional to pressure) plus the heating flag of a new ion.
/// Returns the number of ions that went dark.
inline std::uint64_t apply_collision_and_heating_events(IonCrystal& crystal, const TrapParams& trap,
                                                        double pressure_mbar, double now, double dt,
                                                        const std::optional<NewIon>& new_ion, Engine& rng) {
    crystal.recover(now);
    std::uint64_t went_dark = 0;
    const double p = std::min(1.0, trap.dark_rate_per_mbar * pressure_mbar * dt);
    const std::size_t bright = crystal.bright_count();
    if (p > 0.0 && bright > 0) {
        const std::uint64_t k = sample_binomial(rng, bright, p);
        std::uniform_int_distribution<std::size_t> pick(0, crystal.count() - 1);
        while (went_dark < k) {
            const auto idx = pick(rng);
            if (!crystal.ions()[idx].bright) continue;
            crystal.make_dark(idx, now + trap.dark_dwell);
            ++went_dark;
        }
    }
    if (new_ion) crystal.add_ion(new_ion->isotope, now, trap.heating_time);
    return went_dark;
}

}  // namespace ablatron
