#pragma once

// Synthetic observables: 397 nm fluorescence with shot noise, loading-step
// detection on that trace, and the chamber pressure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ablatron/config.hpp"
#include "ablatron/error.hpp"
#include "ablatron/rng.hpp"
#include "ablatron/trap.hpp"

namespace ablatron {

// ---------------------------------------------------------------------------
// Fluorescence

/// Two-level scattering rate (Gamma/2) s / (1 + s + (2 delta/Gamma)^2).
/// gamma and delta in the same angular units.
inline double scattering_rate(double saturation, double delta, double gamma) {
    const double x = 2.0 * delta / gamma;
    return 0.5 * gamma * saturation / (1.0 + saturation + x * x);
}

/// pi h c Gamma / (3 lambda^3) for a closed two-level transition.
inline double saturation_intensity(double wavelength, double gamma) {
    return constants::pi * constants::planck * constants::speed_of_light * gamma /
           (3.0 * wavelength * wavelength * wavelength);
}

/// Detected counts/s from one bright, cold ion.
inline double single_ion_rate(const IonLaserSpec& cooling, double detection_efficiency) {
    const double gamma = 2.0 * constants::pi * cooling.linewidth;
    const double intensity = 2.0 * cooling.power / (constants::pi * cooling.waist_at_trap * cooling.waist_at_trap);
    const double s = intensity / saturation_intensity(cooling.wavelength, gamma);
    return scattering_rate(s, 2.0 * constants::pi * cooling.detuning, gamma) * detection_efficiency;
}

/// Detected rate from the crystal (background excluded). Dark or hot ions
/// contribute `suppressed_fraction` of a cold bright ion.
inline double fluorescence_rate(const IonCrystal& crystal, double now, const IonLaserSpec& cooling,
                                double detection_efficiency, double suppressed_fraction = 0.0) {
    const double per_ion = single_ion_rate(cooling, detection_efficiency);
    const auto n = static_cast<double>(crystal.count());
    const double lit = crystal.is_hot(now) ? 0.0 : static_cast<double>(crystal.bright_count());
    return per_ion * (lit + suppressed_fraction * (n - lit));
}

struct FluorescenceTrace {
    double bin_width = 0.0;
    double t0 = 0.0;
    std::vector<std::uint64_t> counts;

    double bin_time(std::size_t i) const { return t0 + static_cast<double>(i) * bin_width; }
};

/// Piecewise-constant expected rate: `rate` holds from `time` until the next change.
struct RateChange {
    double time = 0.0;
    double rate = 0.0;
};

/// Streaming synthesizer: feed (rate, dt) slices, get Poisson-sampled bins.
class TraceSynthesizer {
public:
    TraceSynthesizer(double bin_width, double t0, Engine& rng) : rng_(&rng) {
        if (!(bin_width > 0.0)) throw Error(ErrorKind::InvariantViolation, "diagnostics.bin_width", "must be > 0");
        trace_.bin_width = bin_width;
        trace_.t0 = t0;
    }

    /// Returns the number of bins completed by this slice.
    std::size_t advance(double rate, double dt) {
        std::size_t done = 0;
        while (dt > 0.0) {
            const double room = trace_.bin_width - filled_;
            const double take = std::min(room, dt);
            expected_ += rate * take;
            filled_ += take;
            dt -= take;
            if (filled_ >= trace_.bin_width * (1.0 - 1e-9)) {
                trace_.counts.push_back(sample_poisson(*rng_, expected_));
                expected_ = 0.0;
                filled_ = 0.0;
                ++done;
            }
        }
        return done;
    }

    const FluorescenceTrace& trace() const { return trace_; }
    FluorescenceTrace take() { return std::move(trace_); }

private:
    Engine* rng_;
    FluorescenceTrace trace_;
    double expected_ = 0.0;
    double filled_ = 0.0;
};

/// Poisson-samples ceil(duration / bin_width) bins of a piecewise-constant rate.
inline FluorescenceTrace synthesize_trace(const std::vector<RateChange>& timeline, double duration, double bin_width,
                                          Engine& rng, double t0 = 0.0) {
    if (!(bin_width > 0.0)) throw Error(ErrorKind::InvariantViolation, "bin_width", "must be > 0");
    const auto n_bins = static_cast<std::size_t>(std::ceil(duration / bin_width - 1e-9));
    TraceSynthesizer synth(bin_width, t0, rng);
    double t = t0;
    const double end = t0 + static_cast<double>(n_bins) * bin_width;
    std::size_t next = 0;
    double rate = 0.0;
    while (next < timeline.size() && timeline[next].time <= t) rate = timeline[next++].rate;
    while (t < end - 1e-15) {
        double stop = end;
        if (next < timeline.size()) stop = std::min(stop, timeline[next].time);
        synth.advance(rate, stop - t);
        t = stop;
        while (next < timeline.size() && timeline[next].time <= t) rate = timeline[next++].rate;
    }
    auto trace = synth.take();
    trace.counts.resize(n_bins, 0);
    return trace;
}

/// Fluorescence timeline for a sequence of captures: the level steps up by
/// one ion per capture, with every ion suppressed for tau_heat afterwards.
inline std::vector<RateChange> staircase_timeline(std::vector<double> capture_times, double per_ion_rate,
                                                  double background, double heating_time,
                                                  double suppressed_fraction = 0.0) {
    std::sort(capture_times.begin(), capture_times.end());
    std::vector<RateChange> out{{0.0, background}};
    double hot_until = -1.0;
    for (std::size_t i = 0; i < capture_times.size(); ++i) {
        const double t = capture_times[i];
        const auto n = static_cast<double>(i + 1);
        hot_until = std::max(hot_until, t + heating_time);
        if (heating_time > 0.0) out.push_back({t, background + suppressed_fraction * n * per_ion_rate});
        const double next = i + 1 < capture_times.size() ? capture_times[i + 1] : INFINITY;
        if (hot_until < next || heating_time <= 0.0) out.push_back({hot_until, background + n * per_ion_rate});
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
    return out;
}

// ---------------------------------------------------------------------------
// Step detection

struct LoadingEvent {
    double time = 0.0;
    std::uint64_t ion_index = 0;  // 1 for the first ion
    bool operator==(const LoadingEvent&) const = default;
};

/// Two-window mean comparator, usable online. A candidate step needs
///   after - max(before, established) > k * sqrt((ref + after) / window)
/// where `established` is the highest level confirmed so far, so recoveries
/// from heating dips or dark ions never count as new ions. The step is placed
/// where the raw after-before difference peaks.
class StepDetector {
public:
    StepDetector(const DetectorParams& params, double bin_width, double t0 = 0.0)
        : window_(static_cast<std::size_t>(params.window)),
          threshold_(params.threshold_sigma),
          min_separation_bins_(static_cast<std::size_t>(std::ceil(params.min_separation / bin_width - 1e-9))),
          bin_width_(bin_width),
          t0_(t0) {
        if (params.window < 2) throw Error(ErrorKind::InvariantViolation, "diagnostics.window", "window >= 2 bins");
        prefix_.push_back(0.0);
        cursor_ = window_;
    }

    /// Feed one bin; returns an event when one is confirmed.
    std::optional<LoadingEvent> push(std::uint64_t count) {
        prefix_.push_back(prefix_.back() + static_cast<double>(count));
        return scan(false);
    }

    /// Resolves a pending candidate using whatever bins are available.
    std::optional<LoadingEvent> finish() { return scan(true); }

    const std::vector<LoadingEvent>& events() const { return events_; }

private:
    std::size_t size() const { return prefix_.size() - 1; }
    double mean(std::size_t begin, std::size_t end) const {
        return (prefix_[end] - prefix_[begin]) / static_cast<double>(end - begin);
    }

    std::optional<LoadingEvent> scan(bool final) {
        const std::size_t w = window_;
        const std::size_t n = size();
        if (!established_ && n >= w) established_ = mean(0, w);
        while (true) {
            if (pending_) {
                const std::size_t first = *pending_;
                if (!final && n < first + 2 * w) return std::nullopt;
                std::size_t best = first;
                double best_diff = -INFINITY;
                for (std::size_t i = first; i <= first + w && i + w <= n; ++i) {
                    const double d = mean(i, i + w) - mean(i - w, i);
                    if (d > best_diff) {
                        best_diff = d;
                        best = i;
                    }
                }
                pending_.reset();
                established_ = std::max(*established_, mean(best, std::min(n, best + w)));
                cursor_ = best + std::max(w, min_separation_bins_);
                LoadingEvent ev{t0_ + static_cast<double>(best) * bin_width_, events_.size() + 1};
                events_.push_back(ev);
                return ev;
            }
            if (cursor_ + w > n) return std::nullopt;
            const double before = mean(cursor_ - w, cursor_);
            const double after = mean(cursor_, cursor_ + w);
            const double ref = std::max(before, *established_);
            const double sigma = std::sqrt(std::max(ref + after, 1.0) / static_cast<double>(w));
            if (after - ref > threshold_ * sigma) pending_ = cursor_;
            ++cursor_;
        }
    }

    std::size_t window_;
    double threshold_;
    std::size_t min_separation_bins_;
    double bin_width_;
    double t0_;
    std::vector<double> prefix_;
    std::size_t cursor_ = 0;
    std::optional<std::size_t> pending_;
    std::optional<double> established_;
    std::vector<LoadingEvent> events_;
};

inline std::vector<LoadingEvent> detect_steps(const FluorescenceTrace& trace, const DetectorParams& params) {
    if (params.window < 2) throw Error(ErrorKind::InvariantViolation, "window", "window >= 2 bins");
    if (trace.counts.size() < 2 * static_cast<std::size_t>(params.window))
        throw Error(ErrorKind::DegenerateTrace, "trace", "shorter than two detection windows");
    StepDetector det(params, trace.bin_width, trace.t0);
    for (auto c : trace.counts) det.push(c);
    det.finish();
    return det.events();
}

// ---------------------------------------------------------------------------
// Vacuum

struct PressureSample {
    double time = 0.0;
    double pressure = 0.0;  // mbar
};

using PressureTrace = std::vector<PressureSample>;

/// Recovery time constant V/S.
inline double pump_time_constant(const VacuumParams& v) { return v.chamber_volume / v.pump_speed; }

/// Forward-Euler step of V dP/dt = Q + S p_base - S P. gas_load in mbar L/s.
inline PressureSample pressure_step(const PressureSample& state, const VacuumParams& v, double gas_load, double dt) {
    if (!(dt > 0.0) || dt >= 2.0 * v.chamber_volume / v.pump_speed)
        throw Error(ErrorKind::UnstableTimestep, "run.time_step",
                    "dt must be in (0, 2V/S) = (0, " + std::to_string(2.0 * pump_time_constant(v)) + ")");
    const double dpdt = (gas_load + v.pump_speed * v.base_pressure - v.pump_speed * state.pressure) / v.chamber_volume;
    return {state.time + dt, state.pressure + dt * dpdt};
}

/// Equilibrium pressure for a constant load.
inline double equilibrium_pressure(const VacuumParams& v, double gas_load) {
    return v.base_pressure + gas_load / v.pump_speed;
}

/// Per-pulse gas load that produces `rise` mbar above base at `rep_rate`.
inline double calibrate_gas_per_pulse(const VacuumParams& v, double rise, double rep_rate) {
    return rise * v.pump_speed / rep_rate;
}

}  // namespace ablatron
