#pragma once

// Time-stepped scenario engine. Each step batches the ablation pulses that
// fall inside it; the sum of per-pulse Poisson/binomial draws is again
// Poisson/binomial, so batching changes no distribution. Ions inherit a
// uniformly chosen pulse of their batch and arrive after their flight time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "ablatron/ablation.hpp"
#include "ablatron/beam.hpp"
#include "ablatron/config.hpp"
#include "ablatron/config_io.hpp"
#include "ablatron/diagnostics.hpp"
#include "ablatron/error.hpp"
#include "ablatron/fit.hpp"
#include "ablatron/photoionization.hpp"
#include "ablatron/rng.hpp"
#include "ablatron/trap.hpp"

namespace ablatron {

struct ScenarioOutputs {
    bool events = true;
    bool fluorescence = true;
    bool pressure = true;
    bool ion_count_series = true;
    bool depth_scan = false;
};

struct Scenario {
    std::string name;
    RunConfig config;
    ScenarioOutputs outputs;
};

enum class Channel { TwoPhoton, Rydberg };

inline const char* to_string(Channel c) { return c == Channel::TwoPhoton ? "272nm" : "rydberg"; }

struct IonRecord {
    double pulse_time = 0.0;
    double arrival_time = 0.0;
    std::size_t isotope = 0;
    Channel channel = Channel::TwoPhoton;
    double velocity = 0.0;
    bool captured = false;
    bool operator==(const IonRecord&) const = default;
};

/// Exact integer ledger plus per-ion records.
struct EventLog {
    std::uint64_t pulses_fired = 0;
    std::uint64_t atoms_emitted = 0;
    std::uint64_t atoms_rejected = 0;             // stopped by the skimmers
    std::uint64_t atoms_transited_unionized = 0;
    std::uint64_t rydberg_atoms = 0;              // accepted atoms in Rydberg states
    std::uint64_t ions_created = 0;
    std::uint64_t ions_captured = 0;
    std::uint64_t ions_lost_at_birth = 0;
    std::uint64_t dark_transitions = 0;
    double expected_ions = 0.0;  // mean-field expectation of ions created

    std::vector<IonRecord> ions;             // sorted by arrival time
    std::vector<LoadingEvent> detected;      // online step detector
    std::optional<double> shutter_time;      // when the controller closed the shutter

    bool ledger_balanced() const {
        return atoms_emitted == atoms_rejected + atoms_transited_unionized + ions_created &&
               ions_created == ions_captured + ions_lost_at_birth;
    }
    bool operator==(const EventLog&) const = default;
};

struct CountSample {
    double time = 0.0;
    std::uint64_t count = 0;
};

struct RunSummary {
    double end_time = 0.0;
    double on_time = 0.0;  // ablation laser firing time within the run
    std::uint64_t ions_loaded = 0;
    std::uint64_t final_ion_count = 0;
    double mean_loading_rate = 0.0;  // ions/s over on_time
    double surface_temperature = 0.0;
    double mean_ionization_probability = 0.0;
    Regime regime = Regime::Thermal;
    std::optional<std::int64_t> overshoot;  // final - target, controller runs only
};

struct RunResult {
    std::string name;
    EventLog log;
    FluorescenceTrace fluorescence;
    PressureTrace pressure;
    std::vector<CountSample> ion_count;
    RunSummary summary;
};

namespace detail {

/// Tables depend only on the inputs below, so runs that differ in seed,
/// yield or timing share them.
inline std::shared_ptr<const IonizationTable> cached_ionization_table(double temperature, const RunConfig& cfg,
                                                                     double extra_detuning) {
    static std::mutex mutex;
    static std::map<std::string, std::shared_ptr<const IonizationTable>> cache;
    std::string key = format_double(temperature) + "|" + format_double(extra_detuning);
    for (double v : {cfg.pi_laser.wavelength, cfg.pi_laser.power, cfg.pi_laser.waist_at_trap, cfg.pi_laser.detuning,
                     cfg.photoionization.resonant_linewidth, cfg.photoionization.saturation_intensity,
                     cfg.photoionization.ionization_cross_section, cfg.geometry.aperture_height,
                     cfg.geometry.beam_pi_laser_angle})
        key += "|" + format_double(v);
    for (const auto& iso : cfg.species.isotopes)
        key += "|" + format_double(iso.mass) + "," + format_double(iso.natural_abundance) + "," +
               format_double(iso.isotope_shift_272);
    {
        std::lock_guard<std::mutex> lock(mutex);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }
    auto table = std::make_shared<const IonizationTable>(temperature, cfg.pi_laser, cfg.photoionization, cfg.geometry,
                                                         cfg.species, extra_detuning);
    std::lock_guard<std::mutex> lock(mutex);
    if (cache.size() >= 512) cache.clear();
    return cache.emplace(key, table).first->second;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Mean-field quantities

struct ExpectedRates {
    double surface_temperature = 0.0;
    double atoms_per_pulse = 0.0;
    double acceptance = 0.0;
    double mean_ionization_probability = 0.0;  // 272 nm, ground-state atoms
    double rydberg_ionization_probability = 0.0;
    double rydberg_fraction = 0.0;
    double two_photon_ions = 0.0;  // ions/s
    double rydberg_ions = 0.0;     // ions/s
    double total() const { return two_photon_ions + rydberg_ions; }
};

inline ExpectedRates expected_loading_rate(const RunConfig& cfg, const IonizationTable* table = nullptr) {
    ExpectedRates r;
    const double fluence = operating_fluence(cfg);
    const auto pulse = make_pulse(cfg.ablation_laser, fluence, 0.0);
    r.surface_temperature = surface_temperature(pulse, cfg.species, cfg.ablation.ambient_temperature);
    r.atoms_per_pulse = atoms_per_pulse(r.surface_temperature, pulse.spot_area, pulse.duration, cfg.species,
                                        cfg.ablation.yield_scale);
    r.acceptance = acceptance_fraction(cfg.geometry);
    if (table) {
        r.mean_ionization_probability = table->mean_probability();
    } else {
        r.mean_ionization_probability = detail::cached_ionization_table(r.surface_temperature, cfg, 0.0)->mean_probability();
    }
    r.rydberg_fraction =
        classify_regime(fluence, cfg.ablation.plasma_threshold) == Regime::Plasma ? cfg.ablation.rydberg_fraction : 0.0;
    r.rydberg_ionization_probability =
        rydberg_ionization_prob(cfg.cooling_laser, cfg.repumper,
                                rydberg_model(cfg.species, cfg.photoionization.rydberg_binding), cfg.photoionization);
    const double accepted = cfg.ablation.rep_rate * r.atoms_per_pulse * r.acceptance;
    r.two_photon_ions = accepted * (1.0 - r.rydberg_fraction) * r.mean_ionization_probability;
    r.rydberg_ions = accepted * r.rydberg_fraction * r.rydberg_ionization_probability;
    return r;
}

/// Saturated Rydberg loading rate R_max (ions/s): the rate the Rydberg channel
/// approaches as the 397 nm power grows without bound.
inline double expected_rydberg_rate_max(const RunConfig& cfg) {
    const auto r = expected_loading_rate(cfg);
    const double accepted = cfg.ablation.rep_rate * r.atoms_per_pulse * r.acceptance;
    return accepted * r.rydberg_fraction * cfg.photoionization.rydberg_max_probability;
}

// ---------------------------------------------------------------------------
// Engine

namespace detail {

struct PendingIon {
    IonRecord record;
    double radial_offset = 0.0;
    bool operator>(const PendingIon& o) const { return record.arrival_time > o.record.arrival_time; }
};

/// Pulses n / f with lo <= n / f < hi.
inline std::uint64_t pulses_in(double lo, double hi, double rate) {
    if (!(hi > lo)) return 0;
    const auto first = static_cast<std::int64_t>(std::ceil(lo * rate - 1e-9));
    const auto last = static_cast<std::int64_t>(std::ceil(hi * rate - 1e-9));
    return last > first ? static_cast<std::uint64_t>(last - first) : 0;
}

struct PulseWindow {
    double lo = 0.0;
    std::uint64_t count = 0;
};

class ScenarioRunner {
public:
    explicit ScenarioRunner(const Scenario& s)
        : s_(s),
          cfg_(s.config),
          rng_ablation_(make_stream(cfg_.rng_seed, Stream::Ablation)),
          rng_transport_(make_stream(cfg_.rng_seed, Stream::Transport)),
          rng_ionization_(make_stream(cfg_.rng_seed, Stream::Ionization)),
          rng_trap_(make_stream(cfg_.rng_seed, Stream::Trap)),
          rng_fluorescence_(make_stream(cfg_.rng_seed, Stream::Fluorescence)) {}

    RunResult run() {
        validate(cfg_);
        const double mass = mean_mass(cfg_.species);
        require_stable(cfg_.trap, mass);
        for (const auto& iso : cfg_.species.isotopes) require_stable(cfg_.trap, iso.mass);
        const double dt = cfg_.time_step;
        if (!(dt > 0.0)) throw Error(ErrorKind::InvariantViolation, "run.time_step", "must be > 0");
        // validates the ODE step before any work
        pressure_step({0.0, cfg_.vacuum.base_pressure}, cfg_.vacuum, 0.0, dt);
        if (cfg_.ablation.fluence <= 0.0) pulse_energy_at_rate(cfg_.ablation_laser, cfg_.ablation.rep_rate);

        fluence_ = operating_fluence(cfg_);
        pulse_ = make_pulse(cfg_.ablation_laser, fluence_, 0.0);
        regime_ = classify_regime(fluence_, cfg_.ablation.plasma_threshold);
        temperature_ = surface_temperature(pulse_, cfg_.species, cfg_.ablation.ambient_temperature);
        atoms_mean_ = atoms_per_pulse(temperature_, pulse_.spot_area, pulse_.duration, cfg_.species,
                                      cfg_.ablation.yield_scale);
        acceptance_ = acceptance_fraction(cfg_.geometry);
        rydberg_fraction_ = regime_ == Regime::Plasma ? cfg_.ablation.rydberg_fraction : 0.0;
        p_rydberg_ = rydberg_ionization_prob(cfg_.cooling_laser, cfg_.repumper,
                                             rydberg_model(cfg_.species, cfg_.photoionization.rydberg_binding),
                                             cfg_.photoionization);
        std::vector<double> abundances;
        for (const auto& iso : cfg_.species.isotopes) abundances.push_back(iso.natural_abundance);
        isotope_pick_ = std::discrete_distribution<std::size_t>(abundances.begin(), abundances.end());

        crystal_ = IonCrystal(cfg_.trap, mass);
        target_ = initial_target(cfg_.target);

        RunResult out;
        out.name = s_.name;
        TraceSynthesizer synth(cfg_.diagnostics.bin_width, 0.0, rng_fluorescence_);
        StepDetector detector(cfg_.diagnostics.detector, cfg_.diagnostics.bin_width);

        const auto sample_every = std::max<std::int64_t>(1, std::llround(cfg_.diagnostics.ion_count_interval / dt));
        const auto max_steps = static_cast<std::int64_t>(std::ceil(cfg_.duration / dt - 1e-9));
        PressureSample pressure{0.0, cfg_.vacuum.base_pressure};
        std::int64_t end_step = max_steps;
        const bool controlled = cfg_.controller && cfg_.controller->mode == ControllerMode::SingleIonAutoShutter;
        if (controlled && cfg_.controller->target_ion_count < 1)
            throw Error(ErrorKind::InvariantViolation, "controller.target_ion_count", "target >= 1 in auto-shutter mode");

        if (s_.outputs.ion_count_series) out.ion_count.push_back({0.0, 0});
        if (s_.outputs.pressure) out.pressure.push_back(pressure);

        for (std::int64_t k = 0; k < end_step; ++k) {
            const double t0 = static_cast<double>(k) * dt;
            const double t1 = static_cast<double>(k + 1) * dt;

            std::uint64_t n_pulses = 0;
            const auto windows = firing_windows(t0, t1, n_pulses);
            on_time_ += firing_time(t0, t1);
            if (n_pulses > 0) fire(windows, n_pulses, out.log);

            // arrivals and captures inside the step
            while (!pending_.empty() && pending_.top().record.arrival_time < t1) {
                land(pending_.top(), out.log);
                pending_.pop();
            }
            out.log.dark_transitions += apply_collision_and_heating_events(
                crystal_, cfg_.trap, pressure.pressure, t1, dt, std::nullopt, rng_trap_);

            // gas load: ablation plus contaminant burn-off
            const double load =
                static_cast<double>(n_pulses) *
                (cfg_.vacuum.gas_per_pulse + cfg_.vacuum.contaminant_gas_per_pulse * target_.contaminant_coverage) / dt;
            pressure = pressure_step(pressure, cfg_.vacuum, load, dt);
            pressure.time = t1;

            const double rate = cfg_.diagnostics.background_rate +
                                fluorescence_rate(crystal_, t1, cfg_.cooling_laser,
                                                  cfg_.diagnostics.detection_efficiency,
                                                  cfg_.diagnostics.suppressed_fraction);
            const std::size_t before = synth.trace().counts.size();
            const std::size_t done = synth.advance(rate, dt);
            for (std::size_t b = before; b < before + done; ++b) {
                if (auto ev = detector.push(synth.trace().counts[b])) on_detection(*ev, t1, dt, end_step, out.log);
            }

            if ((k + 1) % sample_every == 0) {
                if (s_.outputs.ion_count_series) out.ion_count.push_back({t1, crystal_.count()});
                if (s_.outputs.pressure) out.pressure.push_back(pressure);
            }
        }
        // atoms still in flight complete their transit
        while (!pending_.empty()) {
            land(pending_.top(), out.log);
            pending_.pop();
        }

        const double end_time = static_cast<double>(end_step) * dt;
        out.fluorescence = synth.take();
        if (s_.outputs.events) detector.finish();
        out.log.detected = detector.events();
        if (!s_.outputs.fluorescence) out.fluorescence.counts.clear();
        if (!s_.outputs.events) out.log.ions.clear();

        auto& sum = out.summary;
        sum.end_time = end_time;
        sum.on_time = on_time_;
        sum.ions_loaded = out.log.ions_captured;
        sum.final_ion_count = crystal_.count();
        sum.mean_loading_rate = on_time_ > 0.0 ? static_cast<double>(out.log.ions_captured) / on_time_ : 0.0;
        sum.surface_temperature = temperature_;
        sum.mean_ionization_probability = tables_.empty() ? 0.0 : tables_.begin()->second->mean_probability();
        sum.regime = regime_;
        if (controlled)
            sum.overshoot = static_cast<std::int64_t>(crystal_.count()) - cfg_.controller->target_ion_count;
        return out;
    }

private:
    bool continuous() const { return cfg_.controller && cfg_.controller->mode == ControllerMode::Continuous; }

    std::vector<GateInterval> gates() const {
        if (continuous()) return {{0.0, cfg_.duration}};
        return cfg_.effective_gates();
    }

    /// Firing sub-windows of [t0, t1): inside a gate and before the shutter.
    std::vector<PulseWindow> firing_windows(double t0, double t1, std::uint64_t& total) const {
        std::vector<PulseWindow> w;
        total = 0;
        const double stop = shutter_close_ ? std::min(t1, *shutter_close_) : t1;
        for (const auto& g : gates()) {
            const double lo = std::max(t0, g.on_start), hi = std::min(stop, g.on_end);
            const auto n = pulses_in(lo, hi, cfg_.ablation.rep_rate);
            if (n > 0) {
                w.push_back({lo, n});
                total += n;
            }
        }
        return w;
    }

    double firing_time(double t0, double t1) const {
        const double stop = shutter_close_ ? std::min(t1, *shutter_close_) : t1;
        double s = 0.0;
        for (const auto& g : gates()) s += std::max(0.0, std::min(stop, g.on_end) - std::max(t0, g.on_start));
        return s;
    }

    double pulse_time(const std::vector<PulseWindow>& windows, std::uint64_t index) const {
        const double f = cfg_.ablation.rep_rate;
        for (const auto& w : windows) {
            if (index < w.count) {
                const auto first = static_cast<std::int64_t>(std::ceil(w.lo * f - 1e-9));
                return static_cast<double>(first + static_cast<std::int64_t>(index)) / f;
            }
            index -= w.count;
        }
        return windows.back().lo;
    }

    const IonizationTable& table_at(double t) {
        long key = 0;
        if (cfg_.drift.amplitude != 0.0 && cfg_.drift.period > 0.0) {
            const double offset = cfg_.drift.amplitude * std::sin(2.0 * constants::pi * t / cfg_.drift.period);
            key = std::lround(offset / drift_quantum);
        }
        auto it = tables_.find(key);
        if (it == tables_.end())
            it = tables_.emplace(key, shared_ionization_table(static_cast<double>(key) * drift_quantum)).first;
        return *it->second;
    }

    std::shared_ptr<const IonizationTable> shared_ionization_table(double extra_detuning) const {
        return cached_ionization_table(temperature_, cfg_, extra_detuning);
    }

    std::uint64_t draw(ablatron::Engine& rng, CarryCounter& carry, std::uint64_t n, double p) {
        if (n == 0 || p <= 0.0) return 0;
        if (cfg_.ablation.mean_field) return std::min<std::uint64_t>(n, carry.take(static_cast<double>(n) * p));
        return sample_binomial(rng, n, p);
    }

    void fire(const std::vector<PulseWindow>& windows, std::uint64_t n_pulses, EventLog& log) {
        const double t_mid = windows.front().lo;
        auto train = emit_pulse_train(pulse_, n_pulses, target_, cfg_, rng_ablation_,
                                      cfg_.ablation.mean_field ? &carry_emit_ : nullptr);
        target_ = train.state;
        log.pulses_fired += n_pulses;
        log.atoms_emitted += train.n_atoms;

        const std::uint64_t accepted = draw(rng_transport_, carry_accept_, train.n_atoms, acceptance_);
        log.atoms_rejected += train.n_atoms - accepted;
        const std::uint64_t rydberg = draw(rng_ionization_, carry_rydberg_, accepted, rydberg_fraction_);
        const std::uint64_t ground = accepted - rydberg;
        log.rydberg_atoms += rydberg;

        const auto& table = table_at(t_mid);
        const std::uint64_t ions_pi = draw(rng_ionization_, carry_pi_, ground, table.mean_probability());
        const std::uint64_t ions_ryd = draw(rng_ionization_, carry_ryd_, rydberg, p_rydberg_);
        log.expected_ions += static_cast<double>(n_pulses) * atoms_mean_ * acceptance_ *
                             ((1.0 - rydberg_fraction_) * table.mean_probability() + rydberg_fraction_ * p_rydberg_);
        log.atoms_transited_unionized += accepted - ions_pi - ions_ryd;
        log.ions_created += ions_pi + ions_ryd;

        std::uniform_int_distribution<std::uint64_t> pick_pulse(0, n_pulses - 1);
        const double half_height = cfg_.geometry.aperture_height / 2.0;
        for (std::uint64_t i = 0; i < ions_pi + ions_ryd; ++i) {
            PendingIon ion;
            ion.record.pulse_time = pulse_time(windows, pick_pulse(rng_ionization_));
            if (i < ions_pi) {
                const auto atom = table.sample_ionized(rng_ionization_);
                ion.record.isotope = atom.isotope;
                ion.record.velocity = atom.velocity;
                ion.record.channel = Channel::TwoPhoton;
                ion.radial_offset = atom.transverse_offset;
            } else {
                ion.record.isotope = isotope_pick_(rng_ionization_);
                ion.record.velocity =
                    sample_velocity(temperature_, cfg_.species.isotopes[ion.record.isotope].mass, rng_ionization_);
                ion.record.channel = Channel::Rydberg;
                ion.radial_offset = (2.0 * uniform01(rng_ionization_) - 1.0) * half_height;
            }
            ion.record.arrival_time = ion.record.pulse_time + cfg_.geometry.target_trap_distance / ion.record.velocity;
            pending_.push(ion);
        }
    }

    void land(const PendingIon& ion, EventLog& log) {
        IonRecord rec = ion.record;
        const double m = cfg_.species.isotopes[rec.isotope].mass;
        const double ke = units::joule_to_ev(0.5 * m * rec.velocity * rec.velocity);
        rec.captured = attempt_capture({ion.radial_offset, ke}, cfg_.trap, m);
        if (rec.captured) {
            ++log.ions_captured;
            crystal_.add_ion(rec.isotope, rec.arrival_time, cfg_.trap.heating_time);
        } else {
            ++log.ions_lost_at_birth;
        }
        log.ions.push_back(rec);
    }

    void on_detection(const LoadingEvent& ev, double now, double dt, std::int64_t& end_step, EventLog& log) {
        if (!cfg_.controller || cfg_.controller->mode != ControllerMode::SingleIonAutoShutter) return;
        if (shutter_close_) return;
        if (static_cast<int>(ev.ion_index) < cfg_.controller->target_ion_count) return;
        shutter_close_ = now + cfg_.controller->shutter_latency;
        log.shutter_time = shutter_close_;
        const double end = *shutter_close_ + cfg_.controller->settle_time;
        end_step = std::min(end_step, static_cast<std::int64_t>(std::ceil(end / dt - 1e-9)));
    }

    static constexpr double drift_quantum = 2e6;  // Hz

    const Scenario& s_;
    RunConfig cfg_;
    ablatron::Engine rng_ablation_, rng_transport_, rng_ionization_, rng_trap_, rng_fluorescence_;
    CarryCounter carry_emit_, carry_accept_, carry_rydberg_, carry_pi_, carry_ryd_;

    double fluence_ = 0.0;
    PulseSpec pulse_;
    Regime regime_ = Regime::Thermal;
    double temperature_ = 0.0;
    double atoms_mean_ = 0.0;
    double acceptance_ = 0.0;
    double rydberg_fraction_ = 0.0;
    double p_rydberg_ = 0.0;
    std::discrete_distribution<std::size_t> isotope_pick_;
    std::map<long, std::shared_ptr<const IonizationTable>> tables_;

    IonCrystal crystal_;
    TargetState target_;
    std::priority_queue<PendingIon, std::vector<PendingIon>, std::greater<>> pending_;
    std::optional<double> shutter_close_;
    double on_time_ = 0.0;
};

}  // namespace detail

/// Runs one scenario. Module errors are re-raised with the scenario name.
inline RunResult run_scenario(const Scenario& s) {
    try {
        return detail::ScenarioRunner(s).run();
    } catch (const Error& e) {
        throw Error(e.kind(), e.key(), "scenario '" + s.name + "': " + e.detail());
    }
}

inline RunResult run_scenario(const RunConfig& cfg) { return run_scenario(Scenario{cfg.name, cfg, {}}); }

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationResult {
    double yield_scale = 0.0;
    double achieved_rate = 0.0;  // mean-field simulated rate at yield_scale
    int iterations = 0;
};

/// Mean-field loading rate (ions/s) over `on_time` seconds of continuous firing.
inline double mean_field_rate(RunConfig cfg, double on_time = 20.0) {
    cfg.ablation.mean_field = true;
    cfg.duration = on_time;
    cfg.gating_schedule.clear();
    cfg.controller.reset();
    Scenario s{cfg.name + "-calibration", cfg, {false, false, false, false, false}};
    const auto r = run_scenario(s);
    return r.summary.on_time > 0.0 ? r.log.expected_ions / r.summary.on_time : 0.0;
}

/// Emission-count cap used as the upper calibration bracket: one monolayer of
/// the spot per pulse. Thermal desorption beyond that is no longer thermal.
inline double max_yield_scale(const RunConfig& cfg) {
    const double fluence = operating_fluence(cfg);
    const auto pulse = make_pulse(cfg.ablation_laser, fluence, 0.0);
    const double t = surface_temperature(pulse, cfg.species, cfg.ablation.ambient_temperature);
    const double number_density = cfg.species.density / mean_mass(cfg.species);
    const double monolayer = std::pow(number_density, 2.0 / 3.0) * pulse.spot_area;
    return monolayer / atoms_per_pulse(t, pulse.spot_area, pulse.duration, cfg.species, 1.0);
}

/// Bisection on log(yield_scale) until the mean-field simulated rate over
/// `on_time` of firing is within `tolerance` of the target.
inline CalibrationResult calibrate_yield(double target_rate, double fluence, double rep_rate, RunConfig cfg,
                                         double tolerance = 1e-3, double on_time = 20.0) {
    if (!(target_rate > 0.0)) throw Error(ErrorKind::InvariantViolation, "target_rate", "must be > 0");
    cfg.ablation.fluence = fluence;
    cfg.ablation.rep_rate = rep_rate;
    if (classify_regime(fluence, cfg.ablation.plasma_threshold) != Regime::Thermal)
        throw Error(ErrorKind::InvariantViolation, "ablation.fluence", "calibration needs a thermal-regime operating point");
    validate(cfg);

    const double hi_scale = max_yield_scale(cfg);
    cfg.ablation.yield_scale = hi_scale;
    const double r_hi = mean_field_rate(cfg, on_time);
    if (r_hi < target_rate)
        throw Error(ErrorKind::NonBracketable, "target_rate",
                    "achievable maximum is " + std::to_string(r_hi) + " ions/s at this operating point");

    double lo = std::log(hi_scale) - 200.0, hi = std::log(hi_scale);
    CalibrationResult res;
    for (res.iterations = 1; res.iterations <= 200; ++res.iterations) {
        const double mid = 0.5 * (lo + hi);
        cfg.ablation.yield_scale = std::exp(mid);
        const double r = mean_field_rate(cfg, on_time);
        res.yield_scale = cfg.ablation.yield_scale;
        res.achieved_rate = r;
        if (std::abs(r / target_rate - 1.0) <= tolerance) return res;
        (r < target_rate ? lo : hi) = mid;
    }
    throw Error(ErrorKind::NonBracketable, "target_rate", "bisection did not converge");
}

// ---------------------------------------------------------------------------
// Controller and depth scan

/// Runs the closed-loop auto-shutter scenario (loading stops after the
/// target-th detected step). Returns the full event log.
inline RunResult single_ion_controller(RunConfig cfg, const ControllerParams& params) {
    if (params.mode != ControllerMode::SingleIonAutoShutter)
        throw Error(ErrorKind::InvariantViolation, "controller.mode", "single_ion_controller needs auto_shutter mode");
    cfg.controller = params;
    return run_scenario(Scenario{cfg.name, cfg, {}});
}

struct DepthPoint {
    double fluence = 0.0;  // J/m^2
    double depth = 0.0;    // m
    double n_pulses = 0.0;
};

/// Crater depth at each configured fluence. Stochastic mode adds 5%
/// multiplicative scatter from the ablation stream.
inline std::vector<DepthPoint> run_depth_scan(const RunConfig& cfg) {
    if (cfg.depth_scan.fluences.empty())
        throw Error(ErrorKind::InvariantViolation, "depth_scan.fluences", "need at least one fluence");
    auto rng = make_stream(cfg.rng_seed, Stream::Ablation, 0xDE9);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::vector<DepthPoint> out;
    for (double f : cfg.depth_scan.fluences) {
        double d = accumulate_depth(f, cfg.depth_scan.n_pulses, cfg.target.depth);
        if (!cfg.ablation.mean_field) d *= std::max(0.0, 1.0 + noise(rng));
        out.push_back({f, d, cfg.depth_scan.n_pulses});
    }
    return out;
}

}  // namespace ablatron
