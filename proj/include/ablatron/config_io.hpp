#pragma once

// Sectioned key-value config documents:
//
//   # comment
//   [ablation]
//   fluence = 240 mJ/cm2
//   rep_rate = 25 kHz
//
// Values take an optional unit suffix; bare numbers are internal units (SI,
// vacuum quantities in mbar / L). Lists are comma separated. The full key
// table lives in key_table() below and is documented in docs/config.md.

#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ablatron/config.hpp"
#include "ablatron/error.hpp"
#include "ablatron/units.hpp"

namespace ablatron {

struct ConfigEntry {
    std::string key;  // "section.key"
    std::string value;
    int line = 0;
};

/// Raw document, before interpretation. Overrides (from sweeps) edit this.
struct ConfigDocument {
    std::vector<ConfigEntry> entries;

    void set(const std::string& key, const std::string& value) {
        for (auto& e : entries) {
            if (e.key == key) {
                e.value = value;
                return;
            }
        }
        entries.push_back({key, value, 0});
    }
};

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline ConfigDocument parse_document(std::string_view text) {
    ConfigDocument doc;
    std::string section = "run";
    std::map<std::string, int> seen;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        auto hash = raw.find_first_of("#;");
        auto line = detail::trim(raw.substr(0, hash));
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') throw Error(ErrorKind::MalformedDocument, where, "unterminated section header");
            section = std::string(detail::trim(line.substr(1, line.size() - 2)));
            if (section.empty()) throw Error(ErrorKind::MalformedDocument, where, "empty section name");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string_view::npos) throw Error(ErrorKind::MalformedDocument, where, "expected 'key = value'");
        auto key = detail::trim(line.substr(0, eq));
        auto value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw Error(ErrorKind::MalformedDocument, where, "missing key");
        std::string full = section + "." + std::string(key);
        if (seen.count(full))
            throw Error(ErrorKind::MalformedDocument, full, "duplicate key (first on line " + std::to_string(seen[full]) + ")");
        seen[full] = line_no;
        doc.entries.push_back({full, std::string(value), line_no});
    }
    return doc;
}

namespace detail {

inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto comma = s.find(',', start);
        auto item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (!item.empty()) out.emplace_back(item);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::vector<double> parse_list(std::string_view s, std::string_view key) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) out.push_back(parse_quantity(item, key));
    return out;
}

inline std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += format_double(v[i]);
    }
    return out;
}

inline bool parse_bool(std::string_view s, std::string_view key) {
    if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return false;
    throw Error(ErrorKind::MalformedDocument, key, "expected a boolean, got '" + std::string(s) + "'");
}

inline ControllerMode parse_mode(std::string_view s, std::string_view key) {
    if (s == "gated") return ControllerMode::Gated;
    if (s == "auto_shutter" || s == "single_ion") return ControllerMode::SingleIonAutoShutter;
    if (s == "continuous") return ControllerMode::Continuous;
    throw Error(ErrorKind::MalformedDocument, key, "mode must be gated | auto_shutter | continuous");
}

inline std::string mode_name(ControllerMode m) {
    switch (m) {
        case ControllerMode::Gated: return "gated";
        case ControllerMode::SingleIonAutoShutter: return "auto_shutter";
        case ControllerMode::Continuous: return "continuous";
    }
    return "gated";
}

/// Values that need the whole document before they can be applied.
struct Pending {
    std::optional<std::vector<std::string>> isotope_names;
    std::optional<std::vector<double>> masses, abundances, shifts;
    std::optional<double> on_time, off_time;
    bool controller_seen = false;
    ControllerParams controller;
};

struct KeyBinding {
    std::string key;
    std::function<void(RunConfig&, Pending&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;  // empty: not serialized directly
};

template <class Member>
KeyBinding scalar(std::string key, Member member) {
    return {key,
            [member, key](RunConfig& c, Pending&, std::string_view v) { member(c) = parse_quantity(v, key); },
            [member](const RunConfig& c) { return format_double(member(const_cast<RunConfig&>(c))); }};
}

inline KeyBinding laser_key(const std::string& section, IonLaserSpec RunConfig::*laser, const std::string& name,
                            double IonLaserSpec::*field) {
    auto key = section + "." + name;
    return {key, [=](RunConfig& c, Pending&, std::string_view v) { (c.*laser).*field = parse_quantity(v, key); },
            [=](const RunConfig& c) { return format_double((c.*laser).*field); }};
}

inline KeyBinding controller_key(const std::string& name,
                                 std::function<void(ControllerParams&, std::string_view, std::string_view)> set,
                                 std::function<std::string(const ControllerParams&)> get) {
    auto key = "controller." + name;
    return {key,
            [=](RunConfig&, Pending& p, std::string_view v) {
                p.controller_seen = true;
                set(p.controller, v, key);
            },
            [=](const RunConfig& c) { return c.controller ? get(*c.controller) : std::string(); }};
}

#define ABLATRON_SCALAR(KEY, EXPR) scalar(KEY, [](RunConfig& c) -> double& { return c.EXPR; })

inline const std::vector<KeyBinding>& key_table() {
    static const std::vector<KeyBinding> table = [] {
        std::vector<KeyBinding> t;
        t.push_back({"run.name", [](RunConfig& c, Pending&, std::string_view v) { c.name = std::string(v); },
                     [](const RunConfig& c) { return c.name; }});
        t.push_back({"run.seed",
                     [](RunConfig& c, Pending&, std::string_view v) {
                         try {
                             c.rng_seed = std::stoull(std::string(v));
                         } catch (const std::exception&) {
                             throw Error(ErrorKind::MalformedDocument, "run.seed", "expected unsigned integer");
                         }
                     },
                     [](const RunConfig& c) { return std::to_string(c.rng_seed); }});
        t.push_back(ABLATRON_SCALAR("run.time_step", time_step));
        t.push_back(ABLATRON_SCALAR("run.duration", duration));

        t.push_back({"species.isotope_names",
                     [](RunConfig&, Pending& p, std::string_view v) { p.isotope_names = split_list(v); },
                     [](const RunConfig& c) {
                         std::string out;
                         for (std::size_t i = 0; i < c.species.isotopes.size(); ++i)
                             out += (i ? ", " : "") + c.species.isotopes[i].name;
                         return out;
                     }});
        t.push_back({"species.isotope_masses",
                     [](RunConfig&, Pending& p, std::string_view v) {
                         p.masses = parse_list(v, "species.isotope_masses");
                     },
                     [](const RunConfig& c) {
                         std::vector<double> v;
                         for (const auto& i : c.species.isotopes) v.push_back(i.mass);
                         return join(v);
                     }});
        t.push_back({"species.abundances",
                     [](RunConfig&, Pending& p, std::string_view v) { p.abundances = parse_list(v, "species.abundances"); },
                     [](const RunConfig& c) {
                         std::vector<double> v;
                         for (const auto& i : c.species.isotopes) v.push_back(i.natural_abundance);
                         return join(v);
                     }});
        t.push_back({"species.isotope_shifts_272",
                     [](RunConfig&, Pending& p, std::string_view v) {
                         p.shifts = parse_list(v, "species.isotope_shifts_272");
                     },
                     [](const RunConfig& c) {
                         std::vector<double> v;
                         for (const auto& i : c.species.isotopes) v.push_back(i.isotope_shift_272);
                         return join(v);
                     }});
        t.push_back(ABLATRON_SCALAR("species.ionization_potential", species.ionization_potential));
        t.push_back(ABLATRON_SCALAR("species.vapor_a", species.vapor_pressure.a));
        t.push_back(ABLATRON_SCALAR("species.vapor_b", species.vapor_pressure.b));
        t.push_back(ABLATRON_SCALAR("species.density", species.density));
        t.push_back(ABLATRON_SCALAR("species.specific_heat", species.specific_heat));
        t.push_back(ABLATRON_SCALAR("species.thermal_conductivity", species.thermal_conductivity));
        t.push_back(ABLATRON_SCALAR("species.reflectivity_1064", species.reflectivity_1064));

        t.push_back(ABLATRON_SCALAR("ablation_laser.wavelength", ablation_laser.wavelength));
        t.push_back(ABLATRON_SCALAR("ablation_laser.max_pulse_energy", ablation_laser.max_pulse_energy));
        t.push_back(ABLATRON_SCALAR("ablation_laser.knee_rate", ablation_laser.knee_rate));
        t.push_back(ABLATRON_SCALAR("ablation_laser.inverse_rate", ablation_laser.inverse_rate));
        t.push_back(ABLATRON_SCALAR("ablation_laser.max_rep_rate", ablation_laser.max_rep_rate));
        t.push_back(ABLATRON_SCALAR("ablation_laser.pulse_duration", ablation_laser.pulse_duration));
        t.push_back(ABLATRON_SCALAR("ablation_laser.waist", ablation_laser.waist));
        t.push_back(ABLATRON_SCALAR("ablation_laser.incidence_angle", ablation_laser.incidence_angle));
        t.push_back(ABLATRON_SCALAR("ablation_laser.dither_area", ablation_laser.dither_area));

        t.push_back(ABLATRON_SCALAR("ablation.rep_rate", ablation.rep_rate));
        t.push_back(ABLATRON_SCALAR("ablation.fluence", ablation.fluence));
        t.push_back(ABLATRON_SCALAR("ablation.plasma_threshold", ablation.plasma_threshold));
        t.push_back(ABLATRON_SCALAR("ablation.yield_scale", ablation.yield_scale));
        t.push_back(ABLATRON_SCALAR("ablation.rydberg_fraction", ablation.rydberg_fraction));
        t.push_back(ABLATRON_SCALAR("ablation.ambient_temperature", ablation.ambient_temperature));
        t.push_back({"ablation.mean_field",
                     [](RunConfig& c, Pending&, std::string_view v) {
                         c.ablation.mean_field = parse_bool(v, "ablation.mean_field");
                     },
                     [](const RunConfig& c) { return std::string(c.ablation.mean_field ? "true" : "false"); }});

        t.push_back(ABLATRON_SCALAR("target.initial_contaminant_coverage", target.initial_contaminant_coverage));
        t.push_back(ABLATRON_SCALAR("target.contaminant_decay_per_pulse", target.contaminant_decay_per_pulse));
        t.push_back(ABLATRON_SCALAR("target.depth_threshold", target.depth.threshold));
        t.push_back(ABLATRON_SCALAR("target.depth_slope", target.depth.slope));
        t.push_back(ABLATRON_SCALAR("target.melt_churn", target.depth.melt_churn));

        for (auto [section, member] : {std::pair{std::string("pi_laser"), &RunConfig::pi_laser},
                                       std::pair{std::string("cooling_laser"), &RunConfig::cooling_laser},
                                       std::pair{std::string("repumper"), &RunConfig::repumper}}) {
            t.push_back(laser_key(section, member, "wavelength", &IonLaserSpec::wavelength));
            t.push_back(laser_key(section, member, "power", &IonLaserSpec::power));
            t.push_back(laser_key(section, member, "waist", &IonLaserSpec::waist_at_trap));
            t.push_back(laser_key(section, member, "detuning", &IonLaserSpec::detuning));
            t.push_back(laser_key(section, member, "linewidth", &IonLaserSpec::linewidth));
        }

        t.push_back(ABLATRON_SCALAR("geometry.distance", geometry.target_trap_distance));
        t.push_back(ABLATRON_SCALAR("geometry.aperture_width", geometry.aperture_width));
        t.push_back(ABLATRON_SCALAR("geometry.aperture_height", geometry.aperture_height));
        t.push_back(ABLATRON_SCALAR("geometry.pi_laser_angle", geometry.beam_pi_laser_angle));
        t.push_back(ABLATRON_SCALAR("geometry.emission_axis_tilt", geometry.emission_axis_tilt));

        t.push_back(ABLATRON_SCALAR("photoionization.resonant_linewidth", photoionization.resonant_linewidth));
        t.push_back(ABLATRON_SCALAR("photoionization.saturation_intensity", photoionization.saturation_intensity));
        t.push_back(ABLATRON_SCALAR("photoionization.cross_section", photoionization.ionization_cross_section));
        t.push_back(ABLATRON_SCALAR("photoionization.rydberg_saturation_power",
                                    photoionization.rydberg_saturation_power));
        t.push_back(ABLATRON_SCALAR("photoionization.rydberg_max_probability",
                                    photoionization.rydberg_max_probability));
        t.push_back(ABLATRON_SCALAR("photoionization.rydberg_binding", photoionization.rydberg_binding));
        t.push_back(ABLATRON_SCALAR("photoionization.autoionization_width", photoionization.autoionization_width));

        t.push_back(ABLATRON_SCALAR("trap.r0", trap.r0));
        t.push_back(ABLATRON_SCALAR("trap.drive_frequency", trap.drive_frequency));
        t.push_back(ABLATRON_SCALAR("trap.rf_amplitude", trap.rf_amplitude));
        t.push_back(ABLATRON_SCALAR("trap.endcap_voltage", trap.endcap_voltage));
        t.push_back(ABLATRON_SCALAR("trap.geometric_efficiency", trap.geometric_efficiency));
        t.push_back(ABLATRON_SCALAR("trap.depth_prefactor", trap.depth_prefactor));
        t.push_back(ABLATRON_SCALAR("trap.heating_time", trap.heating_time));
        t.push_back(ABLATRON_SCALAR("trap.dark_rate_per_mbar", trap.dark_rate_per_mbar));
        t.push_back(ABLATRON_SCALAR("trap.dark_dwell", trap.dark_dwell));

        t.push_back(ABLATRON_SCALAR("vacuum.base_pressure", vacuum.base_pressure));
        t.push_back(ABLATRON_SCALAR("vacuum.pump_speed", vacuum.pump_speed));
        t.push_back(ABLATRON_SCALAR("vacuum.chamber_volume", vacuum.chamber_volume));
        t.push_back(ABLATRON_SCALAR("vacuum.gas_per_pulse", vacuum.gas_per_pulse));
        t.push_back(ABLATRON_SCALAR("vacuum.contaminant_gas_per_pulse", vacuum.contaminant_gas_per_pulse));

        t.push_back(ABLATRON_SCALAR("diagnostics.detection_efficiency", diagnostics.detection_efficiency));
        t.push_back(ABLATRON_SCALAR("diagnostics.bin_width", diagnostics.bin_width));
        t.push_back(ABLATRON_SCALAR("diagnostics.background_rate", diagnostics.background_rate));
        t.push_back(ABLATRON_SCALAR("diagnostics.suppressed_fraction", diagnostics.suppressed_fraction));
        t.push_back(ABLATRON_SCALAR("diagnostics.ion_count_interval", diagnostics.ion_count_interval));
        t.push_back({"diagnostics.window",
                     [](RunConfig& c, Pending&, std::string_view v) {
                         c.diagnostics.detector.window = static_cast<int>(parse_quantity(v, "diagnostics.window"));
                     },
                     [](const RunConfig& c) { return std::to_string(c.diagnostics.detector.window); }});
        t.push_back(ABLATRON_SCALAR("diagnostics.threshold_sigma", diagnostics.detector.threshold_sigma));
        t.push_back(ABLATRON_SCALAR("diagnostics.min_separation", diagnostics.detector.min_separation));

        t.push_back(ABLATRON_SCALAR("drift.amplitude", drift.amplitude));
        t.push_back(ABLATRON_SCALAR("drift.period", drift.period));

        t.push_back({"depth_scan.fluences",
                     [](RunConfig& c, Pending&, std::string_view v) {
                         c.depth_scan.fluences = parse_list(v, "depth_scan.fluences");
                     },
                     [](const RunConfig& c) { return join(c.depth_scan.fluences); }});
        t.push_back(ABLATRON_SCALAR("depth_scan.n_pulses", depth_scan.n_pulses));

        t.push_back({"gating.intervals",
                     [](RunConfig& c, Pending&, std::string_view v) {
                         c.gating_schedule.clear();
                         for (const auto& item : split_list(v)) {
                             auto colon = item.find(':');
                             if (colon == std::string::npos)
                                 throw Error(ErrorKind::MalformedDocument, "gating.intervals",
                                             "intervals are 'start:end' pairs in seconds");
                             c.gating_schedule.push_back(
                                 {parse_quantity(std::string_view(item).substr(0, colon), "gating.intervals"),
                                  parse_quantity(std::string_view(item).substr(colon + 1), "gating.intervals")});
                         }
                     },
                     [](const RunConfig& c) {
                         std::string out;
                         for (std::size_t i = 0; i < c.gating_schedule.size(); ++i) {
                             if (i) out += ", ";
                             out += format_double(c.gating_schedule[i].on_start) + ":" +
                                    format_double(c.gating_schedule[i].on_end);
                         }
                         return out;
                     }});
        t.push_back({"gating.on_time",
                     [](RunConfig&, Pending& p, std::string_view v) { p.on_time = parse_quantity(v, "gating.on_time"); },
                     nullptr});
        t.push_back({"gating.off_time",
                     [](RunConfig&, Pending& p, std::string_view v) {
                         p.off_time = parse_quantity(v, "gating.off_time");
                     },
                     nullptr});

        t.push_back(controller_key(
            "mode", [](ControllerParams& cp, std::string_view v, std::string_view k) { cp.mode = parse_mode(v, k); },
            [](const ControllerParams& cp) { return mode_name(cp.mode); }));
        t.push_back(controller_key(
            "target_ion_count",
            [](ControllerParams& cp, std::string_view v, std::string_view k) {
                cp.target_ion_count = static_cast<int>(parse_quantity(v, k));
            },
            [](const ControllerParams& cp) { return std::to_string(cp.target_ion_count); }));
        t.push_back(controller_key(
            "shutter_latency",
            [](ControllerParams& cp, std::string_view v, std::string_view k) { cp.shutter_latency = parse_quantity(v, k); },
            [](const ControllerParams& cp) { return format_double(cp.shutter_latency); }));
        t.push_back(controller_key(
            "settle_time",
            [](ControllerParams& cp, std::string_view v, std::string_view k) { cp.settle_time = parse_quantity(v, k); },
            [](const ControllerParams& cp) { return format_double(cp.settle_time); }));
        return t;
    }();
    return table;
}

#undef ABLATRON_SCALAR

inline void finalize(RunConfig& c, Pending& p) {
    auto& isos = c.species.isotopes;
    if (p.abundances) {
        double sum = 0.0;
        for (double a : *p.abundances) sum += a;
        if (std::abs(sum - 1.0) > 1e-9)
            throw Error(ErrorKind::InvariantViolation, "species.abundances",
                        "abundances must sum to 1 (got " + format_double(sum) + ")");
    }
    std::size_t n = isos.size();
    if (p.isotope_names) n = p.isotope_names->size();
    else if (p.masses) n = p.masses->size();
    auto check_len = [&](std::size_t len, const char* key) {
        if (len != n)
            throw Error(ErrorKind::InvariantViolation, key,
                        "list length " + std::to_string(len) + " does not match " + std::to_string(n) + " isotopes");
    };
    if (n != isos.size()) {
        if (!p.masses || !p.abundances)
            throw Error(ErrorKind::InvariantViolation, "species.isotope_masses",
                        "changing the isotope count requires masses and abundances");
        isos.assign(n, Isotope{});
        for (std::size_t i = 0; i < n; ++i) isos[i].name = "iso" + std::to_string(i);
    }
    if (p.isotope_names) {
        check_len(p.isotope_names->size(), "species.isotope_names");
        for (std::size_t i = 0; i < n; ++i) isos[i].name = (*p.isotope_names)[i];
    }
    if (p.masses) {
        check_len(p.masses->size(), "species.isotope_masses");
        for (std::size_t i = 0; i < n; ++i) isos[i].mass = (*p.masses)[i];
    }
    if (p.abundances) {
        check_len(p.abundances->size(), "species.abundances");
        for (std::size_t i = 0; i < n; ++i) isos[i].natural_abundance = (*p.abundances)[i];
    }
    if (p.shifts) {
        check_len(p.shifts->size(), "species.isotope_shifts_272");
        for (std::size_t i = 0; i < n; ++i) isos[i].isotope_shift_272 = (*p.shifts)[i];
    }
    if (p.on_time || p.off_time) {
        if (!p.on_time || !p.off_time)
            throw Error(ErrorKind::MalformedDocument, "gating.on_time", "on_time and off_time go together");
        if (!c.gating_schedule.empty())
            throw Error(ErrorKind::MalformedDocument, "gating.intervals", "use either intervals or on_time/off_time");
        if (!(*p.on_time > 0.0) || !(*p.off_time >= 0.0))
            throw Error(ErrorKind::InvariantViolation, "gating.on_time", "on_time > 0 and off_time >= 0");
        const double period = *p.on_time + *p.off_time;
        for (double t = 0.0; t < c.duration - 1e-12; t += period)
            c.gating_schedule.push_back({t, std::min(t + *p.on_time, c.duration)});
    }
    if (p.controller_seen) c.controller = p.controller;
}

}  // namespace detail

inline RunConfig build_config(const ConfigDocument& doc) {
    RunConfig c;
    detail::Pending pending;
    const auto& table = detail::key_table();
    for (const auto& e : doc.entries) {
        if (e.key.rfind("species.level.", 0) == 0) {
            c.species.level_energies[e.key.substr(14)] = parse_quantity(e.value, e.key);
            continue;
        }
        auto it = std::find_if(table.begin(), table.end(), [&](const auto& b) { return b.key == e.key; });
        if (it == table.end())
            throw Error(ErrorKind::UnknownKey, e.key,
                        "not a recognised key" + (e.line ? " (line " + std::to_string(e.line) + ")" : std::string()));
        it->set(c, pending, e.value);
    }
    detail::finalize(c, pending);
    validate(c);
    return c;
}

/// Text -> validated RunConfig with defaults filled in.
inline RunConfig parse_config(std::string_view text) { return build_config(parse_document(text)); }

/// Writes every key in internal units. parse_config(serialize_config(c)) == c.
inline std::string serialize_config(const RunConfig& c) {
    std::ostringstream out;
    std::string section;
    for (const auto& b : detail::key_table()) {
        if (!b.get) continue;
        auto dot = b.key.find('.');
        auto sec = b.key.substr(0, dot);
        if (sec == "controller" && !c.controller) continue;
        if (sec == "gating" && c.gating_schedule.empty()) continue;
        if (sec != section) {
            if (!section.empty()) out << '\n';
            out << '[' << sec << "]\n";
            section = sec;
            if (sec == "species") {
                for (const auto& [name, e] : c.species.level_energies)
                    out << "level." << name << " = " << format_double(e) << '\n';
            }
        }
        out << b.key.substr(dot + 1) << " = " << b.get(c) << '\n';
    }
    return out.str();
}

/// ABLATRON_SEED, when set, replaces the configured seed.
inline void apply_environment(RunConfig& c) {
    if (const char* s = std::getenv("ABLATRON_SEED")) {
        try {
            c.rng_seed = std::stoull(s);
        } catch (const std::exception&) {
            throw Error(ErrorKind::MalformedDocument, "ABLATRON_SEED", "expected unsigned integer");
        }
    }
}

}  // namespace ablatron
