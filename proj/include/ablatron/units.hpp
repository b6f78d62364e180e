#pragma once

// Physical constants and unit handling. Everything inside the library is SI
// except vacuum quantities, which stay in mbar / L / L/s as gauges report them.

#include <cctype>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "ablatron/error.hpp"

namespace ablatron {

namespace constants {
inline constexpr double planck = 6.62607015e-34;        // J s
inline constexpr double speed_of_light = 299792458.0;   // m/s
inline constexpr double elementary_charge = 1.602176634e-19;
inline constexpr double boltzmann = 1.380649e-23;       // J/K
inline constexpr double atomic_mass_unit = 1.66053906660e-27;
inline constexpr double vacuum_permittivity = 8.8541878128e-12;
inline constexpr double pi = std::numbers::pi;
}  // namespace constants

namespace units {
inline constexpr double mJ_per_cm2 = 10.0;  // 1 mJ/cm^2 = 10 J/m^2
inline constexpr double mbar = 100.0;       // Pa
inline constexpr double degree = constants::pi / 180.0;

inline constexpr double to_mJ_per_cm2(double fluence_si) { return fluence_si / mJ_per_cm2; }
inline constexpr double from_mJ_per_cm2(double fluence) { return fluence * mJ_per_cm2; }
inline constexpr double joule_to_ev(double e) { return e / constants::elementary_charge; }
inline constexpr double ev_to_joule(double e) { return e * constants::elementary_charge; }
}  // namespace units

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::optional<double> unit_factor(std::string_view unit) {
    struct Entry {
        std::string_view name;
        double factor;
    };
    // Multiplier to the library's internal unit for that dimension.
    static constexpr Entry table[] = {
        {"m", 1.0},        {"cm", 1e-2},        {"mm", 1e-3},       {"um", 1e-6},
        {"nm", 1e-9},      {"s", 1.0},          {"ms", 1e-3},       {"us", 1e-6},
        {"ns", 1e-9},      {"min", 60.0},       {"Hz", 1.0},        {"kHz", 1e3},
        {"MHz", 1e6},      {"GHz", 1e9},        {"J", 1.0},         {"mJ", 1e-3},
        {"uJ", 1e-6},      {"W", 1.0},          {"mW", 1e-3},       {"uW", 1e-6},
        {"J/m2", 1.0},     {"mJ/cm2", 10.0},    {"J/cm2", 1e4},     {"K", 1.0},
        {"V", 1.0},        {"kV", 1e3},         {"eV", 1.0},        {"rad", 1.0},
        {"deg", units::degree},                 {"mbar", 1.0},      {"Pa", 1e-2},
        {"L", 1.0},        {"L/s", 1.0},        {"mbar*L", 1.0},    {"mbar*L/s", 1.0},
        {"kg", 1.0},       {"u", constants::atomic_mass_unit},      {"m2", 1.0},
        {"mm2", 1e-6},     {"kg/m3", 1.0},      {"J/(kg*K)", 1.0},  {"W/(m*K)", 1.0},
        {"W/m2", 1.0},     {"W/cm2", 1e4},      {"cm2", 1e-4},
        {"/s", 1.0},       {"1/s", 1.0},        {"/(mbar*s)", 1.0}, {"ions/s", 1.0},
        {"%", 1e-2},
    };
    for (const auto& e : table) {
        if (e.name == unit) return e.factor;
    }
    return std::nullopt;
}

}  // namespace detail

/// Parses "240 mJ/cm2", "75um", "4e-10 mbar" or a bare number. Bare numbers are
/// taken as already being in internal units.
inline double parse_quantity(std::string_view text, std::string_view key) {
    auto s = detail::trim(text);
    if (s.empty()) throw Error(ErrorKind::MalformedDocument, key, "empty value");
    std::string buf(s);
    std::size_t pos = 0;
    double value = 0.0;
    try {
        value = std::stod(buf, &pos);
    } catch (const std::exception&) {
        throw Error(ErrorKind::MalformedDocument, key, "not a number: '" + buf + "'");
    }
    auto unit = detail::trim(std::string_view(buf).substr(pos));
    if (unit.empty()) return value;
    auto f = detail::unit_factor(unit);
    if (!f) throw Error(ErrorKind::MalformedDocument, key, "unknown unit '" + std::string(unit) + "'");
    return value * *f;
}

}  // namespace ablatron
