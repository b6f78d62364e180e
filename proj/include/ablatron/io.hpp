#pragma once

// Run-directory persistence: CSV traces, manifest, gnuplot .dat files and a
// plot-spec text file. Everything written here is byte-deterministic for a
// given (config, seed).

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ablatron/config_io.hpp"
#include "ablatron/engine.hpp"
#include "ablatron/error.hpp"
#include "ablatron/rng.hpp"
#include "ablatron/units.hpp"
#include "ablatron/version.hpp"

namespace ablatron {

namespace fs = std::filesystem;

inline std::string config_hash(const RunConfig& cfg) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(serialize_config(cfg))));
    return buf;
}

namespace detail {

inline void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::InvariantViolation, path.string(), "cannot open for writing");
    out << text;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::MalformedDocument, path.string(), "cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace detail

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw Error(ErrorKind::MalformedDocument, name, "no such CSV column");
    }
    std::vector<double> values(const std::string& name) const {
        const auto c = column(name);
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(r.at(c));
        return v;
    }
};

inline CsvTable parse_csv(const std::string& text, const std::string& source = "csv") {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = std::string(detail::trim(line));
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.emplace_back(detail::trim(cell));
        if (t.header.empty()) {
            t.header = cells;
            continue;
        }
        if (cells.size() != t.header.size())
            throw Error(ErrorKind::MalformedDocument, source,
                        "line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) + " cells");
        std::vector<double> row;
        for (const auto& c : cells) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(c, &used));
                if (used != c.size()) throw std::invalid_argument(c);
            } catch (const std::exception&) {
                throw Error(ErrorKind::MalformedDocument, source,
                            "line " + std::to_string(line_no) + ": '" + c + "' is not a number");
            }
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw Error(ErrorKind::MalformedDocument, source, "empty CSV");
    return t;
}

inline CsvTable read_csv(const fs::path& path) { return parse_csv(detail::read_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Writers

inline std::string events_csv(const EventLog& log) {
    std::string s = "t_s,ion_index\n";
    for (const auto& e : log.detected) s += format_double(e.time) + "," + std::to_string(e.ion_index) + "\n";
    return s;
}

inline std::string captures_csv(const EventLog& log, const SpeciesData& species) {
    std::string s = "arrival_s,pulse_s,isotope,channel,velocity_m_s,captured\n";
    for (const auto& r : log.ions)
        s += format_double(r.arrival_time) + "," + format_double(r.pulse_time) + "," + species.isotopes[r.isotope].name +
             "," + to_string(r.channel) + "," + format_double(r.velocity) + "," + (r.captured ? "1" : "0") + "\n";
    return s;
}

inline std::string fluorescence_csv(const FluorescenceTrace& tr) {
    std::string s = "t_s,counts\n";
    for (std::size_t i = 0; i < tr.counts.size(); ++i)
        s += format_double(tr.bin_time(i)) + "," + std::to_string(tr.counts[i]) + "\n";
    return s;
}

inline std::string pressure_csv(const PressureTrace& tr) {
    std::string s = "t_s,pressure_mbar\n";
    for (const auto& p : tr) s += format_double(p.time) + "," + format_double(p.pressure) + "\n";
    return s;
}

inline std::string ion_count_csv(const std::vector<CountSample>& series) {
    std::string s = "t_s,ion_count\n";
    for (const auto& c : series) s += format_double(c.time) + "," + std::to_string(c.count) + "\n";
    return s;
}

inline std::string depth_scan_csv(const std::vector<DepthPoint>& points) {
    std::string s = "fluence_mJ_cm2,depth_um,n_pulses\n";
    for (const auto& p : points)
        s += format_double(units::to_mJ_per_cm2(p.fluence)) + "," + format_double(p.depth * 1e6) + "," +
             format_double(p.n_pulses) + "\n";
    return s;
}

inline std::string summary_lines(const RunResult& r) {
    const auto& s = r.summary;
    const auto& l = r.log;
    std::string out;
    auto kv = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
    kv("end_time_s", format_double(s.end_time));
    kv("on_time_s", format_double(s.on_time));
    kv("regime", to_string(s.regime));
    kv("surface_temperature_K", format_double(s.surface_temperature));
    kv("mean_ionization_probability", format_double(s.mean_ionization_probability));
    kv("mean_loading_rate_ions_s", format_double(s.mean_loading_rate));
    kv("final_ion_count", std::to_string(s.final_ion_count));
    kv("pulses_fired", std::to_string(l.pulses_fired));
    kv("atoms_emitted", std::to_string(l.atoms_emitted));
    kv("atoms_rejected", std::to_string(l.atoms_rejected));
    kv("atoms_transited_unionized", std::to_string(l.atoms_transited_unionized));
    kv("rydberg_atoms", std::to_string(l.rydberg_atoms));
    kv("ions_created", std::to_string(l.ions_created));
    kv("ions_captured", std::to_string(l.ions_captured));
    kv("ions_lost_at_birth", std::to_string(l.ions_lost_at_birth));
    kv("dark_transitions", std::to_string(l.dark_transitions));
    kv("detected_steps", std::to_string(l.detected.size()));
    if (l.shutter_time) kv("shutter_time_s", format_double(*l.shutter_time));
    if (s.overshoot) kv("overshoot", std::to_string(*s.overshoot));
    return out;
}

inline std::string plot_spec(bool with_depth) {
    std::string s =
        "# name | data file | x column | y column | x label | y label | style\n"
        "ion_count | ion_count.dat | 1 | 2 | time (s) | ions | steps\n"
        "fluorescence | fluorescence.dat | 1 | 2 | time (s) | counts per bin | lines\n"
        "pressure | pressure.dat | 1 | 2 | time (s) | pressure (mbar) | lines\n";
    if (with_depth) s += "depth_scan | depth_scan.dat | 1 | 2 | fluence (mJ/cm2) | depth (um) | points\n";
    return s;
}

/// CSV body -> whitespace-separated .dat with the header as a comment.
inline std::string csv_to_dat(const std::string& csv) {
    std::string out = "# " + csv;
    std::replace(out.begin(), out.end(), ',', ' ');
    return out;
}

/// Writes run-dir/{manifest.txt, config.conf, events.csv, captures.csv,
/// fluorescence.csv, pressure.csv, ion_count.csv, [depth_scan.csv], plots/}.
inline void write_run_dir(const fs::path& dir, const RunConfig& cfg, const RunResult& r,
                          const std::vector<DepthPoint>* depth = nullptr) {
    fs::create_directories(dir / "plots");
    std::vector<std::pair<std::string, std::string>> files{
        {"events.csv", events_csv(r.log)},
        {"captures.csv", captures_csv(r.log, cfg.species)},
        {"fluorescence.csv", fluorescence_csv(r.fluorescence)},
        {"pressure.csv", pressure_csv(r.pressure)},
        {"ion_count.csv", ion_count_csv(r.ion_count)},
    };
    if (depth) files.emplace_back("depth_scan.csv", depth_scan_csv(*depth));

    const std::string hash = config_hash(cfg);
    std::string manifest;
    manifest += "name = " + r.name + "\n";
    manifest += "config_hash = " + hash + "\n";
    manifest += "seed = " + std::to_string(cfg.rng_seed) + "\n";
    manifest += "code_version = " + std::string(version) + "\n";
    manifest += summary_lines(r);
    manifest += "artifacts = config.conf";
    for (const auto& [name, body] : files) {
        detail::write_file(dir / name, body);
        detail::write_file(dir / "plots" / (name.substr(0, name.size() - 4) + ".dat"), csv_to_dat(body));
        manifest += ", " + name;
    }
    manifest += ", plots/\n";
    detail::write_file(dir / "config.conf", serialize_config(cfg));
    detail::write_file(dir / "plots" / "plots.spec", plot_spec(depth != nullptr));
    detail::write_file(dir / "manifest.txt", manifest);
}

/// key = value lines of a manifest.
inline std::map<std::string, std::string> read_manifest(const fs::path& dir) {
    const auto text = detail::read_file(dir / "manifest.txt");
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        out[std::string(detail::trim(line.substr(0, eq)))] = std::string(detail::trim(line.substr(eq + 1)));
    }
    return out;
}

}  // namespace ablatron
