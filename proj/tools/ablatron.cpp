// ablatron command-line front end: simulate, sweep, calibrate, fit, report.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "ablatron/ablatron.hpp"

namespace fs = std::filesystem;
using namespace ablatron;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_physics = 3;

RunConfig load_config(const std::string& path) {
    auto cfg = parse_config(detail::read_file(path));
    apply_environment(cfg);
    validate(cfg);
    return cfg;
}

/// Plain numbers are taken in `default_unit`; anything with a suffix goes
/// through the unit table.
double quantity(const std::string& text, const std::string& key, double default_unit) {
    std::size_t used = 0;
    try {
        const double v = std::stod(text, &used);
        if (used == text.size()) return v * default_unit;
    } catch (const std::exception&) {
    }
    return parse_quantity(text, key);
}

int cmd_simulate(const std::string& config_path, const std::string& out, std::optional<std::uint64_t> seed) {
    auto cfg = load_config(config_path);
    if (seed) cfg.rng_seed = *seed;
    const auto result = run_scenario(Scenario{cfg.name, cfg, {}});
    std::vector<DepthPoint> depth;
    if (!cfg.depth_scan.fluences.empty()) depth = run_depth_scan(cfg);
    const fs::path dir = out.empty() ? fs::path("runs") / cfg.name : fs::path(out);
    write_run_dir(dir, cfg, result, depth.empty() ? nullptr : &depth);
    std::cout << "run-dir = " << dir.string() << "\n";
    std::cout << summary_lines(result);
    return exit_ok;
}

struct Variation {
    std::string key;
    double lo = 0.0, hi = 0.0;
    int n = 0;
};

Variation parse_variation(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
        throw Error(ErrorKind::MalformedDocument, "--vary", "expected key=lo:hi:n, got '" + spec + "'");
    Variation v;
    v.key = spec.substr(0, eq);
    std::vector<std::string> fields;
    std::string rest = spec.substr(eq + 1);
    std::size_t start = 0;
    for (std::size_t i = 0; i <= rest.size(); ++i) {
        if (i == rest.size() || rest[i] == ':') {
            fields.push_back(rest.substr(start, i - start));
            start = i + 1;
        }
    }
    if (fields.size() != 3) throw Error(ErrorKind::MalformedDocument, "--vary", "expected key=lo:hi:n");
    v.lo = parse_quantity(fields[0], v.key);
    v.hi = parse_quantity(fields[1], v.key);
    try {
        v.n = std::stoi(fields[2]);
    } catch (const std::exception&) {
        throw Error(ErrorKind::MalformedDocument, "--vary", "n must be an integer");
    }
    if (v.n < 1) throw Error(ErrorKind::InvariantViolation, "--vary", "n >= 1");
    return v;
}

int cmd_sweep(const std::string& config_path, const std::string& vary, const std::string& out, int jobs) {
    const auto base = load_config(config_path);
    const auto var = parse_variation(vary);
    const auto base_doc = parse_document(serialize_config(base));

    std::vector<Scenario> scenarios;
    std::vector<double> values;
    for (int i = 0; i < var.n; ++i) {
        const double value = var.n == 1 ? var.lo : var.lo + (var.hi - var.lo) * i / (var.n - 1);
        auto doc = base_doc;
        doc.set(var.key, format_double(value));
        auto cfg = build_config(doc);
        char suffix[16];
        std::snprintf(suffix, sizeof suffix, "%03d", i);
        cfg.name = base.name + "-" + suffix;
        validate(cfg);
        scenarios.push_back({cfg.name, cfg, {}});
        values.push_back(value);
    }

    std::vector<std::optional<RunResult>> results(scenarios.size());
    std::vector<std::string> errors(scenarios.size());
    std::vector<int> codes(scenarios.size(), exit_ok);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < scenarios.size(); i = next++) {
            try {
                results[i] = run_scenario(scenarios[i]);
            } catch (const Error& e) {
                errors[i] = e.what();
                codes[i] = is_config_error(e.kind()) ? exit_config : exit_physics;
            }
        }
    };
    const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(scenarios.size())));
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    // merged in scenario-name order, independent of completion order
    std::vector<std::size_t> order(scenarios.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scenarios[a].name < scenarios[b].name; });

    const fs::path dir = out.empty() ? fs::path("runs") / (base.name + "-sweep") : fs::path(out);
    fs::create_directories(dir);
    std::string table = "name," + var.key + ",mean_loading_rate_ions_s,final_ion_count,detected_steps\n";
    int code = exit_ok;
    for (auto i : order) {
        if (!results[i]) {
            std::cerr << "error: " << errors[i] << "\n";
            code = std::max(code, codes[i]);
            continue;
        }
        const auto& r = *results[i];
        write_run_dir(dir / scenarios[i].name, scenarios[i].config, r);
        table += scenarios[i].name + "," + format_double(values[i]) + "," + format_double(r.summary.mean_loading_rate) +
                 "," + std::to_string(r.summary.final_ion_count) + "," + std::to_string(r.log.detected.size()) + "\n";
    }
    detail::write_file(dir / "sweep.csv", table);
    std::cout << table;
    return code;
}

int cmd_calibrate(double target, const std::string& fluence_text, const std::string& rate_text,
                  const std::string& config_path) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    const double fluence = quantity(fluence_text, "--fluence", units::mJ_per_cm2);
    const double rate = quantity(rate_text, "--rep-rate", 1.0);
    const auto res = calibrate_yield(target, fluence, rate, cfg);
    std::cout << "yield_scale = " << format_double(res.yield_scale) << "\n"
              << "mean_field_rate_ions_s = " << format_double(res.achieved_rate) << "\n"
              << "iterations = " << res.iterations << "\n";
    return exit_ok;
}

void print_fit(const FitResult& f) {
    for (const auto& [k, v] : f.parameters) std::cout << k << " = " << format_double(v) << "\n";
    for (const auto& [k, v] : f.covariance_diagonal) std::cout << "variance." << k << " = " << format_double(v) << "\n";
    std::cout << "residual_norm = " << format_double(f.residual_norm) << "\n"
              << "relative_conditioning = " << format_double(f.relative_conditioning) << "\n"
              << "identifiable = " << (f.identifiable ? "true" : "false") << "\n";
}

int cmd_fit(const std::string& kind, const std::string& csv_path) {
    const auto table = read_csv(csv_path);
    if (kind == "threshold") {
        const auto f = table.values("fluence_mJ_cm2");
        const auto d = table.values("depth_um");
        double n = 1.0;
        if (std::find(table.header.begin(), table.header.end(), "n_pulses") != table.header.end()) {
            const auto ns = table.values("n_pulses");
            if (!ns.empty()) n = ns.front();
        }
        auto fit = fit_threshold(f, d, n);
        std::cout << "# threshold in mJ/cm2, slope in um per pulse per mJ/cm2\n";
        print_fit(fit);
        return exit_ok;
    }
    if (kind == "saturation") {
        auto fit = fit_saturation(table.values("power_mW"), table.values("rate_ions_s"));
        std::cout << "# r_max in ions/s, p_sat in mW, linear_slope in ions/s per mW\n";
        print_fit(fit);
        return exit_ok;
    }
    throw Error(ErrorKind::MalformedDocument, "fit", "expected 'threshold' or 'saturation', got '" + kind + "'");
}

int cmd_report(const std::string& run_dir) {
    const fs::path dir(run_dir);
    const auto manifest = read_manifest(dir);
    for (const auto& key : {"name", "config_hash", "seed", "code_version"})
        if (!manifest.count(key)) throw Error(ErrorKind::MalformedDocument, "manifest.txt", std::string("missing ") + key);
    std::cout << "run " << manifest.at("name") << " (seed " << manifest.at("seed") << ", config "
              << manifest.at("config_hash") << ", version " << manifest.at("code_version") << ")\n";
    for (const auto& [k, v] : manifest)
        if (k != "name" && k != "seed" && k != "config_hash" && k != "code_version" && k != "artifacts")
            std::cout << "  " << k << " = " << v << "\n";

    const auto counts = read_csv(dir / "ion_count.csv");
    const auto t = counts.values("t_s");
    const auto n = counts.values("ion_count");
    if (t.size() >= 2 && n.back() > n.front()) {
        const auto lin = fit_linear(t, n);
        std::cout << "  ion_count_slope_ions_s = " << format_double(lin.slope) << "\n"
                  << "  ion_count_r_squared = " << format_double(lin.r_squared) << "\n";
    }
    const auto pressure = read_csv(dir / "pressure.csv").values("pressure_mbar");
    if (!pressure.empty())
        std::cout << "  peak_pressure_mbar = " << format_double(*std::max_element(pressure.begin(), pressure.end()))
                  << "\n";
    const auto events = read_csv(dir / "events.csv");
    std::cout << "  detected_steps_in_events_csv = " << events.rows.size() << "\n";
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pulsed-laser-ablation ion trap loading simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ablatron::version));

    std::string config_path, out;
    std::optional<std::uint64_t> seed;
    auto* sim = app.add_subcommand("simulate", "run one scenario and write a run directory");
    sim->add_option("config", config_path, "scenario config file")->required();
    sim->add_option("--out", out, "run directory (default runs/<name>)");
    sim->add_option("--seed", seed, "override the master seed");

    std::string vary;
    int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    auto* sweep = app.add_subcommand("sweep", "run a one-parameter sweep in parallel");
    sweep->add_option("config", config_path, "base config file")->required();
    sweep->add_option("--vary", vary, "key=lo:hi:n, e.g. ablation.fluence=100mJ/cm2:300mJ/cm2:5")->required();
    sweep->add_option("--out", out, "output directory");
    sweep->add_option("--jobs", jobs, "worker threads");

    double target = 0.0;
    std::string fluence, rep_rate;
    auto* cal = app.add_subcommand("calibrate", "find the yield scale that gives a target loading rate");
    cal->add_option("--target-rate", target, "ions/s")->required();
    cal->add_option("--fluence", fluence, "mJ/cm2, or a value with a unit")->required();
    cal->add_option("--rep-rate", rep_rate, "Hz, or a value with a unit")->required();
    cal->add_option("--config", config_path, "base config file (defaults otherwise)");

    std::string fit_kind, csv_path;
    auto* fit = app.add_subcommand("fit", "fit a depth scan (threshold) or power sweep (saturation)");
    fit->add_option("kind", fit_kind, "threshold | saturation")->required();
    fit->add_option("csv", csv_path, "input CSV")->required();

    std::string run_dir;
    auto* report = app.add_subcommand("report", "summarize a run directory");
    report->add_option("run-dir", run_dir, "directory written by simulate")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (*sim) return cmd_simulate(config_path, out, seed);
        if (*sweep) return cmd_sweep(config_path, vary, out, jobs);
        if (*cal) return cmd_calibrate(target, fluence, rep_rate, config_path);
        if (*fit) return cmd_fit(fit_kind, csv_path);
        if (*report) return cmd_report(run_dir);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return is_config_error(e.kind()) ? exit_config : exit_physics;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_physics;
    }
    return exit_ok;
}
