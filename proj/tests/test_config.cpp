#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "ablatron/config.hpp"
#include "ablatron/config_io.hpp"
#include "ablatron/units.hpp"

using namespace ablatron;

namespace {

ErrorKind kind_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error for:\n" << text;
    return ErrorKind::NonBracketable;
}

std::string key_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const Error& e) {
        return e.key();
    }
    return "";
}

}  // namespace

TEST(ParseConfig, EmptyDocumentGivesDefaults) {
    const auto c = parse_config("");
    EXPECT_EQ(c, RunConfig{});
    EXPECT_EQ(c.species.isotopes.front().name, "40Ca");
    EXPECT_DOUBLE_EQ(c.ablation_laser.max_pulse_energy, 80e-6);
    EXPECT_DOUBLE_EQ(c.ablation_laser.waist, 75e-6);
    EXPECT_DOUBLE_EQ(c.trap.r0, 2.35e-3);
    EXPECT_DOUBLE_EQ(c.trap.drive_frequency, 4.0e6);
    EXPECT_DOUBLE_EQ(c.geometry.target_trap_distance, 0.13);
    EXPECT_DOUBLE_EQ(c.vacuum.base_pressure, 4e-10);
}

TEST(ParseConfig, AbundanceSumViolationNamesKey) {
    const std::string doc =
        "[species]\nisotope_names = a, b\nisotope_masses = 40 u, 44 u\nabundances = 0.5, 0.6\n"
        "isotope_shifts_272 = 0, 0\n";
    EXPECT_EQ(kind_of(doc), ErrorKind::InvariantViolation);
    EXPECT_EQ(key_of(doc), "species.abundances");
}

TEST(ParseConfig, ZeroWaistIsInvariantViolation) {
    EXPECT_EQ(kind_of("[ablation_laser]\nwaist = 0\n"), ErrorKind::InvariantViolation);
    EXPECT_EQ(key_of("[ablation_laser]\nwaist = 0\n"), "ablation_laser.waist");
}

TEST(ParseConfig, UnknownKeyAndMalformedLines) {
    EXPECT_EQ(kind_of("[trap]\nrf_amplitud = 200 V\n"), ErrorKind::UnknownKey);
    EXPECT_EQ(key_of("[trap]\nrf_amplitud = 200 V\n"), "trap.rf_amplitud");
    EXPECT_EQ(kind_of("[trap\nr0 = 1 mm\n"), ErrorKind::MalformedDocument);
    EXPECT_EQ(kind_of("[trap]\nr0 1 mm\n"), ErrorKind::MalformedDocument);
    EXPECT_EQ(kind_of("[trap]\nr0 = 1 parsec\n"), ErrorKind::MalformedDocument);
    EXPECT_EQ(kind_of("[trap]\nr0 = 1 mm\nr0 = 2 mm\n"), ErrorKind::MalformedDocument);
}

TEST(ParseConfig, UnitSuffixesConvertToSi) {
    const auto c = parse_config(
        "[ablation]\nfluence = 240 mJ/cm2\nrep_rate = 25 kHz\n"
        "[vacuum]\nbase_pressure = 4e-10 mbar\n"
        "[geometry]\npi_laser_angle = 12 deg\n"
        "[pi_laser]\npower = 15 mW\nwaist = 160 um\n");
    EXPECT_DOUBLE_EQ(c.ablation.fluence, 2400.0);
    EXPECT_DOUBLE_EQ(c.ablation.rep_rate, 25e3);
    EXPECT_DOUBLE_EQ(c.vacuum.base_pressure, 4e-10);
    EXPECT_NEAR(c.geometry.beam_pi_laser_angle, 12.0 * constants::pi / 180.0, 1e-15);
    EXPECT_DOUBLE_EQ(c.pi_laser.power, 15e-3);
    EXPECT_NEAR(c.pi_laser.waist_at_trap, 160e-6, 1e-18);
}

TEST(ParseConfig, GatingOnOffExpandsOverDuration) {
    const auto c = parse_config("[run]\nduration = 63\n[gating]\non_time = 9 s\noff_time = 9 s\n");
    ASSERT_EQ(c.gating_schedule.size(), 4u);
    EXPECT_DOUBLE_EQ(c.gating_schedule[1].on_start, 18.0);
    EXPECT_DOUBLE_EQ(c.gating_schedule[3].on_end, 63.0);
}

TEST(ParseConfig, GatingMustBeSortedAndCovered) {
    EXPECT_EQ(kind_of("[gating]\nintervals = 5:6, 1:2\n"), ErrorKind::InvariantViolation);
    EXPECT_EQ(kind_of("[run]\nduration = 3\n[gating]\nintervals = 0:5\n"), ErrorKind::InvariantViolation);
}

TEST(ParseConfig, SerializeParseIsIdempotent) {
    RunConfig c;
    c.name = "roundtrip";
    c.rng_seed = 0xFEEDBEEFull;
    c.ablation.fluence = 123.456789e1;
    c.ablation.mean_field = true;
    c.gating_schedule = {{0.0, 1.5}, {2.0, 3.25}};
    c.duration = 4.0;
    c.controller = ControllerParams{ControllerMode::SingleIonAutoShutter, 3, 0.07, 2.0};
    c.depth_scan.fluences = {1200.0, 6000.0, 9000.0};
    c.species.level_energies["extra"] = 1.25;
    c.drift = {5e6, 30.0};
    const auto once = parse_config(serialize_config(c));
    EXPECT_EQ(once, c);
    EXPECT_EQ(serialize_config(once), serialize_config(c));
    const auto defaults = parse_config(serialize_config(RunConfig{}));
    EXPECT_EQ(defaults, RunConfig{});
}

TEST(ParseConfig, EnvironmentOverridesSeed) {
    RunConfig c;
    ::setenv("ABLATRON_SEED", "4242", 1);
    apply_environment(c);
    ::unsetenv("ABLATRON_SEED");
    EXPECT_EQ(c.rng_seed, 4242u);
    ::setenv("ABLATRON_SEED", "x", 1);
    EXPECT_THROW(apply_environment(c), Error);
    ::unsetenv("ABLATRON_SEED");
}

TEST(Species, DefaultsSatisfyInvariants) {
    const auto s = calcium();
    EXPECT_NO_THROW(validate(s));
    double sum = 0;
    for (const auto& iso : s.isotopes) sum += iso.natural_abundance;
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_NEAR(s.level("metastable_1D2"), 2.709, 1e-3);
    EXPECT_NEAR(s.ionization_potential, 6.113, 1e-3);
}

TEST(Species, BoundLevelAboveIpRejected) {
    auto s = calcium();
    s.level_energies["bogus"] = 7.0;
    EXPECT_THROW(validate(s), Error);
}

TEST(PulseEnergy, PaperAndDerivedPoints) {
    AblationLaserSpec spec;
    EXPECT_NEAR(pulse_energy_at_rate(spec, 2e3), 80e-6, 1e-15);
    EXPECT_NEAR(pulse_energy_at_rate(spec, 15e3), 16e-6, 1e-15);
    EXPECT_NEAR(pulse_energy_at_rate(spec, 25e3), 9.6e-6, 1e-15);
}

TEST(PulseEnergy, ContinuousAtBreakpoints) {
    AblationLaserSpec spec;
    for (double f : {spec.knee_rate, spec.inverse_rate}) {
        const double left = pulse_energy_at_rate(spec, f * (1 - 1e-14));
        const double right = pulse_energy_at_rate(spec, f * (1 + 1e-14));
        EXPECT_LT(std::abs(left - right), 1e-12 * spec.max_pulse_energy) << f;
    }
}

TEST(PulseEnergy, MonotoneOverScan) {
    AblationLaserSpec spec;
    double prev = INFINITY;
    for (int i = 1; i <= 10000; ++i) {
        const double f = spec.max_rep_rate * i / 10000.0;
        const double e = pulse_energy_at_rate(spec, f);
        EXPECT_LE(e, prev) << f;
        prev = e;
    }
}

TEST(PulseEnergy, ConstantAveragePowerOnInverseBranch) {
    AblationLaserSpec spec;
    const double p0 = pulse_energy_at_rate(spec, spec.inverse_rate) * spec.inverse_rate;
    for (double f = spec.inverse_rate; f <= spec.max_rep_rate; f += 1234.5)
        EXPECT_NEAR(pulse_energy_at_rate(spec, f) * f / p0, 1.0, 1e-12);
}

TEST(PulseEnergy, OutOfRangeRates) {
    AblationLaserSpec spec;
    for (double f : {0.0, -1.0, 200e3 + 1.0}) {
        try {
            pulse_energy_at_rate(spec, f);
            ADD_FAILURE() << f;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::RateOutOfRange);
        }
    }
}

TEST(PhotonEnergy, HandValues) {
    EXPECT_NEAR(photon_energy(397e-9), 3.123, 1e-3);
    EXPECT_NEAR(photon_energy(272e-9), 4.558, 1e-3);
    EXPECT_LT(photon_energy(1e3), 1e-8);
}

TEST(PhotonEnergy, OrderedByWavelength) {
    for (double a = 100e-9; a < 2e-6; a *= 1.37)
        for (double b = 100e-9; b < 2e-6; b *= 1.53)
            EXPECT_EQ(photon_energy(a) > photon_energy(b), a < b);
}

TEST(Fluence, PeakConventionRoundTrip) {
    AblationLaserSpec spec;
    const double e = 80e-6;
    const double f = fluence_from_energy(spec, e);
    // 2 E cos(30 deg) / (pi w^2) by hand: 7.84e3 J/m^2 = 784 mJ/cm^2
    EXPECT_NEAR(units::to_mJ_per_cm2(f), 784.1, 0.5);
    EXPECT_NEAR(energy_from_fluence(spec, f), e, 1e-18);
    EXPECT_NEAR(spot_area(spec), constants::pi * 75e-6 * 75e-6 / std::cos(constants::pi / 6), 1e-20);
}
