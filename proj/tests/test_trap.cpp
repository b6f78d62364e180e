#include <gtest/gtest.h>

#include <cmath>

#include "ablatron/trap.hpp"

using namespace ablatron;

namespace {

const double m40 = calcium().isotopes[0].mass;

}  // namespace

TEST(Mathieu, DefaultTrapHandValue) {
    EXPECT_NEAR(mathieu_q(TrapParams{}, m40), 0.277, 0.002);
    EXPECT_TRUE(stable(mathieu_q(TrapParams{}, m40)));
}

TEST(Mathieu, InverseInMass) {
    const auto ca = calcium();
    const double q40 = mathieu_q(TrapParams{}, ca.isotopes[0].mass);
    const double q48 = mathieu_q(TrapParams{}, ca.isotopes[5].mass);
    EXPECT_NEAR(q40 / q48, ca.isotopes[5].mass / ca.isotopes[0].mass, 1e-12);
}

TEST(Mathieu, StabilityEdges) {
    TrapParams t;
    t.rf_amplitude = 0;
    EXPECT_FALSE(stable(mathieu_q(t, m40)));
    EXPECT_THROW(require_stable(t, m40), Error);
    t.rf_amplitude = 200 * 0.908 / mathieu_q(TrapParams{}, m40);
    const double edge = t.rf_amplitude;
    t.rf_amplitude = edge * (1 - 1e-9);
    EXPECT_TRUE(stable(mathieu_q(t, m40)));
    t.rf_amplitude = edge * (1 + 1e-9);
    EXPECT_FALSE(stable(mathieu_q(t, m40)));
    try {
        require_stable(t, m40);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnstableTrap);
    }
}

TEST(Crystal, DensityHandValueAndScaling) {
    const TrapParams t;
    const double n0 = crystal_density(t, m40);
    EXPECT_NEAR(n0, 2.8e14, 0.02 * 2.8e14);
    TrapParams t2 = t;
    t2.rf_amplitude = 100;
    EXPECT_NEAR(crystal_density(t2, m40), n0 / 4, 1e-9 * n0);
    t2 = t;
    t2.r0 = 2 * t.r0;
    EXPECT_NEAR(crystal_density(t2, m40), n0 / 16, 1e-9 * n0);
}

TEST(Crystal, VolumeCountRoundTrip) {
    const TrapParams t;
    EXPECT_NEAR(volume_from_count(1000, t, m40), 3.6e-12, 0.05e-12);
    EXPECT_EQ(volume_from_count(0, t, m40), 0.0);
    for (std::uint64_t n = 0; n <= 100000; n += (n < 100 ? 1 : 997))
        EXPECT_EQ(count_from_volume(volume_from_count(n, t, m40), t, m40), n);
}

TEST(Capture, Examples) {
    const TrapParams t;
    const double d = trap_depth_ev(t, m40);
    EXPECT_NEAR(d, 0.277 * 200 / 8, 0.1);
    EXPECT_TRUE(attempt_capture({0.0, 0.1}, t, m40));
    EXPECT_FALSE(attempt_capture({0.0, d}, t, m40));
    EXPECT_FALSE(attempt_capture({t.r0, 0.0}, t, m40));
    EXPECT_FALSE(attempt_capture({-1.01 * t.r0, 0.0}, t, m40));
    EXPECT_TRUE(attempt_capture({0.5 * t.r0, 0.7 * d}, t, m40));
    EXPECT_FALSE(attempt_capture({0.5 * t.r0, 0.8 * d}, t, m40));
}

TEST(Capture, ThermalFractionOracle) {
    // Kinetic energy of a flux-weighted thermal ion is kT * Gamma(2, 1), so
    // the captured fraction at the centre is 1 - (1 + x) e^{-x}, x = D / kT.
    TrapParams t;
    t.depth_prefactor = 0.02;
    const double d = trap_depth_ev(t, m40);
    const double kt = constants::boltzmann * 700 / constants::elementary_charge;
    const double x = d / kt;
    const double oracle = 1 - (1 + x) * std::exp(-x);
    auto rng = make_stream(31, Stream::Trap);
    const int n = 200000;
    int captured = 0;
    for (int i = 0; i < n; ++i) {
        const double e = kt * (-std::log1p(-uniform01(rng)) - std::log1p(-uniform01(rng)));
        captured += attempt_capture({0.0, e}, t, m40);
    }
    EXPECT_NEAR(static_cast<double>(captured) / n, oracle, 4 * std::sqrt(oracle * (1 - oracle) / n));
}

TEST(IonCrystalState, SharedHotWindow) {
    IonCrystal c(TrapParams{}, m40);
    for (int i = 0; i < 4; ++i) c.add_ion(0, 1.0 + 0.05 * i, 0.2);
    EXPECT_EQ(c.count(), 4u);
    EXPECT_TRUE(c.is_hot(1.3));
    EXPECT_NEAR(c.hot_until(), 1.35, 1e-12);
    EXPECT_FALSE(c.is_hot(1.35));
    EXPECT_NEAR(c.volume(), 4 / c.density(), 1e-24);
}

TEST(DarkEvents, ZeroPressureNeverDarkens) {
    IonCrystal c(TrapParams{}, m40);
    for (int i = 0; i < 50; ++i) c.add_ion(0, 0, 0.2);
    auto rng = make_stream(32, Stream::Trap);
    for (int s = 0; s < 10000; ++s)
        EXPECT_EQ(apply_collision_and_heating_events(c, TrapParams{}, 0.0, s * 1e-3, 1e-3, std::nullopt, rng), 0u);
    EXPECT_EQ(c.bright_count(), 50u);
}

TEST(DarkEvents, BernoulliPerStepOracle) {
    TrapParams t;
    t.dark_dwell = 0;  // back to bright by the next step
    IonCrystal c(t, m40);
    for (int i = 0; i < 1000; ++i) c.add_ion(0, 0, 0.2);
    auto rng = make_stream(33, Stream::Trap);
    const double dt = 1e-3;
    const double pressure = 0.1 / (t.dark_rate_per_mbar * dt);  // lambda dt = 0.1
    const int steps = 2000;
    double sum = 0;
    for (int s = 1; s <= steps; ++s) {
        sum += static_cast<double>(apply_collision_and_heating_events(c, t, pressure, s * dt, dt, std::nullopt, rng));
        EXPECT_LE(c.dark_count(), c.count());
    }
    const double mean = 100.0, var = 1000 * 0.1 * 0.9;
    EXPECT_NEAR(sum / steps, mean, 4 * std::sqrt(var / steps));
}

TEST(DarkEvents, DarkIonsRecoverAfterDwell) {
    TrapParams t;
    IonCrystal c(t, m40);
    c.add_ion(0, 0, 0.2);
    c.make_dark(0, 1.0);
    EXPECT_EQ(c.dark_count(), 1u);
    c.recover(0.99);
    EXPECT_EQ(c.dark_count(), 1u);
    c.recover(1.0);
    EXPECT_EQ(c.bright_count(), 1u);
}

TEST(DarkEvents, NewIonIsAddedHot) {
    IonCrystal c(TrapParams{}, m40);
    auto rng = make_stream(34, Stream::Trap);
    apply_collision_and_heating_events(c, TrapParams{}, 4e-10, 2.0, 1e-3, NewIon{3}, rng);
    EXPECT_EQ(c.count(), 1u);
    EXPECT_EQ(c.ions()[0].isotope, 3u);
    EXPECT_TRUE(c.is_hot(2.1));
}
