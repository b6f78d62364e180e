#include <gtest/gtest.h>

#include <cmath>

#include "ablatron/beam.hpp"

using namespace ablatron;

namespace {

const double m40 = 40.0 * constants::atomic_mass_unit;

// Simpson quadrature of v^n f(v) with f ~ v^3 exp(-m v^2 / 2kT), normalized.
double flux_moment(double temperature, double mass, double n) {
    const double a = mass / (2 * constants::boltzmann * temperature);
    const double vmax = 12.0 / std::sqrt(a);
    const int steps = 200000;
    const double h = vmax / steps;
    double num = 0, den = 0;
    for (int i = 0; i <= steps; ++i) {
        const double v = i * h;
        const double w = (i == 0 || i == steps) ? 1 : (i % 2 ? 4 : 2);
        const double f = v * v * v * std::exp(-a * v * v);
        den += w * f;
        if (v > 0) num += w * f * std::pow(v, n);
    }
    return num / den;
}

AtomBurst burst_of(std::uint64_t n, double temperature) {
    AtomBurst b;
    b.n_atoms = n;
    b.surface_temperature = temperature;
    return b;
}

SpeciesData only_40() {
    auto s = calcium();
    s.isotopes = {{"40", m40, 1.0, 0.0}};
    return s;
}

}  // namespace

TEST(Acceptance, DefaultGeometry) {
    // 1 mm x 1.5 mm / (pi 0.13^2) = 2.825e-5
    EXPECT_NEAR(acceptance_fraction(BeamGeometry{}), 2.825e-5, 0.005e-5);
}

TEST(Acceptance, InverseSquareAndTilt) {
    BeamGeometry g;
    const double a = acceptance_fraction(g);
    g.target_trap_distance *= 2;
    EXPECT_NEAR(acceptance_fraction(g), a / 4, 1e-15);
    g = BeamGeometry{};
    g.emission_axis_tilt = constants::pi / 3;
    EXPECT_NEAR(acceptance_fraction(g), a / 2, 1e-15);
    g = BeamGeometry{};
    std::swap(g.aperture_width, g.aperture_height);
    EXPECT_DOUBLE_EQ(acceptance_fraction(g), a);
}

TEST(Velocity, QuadratureOracleAt700K) {
    const double oracle = flux_moment(700, m40, 1);
    EXPECT_NEAR(oracle, 717.11, 0.05);
    EXPECT_NEAR(mean_flux_velocity(700, m40), oracle, 1e-6 * oracle);
    auto rng = make_stream(11, Stream::Transport);
    const int n = 1000000;
    double s = 0;
    for (int i = 0; i < n; ++i) {
        const double v = sample_velocity(700, m40, rng);
        ASSERT_GT(v, 0.0);
        s += v;
    }
    EXPECT_NEAR(s / n, oracle, 0.01 * oracle);
}

TEST(Velocity, SampleVarianceMatchesQuadrature) {
    const double m1 = flux_moment(500, m40, 1), m2 = flux_moment(500, m40, 2);
    auto rng = make_stream(12, Stream::Transport);
    const int n = 400000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double v = sample_velocity(500, m40, rng);
        s += v;
        s2 += v * v;
    }
    EXPECT_NEAR(s2 / n - (s / n) * (s / n), m2 - m1 * m1, 0.02 * (m2 - m1 * m1));
}

TEST(Velocity, MeanScalesAsSqrtT) {
    for (double t : {100.0, 400.0, 1600.0})
        EXPECT_NEAR(mean_flux_velocity(4 * t, m40) / mean_flux_velocity(t, m40), 2.0, 1e-12);
}

TEST(Arrival, VelocityOverrideGivesFixedDelay) {
    auto rng = make_stream(13, Stream::Transport);
    BeamGeometry g;
    g.aperture_width = g.aperture_height = 0.4;  // accept nearly everything
    ArrivalOptions opts;
    opts.velocity_override = 650.0;
    auto b = burst_of(1000000, 400);
    b.emission_time = 2.0;
    const auto p = arrival_profile(b, g, only_40(), rng, opts);
    ASSERT_GT(p.n_accepted, 0u);
    EXPECT_NEAR(p.mean_delay(), 200e-6, 1e-9);
    for (double t : p.arrival_times) EXPECT_NEAR(t - 2.0, 200e-6, 1e-12);
}

TEST(Arrival, MeanDelayMatchesInverseVelocityMoment) {
    auto rng = make_stream(14, Stream::Transport);
    BeamGeometry g;
    g.aperture_width = g.aperture_height = 0.4;
    const auto p = arrival_profile(burst_of(3000000, 700), g, only_40(), rng);
    ASSERT_GT(p.n_accepted, 10000u);
    const double oracle = g.target_trap_distance * flux_moment(700, m40, -1);
    EXPECT_NEAR(oracle / g.target_trap_distance, 1.64283e-3, 1e-7);
    EXPECT_NEAR(p.mean_delay(), oracle, 0.02 * oracle);
    // d / <v> is shorter by exactly 8 / (3 pi) for this distribution
    EXPECT_NEAR(g.target_trap_distance / mean_flux_velocity(700, m40) / oracle, 8.0 / (3 * constants::pi), 1e-4);
}

TEST(Arrival, ConservationAndSortedBins) {
    auto rng = make_stream(15, Stream::Transport);
    BeamGeometry g;
    g.aperture_width = g.aperture_height = 0.1;
    for (std::uint64_t n : {0ull, 1ull, 1000ull, 200000ull}) {
        const auto p = arrival_profile(burst_of(n, 500), g, calcium(), rng);
        EXPECT_EQ(p.n_accepted + p.n_rejected, n);
        EXPECT_EQ(p.arrival_times.size(), p.n_accepted);
        EXPECT_TRUE(std::is_sorted(p.arrival_times.begin(), p.arrival_times.end()));
        double total = 0;
        for (const auto& bin : p.bins) total += bin.flux * 10e-6;
        EXPECT_NEAR(total, static_cast<double>(p.n_accepted), 1e-6 * (1.0 + static_cast<double>(n)));
        for (double v : p.velocities) EXPECT_GT(v, 0.0);
    }
}

TEST(Arrival, EmptyBurstHasEmptyProfile) {
    auto rng = make_stream(16, Stream::Transport);
    const auto p = arrival_profile(burst_of(0, 500), BeamGeometry{}, calcium(), rng);
    EXPECT_TRUE(p.bins.empty());
    EXPECT_EQ(p.mean_delay(), 0.0);
}
