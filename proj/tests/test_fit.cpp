#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ablatron/fit.hpp"
#include "ablatron/rng.hpp"

using namespace ablatron;

namespace {

std::vector<double> hinge(const std::vector<double>& f, double th, double slope, double n) {
    std::vector<double> d;
    for (double x : f) d.push_back(n * std::max(0.0, slope * (x - th)));
    return d;
}

std::vector<double> span(double lo, double hi, int n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(lo + (hi - lo) * i / (n - 1));
    return v;
}

}  // namespace

TEST(Linear, ExactLine) {
    const auto f = fit_linear({0, 1, 2, 3}, {1, 3, 5, 7});
    EXPECT_NEAR(f.slope, 2, 1e-12);
    EXPECT_NEAR(f.intercept, 1, 1e-12);
    EXPECT_NEAR(f.r_squared, 1, 1e-12);
    EXPECT_THROW(fit_linear({1, 1}, {2, 3}), Error);
}

TEST(Threshold, NoiselessRecovery) {
    const auto f = span(3000, 15000, 12);  // J/m^2
    const auto d = hinge(f, 6000, 2.5e-15, 4.6e6);
    const auto r = fit_threshold(f, d, 4.6e6);
    EXPECT_NEAR(r["threshold"] / 6000, 1.0, 5e-3);
    EXPECT_NEAR(r["slope"] / 2.5e-15, 1.0, 5e-3);
    EXPECT_TRUE(r.identifiable);
}

TEST(Threshold, FivePercentNoiseNinetyFifthPercentile) {
    const auto f = span(3000, 15000, 12);
    const auto clean = hinge(f, 6000, 2.5e-15, 4.6e6);
    std::vector<double> err;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        auto rng = make_stream(seed, Stream::Ablation);
        std::normal_distribution<double> noise(1.0, 0.05);
        auto d = clean;
        for (auto& x : d) x *= noise(rng);
        err.push_back(std::abs(fit_threshold(f, d, 4.6e6)["threshold"] / 6000 - 1));
    }
    std::sort(err.begin(), err.end());
    EXPECT_LE(err[94], 0.05);
}

TEST(Threshold, DegenerateInputs) {
    auto kind = [](const std::vector<double>& f, const std::vector<double>& d) {
        try {
            fit_threshold(f, d);
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::InvariantViolation;
    };
    EXPECT_EQ(kind({1, 2, 3}, {0, 0, 1}), ErrorKind::DegenerateData);
    EXPECT_EQ(kind({1, 2, 3, 4}, {0, 0, 0, 0}), ErrorKind::DegenerateData);
    EXPECT_EQ(kind({1, 2, 3, 4}, {1, 2, 3, 4}), ErrorKind::DegenerateData);
    EXPECT_EQ(kind({1, 2, 3, 4}, {0, 0, 1}), ErrorKind::DegenerateData);
}

TEST(Saturation, ExactRecovery) {
    const std::vector<double> p{0.25e-3, 0.5e-3, 1e-3, 2e-3, 5e-3, 10e-3, 20e-3, 40e-3};
    std::vector<double> r;
    for (double x : p) r.push_back(200 * x / (x + 5e-3));
    const auto f = fit_saturation(p, r);
    EXPECT_NEAR(f["r_max"] / 200, 1.0, 1e-8);
    EXPECT_NEAR(f["p_sat"] / 5e-3, 1.0, 1e-8);
    EXPECT_NEAR(f["linear_slope"], 200 / 5e-3, 1e-4);
    EXPECT_LT(f.residual_norm, 1e-8);
    EXPECT_TRUE(f.identifiable);
}

TEST(Saturation, NoisyRoundTrip) {
    const std::vector<double> p{0.25e-3, 0.5e-3, 1e-3, 2e-3, 5e-3, 10e-3, 20e-3, 40e-3, 80e-3};
    auto rng = make_stream(51, Stream::Ionization);
    std::normal_distribution<double> noise(1.0, 0.01);
    std::vector<double> r;
    for (double x : p) r.push_back(50 * x / (x + 5e-3) * noise(rng));
    const auto f = fit_saturation(p, r);
    EXPECT_NEAR(f["r_max"] / 50, 1.0, 0.05);
    EXPECT_NEAR(f["p_sat"] / 5e-3, 1.0, 0.05);
    EXPECT_GT(f.covariance_diagonal.at("p_sat"), 0.0);
}

TEST(Saturation, LinearOnlyDataIsUnidentifiable) {
    const std::vector<double> p{1e-6, 2e-6, 3e-6, 4e-6, 5e-6};
    auto rng = make_stream(52, Stream::Ionization);
    std::normal_distribution<double> noise(1.0, 0.01);
    std::vector<double> r;
    for (double x : p) r.push_back(200 * x / (x + 5e-3) * noise(rng));
    const auto f = fit_saturation(p, r);
    EXPECT_FALSE(f.identifiable);
    EXPECT_GT(f.relative_conditioning, 1e3);
    EXPECT_NEAR(f["linear_slope"] / (200 / 5e-3), 1.0, 0.05);
}

TEST(Saturation, DegenerateInputs) {
    EXPECT_THROW(fit_saturation({1, 2}, {1, 2}), Error);
    EXPECT_THROW(fit_saturation({1, 2, 3}, {0, 0, 0}), Error);
    EXPECT_THROW(fit_saturation({1, 1, 1}, {1, 2, 3}), Error);
    EXPECT_THROW(fit_saturation({-1, 2, 3}, {1, 2, 3}), Error);
}
