#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "endlab/volume.hpp"
#include "oracles.hpp"

using namespace endlab;
using std::numbers::e;
using std::numbers::pi;

namespace {

VolumeProfile example1() { return VolumeProfile::oscillating(build_schedule(4, 1, 8, 8, ScheduleMode::example1)); }
VolumeProfile example2() { return VolumeProfile::oscillating(build_schedule(4, 1, 8, 3, ScheduleMode::example2, 2.0)); }

std::vector<VolumeProfile> all_kinds() {
    return {VolumeProfile::power_log(2, 0),   VolumeProfile::power_log(3, 0), VolumeProfile::power_log(1, 0),
            VolumeProfile::power_log(2, 1),   VolumeProfile::power_log(2, -1), VolumeProfile::power_log(1.5, 2, 3.0),
            VolumeProfile::m1(),              VolumeProfile::m3(),             example1(),
            example2()};
}

}  // namespace

TEST(EvalVolume, PurePower) { EXPECT_DOUBLE_EQ(eval_volume(VolumeProfile::power_log(2, 0), 3.0), 9.0); }

TEST(EvalVolume, ZeroAtOrigin) {
    for (const auto& p : all_kinds()) EXPECT_EQ(eval_volume(p, 0.0), 0.0) << p.describe();
}

TEST(EvalVolume, QuadraticStubBelowE) {
    auto p = VolumeProfile::power_log(2, 1);
    EXPECT_NEAR(eval_volume(p, 2.0), 4.0, 1e-12);  // V(e) (r/e)^2 = r^2 since log e = 1
    EXPECT_NEAR(eval_volume(p, e * e), std::pow(e, 4) * 2.0, 1e-9);
}

TEST(EvalVolume, OscillatingPiecesFollowConstruction) {
    auto p2 = example2();
    const auto& t = p2.schedule()->terms()[0];
    // Inside [c_1, d_1): 2 pi r^2 log r.
    const double u = 0.5 * (t.log_c + t.log_d);
    EXPECT_NEAR(p2.log_volume(u), std::log(2 * pi) + 2 * u + std::log(u), 1e-12);
    // Inside [b_1, c_1): 2 pi (r / b)^alpha b^2.
    auto p1 = example1();
    const auto& s = p1.schedule()->terms()[1];
    const double v = 0.5 * (s.log_b + s.log_c);
    EXPECT_NEAR(p1.log_volume(v), std::log(2 * pi) + 4 * (v - s.log_b) + 2 * s.log_b, 1e-12);
    // Below a_1 and on [a_k, b_k): 2 pi r^2.
    EXPECT_NEAR(eval_volume(p1, 10.0), 2 * pi * 100.0, 1e-9);
}

TEST(EvalVolume, M3AtEMatchesStubQuadrature) {
    const double stub = oracle::adaptive_simpson([](double s) { return detail::m3_z_squared(s) * s; }, 0.0, 1.0);
    EXPECT_NEAR(stub, 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(eval_volume(VolumeProfile::m3(), e), 2 * pi * stub + 2 * pi * e * e, 1e-10);
}

TEST(EvalDensity, PurePowerDerivative) { EXPECT_NEAR(eval_density(VolumeProfile::power_log(3, 0), 2.0), 12.0, 1e-12); }

TEST(EvalDensity, PowerLogProductRule) {
    auto p = VolumeProfile::power_log(2, 1);
    const double r = e * e;
    const double fd = oracle::derivative([&](double x) { return eval_volume(p, x); }, r, 1e-4);
    EXPECT_NEAR(eval_density(p, r), 5 * e * e, 1e-9);
    EXPECT_NEAR(fd, 5 * e * e, 1e-5);
}

TEST(EvalDensity, OscillatingRisingPiece) {
    auto p = example1();
    const auto& t = p.schedule()->terms()[0];
    const double r = std::exp(0.5 * (t.log_b + t.log_c));
    const double b = std::exp(t.log_b);
    const double closed = 2 * pi * 4 * std::pow(r, 3) * std::pow(b, -2);
    const double fd = oracle::derivative([&](double x) { return eval_volume(p, x); }, r, r * 1e-6);
    EXPECT_NEAR(eval_density(p, r) / closed, 1.0, 1e-12);
    EXPECT_NEAR(fd / closed, 1.0, 1e-6);
}

TEST(EvalDensity, BreakpointRejected) {
    auto p = example1();
    const double c = std::exp(p.schedule()->terms()[0].log_c);
    try {
        eval_density(p, c);
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), Errc::breakpoint);
    }
    EXPECT_GT(eval_density_one_sided(p, c, false), eval_density_one_sided(p, c, true));
    EXPECT_THROW(eval_density(VolumeProfile::power_log(2, 1), e), Error);
}

TEST(EvalDensity, IntegratesBackToVolume) {
    for (const auto& p : all_kinds()) {
        const double r = 50.0;
        auto f = [&](double s) { return s <= 0 ? 0.0 : std::exp(p.log_density(std::log(s))); };
        double integral = 0.0, lo = 1e-8;
        std::vector<double> cuts;
        for (double b : p.log_breakpoints()) cuts.push_back(std::exp(b));
        cuts.push_back(r);
        for (double c : cuts) {
            if (c <= lo || c > r) continue;
            integral += oracle::adaptive_simpson(f, lo, c, 1e-10);
            lo = c;
        }
        EXPECT_NEAR(integral / (eval_volume(p, r) - eval_volume(p, 1e-8)), 1.0, 1e-8) << p.describe();
    }
}

TEST(ComputeH, QuadraticVolumeLogGrowth) {
    EXPECT_NEAR(compute_h(VolumeProfile::power_log(2, 0), std::exp(3.0)), 4.0, 1e-9);
}

TEST(ComputeH, CubicVolumeBounded) {
    auto p = VolumeProfile::power_log(3, 0);
    EXPECT_NEAR(compute_h(p, 2.0), 1.5, 1e-9);
    EXPECT_NEAR(compute_h_log(p, 500.0), 2.0, 1e-9);
}

TEST(ComputeH, QuadraticLogVolumeLogLogGrowth) {
    auto p = VolumeProfile::power_log(2, 1);
    const double he = compute_h(p, e);
    EXPECT_NEAR(he, 2.0, 1e-9);  // stub r^2 on [1, e]
    for (double u : {2.0, 10.0, 100.0, 5000.0}) EXPECT_NEAR(compute_h_log(p, u) - he, std::log(u), 1e-7 * std::log(u));
}

TEST(ComputeH, BelowOneIsOne) { EXPECT_EQ(compute_h_log(VolumeProfile::power_log(2, 0), -1.0), 1.0); }

// Quadrature consistency against closed forms for pure powers and r^2 log r.
TEST(ComputeH, PropertyClosedFormConsistency) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> alpha(0.5, 4.0), logr(0.01, 60.0);
    for (int trial = 0; trial < 200; ++trial) {
        const double a = alpha(rng), u = logr(rng);
        const double closed =
            std::abs(a - 2) < 1e-12 ? u : (std::exp((2 - a) * u) - 1) / (2 - a);
        EXPECT_NEAR(compute_h_log(VolumeProfile::power_log(a, 0), u), 1 + closed, 1e-6 * (1 + closed))
            << "alpha=" << a << " u=" << u;
    }
}

TEST(ComputeH, GridMatchesPointwise) {
    auto p = example1();
    std::vector<double> grid;
    for (double u = 0.5; u < 45.0; u += 0.7) grid.push_back(u);
    const auto h = h_on_log_grid(p, grid);
    for (std::size_t i = 0; i < grid.size(); i += 7) EXPECT_NEAR(h[i], compute_h_log(p, grid[i]), 1e-8 * h[i]);
}

TEST(VolumeProperties, StrictlyIncreasingAndHNondecreasing) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> logr(0.0, 44.0);
    for (const auto& p : all_kinds()) {
        std::vector<double> us(300);
        for (auto& u : us) u = logr(rng);
        std::sort(us.begin(), us.end());
        const auto h = h_on_log_grid(p, us);
        for (std::size_t i = 1; i < us.size(); ++i) {
            if (us[i] == us[i - 1]) continue;
            EXPECT_LT(p.log_volume(us[i - 1]), p.log_volume(us[i])) << p.describe();
            EXPECT_LE(h[i - 1], h[i]) << p.describe();
            EXPECT_GE(h[i], 1.0);
        }
    }
}

TEST(VolumeProfile, RejectsInvalidParameters) {
    EXPECT_THROW(VolumeProfile::power_log(0, 0), Error);
    EXPECT_THROW(VolumeProfile::power_log(2, 0, -1), Error);
    EXPECT_THROW(VolumeProfile::power_log(1, -2), Error);
}
