#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "corrsynth/lockin_baseline.hpp"

using namespace corrsynth;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Characteristic1D curve_dut(Curve c) { return Characteristic1D(std::move(c), nullptr, {-10.0, 10.0}, 1.0); }

LockinConfig config(double amplitude) {
    LockinConfig lc;
    lc.amplitude = amplitude;
    lc.omega = 2.0 * std::numbers::pi * 10.0;
    lc.samples_per_period = 64;
    return lc;
}

double gauss_d1(double e) { return -e * std::exp(-0.5 * e * e); }

}  // namespace

TEST_CASE("lock-in reads the slope of a linear device exactly", "[lockin]") {
    for (double g : {1.0, -3.5, 0.01}) {
        const auto dut = curve_dut([g](double e) { return 2.0 + g * e; });
        for (double a : {0.05, 0.5, 2.0})
            CHECK_THAT(lockin_measure(dut, config(a), NoiseModel::white(0.0), 0.7), WithinRel(g, 1e-12));
    }
    CHECK_THROWS_AS(lockin_measure(curve_dut(nullptr), config(0.0), NoiseModel::white(0.0), 0.0), ArgumentError);
    auto second = config(0.1);
    second.harmonic_order = 2;
    CHECK_THROWS_AS(lockin_schedule(second, 0.0), ArgumentError);
}

TEST_CASE("lock-in distortion grows with modulation amplitude", "[lockin]") {
    const auto dut = curve_dut([](double e) { return std::exp(-0.5 * e * e); });
    // Small modulation: within half a percent of the true slope at the steepest point.
    const double small = lockin_measure(dut, config(0.1), NoiseModel::white(0.0), 1.0);
    CHECK(std::abs(small / gauss_d1(1.0) - 1.0) < 0.005);

    ComparisonSetup c;
    const auto model_dut = detail::comparison_dut(c);
    double previous = 0.0;
    for (double a : {0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
        const double err = lockin_derivative_error(c, model_dut, a * c.sigma);
        CHECK(err > previous);
        previous = err;
    }
}

TEST_CASE("modulation kernel and deconvolution", "[lockin]") {
    const auto k = modulation_kernel(0.5, 0.1);
    double sum = 0.0;
    for (double v : k) sum += v;
    CHECK_THAT(sum, WithinAbs(1.0, 1e-12));
    for (std::size_t i = 0; i < k.size(); ++i) CHECK_THAT(k[i], WithinAbs(k[k.size() - 1 - i], 1e-15));

    // Broaden a derivative with the kernel, then undo it.
    const double h = 0.1;
    const double a = 0.8;
    std::vector<double> truth, levels;
    for (int i = -60; i <= 60; ++i) {
        levels.push_back(i * h);
        truth.push_back(gauss_d1(i * h));
    }
    const auto kern = modulation_kernel(a, h);
    const int m = static_cast<int>(kern.size() / 2);
    std::vector<double> broadened(truth.size(), 0.0);
    for (int i = 0; i < static_cast<int>(truth.size()); ++i) {
        double row = 0.0;
        for (int j = -m; j <= m; ++j) {
            const int col = i + j;
            if (col < 0 || col >= static_cast<int>(truth.size())) continue;
            broadened[static_cast<std::size_t>(i)] += kern[static_cast<std::size_t>(j + m)] * truth[static_cast<std::size_t>(col)];
            row += kern[static_cast<std::size_t>(j + m)];
        }
        broadened[static_cast<std::size_t>(i)] /= row;
    }
    const auto restored = correct_lockin(broadened, h, a, 1e-8);
    double before = 0.0, after = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        before = std::max(before, std::abs(broadened[i] - truth[i]));
        after = std::max(after, std::abs(restored[i] - truth[i]));
    }
    CHECK(after < 0.1 * before);
}

TEST_CASE("curve and area restoration", "[lockin]") {
    const std::vector<double> zeros(11, 0.0);
    CHECK(restore_curve(zeros, 0.5) == zeros);
    CHECK(restore_area(zeros, 0.5) == 0.0);

    const std::vector<double> ones(5, 1.0);
    const auto ramp = restore_curve(ones, 0.25);
    for (std::size_t i = 0; i < ramp.size(); ++i) CHECK_THAT(ramp[i], WithinAbs(0.25 * static_cast<double>(i), 1e-15));
    for (double v : remove_linear_baseline(ramp)) CHECK_THAT(v, WithinAbs(0.0, 1e-15));
    CHECK_THAT(restore_area(ones, 0.25), WithinAbs(1.0, 1e-15));

    // Second-order convergence to the integrated Gaussian.
    double previous = 0.0;
    for (int n : {41, 81, 161}) {
        const double h = 12.0 / (n - 1);
        std::vector<double> d;
        for (int i = 0; i < n; ++i) d.push_back(gauss_d1(-6.0 + i * h));
        const auto curve = restore_curve(d, h);
        double err = 0.0;
        for (int i = 0; i < n; ++i) {
            const double e = -6.0 + i * h;
            err = std::max(err, std::abs(curve[static_cast<std::size_t>(i)] - (std::exp(-0.5 * e * e) - std::exp(-18.0))));
        }
        if (previous > 0.0) CHECK_THAT(previous / err, WithinRel(4.0, 0.05));
        previous = err;
        CHECK_THAT(restore_area(remove_linear_baseline(curve), h), WithinRel(std::sqrt(2 * std::numbers::pi), 0.01));
    }
}

TEST_CASE("matched-time comparison ordering", "[lockin][compare]") {
    ComparisonSetup c;
    c.trials = 200;
    const auto d = compare_systems(Target::derivative, c);
    const auto v = compare_systems(Target::curve, c);
    const auto a = compare_systems(Target::full_current, c);
    for (const auto* r : {&d, &v, &a}) {
        INFO(target_name(r->target));
        CHECK(r->lockin_duration == r->optimal_duration);
        CHECK(r->lockin_systematic <= c.budget * 1.001);
        CHECK(r->optimal_systematic <= c.budget * 1.001);
        CHECK(r->ratio > 1.0);
    }
    CHECK(d.ratio < v.ratio);
    CHECK(v.ratio < a.ratio);

    ComparisonSetup bad;
    bad.budget = 0.2;
    CHECK_THROWS_AS(compare_systems(Target::derivative, bad), ArgumentError);
}
