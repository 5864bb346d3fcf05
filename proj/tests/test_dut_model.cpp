#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "corrsynth/dut_model.hpp"

using namespace corrsynth;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Characteristic1D gaussian_peak(double amp, double sigma, Interval dom, std::vector<double> bg = {}) {
    AugerSpectrumModel m;
    m.peak_center = 0.5 * (dom.lo + dom.hi);
    m.peak_width = sigma;
    m.peak_amplitude = amp;
    m.background = std::move(bg);
    m.domain = dom;
    return m.build(1.0);
}

// Plain trapezoid on a fine uniform grid, independent of the library quadrature.
template <class F>
double trapezoid(const F& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = 0.5 * (f(a) + f(b));
    for (int k = 1; k < n; ++k) s += f(a + k * h);
    return s * h;
}

}  // namespace

TEST_CASE("ohmic nano device obeys Ohm's law", "[dut][sample]") {
    NanoIvModel m;
    m.ohmic_conductance = 1.0;
    m.domain = {-1.0, 1.0};
    const auto dut = m.build(1.0);
    CHECK(sample_response(dut, 0.5) == 0.5);
    for (double a : {-1.0, -0.3, 0.25, 0.9}) CHECK(dut.response(a * 0.8) == a * dut.response(0.8));
}

TEST_CASE("peak tail and peak maximum", "[dut][sample]") {
    const auto dut = gaussian_peak(2.0, 1.5, {0.0, 40.0});
    CHECK(std::abs(sample_response(dut, 20.0 + 6.0 * 1.5)) <= 1e-6 * 2.0);

    AugerSpectrumModel m;
    m.peak_center = 100.0;
    m.peak_width = 2.0;
    m.peak_amplitude = 1e-9;
    m.background = {2e-9, 1e-11};
    m.domain = {80.0, 120.0};
    const auto auger = m.build();
    CHECK_THAT(sample_response(auger, 100.0), WithinRel(1e-9 + 2e-9 + 1e-11 * 100.0, 1e-14));
}

TEST_CASE("out-of-domain stimulus is a domain error", "[dut][sample]") {
    const auto dut = gaussian_peak(1.0, 1.0, {-5.0, 5.0});
    CHECK_THROWS_AS(sample_response(dut, 5.5), DomainError);
    CHECK_THROWS_AS(sample_response(dut, -5.0001), DomainError);
    CHECK_NOTHROW(sample_response(dut, 5.0));
}

TEST_CASE("builder invariants", "[dut]") {
    AugerSpectrumModel m;
    m.peak_center = 0.0;
    m.peak_width = 1.0;
    m.domain = {-2.0, 10.0};
    CHECK_THROWS_AS(m.build(), ArgumentError);  // peak - 3 widths outside
    m.domain = {-5.0, 5.0};
    m.peak_width = 0.0;
    CHECK_THROWS_AS(m.build(), ArgumentError);
    m.peak_width = 1.0;
    m.background = {1, 2, 3, 4, 5};
    CHECK_THROWS_AS(m.build(), ArgumentError);

    NanoIvModel n;
    n.domain = {-1.0, 1.0};
    n.nonlinear_term = [](double e) { return 0.5 * e * e * e; };
    CHECK_THROWS_AS(n.build(), ArgumentError);
    n.max_ratio = 0.6;
    CHECK_NOTHROW(n.build());
}

TEST_CASE("full current of a gaussian peak", "[dut][full_current]") {
    const double amp = 3.0, sigma = 1.25;
    const auto dut = gaussian_peak(amp, sigma, {-20.0, 20.0}, {0.4, 0.01});
    const double truth = amp * sigma * std::sqrt(2.0 * std::numbers::pi);
    CHECK_THAT(full_auger_current(dut, -10.0 * sigma, 10.0 * sigma), WithinRel(truth, 1e-6));
}

TEST_CASE("full current of zero informative curve", "[dut][full_current]") {
    const Characteristic1D dut(nullptr, [](double e) { return 1.0 + e; }, {-1.0, 1.0}, 1.0);
    CHECK(full_auger_current(dut, -0.5, 0.5) == 0.0);
}

TEST_CASE("full current of a lorentzian against a fine trapezoid", "[dut][full_current]") {
    AugerSpectrumModel m;
    m.peak_center = 0.0;
    m.peak_width = 0.7;
    m.peak_amplitude = 2.0;
    m.peak_shape = PeakShape::lorentzian;
    m.domain = {-5.0, 5.0};
    const auto dut = m.build(1.0);
    const double oracle = trapezoid([&](double e) { return dut.informative(e); }, -0.7, 0.7, 1'000'000);
    CHECK_THAT(full_auger_current(dut, -0.7, 0.7), WithinRel(oracle, 1e-10));
    // closed form 2 A w atan(1)
    CHECK_THAT(oracle, WithinRel(2.0 * 2.0 * 0.7 * std::atan(1.0), 1e-10));
}

TEST_CASE("full current argument checks", "[dut][full_current]") {
    const auto dut = gaussian_peak(1.0, 1.0, {-5.0, 5.0});
    CHECK_THROWS_AS(full_auger_current(dut, 1.0, -1.0), ArgumentError);
    CHECK_THROWS_AS(full_auger_current(dut, -6.0, 1.0), DomainError);
}

TEST_CASE("full current is linear in amplitude", "[dut][full_current]") {
    const auto a = gaussian_peak(1.0, 0.8, {-6.0, 6.0});
    const auto b = gaussian_peak(2.0, 0.8, {-6.0, 6.0});
    CHECK_THAT(full_auger_current(b, -2.0, 3.0), WithinRel(2.0 * full_auger_current(a, -2.0, 3.0), 1e-9));
}

TEST_CASE("bandwidth of a linear curve is the lowest bin", "[dut][bandwidth]") {
    const Interval dom{-3.0, 5.0};
    const auto est = estimate_bandwidth([](double e) { return 0.2 + 1.7 * e; }, dom, 256);
    CHECK_THAT(est.omega_b, WithinRel(2.0 * std::numbers::pi / dom.width(), 1e-12));
}

TEST_CASE("bandwidth of a single tone", "[dut][bandwidth]") {
    const Interval dom{0.0, 16.0 * std::numbers::pi};
    const double bin = 2.0 * std::numbers::pi / dom.width();
    for (int harmonic : {3, 11, 40}) {
        const double k = harmonic * bin;
        const auto est = estimate_bandwidth([k](double e) { return std::sin(k * e); }, dom, 1024);
        CHECK(std::abs(est.omega_b - k) <= bin * (1.0 + 1e-9));
    }
}

TEST_CASE("bandwidth of a gaussian against the closed-form energy spectrum", "[dut][bandwidth]") {
    // |F(w)|^2 ~ exp(-w^2 s^2): the 99.9% point solves erf(w s) = 0.999.
    const double sigma = 0.5;
    const Interval dom{-10.0, 10.0};
    double lo = 0.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (std::erf(mid) < 0.999 ? lo : hi) = mid;
    }
    const double closed = lo / sigma;
    const auto est = estimate_bandwidth([sigma](double e) { return std::exp(-0.5 * e * e / (sigma * sigma)); }, dom, 2048);
    CHECK(std::abs(est.omega_b - closed) <= est.bin_spacing);
}

TEST_CASE("bandwidth preconditions", "[dut][bandwidth]") {
    CHECK_THROWS_AS(estimate_bandwidth([](double) { return 1.0; }, {0.0, 1.0}, 63), ArgumentError);
    CHECK_THROWS_AS(estimate_bandwidth([](double) { return 1.0; }, {0.0, 1.0}, 64, 1.0), ArgumentError);
}

TEST_CASE("responses are deterministic", "[dut]") {
    const auto dut = gaussian_peak(1.0, 1.0, {-5.0, 5.0}, {0.3, 0.2, 0.01});
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 100; ++i) {
        const double e = u(rng);
        CHECK(sample_response(dut, e) == sample_response(dut, e));
    }
}

TEST_CASE("tabulated curves interpolate monotone data monotonically", "[dut][table]") {
    const auto c = tabulated_curve({0.0, 1.0, 2.0, 3.0, 4.0}, {0.0, 0.1, 0.1, 2.0, 2.1});
    CHECK(c(1.0) == 0.1);
    CHECK(c(3.0) == 2.0);
    double prev = c(0.0);
    for (int k = 1; k <= 400; ++k) {
        const double v = c(4.0 * k / 400.0);
        CHECK(v >= prev - 1e-15);
        prev = v;
    }
    CHECK_THROWS_AS(tabulated_curve({0.0, 2.0, 1.0, 3.0}, {0, 0, 0, 0}), ArgumentError);
}

TEST_CASE("2-D map and dynamic device", "[dut]") {
    const CharacteristicMap2D map([](double x, double y) { return x * y; }, [](double x, double) { return x; },
                                  {-1.0, 1.0}, {0.0, 2.0});
    CHECK(map.response(0.5, 2.0) == 0.5 * 2.0 + 0.5);
    CHECK(map.contains(0.0, 0.0));
    CHECK_FALSE(map.contains(0.0, -0.1));
    const DynamicDut dyn([](double e, double r) { return 2.0 * e + 3.0 * r; }, {-1.0, 1.0}, {-5.0, 5.0});
    CHECK(dyn.response(0.5, -1.0) == -2.0);
    STATIC_REQUIRE(DeviceUnderTest<DynamicDut>);
    STATIC_REQUIRE(DeviceUnderTest<Characteristic1D>);
}
