#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "corrsynth/serialization.hpp"
#include "corrsynth/weighting.hpp"

using namespace corrsynth;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("boxcar with end deltas rejects constants and lines", "[weighting][boxcar]") {
    const double el = -1.5, eh = 2.5;
    const auto w = boxcar_with_end_deltas(el, eh);
    CHECK(w.deltas().size() == 2);
    for (const auto& d : w.deltas()) CHECK(d.mass == 0.5 * (el - eh));
    CHECK_THAT(background_residual(w, [](double) { return 1.0; }), WithinAbs(0.0, 1e-12));
    CHECK_THAT(background_residual(w, [](double e) { return e; }), WithinAbs(0.0, 1e-12));
}

TEST_CASE("boxcar residual on a quadratic is -(E_h - E_l)^3 / 6", "[weighting][boxcar]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 20; ++i) {
        double a = u(rng), b = u(rng);
        if (a > b) std::swap(a, b);
        if (b - a < 0.1) continue;
        const auto w = boxcar_with_end_deltas(a, b);
        const double expected = -std::pow(b - a, 3) / 6.0;
        CHECK_THAT(background_residual(w, [](double e) { return e * e; }), WithinRel(expected, 1e-10));
    }
}

TEST_CASE("boxcar affine property", "[weighting][boxcar][property]") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> coef(-10.0, 10.0);
    std::uniform_real_distribution<double> edge(-20.0, 20.0);
    for (int i = 0; i < 200; ++i) {
        double lo = edge(rng), hi = edge(rng);
        if (lo > hi) std::swap(lo, hi);
        if (hi - lo < 1e-3) continue;
        const double a = coef(rng), b = coef(rng);
        const auto w = boxcar_with_end_deltas(lo, hi);
        const double scale = (std::abs(a) + std::abs(b) * std::max(std::abs(lo), std::abs(hi))) * (hi - lo);
        CHECK(std::abs(background_residual(w, [=](double e) { return a + b * e; })) <= 1e-10 * scale);
    }
}

TEST_CASE("boxcar argument checks", "[weighting][boxcar]") {
    CHECK_THROWS_AS(boxcar_with_end_deltas(1.0, 1.0), ArgumentError);
    CHECK_THROWS_AS(boxcar_with_end_deltas(2.0, 1.0), ArgumentError);
}

TEST_CASE("delta minus comb", "[weighting][comb]") {
    const auto one = delta_minus_comb(0.0, {1.0}, {1.0});
    CHECK(background_residual(one, [](double) { return 4.2; }) == 0.0);

    const double c = 3.0, d = 0.4;
    const auto two = delta_minus_comb(c, {c - d, c + d}, {0.5, 0.5});
    // Moments 0 and 1 vanish.
    double m0 = 0.0, m1 = 0.0;
    for (const auto& n : two.nodes()) {
        m0 += n.weight;
        m1 += n.weight * n.level;
    }
    CHECK_THAT(m0, WithinAbs(0.0, 1e-15));
    CHECK_THAT(m1, WithinAbs(0.0, 1e-14));

    CHECK_THROWS_AS(delta_minus_comb(0.0, {1.0, 1.0}, {0.5, 0.5}), ArgumentError);
    CHECK_THROWS_AS(delta_minus_comb(0.0, {0.0}, {1.0}), ArgumentError);
    CHECK_THROWS_AS(delta_minus_comb(0.0, {1.0}, {0.5, 0.5}), ArgumentError);
}

TEST_CASE("Dolph-Chebyshev coefficients are equiripple", "[weighting][chebyshev]") {
    for (int n : {5, 6, 7}) {
        for (double db : {30.0, 40.0, 60.0}) {
            const auto a = dolph_chebyshev_coefficients(n, db);
            REQUIRE(a.size() == static_cast<std::size_t>(n));
            // Direct DTFT of the coefficient sequence on a fine grid.
            const int grid = 20000;
            std::vector<double> mag(grid + 1);
            for (int k = 0; k <= grid; ++k) {
                const double w = std::numbers::pi * k / grid;
                std::complex<double> s = 0.0;
                for (int m = 0; m < n; ++m) s += a[static_cast<std::size_t>(m)] * std::polar(1.0, -w * m);
                mag[static_cast<std::size_t>(k)] = std::abs(s);
            }
            const double main = mag[0];
            // First null ends the main lobe; every later local maximum is a sidelobe.
            std::size_t k = 1;
            while (k < mag.size() - 1 && !(mag[k] <= mag[k - 1] && mag[k] <= mag[k + 1])) ++k;
            std::vector<double> peaks;
            for (++k; k < mag.size() - 1; ++k)
                if (mag[k] >= mag[k - 1] && mag[k] >= mag[k + 1]) peaks.push_back(mag[k]);
            // For odd n the band edge is an extremum; for even n it is a zero.
            if (n % 2 == 1) peaks.push_back(mag.back());
            REQUIRE_FALSE(peaks.empty());
            const double target = main * std::pow(10.0, -db / 20.0);
            for (double p : peaks) CHECK_THAT(p, WithinRel(target, 2e-3));
        }
    }
}

TEST_CASE("Dolph-Chebyshev 5-node window matches the reference window", "[weighting][chebyshev]") {
    // Reference window at 40 dB, normalized to unit sum.
    const std::vector<double> ref{0.08214084, 0.2475, 0.34071832, 0.2475, 0.08214084};
    const auto a = dolph_chebyshev_coefficients(5, 40.0);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK_THAT(a[i], WithinAbs(ref[i], 5e-6));
    const auto w = dolph_chebyshev_weighting(1.0, 0.5, 5, 40.0);
    CHECK_THAT(background_residual(w, [](double) { return 1.0; }), WithinAbs(0.0, 1e-15));
    CHECK_THAT(background_residual(w, [](double e) { return 2.0 - 3.0 * e; }), WithinAbs(0.0, 1e-14));
}

TEST_CASE("background residual basics", "[weighting][residual]") {
    const std::vector<AnyWeighting> ws{boxcar_with_end_deltas(-1.0, 1.0),
                                       DiscreteWeighting({{-0.5, -1.0}, {0.0, 0.0}, {0.5, 1.0}}, 0.0),
                                       moment_design({-1.0, 0.0, 1.0, 2.0}, 1)};
    for (const auto& w : ws) CHECK(background_residual(w, [](double) { return 0.0; }) == 0.0);

    const auto box = boxcar_with_end_deltas(-2.0, 3.0);
    CHECK(std::abs(background_residual(box, [](double e) { return 3.0 + 2.0 * e; })) < 1e-10 * (3.0 + 2.0 * 3.0) * 5.0);
    const double h = 0.1;
    const DiscreteWeighting stencil({{-h, -0.5 / h}, {0.0, 0.0}, {h, 0.5 / h}}, 0.0);
    CHECK(background_residual(stencil, [](double) { return 7.0; }) == 0.0);
}

TEST_CASE("moment design examples", "[weighting][moment]") {
    const auto w = moment_design({-1.0, 0.0, 1.0}, 1);
    const double r = w.nodes()[0].weight;
    CHECK_THAT(w.nodes()[1].weight, WithinRel(-2.0 * r, 1e-12));
    CHECK_THAT(w.nodes()[2].weight, WithinRel(r, 1e-12));
    const auto p = moment_design({-1.0, 1.0}, 0);
    CHECK_THAT(p.nodes()[1].weight, WithinRel(-p.nodes()[0].weight, 1e-12));
    CHECK(p.nodes()[1].weight > 0.0);
    CHECK_THROWS_AS(moment_design({-1.0, 0.0, 1.0}, 2), DesignError);
}

TEST_CASE("moment design annihilates random polynomials", "[weighting][moment][property]") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> coef(-10.0, 10.0);
    std::uniform_real_distribution<double> node(-3.0, 3.0);
    for (int trial = 0; trial < 60; ++trial) {
        const int d = trial % 4;
        const int m = d + 2 + trial % 3;
        std::vector<double> nodes;
        while (static_cast<int>(nodes.size()) < m) {
            const double x = node(rng);
            bool close = false;
            for (double y : nodes) close = close || std::abs(x - y) < 0.05;
            if (!close) nodes.push_back(x);
        }
        const auto w = moment_design(nodes, d);
        std::vector<double> c(static_cast<std::size_t>(d) + 1);
        for (auto& v : c) v = coef(rng);
        auto poly = [&](double e) {
            double s = 0.0;
            for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * e + *it;
            return s;
        };
        double maxp = 0.0;
        for (const auto& n : w.nodes()) maxp = std::max(maxp, std::abs(poly(n.level)));
        CHECK(std::abs(background_residual(w, poly)) <= 1e-9 * w.gamma_total() * std::max(maxp, 1.0));
    }
}

TEST_CASE("shift covariance", "[weighting][property]") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> shift(-50.0, 50.0);
    const auto base = moment_design({-1.0, -0.4, 0.3, 1.2}, 1, 0.0);
    const auto dc = dolph_chebyshev_weighting(0.0, 0.3, 5);
    for (int i = 0; i < 20; ++i) {
        const double s = shift(rng);
        const auto moved = moment_design({-1.0 + s, -0.4 + s, 0.3 + s, 1.2 + s}, 1, s);
        for (std::size_t k = 0; k < base.size(); ++k)
            CHECK_THAT(moved.nodes()[k].weight, WithinRel(base.nodes()[k].weight, 1e-7));
        const auto dcs = dolph_chebyshev_weighting(s, 0.3, 5);
        for (std::size_t k = 0; k < dc.size(); ++k) CHECK(dcs.nodes()[k].weight == dc.nodes()[k].weight);
        const auto r = base.recentered(s);
        for (std::size_t k = 0; k < base.size(); ++k) CHECK(r.nodes()[k].weight == base.nodes()[k].weight);
    }
}

TEST_CASE("weighting invariants", "[weighting]") {
    CHECK_THROWS_AS(DiscreteWeighting({{0.0, 1.0}, {0.0, 2.0}}, 0.0), ArgumentError);
    CHECK_THROWS_AS(DiscreteWeighting({{0.0, 0.0}, {1.0, 0.0}}, 0.0), DesignError);
    CHECK_THROWS_AS(ContinuousWeighting(0.0, 0.0, {{-0.1, 1.0}, {0.1, 1.0}}), ArgumentError);
    CHECK_THROWS_AS(ContinuousWeighting(0.0, 1.0, {{-0.8, 1.0}, {0.1, 1.0}}), ArgumentError);
    CHECK_THROWS_AS(Weighting2D({}, {1.0}, {}), ArgumentError);
    CHECK_THROWS_AS(Weighting2D({0.0}, {0.0}, {0.0}), DesignError);
    const Weighting2D g({0.0, 1.0}, {0.0, 1.0, 2.0}, {1, -2, 3, -4, 5, -6});
    CHECK(g.at(1, 2) == -6.0);
    CHECK(g.gamma_total() == 21.0);
}

TEST_CASE("weightings round-trip through JSON exactly", "[weighting][json]") {
    const DiscreteWeighting d = dolph_chebyshev_weighting(0.1, 1.0 / 3.0, 5);
    const ContinuousWeighting c = boxcar_with_end_deltas(-0.7, 1.0 / 7.0);
    const Weighting2D g({0.1, 0.2}, {std::numbers::pi}, {1.0 / 3.0, -2.0 / 7.0});
    CHECK(std::get<DiscreteWeighting>(weighting_from_json(Json::parse(to_json(d).dump()))) == d);
    const auto c2 = std::get<ContinuousWeighting>(weighting_from_json(Json::parse(to_json(c).dump())));
    CHECK(c2.center() == c.center());
    CHECK(c2.range() == c.range());
    CHECK(c2.knots().size() == c.knots().size());
    for (std::size_t i = 0; i < c.knots().size(); ++i) {
        CHECK(c2.knots()[i].offset == c.knots()[i].offset);
        CHECK(c2.knots()[i].value == c.knots()[i].value);
    }
    for (std::size_t i = 0; i < c.deltas().size(); ++i) CHECK(c2.deltas()[i].mass == c.deltas()[i].mass);
    CHECK(std::get<Weighting2D>(weighting_from_json(Json::parse(to_json(g).dump()))) == g);
    CHECK_THROWS_AS(weighting_from_json(Json::parse(R"({"kind":"nope"})")), ArgumentError);
}
