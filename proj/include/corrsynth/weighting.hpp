#pragma once

// Weighting functions K_w: what the correlation measurement computes, and the
// constraint that the background integrates to zero against it.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "corrsynth/errors.hpp"
#include "corrsynth/numerics.hpp"

namespace corrsynth {

struct WeightNode {
    double level = 0.0;  // absolute stimulus level E_i
    double weight = 0.0;

    friend bool operator==(const WeightNode&, const WeightNode&) = default;
};

/// K_w(E) = sum_i W_i delta(E - E_i), referred to the control level `center`.
class DiscreteWeighting {
public:
    DiscreteWeighting() = default;
    DiscreteWeighting(std::vector<WeightNode> nodes, double center) : nodes_(std::move(nodes)), center_(center) {
        if (nodes_.empty()) throw ArgumentError("DiscreteWeighting: at least one node required");
        for (std::size_t i = 1; i < nodes_.size(); ++i) {
            if (!(nodes_[i].level > nodes_[i - 1].level))
                throw ArgumentError("DiscreteWeighting: node levels must be strictly increasing");
        }
        for (const auto& n : nodes_) {
            if (!std::isfinite(n.level) || !std::isfinite(n.weight))
                throw ArgumentError("DiscreteWeighting: non-finite node");
        }
        if (gamma_total() == 0.0) throw DesignError("DiscreteWeighting: all weights are zero");
    }

    const std::vector<WeightNode>& nodes() const noexcept { return nodes_; }
    double center() const noexcept { return center_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Gamma_w at the top of the range: sum of |W_i| in node order.
    double gamma_total() const noexcept {
        double g = 0.0;
        for (const auto& n : nodes_) g += std::abs(n.weight);
        return g;
    }

    /// Half-span of the stimulus needed to reach every node from the center.
    double half_range() const noexcept {
        double r = 0.0;
        for (const auto& n : nodes_) r = std::max(r, std::abs(n.level - center_));
        return r;
    }

    /// Same weights, all levels and the center moved by `delta`.
    DiscreteWeighting shifted(double delta) const {
        auto moved = nodes_;
        for (auto& n : moved) n.level += delta;
        return DiscreteWeighting(std::move(moved), center_ + delta);
    }

    DiscreteWeighting recentered(double new_center) const { return shifted(new_center - center_); }

    friend bool operator==(const DiscreteWeighting&, const DiscreteWeighting&) = default;

private:
    std::vector<WeightNode> nodes_;
    double center_ = 0.0;
};

/// Point mass inside a continuous weighting, e.g. 0.5 (E_l - E_h) delta(E - E_l).
struct DeltaComponent {
    double offset = 0.0;  // relative to the center
    double mass = 0.0;

    friend bool operator==(const DeltaComponent&, const DeltaComponent&) = default;
};

struct ProfileKnot {
    double offset = 0.0;  // relative to the center
    double value = 0.0;

    friend bool operator==(const ProfileKnot&, const ProfileKnot&) = default;
};

/// Piecewise-linear profile on [-E_m/2, E_m/2] around `center` plus explicit
/// delta components. The profile is zero outside its knot table.
class ContinuousWeighting {
public:
    ContinuousWeighting() = default;
    ContinuousWeighting(double center, double range, std::vector<ProfileKnot> knots,
                        std::vector<DeltaComponent> deltas = {})
        : center_(center), range_(range), knots_(std::move(knots)), deltas_(std::move(deltas)) {
        if (!(range_ > 0.0)) throw ArgumentError("ContinuousWeighting: range E_m must be positive");
        if (knots_.size() == 1) throw ArgumentError("ContinuousWeighting: profile needs >= 2 knots");
        const double half = 0.5 * range_;
        const double slack = 1e-12 * range_;
        for (std::size_t i = 0; i < knots_.size(); ++i) {
            if (!std::isfinite(knots_[i].value)) throw ArgumentError("ContinuousWeighting: non-finite profile value");
            if (std::abs(knots_[i].offset) > half + slack)
                throw ArgumentError("ContinuousWeighting: profile knot outside [-E_m/2, E_m/2]");
            if (i > 0 && !(knots_[i].offset > knots_[i - 1].offset))
                throw ArgumentError("ContinuousWeighting: knot offsets must be strictly increasing");
        }
        std::sort(deltas_.begin(), deltas_.end(),
                  [](const DeltaComponent& a, const DeltaComponent& b) { return a.offset < b.offset; });
        for (const auto& d : deltas_) {
            if (std::abs(d.offset) > half + slack)
                throw ArgumentError("ContinuousWeighting: delta outside [-E_m/2, E_m/2]");
        }
    }

    /// Samples `profile` at `knots` evenly spaced offsets across the range.
    static ContinuousWeighting sampled(double center, double range, const std::function<double(double)>& profile,
                                       int knots, std::vector<DeltaComponent> deltas = {}) {
        if (knots < 2) throw ArgumentError("ContinuousWeighting::sampled: need >= 2 knots");
        std::vector<ProfileKnot> table(static_cast<std::size_t>(knots));
        for (int k = 0; k < knots; ++k) {
            const double x = -0.5 * range + range * k / (knots - 1);
            table[static_cast<std::size_t>(k)] = {x, profile(x)};
        }
        return ContinuousWeighting(center, range, std::move(table), std::move(deltas));
    }

    /// Discrete weighting viewed as deltas only (zero profile).
    static ContinuousWeighting from_discrete(const DiscreteWeighting& w) {
        std::vector<DeltaComponent> deltas;
        for (const auto& n : w.nodes()) {
            if (n.weight != 0.0) deltas.push_back({n.level - w.center(), n.weight});
        }
        const double range = std::max(2.0 * w.half_range(), 1e-300);
        return ContinuousWeighting(w.center(), range, {}, std::move(deltas));
    }

    double center() const noexcept { return center_; }
    double range() const noexcept { return range_; }
    const std::vector<ProfileKnot>& knots() const noexcept { return knots_; }
    const std::vector<DeltaComponent>& deltas() const noexcept { return deltas_; }

    /// Profile value at an offset from the center (deltas excluded).
    double profile(double offset) const noexcept {
        if (knots_.size() < 2 || offset < knots_.front().offset || offset > knots_.back().offset) return 0.0;
        auto it = std::upper_bound(knots_.begin(), knots_.end(), offset,
                                   [](double x, const ProfileKnot& k) { return x < k.offset; });
        if (it == knots_.end()) return knots_.back().value;
        const auto& b = *it;
        const auto& a = *(it - 1);
        const double t = (offset - a.offset) / (b.offset - a.offset);
        return a.value + t * (b.value - a.value);
    }

    /// Integral of |profile| over one knot interval (handles a sign change).
    static double abs_integral(const ProfileKnot& a, const ProfileKnot& b) noexcept {
        const double h = b.offset - a.offset;
        if ((a.value >= 0.0) == (b.value >= 0.0) || a.value == 0.0 || b.value == 0.0) {
            return 0.5 * h * (std::abs(a.value) + std::abs(b.value));
        }
        const double root = h * a.value / (a.value - b.value);
        return 0.5 * root * std::abs(a.value) + 0.5 * (h - root) * std::abs(b.value);
    }

    double gamma_total() const noexcept {
        double g = 0.0;
        for (std::size_t i = 1; i < knots_.size(); ++i) g += abs_integral(knots_[i - 1], knots_[i]);
        for (const auto& d : deltas_) g += std::abs(d.mass);
        return g;
    }

    ContinuousWeighting recentered(double new_center) const {
        ContinuousWeighting copy = *this;
        copy.center_ = new_center;
        return copy;
    }

    friend bool operator==(const ContinuousWeighting&, const ContinuousWeighting&) = default;

private:
    double center_ = 0.0;
    double range_ = 1.0;
    std::vector<ProfileKnot> knots_;
    std::vector<DeltaComponent> deltas_;
};

/// K_w(x_i, y_j) on a rectangular grid; values stored row-major (row = y index).
class Weighting2D {
public:
    Weighting2D() = default;
    Weighting2D(std::vector<double> xs, std::vector<double> ys, std::vector<double> values)
        : xs_(std::move(xs)), ys_(std::move(ys)), values_(std::move(values)) {
        if (xs_.empty() || ys_.empty()) throw ArgumentError("Weighting2D: grid must be nonempty");
        if (values_.size() != xs_.size() * ys_.size())
            throw ArgumentError("Weighting2D: value count must equal |xs| * |ys|");
        if (gamma_total() == 0.0) throw DesignError("Weighting2D: all weights are zero");
    }

    const std::vector<double>& xs() const noexcept { return xs_; }
    const std::vector<double>& ys() const noexcept { return ys_; }
    const std::vector<double>& values() const noexcept { return values_; }
    double at(std::size_t i, std::size_t j) const { return values_.at(j * xs_.size() + i); }

    double gamma_total() const noexcept {
        double g = 0.0;
        for (double v : values_) g += std::abs(v);
        return g;
    }

    friend bool operator==(const Weighting2D&, const Weighting2D&) = default;

private:
    std::vector<double> xs_;
    std::vector<double> ys_;
    std::vector<double> values_;
};

using AnyWeighting = std::variant<DiscreteWeighting, ContinuousWeighting>;

inline double gamma_total(const AnyWeighting& w) {
    return std::visit([](const auto& v) { return v.gamma_total(); }, w);
}

// ---------------------------------------------------------------------------
// Constructions
// ---------------------------------------------------------------------------

/// Unit plateau on [E_l, E_h] with a delta of mass 0.5 (E_l - E_h) at each
/// end. Annihilates every affine background a + b E.
inline ContinuousWeighting boxcar_with_end_deltas(double e_low, double e_high) {
    if (!(e_low < e_high)) throw ArgumentError("boxcar_with_end_deltas: requires E_l < E_h");
    const double width = e_high - e_low;
    const double center = 0.5 * (e_low + e_high);
    const double half = 0.5 * width;
    const double mass = 0.5 * (e_low - e_high);
    return ContinuousWeighting(center, width, {{-half, 1.0}, {half, 1.0}}, {{-half, mass}, {half, mass}});
}

/// delta(E - E_c) - sum_i a_i delta(E - E_i).
inline DiscreteWeighting delta_minus_comb(double center, const std::vector<double>& comb_nodes,
                                          const std::vector<double>& coefficients) {
    if (comb_nodes.size() != coefficients.size())
        throw ArgumentError("delta_minus_comb: node and coefficient counts differ");
    std::vector<WeightNode> nodes{{center, 1.0}};
    for (std::size_t i = 0; i < comb_nodes.size(); ++i) {
        if (comb_nodes[i] == center) throw ArgumentError("delta_minus_comb: comb node coincides with the center");
        nodes.push_back({comb_nodes[i], -coefficients[i]});
    }
    std::sort(nodes.begin(), nodes.end(), [](const WeightNode& a, const WeightNode& b) { return a.level < b.level; });
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        if (nodes[i].level == nodes[i - 1].level) throw ArgumentError("delta_minus_comb: duplicate comb nodes");
    }
    return DiscreteWeighting(std::move(nodes), center);
}

/// Dolph-Chebyshev window of length n with the given sidelobe attenuation,
/// normalized to unit sum.
inline std::vector<double> dolph_chebyshev_coefficients(int n, double sidelobe_db) {
    if (n < 2) throw ArgumentError("dolph_chebyshev_coefficients: n must be >= 2");
    if (!(sidelobe_db > 0.0)) throw ArgumentError("dolph_chebyshev_coefficients: attenuation must be positive");
    const int order = n - 1;
    const double ratio = std::pow(10.0, sidelobe_db / 20.0);
    const double beta = std::cosh(std::acosh(ratio) / order);
    auto cheb = [order](double x) {
        if (std::abs(x) <= 1.0) return std::cos(order * std::acos(x));
        const double s = (x < 0.0 && order % 2 == 1) ? -1.0 : 1.0;
        return s * std::cosh(order * std::acosh(std::abs(x)));
    };
    // Window = inverse DFT of the Chebyshev polynomial sampled on the unit circle,
    // with a half-sample phase ramp for even lengths.
    std::vector<std::complex<double>> p(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double v = cheb(beta * std::cos(std::numbers::pi * k / n));
        p[static_cast<std::size_t>(k)] =
            (n % 2 == 1) ? std::complex<double>(v, 0.0) : v * std::polar(1.0, std::numbers::pi * k / n);
    }
    std::vector<double> spectrum(static_cast<std::size_t>(n));
    for (int m = 0; m < n; ++m) {
        std::complex<double> s{0.0, 0.0};
        for (int k = 0; k < n; ++k) s += p[static_cast<std::size_t>(k)] * std::polar(1.0, -2.0 * std::numbers::pi * k * m / n);
        spectrum[static_cast<std::size_t>(m)] = s.real();
    }
    std::vector<double> w;
    if (n % 2 == 1) {
        const int half = (n + 1) / 2;
        for (int m = half - 1; m >= 1; --m) w.push_back(spectrum[static_cast<std::size_t>(m)]);
        for (int m = 0; m < half; ++m) w.push_back(spectrum[static_cast<std::size_t>(m)]);
    } else {
        const int half = n / 2 + 1;
        for (int m = half - 1; m >= 1; --m) w.push_back(spectrum[static_cast<std::size_t>(m)]);
        for (int m = 1; m < half; ++m) w.push_back(spectrum[static_cast<std::size_t>(m)]);
    }
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& v : w) v /= sum;
    return w;
}

/// Center delta minus a Dolph-Chebyshev comb on the grid E_c + spacing (k - (n-1)/2).
/// For odd n the middle comb node falls on E_c and is merged into the center weight.
inline DiscreteWeighting dolph_chebyshev_weighting(double center, double spacing, int n = 5,
                                                   double sidelobe_db = 40.0) {
    if (!(spacing > 0.0)) throw ArgumentError("dolph_chebyshev_weighting: spacing must be positive");
    const auto coeffs = dolph_chebyshev_coefficients(n, sidelobe_db);
    std::vector<WeightNode> nodes;
    const double mid = 0.5 * (n - 1);
    for (int k = 0; k < n; ++k) {
        const double offset = (k - mid) * spacing;
        double weight = -coeffs[static_cast<std::size_t>(k)];
        if (offset == 0.0) weight += 1.0;
        nodes.push_back({center + offset, weight});
    }
    if (n % 2 == 0) {
        nodes.push_back({center, 1.0});
        std::sort(nodes.begin(), nodes.end(), [](const WeightNode& a, const WeightNode& b) { return a.level < b.level; });
    }
    return DiscreteWeighting(std::move(nodes), center);
}

/// Minimum-norm weights with sum W_i E_i^k = 0 for k = 0..d and
/// sum W_i (E_i - c)^(d+1) = 1, where c is the node mean (the normalization is
/// shift invariant once the lower moments vanish).
inline DiscreteWeighting moment_design(const std::vector<double>& levels, int kill_degree,
                                       std::optional<double> center = std::nullopt) {
    if (kill_degree < 0) throw ArgumentError("moment_design: degree must be >= 0");
    const auto m = levels.size();
    const auto rows = static_cast<std::size_t>(kill_degree) + 2;
    if (m < rows) {
        std::ostringstream os;
        os << "moment_design: " << m << " nodes cannot annihilate moments 0.." << kill_degree
           << " and normalize (need >= " << rows << ")";
        throw DesignError(os.str());
    }
    std::vector<double> sorted = levels;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ArgumentError("moment_design: duplicate nodes");
    const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(m);
    double scale = 0.0;
    for (double e : sorted) scale = std::max(scale, std::abs(e - mean));
    if (scale == 0.0) scale = 1.0;

    Eigen::MatrixXd v(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
        const double x = (sorted[i] - mean) / scale;
        double p = 1.0;
        for (std::size_t k = 0; k < rows; ++k) {
            v(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = p;
            p *= x;
        }
    }
    // Rank check row by row so the error names the first dependent moment.
    for (std::size_t k = 1; k <= rows; ++k) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(v.topRows(static_cast<Eigen::Index>(k)).transpose());
        qr.setThreshold(1e-12);
        if (qr.rank() < static_cast<Eigen::Index>(k)) {
            std::ostringstream os;
            os << "moment_design: constraint system singular at moment " << (k - 1);
            throw DesignError(os.str());
        }
    }
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows));
    b(static_cast<Eigen::Index>(rows - 1)) = 1.0;
    const Eigen::MatrixXd gram = v * v.transpose();
    const Eigen::VectorXd lambda = gram.ldlt().solve(b);
    const Eigen::VectorXd w = v.transpose() * lambda;
    const double unscale = std::pow(scale, static_cast<double>(kill_degree + 1));
    std::vector<WeightNode> nodes(m);
    for (std::size_t i = 0; i < m; ++i) nodes[i] = {sorted[i], w(static_cast<Eigen::Index>(i)) / unscale};
    return DiscreteWeighting(std::move(nodes), center.value_or(mean));
}

// ---------------------------------------------------------------------------
// Background rejection
// ---------------------------------------------------------------------------

inline double background_residual(const DiscreteWeighting& w, const std::function<double(double)>& background) {
    double s = 0.0;
    for (const auto& n : w.nodes()) s += n.weight * background(n.level);
    return s;
}

/// Profile part by adaptive quadrature per knot interval, deltas by evaluation.
inline double background_residual(const ContinuousWeighting& w, const std::function<double(double)>& background) {
    double s = 0.0;
    const auto& knots = w.knots();
    for (std::size_t i = 1; i < knots.size(); ++i) {
        const double a = w.center() + knots[i - 1].offset;
        const double b = w.center() + knots[i].offset;
        const double scale = std::max({std::abs(knots[i - 1].value), std::abs(knots[i].value), 1e-300}) *
                             std::max({std::abs(background(a)), std::abs(background(b)),
                                       std::abs(background(0.5 * (a + b))), 1e-300});
        auto integrand = [&](double e) { return w.profile(e - w.center()) * background(e); };
        s += numerics::adaptive_simpson(integrand, a, b, 1e-14 * scale * (b - a), 4);
    }
    for (const auto& d : w.deltas()) s += d.mass * background(w.center() + d.offset);
    return s;
}

inline double background_residual(const AnyWeighting& w, const std::function<double(double)>& background) {
    return std::visit([&](const auto& v) { return background_residual(v, background); }, w);
}

}  // namespace corrsynth
