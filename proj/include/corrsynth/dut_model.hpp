#pragma once

// Synthetic devices under test. The deterministic part of the response is
// I(E) = I_c(E) + I_b(E); random noise is added by the measurement chain.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

// Boost 1.74 pchip calls isnan unqualified; math.h exports it globally.
#include <math.h>
#include <boost/math/interpolators/pchip.hpp>

#include "corrsynth/errors.hpp"
#include "corrsynth/numerics.hpp"

namespace corrsynth {

/// Closed interval on the stimulus scale (volts or electron-volts).
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double e) const noexcept { return e >= lo && e <= hi; }
    double width() const noexcept { return hi - lo; }
};

using Curve = std::function<double(double)>;
using Map2D = std::function<double(double, double)>;

struct BandwidthEstimate {
    double omega_b = 0.0;     // rad per stimulus unit
    double bin_spacing = 0.0;  // frequency resolution of the estimate
};

/// Smallest angular frequency (on the E axis) below which `threshold` of the
/// spectral energy of the sampled curve lies. The line through the end samples
/// is removed first so the periodic extension has no jump.
inline BandwidthEstimate estimate_bandwidth(const Curve& curve, Interval domain, int grid_points,
                                            double threshold = 0.999) {
    if (grid_points < 64) throw ArgumentError("estimate_bandwidth: grid_points must be >= 64");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ArgumentError("estimate_bandwidth: threshold must lie in (0, 1)");
    const auto n = static_cast<std::size_t>(grid_points);
    // Periodic grid: the last sample sits one step before domain.hi.
    const double step = domain.width() / static_cast<double>(n);
    std::vector<double> samples(n);
    for (std::size_t k = 0; k < n; ++k) samples[k] = curve(domain.lo + step * static_cast<double>(k));
    double raw_energy = 0.0;
    for (double v : samples) raw_energy += v * v;
    const double first = samples.front();
    const double last = curve(domain.hi);
    for (std::size_t k = 0; k < n; ++k) {
        samples[k] -= first + (last - first) * static_cast<double>(k) / static_cast<double>(n);
    }
    const auto spectrum = numerics::rfft(samples);
    std::vector<double> energy(spectrum.size());
    double total = 0.0;
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
        // One-sided energy; interior bins stand for both +k and -k.
        const bool paired = k != 0 && !(n % 2 == 0 && k == n / 2);
        energy[k] = std::norm(spectrum[k]) * (paired ? 2.0 : 1.0);
        total += energy[k];
    }
    const double bin = 2.0 * std::numbers::pi / domain.width();
    // Rounding residue of an affine curve is not bandwidth.
    if (total <= 1e-24 * raw_energy * static_cast<double>(n) || total <= 0.0) return {bin, bin};
    double cumulative = 0.0;
    for (std::size_t k = 0; k < energy.size(); ++k) {
        cumulative += energy[k];
        if (cumulative >= threshold * total) {
            return {std::max(static_cast<double>(k), 1.0) * bin, bin};
        }
    }
    return {static_cast<double>(energy.size() - 1) * bin, bin};
}

/// One-dimensional characteristic I_c(E) + I_b(E) with its E-axis bandwidth.
class Characteristic1D {
public:
    Characteristic1D(Curve informative, Curve background, Interval domain,
                     std::optional<double> omega_b = std::nullopt)
        : informative_(std::move(informative)), background_(std::move(background)), domain_(domain) {
        if (!(domain_.hi > domain_.lo)) throw ArgumentError("Characteristic1D: empty domain");
        if (!informative_) informative_ = [](double) { return 0.0; };
        if (!background_) background_ = [](double) { return 0.0; };
        if (omega_b) {
            omega_b_ = *omega_b;
        } else {
            const Curve total = [this](double e) { return informative_(e) + background_(e); };
            omega_b_ = estimate_bandwidth(total, domain_, 1024).omega_b;
        }
        if (!(omega_b_ > 0.0)) throw ArgumentError("Characteristic1D: bandwidth must be positive");
    }

    double informative(double e) const { return informative_(e); }
    double background(double e) const { return background_(e); }
    double response(double e, double /*rate*/ = 0.0) const { return informative_(e) + background_(e); }
    Interval domain() const noexcept { return domain_; }
    double bandwidth() const noexcept { return omega_b_; }
    const Curve& informative_curve() const noexcept { return informative_; }
    const Curve& background_curve() const noexcept { return background_; }

private:
    Curve informative_;
    Curve background_;
    Interval domain_;
    double omega_b_ = 0.0;
};

/// Spatial map I_c(x, y) + I_b(x, y) over a rectangle.
class CharacteristicMap2D {
public:
    CharacteristicMap2D(Map2D informative, Map2D background, Interval x_domain, Interval y_domain)
        : informative_(std::move(informative)),
          background_(std::move(background)),
          x_(x_domain),
          y_(y_domain) {
        if (!informative_) informative_ = [](double, double) { return 0.0; };
        if (!background_) background_ = [](double, double) { return 0.0; };
    }

    double informative(double x, double y) const { return informative_(x, y); }
    double background(double x, double y) const { return background_(x, y); }
    double response(double x, double y) const { return informative_(x, y) + background_(x, y); }
    bool contains(double x, double y) const noexcept { return x_.contains(x) && y_.contains(y); }
    Interval x_domain() const noexcept { return x_; }
    Interval y_domain() const noexcept { return y_; }

private:
    Map2D informative_;
    Map2D background_;
    Interval x_;
    Interval y_;
};

/// Device whose response also depends on the sweep rate dE_M/dt.
class DynamicDut {
public:
    DynamicDut(Map2D response, Interval level_domain, Interval rate_domain)
        : response_(std::move(response)), levels_(level_domain), rates_(rate_domain) {}

    double response(double e, double rate) const { return response_(e, rate); }
    Interval domain() const noexcept { return levels_; }
    Interval rate_domain() const noexcept { return rates_; }

private:
    Map2D response_;
    Interval levels_;
    Interval rates_;
};

/// Anything the correlation meter can stimulate along one stimulus axis.
template <class D>
concept DeviceUnderTest = requires(const D& d, double e, double rate) {
    { d.response(e, rate) } -> std::convertible_to<double>;
    { d.domain() } -> std::convertible_to<Interval>;
};

/// Noise-free response at one stimulus level.
inline double sample_response(const Characteristic1D& dut, double level) {
    if (!dut.domain().contains(level)) {
        std::ostringstream os;
        os << "sample_response: level " << level << " outside [" << dut.domain().lo << ", "
           << dut.domain().hi << "]";
        throw DomainError(os.str());
    }
    return dut.response(level);
}

/// Integral of the informative curve over [e_low, e_high].
inline double full_auger_current(const Characteristic1D& dut, double e_low, double e_high) {
    if (!(e_low < e_high)) throw ArgumentError("full_auger_current: requires e_low < e_high");
    if (!dut.domain().contains(e_low) || !dut.domain().contains(e_high))
        throw DomainError("full_auger_current: bounds outside the device domain");
    double scale = 0.0;
    constexpr int probes = 512;
    for (int k = 0; k <= probes; ++k) {
        const double e = e_low + (e_high - e_low) * k / probes;
        scale = std::max(scale, std::abs(dut.informative(e)));
    }
    if (scale == 0.0) return 0.0;
    return numerics::adaptive_simpson(dut.informative_curve(), e_low, e_high, 1e-12 * scale * (e_high - e_low),
                                      64);
}

enum class PeakShape { gaussian, lorentzian };

/// Auger peak on a secondary-electron background polynomial.
struct AugerSpectrumModel {
    double peak_center = 0.0;
    double peak_width = 1.0;  // sigma for gaussian, half width at half maximum for lorentzian
    double peak_amplitude = 1.0;
    PeakShape peak_shape = PeakShape::gaussian;
    std::vector<double> background;  // c0 + c1 E + c2 E^2 + c3 E^3
    Interval domain{};

    Curve peak() const {
        const double c = peak_center;
        const double w = peak_width;
        const double a = peak_amplitude;
        if (peak_shape == PeakShape::gaussian) {
            return [=](double e) {
                const double x = (e - c) / w;
                return a * std::exp(-0.5 * x * x);
            };
        }
        return [=](double e) {
            const double x = (e - c) / w;
            return a / (1.0 + x * x);
        };
    }

    Curve background_curve() const {
        return [coeffs = background](double e) {
            double v = 0.0;
            for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * e + *it;
            return v;
        };
    }

    Characteristic1D build(std::optional<double> omega_b = std::nullopt) const {
        if (!(peak_width > 0.0)) throw ArgumentError("AugerSpectrumModel: peak_width must be positive");
        if (background.size() > 4) throw ArgumentError("AugerSpectrumModel: background degree must be <= 3");
        if (!domain.contains(peak_center - 3.0 * peak_width) || !domain.contains(peak_center + 3.0 * peak_width))
            throw ArgumentError("AugerSpectrumModel: peak +/- 3 widths must lie inside the domain");
        return Characteristic1D(peak(), background_curve(), domain, omega_b);
    }
};

/// Nano-device I-V curve: ohmic line (background) plus a small nonlinear term.
struct NanoIvModel {
    double ohmic_conductance = 1.0;
    Curve nonlinear_term;
    Interval domain{};
    double max_ratio = 0.1;

    Characteristic1D build(std::optional<double> omega_b = std::nullopt) const {
        Curve nonlinear = nonlinear_term ? nonlinear_term : Curve([](double) { return 0.0; });
        const double g = ohmic_conductance;
        double ohmic_peak = 0.0;
        double nonlinear_peak = 0.0;
        constexpr int probes = 256;
        for (int k = 0; k <= probes; ++k) {
            const double e = domain.lo + domain.width() * k / probes;
            ohmic_peak = std::max(ohmic_peak, std::abs(g * e));
            nonlinear_peak = std::max(nonlinear_peak, std::abs(nonlinear(e)));
        }
        if (nonlinear_peak > max_ratio * ohmic_peak)
            throw ArgumentError("NanoIvModel: nonlinear term exceeds max_ratio of the ohmic current");
        return Characteristic1D(std::move(nonlinear), [g](double e) { return g * e; }, domain, omega_b);
    }
};

/// Arbitrary tabulated data, interpolated with a monotone (PCHIP) cubic.
inline Curve tabulated_curve(std::vector<double> levels, std::vector<double> values) {
    if (levels.size() != values.size() || levels.size() < 4)
        throw ArgumentError("tabulated_curve: need >= 4 (level, value) pairs of equal length");
    if (!std::is_sorted(levels.begin(), levels.end()) ||
        std::adjacent_find(levels.begin(), levels.end()) != levels.end())
        throw ArgumentError("tabulated_curve: levels must be strictly increasing");
    const double lo = levels.front();
    const double hi = levels.back();
    auto spline = std::make_shared<boost::math::interpolators::pchip<std::vector<double>>>(std::move(levels),
                                                                                           std::move(values));
    return [spline, lo, hi](double e) { return (*spline)(std::clamp(e, lo, hi)); };
}

}  // namespace corrsynth
