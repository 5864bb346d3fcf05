#pragma once

// Additive noise, transducer transfer and closed-form variance predictions.
//
// Conventions used throughout:
//  * P is a two-sided power spectral density, so the integral of white noise
//    against u over a period has variance P * integral(u^2 dt).
//  * Harmonic amplitudes U(l) = T^-1 integral u(t) exp(-j l w0 t) dt, so that
//    u(t) = sum over all integer l of U(l) exp(j l w0 t).
//  * Variances are per single-period estimate with the schedule gain applied;
//    averaging N_p periods divides them by N_p.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "corrsynth/errors.hpp"
#include "corrsynth/numerics.hpp"
#include "corrsynth/synthesis.hpp"
#include "corrsynth/weighting.hpp"

namespace corrsynth {

enum class NoiseKind { white, colored };

struct SpectrumPoint {
    double harmonic = 0.0;
    double power = 0.0;

    friend bool operator==(const SpectrumPoint&, const SpectrumPoint&) = default;
};

class NoiseModel {
public:
    NoiseModel() = default;

    static NoiseModel white(double psd, std::uint64_t seed = 0) {
        if (!(psd >= 0.0)) throw ArgumentError("NoiseModel: power density must be >= 0");
        NoiseModel m;
        m.kind_ = NoiseKind::white;
        m.psd_ = psd;
        m.seed_ = seed;
        return m;
    }

    /// Power tabulated at harmonics l of the fundamental 2 pi / T0; log-linear
    /// in between, flat outside the table.
    static NoiseModel colored(std::vector<SpectrumPoint> table, double fundamental_period, std::uint64_t seed = 0) {
        if (table.empty()) throw ArgumentError("NoiseModel: colored table is empty");
        if (!(fundamental_period > 0.0)) throw ArgumentError("NoiseModel: fundamental period must be positive");
        std::sort(table.begin(), table.end(), [](const auto& a, const auto& b) { return a.harmonic < b.harmonic; });
        for (std::size_t i = 0; i < table.size(); ++i) {
            if (!(table[i].power >= 0.0)) throw ArgumentError("NoiseModel: powers must be >= 0");
            if (table[i].harmonic < 0.0) throw ArgumentError("NoiseModel: harmonic indices must be >= 0");
            if (i > 0 && table[i].harmonic == table[i - 1].harmonic)
                throw ArgumentError("NoiseModel: duplicate harmonic in table");
        }
        NoiseModel m;
        m.kind_ = NoiseKind::colored;
        m.table_ = std::move(table);
        m.fundamental_ = fundamental_period;
        m.seed_ = seed;
        return m;
    }

    NoiseKind kind() const noexcept { return kind_; }
    std::uint64_t seed() const noexcept { return seed_; }
    double white_psd() const noexcept { return psd_; }
    const std::vector<SpectrumPoint>& table() const noexcept { return table_; }
    double fundamental_period() const noexcept { return fundamental_; }
    NoiseModel with_seed(std::uint64_t seed) const {
        NoiseModel m = *this;
        m.seed_ = seed;
        return m;
    }

    bool silent() const noexcept {
        if (kind_ == NoiseKind::white) return psd_ == 0.0;
        return std::all_of(table_.begin(), table_.end(), [](const auto& p) { return p.power == 0.0; });
    }

    /// Two-sided PSD at (possibly fractional) harmonic index |l| of 2 pi / T0.
    double psd_at_harmonic(double l) const {
        if (kind_ == NoiseKind::white) return psd_;
        l = std::abs(l);
        if (l <= table_.front().harmonic) return table_.front().power;
        if (l >= table_.back().harmonic) return table_.back().power;
        auto hi = std::upper_bound(table_.begin(), table_.end(), l,
                                   [](double v, const SpectrumPoint& p) { return v < p.harmonic; });
        auto lo = hi - 1;
        const double f = (l - lo->harmonic) / (hi->harmonic - lo->harmonic);
        if (lo->power > 0.0 && hi->power > 0.0) return std::exp((1.0 - f) * std::log(lo->power) + f * std::log(hi->power));
        return (1.0 - f) * lo->power + f * hi->power;
    }

    /// PSD at angular frequency omega.
    double psd_at(double omega) const {
        if (kind_ == NoiseKind::white) return psd_;
        return psd_at_harmonic(omega * fundamental_ / (2.0 * std::numbers::pi));
    }

private:
    NoiseKind kind_ = NoiseKind::white;
    double psd_ = 0.0;
    std::vector<SpectrumPoint> table_;
    double fundamental_ = 1.0;
    std::uint64_t seed_ = 0;
};

/// Per-trial generator: seed_seq{master, trial} drives a 64-bit Mersenne twister.
inline std::mt19937_64 make_rng(std::uint64_t master, std::uint64_t trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
    return std::mt19937_64(seq);
}

/// n noise samples at the given rate. White samples have variance P * rate;
/// colored noise shapes white noise in the frequency domain over the whole
/// record (circular, so whole-period records are exact).
inline std::vector<double> generate_noise_samples(const NoiseModel& model, std::size_t n, double sample_rate,
                                                  std::mt19937_64& rng) {
    if (!(sample_rate > 0.0)) throw ArgumentError("generate_noise: sample rate must be positive");
    std::vector<double> out(n, 0.0);
    if (model.silent() || n == 0) return out;
    std::normal_distribution<double> normal(0.0, 1.0);
    if (model.kind() == NoiseKind::white) {
        const double sd = std::sqrt(model.white_psd() * sample_rate);
        for (auto& v : out) v = sd * normal(rng);
        return out;
    }
    for (auto& v : out) v = normal(rng);
    auto spec = numerics::rfft(out);
    const double record = static_cast<double>(n) / sample_rate;
    for (std::size_t k = 0; k < spec.size(); ++k) {
        const double omega = 2.0 * std::numbers::pi * static_cast<double>(k) / record;
        spec[k] *= std::sqrt(model.psd_at(omega) * sample_rate);
    }
    return numerics::irfft(spec, n);
}

/// round(duration * rate) samples.
inline std::vector<double> generate_noise(const NoiseModel& model, double duration, double sample_rate,
                                          std::mt19937_64& rng) {
    if (!(duration > 0.0) || !(sample_rate > 0.0)) throw ArgumentError("generate_noise: duration and rate must be positive");
    return generate_noise_samples(model, static_cast<std::size_t>(std::llround(duration * sample_rate)), sample_rate, rng);
}

inline std::vector<double> generate_noise(const NoiseModel& model, double duration, double sample_rate) {
    auto rng = make_rng(model.seed(), 0);
    return generate_noise(model, duration, sample_rate, rng);
}

/// Transfer function of the output transducer, S(omega) with omega in rad/s.
struct TransducerTransfer {
    std::function<std::complex<double>(double)> s;

    static TransducerTransfer identity() {
        return {[](double) { return std::complex<double>(1.0, 0.0); }};
    }
    /// First-order low-pass 1 / (1 + j omega / omega_c).
    static TransducerTransfer first_order_lowpass(double omega_c) {
        return {[omega_c](double w) { return 1.0 / std::complex<double>(1.0, w / omega_c); }};
    }
};

namespace detail {

inline std::vector<double> filter_spectrum(std::span<const double> stream, double sample_rate, const TransducerTransfer& tr,
                                           bool conjugate) {
    const auto n = stream.size();
    if (n == 0) return {};
    auto spec = numerics::rfft(stream);
    const double record = static_cast<double>(n) / sample_rate;
    for (std::size_t k = 0; k < spec.size(); ++k) {
        std::complex<double> g = tr.s(2.0 * std::numbers::pi * static_cast<double>(k) / record);
        if (conjugate) g = std::conj(g);
        if (k == 0 || (n % 2 == 0 && k == n / 2)) g = {g.real(), 0.0};
        spec[k] *= g;
    }
    return numerics::irfft(spec, n);
}

}  // namespace detail

/// Multiplies each harmonic of a whole-period record by S(omega_k).
inline std::vector<double> apply_transducer(std::span<const double> stream, double sample_rate,
                                            const TransducerTransfer& tr) {
    return detail::filter_spectrum(stream, sample_rate, tr, false);
}

/// Equivalent reference: the correlation of S-filtered data with u equals the
/// correlation of raw data with this waveform (conj(S) in this DFT convention).
inline std::vector<double> equivalent_reference(std::span<const double> reference_samples, double sample_rate,
                                                const TransducerTransfer& tr) {
    return detail::filter_spectrum(reference_samples, sample_rate, tr, true);
}

// ---------------------------------------------------------------------------
// Variance predictions
// ---------------------------------------------------------------------------

struct VariancePrediction {
    double variance = 0.0;
    std::string formula;
    int harmonics = 0;
    double tail_fraction = 0.0;
};

/// Complex harmonic amplitude U(l) of the reference over one stimulus period.
inline std::complex<double> reference_harmonic(const StimulusSchedule& s, const ReferenceWaveform& u, long l) {
    using namespace std::complex_literals;
    const double period = s.period();
    const double w0 = 2.0 * std::numbers::pi / period;
    const double b = static_cast<double>(l) * w0;
    if (u.per_segment()) {
        std::complex<double> acc = 0.0;
        for (std::size_t i = 0; i < s.segments().size(); ++i) {
            const double t0 = s.segment_start(i);
            const double t1 = t0 + s.dwell(i);
            if (l == 0) {
                acc += u.values()[i] * (t1 - t0);
            } else {
                acc += u.values()[i] * (std::exp(-1i * b * t0) - std::exp(-1i * b * t1)) / (1i * b);
            }
        }
        return acc / period;
    }
    const double a = u.omega();
    if (u.half_period_signs().empty()) {
        // u0 sin(a t + phi) with a an integer multiple of w0.
        const double ratio = a / w0;
        const auto m = std::lround(ratio);
        if (std::abs(ratio - static_cast<double>(m)) > 1e-9)
            throw ArgumentError("reference_harmonic: reference frequency is not a harmonic of the stimulus period");
        if (std::labs(l) != m) return 0.0;
        const std::complex<double> e = std::exp(1i * u.phase());
        return l > 0 ? u.amplitude() * e / (2.0 * 1i) : -u.amplitude() * std::conj(e) / (2.0 * 1i);
    }
    // Signed half-sine arches on consecutive half-periods of length pi / a.
    const double h = std::numbers::pi / a;
    std::complex<double> arch;
    if (std::abs(std::abs(b) - a) < 1e-12 * a) {
        arch = (b > 0 ? -1i : 1i) * (h / 2.0);
    } else {
        arch = a * (1.0 + std::exp(-1i * b * h)) / (a * a - b * b);
    }
    std::complex<double> acc = 0.0;
    const auto& signs = u.half_period_signs();
    for (std::size_t k = 0; k < signs.size(); ++k) acc += static_cast<double>(signs[k]) * std::exp(-1i * b * h * static_cast<double>(k));
    return u.amplitude() * arch * acc / period;
}

/// Mean square of the reference over one period.
inline double reference_mean_square(const StimulusSchedule& s, const ReferenceWaveform& u) {
    if (u.per_segment()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < s.segments().size(); ++i) acc += u.values()[i] * u.values()[i] * s.segments()[i].fraction;
        return acc;
    }
    return 0.5 * u.amplitude() * u.amplitude();
}

/// D = gain^2 T sum_l P(l) |U(l)|^2. Harmonics beyond L use the flat
/// extrapolated density, so the tail is added exactly through Parseval. L must
/// cover the tabulated spectrum; otherwise a resolution error is raised.
inline VariancePrediction predict_variance_spectral(const StimulusSchedule& s, const ReferenceWaveform& u,
                                                    const NoiseModel& noise, int max_harmonic = 4096,
                                                    bool apply_gain = true) {
    VariancePrediction out;
    out.formula = "spectral";
    out.harmonics = max_harmonic;
    const double period = s.period();
    const double gain = apply_gain ? s.gain() : 1.0;
    const double mean_square = reference_mean_square(s, u);
    if (mean_square == 0.0) return out;
    if (noise.kind() == NoiseKind::white) {
        out.variance = gain * gain * period * noise.white_psd() * mean_square;
        return out;
    }
    const double l_scale = noise.fundamental_period() / period;
    if (noise.table().back().harmonic > max_harmonic * l_scale)
        throw ResolutionError("predict_variance_spectral: cutoff harmonic does not cover the noise table");
    double partial = 0.0;
    double covered = 0.0;
    for (long l = -max_harmonic; l <= max_harmonic; ++l) {
        const double mag = std::norm(reference_harmonic(s, u, l));
        partial += noise.psd_at_harmonic(static_cast<double>(l) * l_scale) * mag;
        covered += mag;
    }
    const double tail_mass = std::max(0.0, mean_square - covered);
    const double tail = noise.psd_at_harmonic((max_harmonic + 1) * l_scale) * tail_mass;
    out.tail_fraction = partial + tail > 0.0 ? tail / (partial + tail) : 0.0;
    out.variance = gain * gain * period * (partial + tail);
    return out;
}

/// White-noise optimum P Gamma_total^2 / T (T = 1 gives the per-unit-time form).
inline VariancePrediction predict_variance_optimum(double gamma, double psd, double period = 1.0) {
    return {psd * gamma * gamma / period, "optimum", 0, 0.0};
}

inline VariancePrediction predict_variance_optimum(const AnyWeighting& w, double psd, double period = 1.0) {
    return predict_variance_optimum(gamma_total(w), psd, period);
}

/// Harmonic-reference penalty: pi^2 / 8 times the optimum at the density of
/// the noise minimum.
inline VariancePrediction predict_variance_narrowband(const AnyWeighting& w, double psd_at_minimum, double period = 1.0) {
    auto v = predict_variance_optimum(w, psd_at_minimum, period);
    v.variance *= std::numbers::pi * std::numbers::pi / 8.0;
    v.formula = "narrowband";
    return v;
}

}  // namespace corrsynth
