#pragma once

// Conventional harmonic modulation with lock-in detection, the integration
// chain that restores curve and area from the derivative, and the
// matched-time comparison against the co-synthesized optimal system.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "corrsynth/correlation_meter.hpp"
#include "corrsynth/dut_model.hpp"
#include "corrsynth/errors.hpp"
#include "corrsynth/montecarlo.hpp"
#include "corrsynth/noise.hpp"
#include "corrsynth/synthesis.hpp"
#include "corrsynth/weighting.hpp"

namespace corrsynth {

struct LockinConfig {
    double amplitude = 0.0;        // E_m / 2
    double omega = 0.0;            // rad/s
    int harmonic_order = 1;        // only first-harmonic detection is modeled
    double phase = 0.0;            // detection phase
    int samples_per_period = 64;
    int periods = 1;

    void validate() const {
        if (!(amplitude > 0.0)) throw ArgumentError("LockinConfig: amplitude must be positive");
        if (!(omega > 0.0)) throw ArgumentError("LockinConfig: frequency must be positive");
        if (harmonic_order != 1) throw ArgumentError("LockinConfig: only first-harmonic detection is supported");
        if (samples_per_period < 4) throw ArgumentError("LockinConfig: need >= 4 samples per period");
        if (periods < 1) throw ArgumentError("LockinConfig: periods must be >= 1");
    }
    double period() const { return 2.0 * std::numbers::pi / omega; }
};

/// Harmonic stimulus at E_c with gain 2 / (amplitude T), so a linear response
/// g E reads back exactly g.
inline Synthesis lockin_schedule(const LockinConfig& cfg, double center) {
    cfg.validate();
    const double period = cfg.period();
    return {StimulusSchedule::harmonic(cfg.amplitude, period, center, 0.0, 2.0 / (cfg.amplitude * period)),
            ReferenceWaveform::harmonic(1.0, cfg.omega, cfg.phase)};
}

inline MeasurementConfig lockin_measurement(const LockinConfig& cfg) {
    MeasurementConfig m;
    m.periods = cfg.periods;
    m.sample_rate = cfg.samples_per_period / cfg.period();
    return m;
}

/// First-harmonic lock-in estimate of dI/dE at E_c.
template <DeviceUnderTest Dut>
double lockin_measure(const Dut& dut, const LockinConfig& cfg, const NoiseModel& noise, double center,
                      std::uint64_t trial = 0) {
    const auto syn = lockin_schedule(cfg, center);
    return measure(dut, syn.schedule, syn.reference, noise, lockin_measurement(cfg), trial).estimates.front();
}

/// Cumulative trapezoid with the curve pinned to 0 at the first point.
inline std::vector<double> restore_curve(std::span<const double> derivative, double spacing) {
    std::vector<double> out(derivative.size(), 0.0);
    for (std::size_t i = 1; i < derivative.size(); ++i)
        out[i] = out[i - 1] + 0.5 * spacing * (derivative[i - 1] + derivative[i]);
    return out;
}

/// Trapezoid area under a restored curve.
inline double restore_area(std::span<const double> curve, double spacing) {
    double s = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) s += 0.5 * spacing * (curve[i - 1] + curve[i]);
    return s;
}

/// Subtracts the straight line through the first and last points.
inline std::vector<double> remove_linear_baseline(std::span<const double> curve) {
    std::vector<double> out(curve.begin(), curve.end());
    if (out.size() < 2) return out;
    const double a = out.front();
    const double b = out.back();
    const double n = static_cast<double>(out.size() - 1);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= a + (b - a) * static_cast<double>(i) / n;
    return out;
}

/// First-harmonic broadening kernel on a grid: the lock-in output is the true
/// derivative convolved with k(x) = 2 sqrt(a^2 - x^2) / (pi a^2). Returns the
/// cell integrals c_m for m = -M..M (M = ceil(a / spacing)).
inline std::vector<double> modulation_kernel(double amplitude, double spacing) {
    const double a = amplitude;
    auto cdf = [a](double x) {
        x = std::clamp(x, -a, a);
        return 0.5 + (x * std::sqrt(a * a - x * x) + a * a * std::asin(x / a)) / (std::numbers::pi * a * a);
    };
    const int m = static_cast<int>(std::ceil(a / spacing));
    std::vector<double> c;
    for (int j = -m; j <= m; ++j) c.push_back(cdf((j + 0.5) * spacing) - cdf((j - 0.5) * spacing));
    return c;
}

/// Tikhonov-regularized deconvolution of lock-in derivative estimates by the
/// tabulated broadening kernel. Sharpens the curve and amplifies noise.
inline std::vector<double> correct_lockin(std::span<const double> estimates, double spacing, double amplitude,
                                          double regularization = 1e-3) {
    const auto kernel = modulation_kernel(amplitude, spacing);
    const int m = static_cast<int>(kernel.size() / 2);
    const auto n = static_cast<Eigen::Index>(estimates.size());
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = -m; j <= m; ++j) {
            const Eigen::Index col = i + j;
            if (col < 0 || col >= n) continue;
            c(i, col) = kernel[static_cast<std::size_t>(j + m)];
            row += c(i, col);
        }
        c.row(i) /= row;  // truncated rows keep unit gain
    }
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = estimates[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd normal = c.transpose() * c + regularization * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd x = normal.ldlt().solve(c.transpose() * y);
    return {x.data(), x.data() + n};
}

// ---------------------------------------------------------------------------
// Matched-time comparison
// ---------------------------------------------------------------------------

enum class Target { full_current, curve, derivative };

inline const char* target_name(Target t) {
    switch (t) {
        case Target::full_current: return "full_current";
        case Target::curve: return "curve";
        case Target::derivative: return "derivative";
    }
    return "?";
}

/// Gaussian peak on a linear background, scanned over center +/- span_sigmas
/// sigma with `waypoints` equally spaced control levels.
struct ComparisonSetup {
    double peak_center = 0.0;
    double sigma = 1.0;
    double peak_amplitude = 1.0;
    double background_offset = 0.5;
    double background_slope = 0.05;
    double budget = 0.04;          // systematic error budget, fraction
    int waypoints = 25;
    double span_sigmas = 6.0;
    double test_time = 25.0;       // total for either system
    double psd = 1.0;              // white noise two-sided density
    int trials = 1000;
    std::uint64_t seed = 1;
    int lockin_samples_per_period = 64;
    int lockin_periods = 8;        // per waypoint
    int continuous_samples = 512;

    void validate() const {
        if (!(budget >= 0.01 && budget <= 0.10)) throw ArgumentError("compare: budget must be in [1%, 10%]");
        if (waypoints < 5) throw ArgumentError("compare: need >= 5 waypoints");
        if (!(sigma > 0.0) || !(test_time > 0.0) || !(psd >= 0.0)) throw ArgumentError("compare: invalid setup");
        if (trials < 2) throw ArgumentError("compare: need >= 2 trials");
    }
    double spacing() const { return 2.0 * span_sigmas * sigma / (waypoints - 1); }
    double level(int k) const { return peak_center - span_sigmas * sigma + k * spacing(); }
};

struct ComparisonReport {
    Target target = Target::derivative;
    double budget = 0.0;
    double lockin_systematic = 0.0;   // fraction of the true scale
    double optimal_systematic = 0.0;
    double lockin_variance = 0.0;
    double optimal_variance = 0.0;
    double ratio = 0.0;               // lock-in / optimal
    double lockin_duration = 0.0;
    double optimal_duration = 0.0;
    double lockin_amplitude = 0.0;
    double optimal_parameter = 0.0;   // half-step, window half-width, or 0
    int trials = 0;
};

namespace detail {

inline Characteristic1D comparison_dut(const ComparisonSetup& c) {
    AugerSpectrumModel m;
    m.peak_center = c.peak_center;
    m.peak_width = c.sigma;
    m.peak_amplitude = c.peak_amplitude;
    m.peak_shape = PeakShape::gaussian;
    m.background = {c.background_offset - c.background_slope * c.peak_center, c.background_slope};
    const double reach = (c.span_sigmas + 4.0) * c.sigma;
    m.domain = {c.peak_center - reach, c.peak_center + reach};
    return m.build(2.326 / c.sigma);
}

inline double gaussian_d1(const ComparisonSetup& c, double e) {
    const double x = (e - c.peak_center) / c.sigma;
    return -c.peak_amplitude * x / c.sigma * std::exp(-0.5 * x * x);
}

inline double gaussian(const ComparisonSetup& c, double e) {
    const double x = (e - c.peak_center) / c.sigma;
    return c.peak_amplitude * std::exp(-0.5 * x * x);
}

template <class F>
double bisect(F&& f, double lo, double hi, int iterations = 60) {
    double flo = f(lo);
    for (int i = 0; i < iterations; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

struct LockinChain {
    std::vector<double> derivative;
    std::vector<double> curve;  // baseline removed
    double area = 0.0;
};

inline LockinChain lockin_chain(std::vector<double> derivative, double spacing) {
    LockinChain ch;
    ch.curve = remove_linear_baseline(restore_curve(derivative, spacing));
    ch.area = restore_area(ch.curve, spacing);
    ch.derivative = std::move(derivative);
    return ch;
}

inline double mean_of(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

}  // namespace detail

/// Systematic error of noise-free lock-in derivative estimates over the scan,
/// relative to the peak's largest slope.
inline double lockin_derivative_error(const ComparisonSetup& c, const Characteristic1D& dut, double amplitude) {
    LockinConfig lc;
    lc.amplitude = amplitude;
    lc.omega = 2.0 * std::numbers::pi * c.lockin_periods * c.waypoints / c.test_time;
    lc.samples_per_period = c.lockin_samples_per_period;
    const double scale = c.peak_amplitude / c.sigma * std::exp(-0.5);
    double worst = 0.0;
    for (int k = 0; k < c.waypoints; ++k) {
        const double e = c.level(k);
        const double est = lockin_measure(dut, lc, NoiseModel::white(0.0), e);
        worst = std::max(worst, std::abs(est - detail::gaussian_d1(c, e) - c.background_slope));
    }
    return worst / scale;
}

/// Runs the matched-time comparison for one target quantity.
inline ComparisonReport compare_systems(Target target, const ComparisonSetup& c) {
    c.validate();
    const auto dut = detail::comparison_dut(c);
    const double h = c.spacing();
    const int nw = c.waypoints;
    ComparisonReport rep;
    rep.target = target;
    rep.budget = c.budget;
    rep.trials = c.trials;
    rep.lockin_duration = c.test_time;
    rep.optimal_duration = c.test_time;
    const NoiseModel noise = NoiseModel::white(c.psd, c.seed);

    // Lock-in amplitude: derivative spectrum distortion equals the budget.
    const double a_max = 3.0 * c.sigma;
    if (lockin_derivative_error(c, dut, a_max) < c.budget)
        throw CalibrationError("compare: budget unreachable by lock-in amplitude tuning");
    const double amp = detail::bisect([&](double a) { return lockin_derivative_error(c, dut, a) - c.budget; },
                                      1e-3 * c.sigma, a_max);
    rep.lockin_amplitude = amp;
    LockinConfig lc;
    lc.amplitude = amp;
    lc.omega = 2.0 * std::numbers::pi * c.lockin_periods * nw / c.test_time;
    lc.samples_per_period = c.lockin_samples_per_period;
    lc.periods = c.lockin_periods;
    std::vector<CorrelationMeter<Characteristic1D>> lockin_meters;
    for (int k = 0; k < nw; ++k) {
        const auto syn = lockin_schedule(lc, c.level(k));
        lockin_meters.emplace_back(dut, syn.schedule, syn.reference, lockin_measurement(lc));
    }
    auto lockin_run = [&](std::mt19937_64* rng) {
        std::vector<double> d(static_cast<std::size_t>(nw));
        for (int k = 0; k < nw; ++k) {
            const auto& m = lockin_meters[static_cast<std::size_t>(k)];
            if (rng) {
                const auto v = m.period_values(noise, *rng);
                d[static_cast<std::size_t>(k)] = m.filter(v[0]);
            } else {
                d[static_cast<std::size_t>(k)] = m.noiseless();
            }
        }
        return detail::lockin_chain(std::move(d), h);
    };

    const double true_area = c.peak_amplitude * c.sigma * std::sqrt(2.0 * std::numbers::pi);
    const auto clean = lockin_run(nullptr);
    std::vector<std::size_t> scored;  // waypoints entering the variance metric
    switch (target) {
        case Target::derivative: {
            const double scale = c.peak_amplitude / c.sigma * std::exp(-0.5);
            for (int k = 0; k < nw; ++k) {
                scored.push_back(static_cast<std::size_t>(k));
                rep.lockin_systematic = std::max(rep.lockin_systematic,
                    std::abs(clean.derivative[static_cast<std::size_t>(k)] - detail::gaussian_d1(c, c.level(k)) - c.background_slope) / scale);
            }
            break;
        }
        case Target::curve:
            for (int k = 1; k + 1 < nw; ++k) {
                scored.push_back(static_cast<std::size_t>(k));
                rep.lockin_systematic = std::max(rep.lockin_systematic,
                    std::abs(clean.curve[static_cast<std::size_t>(k)] - detail::gaussian(c, c.level(k))) / c.peak_amplitude);
            }
            break;
        case Target::full_current:
            rep.lockin_systematic = std::abs(clean.area - true_area) / true_area;
            break;
    }

    const auto lockin_trials = run_trials<std::vector<double>>(static_cast<std::size_t>(c.trials), [&](std::size_t t) {
        auto rng = make_rng(c.seed, t);
        const auto ch = lockin_run(&rng);
        if (target == Target::full_current) return std::vector<double>{ch.area};
        std::vector<double> out;
        for (auto k : scored) out.push_back(target == Target::curve ? ch.curve[k] : ch.derivative[k]);
        return out;
    });

    // Optimal system: one synthesized weighting per scored quantity, all of
    // the test time shared equally among them.
    std::vector<Synthesis> plans;
    MeasurementConfig mc;
    mc.slot_mode = true;
    double optimal_error = 0.0;
    switch (target) {
        case Target::derivative: {
            const double t_w = c.test_time / nw;
            const double scale = c.peak_amplitude / c.sigma * std::exp(-0.5);
            auto error_at = [&](double delta) {
                double worst = 0.0;
                for (int k = 0; k < nw; ++k) {
                    const double e = c.level(k);
                    const double est = (dut.response(e + delta) - dut.response(e - delta)) / (2.0 * delta);
                    worst = std::max(worst, std::abs(est - detail::gaussian_d1(c, e) - c.background_slope) / scale);
                }
                return worst;
            };
            const double delta = detail::bisect([&](double d) { return error_at(d) - c.budget; }, 1e-3 * c.sigma, 2.0 * c.sigma);
            rep.optimal_parameter = delta;
            for (int k = 0; k < nw; ++k) {
                const double e = c.level(k);
                plans.push_back(synthesize_discrete(
                    DiscreteWeighting({{e - delta, -0.5 / delta}, {e + delta, 0.5 / delta}}, e), t_w));
            }
            break;
        }
        case Target::curve: {
            const double t_w = c.test_time / static_cast<double>(scored.size());
            const double lo = c.level(0);
            const double hi = c.level(nw - 1);
            for (auto k : scored) {
                const double e = c.level(static_cast<int>(k));
                const double alpha = (e - lo) / (hi - lo);
                plans.push_back(synthesize_discrete(
                    DiscreteWeighting({{lo, -(1.0 - alpha)}, {e, 1.0}, {hi, -alpha}}, e), t_w));
            }
            break;
        }
        case Target::full_current: {
            auto error_at = [&](double k) {
                const auto w = boxcar_with_end_deltas(c.peak_center - k * c.sigma, c.peak_center + k * c.sigma);
                const double est = background_residual(w, [&](double e) { return dut.response(e); });
                return std::abs(est - true_area) / true_area;
            };
            const double k = detail::bisect([&](double x) { return c.budget - error_at(x); }, 1.0, c.span_sigmas);
            rep.optimal_parameter = k * c.sigma;
            auto w = boxcar_with_end_deltas(c.peak_center - k * c.sigma, c.peak_center + k * c.sigma);
            plans.push_back(synthesize_continuous(w, c.test_time, c.continuous_samples));
            optimal_error = error_at(k);
            break;
        }
    }
    std::vector<CorrelationMeter<Characteristic1D>> optimal_meters;
    for (const auto& p : plans) optimal_meters.emplace_back(dut, p.schedule, p.reference, mc);
    if (target == Target::derivative) {
        const double scale = c.peak_amplitude / c.sigma * std::exp(-0.5);
        for (int k = 0; k < nw; ++k)
            optimal_error = std::max(optimal_error,
                std::abs(optimal_meters[static_cast<std::size_t>(k)].noiseless() - detail::gaussian_d1(c, c.level(k)) - c.background_slope) / scale);
    } else if (target == Target::curve) {
        for (std::size_t j = 0; j < scored.size(); ++j)
            optimal_error = std::max(optimal_error,
                std::abs(optimal_meters[j].noiseless() - detail::gaussian(c, c.level(static_cast<int>(scored[j])))) / c.peak_amplitude);
    } else {
        optimal_error = std::abs(optimal_meters.front().noiseless() - true_area) / true_area;
    }
    rep.optimal_systematic = optimal_error;

    const auto optimal_trials = run_trials<std::vector<double>>(static_cast<std::size_t>(c.trials), [&](std::size_t t) {
        auto rng = make_rng(c.seed ^ 0x9e3779b97f4a7c15ull, t);
        std::vector<double> out;
        for (const auto& m : optimal_meters) out.push_back(m.filter(m.period_values(noise, rng)[0]));
        return out;
    });

    auto mean_variance = [](const std::vector<std::vector<double>>& trials) {
        const std::size_t q = trials.front().size();
        double acc = 0.0;
        for (std::size_t j = 0; j < q; ++j) {
            std::vector<double> col;
            col.reserve(trials.size());
            for (const auto& t : trials) col.push_back(t[j]);
            acc += sample_stats(col).variance;
        }
        return acc / static_cast<double>(q);
    };
    rep.lockin_variance = mean_variance(lockin_trials);
    rep.optimal_variance = mean_variance(optimal_trials);
    rep.ratio = rep.optimal_variance > 0.0 ? rep.lockin_variance / rep.optimal_variance : 0.0;
    return rep;
}

}  // namespace corrsynth
