#pragma once

// Simulated correlation channel: stimulate the device with E_c + E_M(t),
// correlate the response (plus noise) with the reference over each period,
// scale by the schedule gain and filter across periods.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "corrsynth/dut_model.hpp"
#include "corrsynth/errors.hpp"
#include "corrsynth/noise.hpp"
#include "corrsynth/numerics.hpp"
#include "corrsynth/synthesis.hpp"
#include "corrsynth/weighting.hpp"

namespace corrsynth {

enum class FilterKind { boxcar, single_pole };
enum class GainHandling { apply, raw };

struct MeasurementConfig {
    int periods = 1;               // N_p
    double sample_rate = 0.0;      // full-rate mode, samples per second
    FilterKind filter = FilterKind::boxcar;
    double cutoff_hz = 0.0;        // single-pole filter only
    bool slot_mode = false;
    GainHandling gain = GainHandling::apply;
    double phase_offset = 0.0;     // start of the sample grid, as a fraction of the period
};

struct MeasurementResult {
    std::vector<double> levels;                   // E_c per waypoint
    std::vector<double> estimates;
    std::vector<std::vector<double>> per_period;  // gain-scaled period correlations
    std::vector<double> sample_variance;          // across periods, unbiased (0 for one period)
    std::uint64_t seed = 0;
    int periods = 1;
};

/// Boxcar mean, or the last output of y += alpha (theta - y) with
/// alpha = 1 - exp(-2 pi f_c T).
inline double apply_filter(std::span<const double> per_period, const MeasurementConfig& cfg, double period) {
    if (per_period.empty()) return 0.0;
    if (cfg.filter == FilterKind::boxcar) {
        double s = 0.0;
        for (double v : per_period) s += v;
        return s / static_cast<double>(per_period.size());
    }
    const double alpha = 1.0 - std::exp(-2.0 * std::numbers::pi * cfg.cutoff_hz * period);
    double y = per_period.front();
    for (std::size_t p = 1; p < per_period.size(); ++p) y += alpha * (per_period[p] - y);
    return y;
}

/// Per-segment mean of one period of samples taken at `sample_rate` from the
/// period start. Segment boundaries must fall on sample boundaries.
inline std::vector<double> slot_integrate(std::span<const double> samples, const StimulusSchedule& s, double sample_rate) {
    if (s.is_harmonic()) throw AlignmentError("slot_integrate: harmonic schedules have no slots");
    const double n_exact = s.period() * sample_rate;
    const auto n = static_cast<std::size_t>(std::llround(n_exact));
    if (std::abs(n_exact - static_cast<double>(n)) > 1e-9 * n_exact || samples.size() != n)
        throw AlignmentError("slot_integrate: sample record is not exactly one period");
    std::vector<double> means;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < s.segments().size(); ++i) {
        const double b_exact = (s.segment_start(i) + s.dwell(i)) * sample_rate;
        const auto b = static_cast<std::size_t>(std::llround(b_exact));
        if (std::abs(b_exact - static_cast<double>(b)) > 1e-6 || b <= begin) {
            std::ostringstream os;
            os << "slot_integrate: segment " << i << " ends at sample " << b_exact << ", not on a sample boundary";
            throw AlignmentError(os.str());
        }
        double acc = 0.0;
        for (std::size_t k = begin; k < b; ++k) acc += samples[k];
        means.push_back(acc / static_cast<double>(b - begin));
        begin = b;
    }
    return means;
}

/// A configured channel: precomputes the deterministic part of each period's
/// correlation so Monte-Carlo trials only add noise. Several references may
/// share one stimulus (dual-channel operation); they then see the same noise.
template <DeviceUnderTest Dut>
class CorrelationMeter {
public:
    CorrelationMeter(const Dut& dut, StimulusSchedule schedule, std::vector<ReferenceWaveform> references,
                     MeasurementConfig cfg)
        : schedule_(std::move(schedule)), refs_(std::move(references)), cfg_(cfg) {
        if (refs_.empty()) throw ArgumentError("CorrelationMeter: no reference");
        validate(dut);
        gain_ = cfg_.gain == GainHandling::apply ? schedule_.gain() : 1.0;
        if (cfg_.slot_mode) {
            prepare_slots(dut);
        } else {
            prepare_samples(dut);
        }
    }

    CorrelationMeter(const Dut& dut, StimulusSchedule schedule, ReferenceWaveform reference, MeasurementConfig cfg)
        : CorrelationMeter(dut, std::move(schedule), std::vector<ReferenceWaveform>{std::move(reference)}, cfg) {}

    const StimulusSchedule& schedule() const noexcept { return schedule_; }
    const MeasurementConfig& config() const noexcept { return cfg_; }
    double gain() const noexcept { return gain_; }
    std::size_t channels() const noexcept { return refs_.size(); }

    /// Gain-scaled noise-free correlation of one period for a channel.
    double noiseless(std::size_t channel = 0) const { return gain_ * deterministic_[channel]; }

    /// Gain-scaled correlation of each period, [channel][period].
    std::vector<std::vector<double>> period_values(const NoiseModel& noise, std::mt19937_64& rng) const {
        const auto np = static_cast<std::size_t>(cfg_.periods);
        std::vector<std::vector<double>> out(refs_.size(), std::vector<double>(np, 0.0));
        for (std::size_t c = 0; c < refs_.size(); ++c)
            for (auto& v : out[c]) v = deterministic_[c];
        if (!noise.silent()) {
            if (cfg_.slot_mode && noise.kind() == NoiseKind::white) {
                // Integral of white noise over a slot is an exact Wiener increment.
                std::normal_distribution<double> normal(0.0, 1.0);
                const double psd = noise.white_psd();
                for (std::size_t p = 0; p < np; ++p) {
                    for (std::size_t i = 0; i < schedule_.segments().size(); ++i) {
                        const double n_i = std::sqrt(psd * schedule_.dwell(i)) * normal(rng);
                        for (std::size_t c = 0; c < refs_.size(); ++c) out[c][p] += refs_[c].values()[i] * n_i;
                    }
                }
            } else if (cfg_.slot_mode) {
                const auto stream = generate_noise_samples(noise, np * samples_per_period_, cfg_.sample_rate, rng);
                for (std::size_t p = 0; p < np; ++p) {
                    const auto means = slot_integrate(
                        std::span<const double>(stream).subspan(p * samples_per_period_, samples_per_period_), schedule_,
                        cfg_.sample_rate);
                    for (std::size_t i = 0; i < means.size(); ++i)
                        for (std::size_t c = 0; c < refs_.size(); ++c)
                            out[c][p] += refs_[c].values()[i] * means[i] * schedule_.dwell(i);
                }
            } else {
                const auto stream = generate_noise_samples(noise, np * samples_per_period_, cfg_.sample_rate, rng);
                for (std::size_t p = 0; p < np; ++p) {
                    const double* xi = stream.data() + p * samples_per_period_;
                    for (std::size_t c = 0; c < refs_.size(); ++c) {
                        double acc = 0.0;
                        const auto& u = u_samples_[c];
                        for (std::size_t k = 0; k < samples_per_period_; ++k) acc += xi[k] * u[k];
                        out[c][p] += acc * dt_;
                    }
                }
            }
        }
        for (auto& ch : out)
            for (auto& v : ch) v *= gain_;
        return out;
    }

    double filter(std::span<const double> per_period) const { return apply_filter(per_period, cfg_, schedule_.period()); }

private:
    void validate(const Dut& dut) {
        if (cfg_.periods < 1) throw ArgumentError("MeasurementConfig: periods must be >= 1");
        if (cfg_.filter == FilterKind::single_pole && !(cfg_.cutoff_hz > 0.0))
            throw ArgumentError("MeasurementConfig: single-pole filter needs a positive cutoff");
        for (const auto& r : refs_) {
            if (r.per_segment() && (schedule_.is_harmonic() || r.values().size() != schedule_.segments().size()))
                throw AlignmentError("CorrelationMeter: reference not aligned with the schedule segments");
        }
        if (cfg_.slot_mode) {
            for (const auto& r : refs_)
                if (!r.per_segment()) throw AlignmentError("slot mode needs a reference that is constant per segment");
        } else {
            if (!(cfg_.sample_rate > 0.0)) throw ArgumentError("MeasurementConfig: sample_rate must be positive");
            const double n = cfg_.sample_rate * schedule_.period();
            if (n < 2.0) throw ArgumentError("MeasurementConfig: fewer than 2 samples per period");
            if (schedule_.kind() == ScheduleKind::stepwise || schedule_.kind() == ScheduleKind::dynamic) {
                for (std::size_t i = 0; i < schedule_.segments().size(); ++i) {
                    if (schedule_.dwell(i) * cfg_.sample_rate < 2.0 - 1e-9)
                        throw ArgumentError("MeasurementConfig: fewer than 2 samples in the shortest segment");
                }
            }
        }
        const auto [lo, hi] = schedule_.extent();
        const auto dom = dut.domain();
        const double slack = 1e-12 * std::max(1.0, dom.width());
        if (schedule_.center() + lo < dom.lo - slack || schedule_.center() + hi > dom.hi + slack) {
            std::ostringstream os;
            os << "stimulus range [" << schedule_.center() + lo << ", " << schedule_.center() + hi
               << "] leaves the device domain [" << dom.lo << ", " << dom.hi << "]";
            throw DomainError(os.str());
        }
    }

    void prepare_slots(const Dut& dut) {
        const double center = schedule_.center();
        const double period = schedule_.period();
        slot_integrals_.assign(schedule_.segments().size(), 0.0);
        for (std::size_t i = 0; i < schedule_.segments().size(); ++i) {
            const auto& seg = schedule_.segments()[i];
            const double dwell = seg.fraction * period;
            if (seg.slope == 0.0) {
                slot_integrals_[i] = dut.response(center + seg.level, 0.0) * dwell;
            } else {
                slot_integrals_[i] = numerics::gauss_legendre8(
                    [&](double tau) { return dut.response(center + seg.level + seg.slope * tau, seg.slope); }, 0.0,
                    dwell);
            }
        }
        deterministic_.assign(refs_.size(), 0.0);
        for (std::size_t c = 0; c < refs_.size(); ++c)
            for (std::size_t i = 0; i < slot_integrals_.size(); ++i) deterministic_[c] += refs_[c].values()[i] * slot_integrals_[i];
        if (!(cfg_.sample_rate > 0.0)) return;
        samples_per_period_ = static_cast<std::size_t>(std::llround(cfg_.sample_rate * period));
    }

    void prepare_samples(const Dut& dut) {
        const double period = schedule_.period();
        const double center = schedule_.center();
        samples_per_period_ = static_cast<std::size_t>(std::llround(cfg_.sample_rate * period));
        dt_ = period / static_cast<double>(samples_per_period_);
        u_samples_.assign(refs_.size(), std::vector<double>(samples_per_period_));
        deterministic_.assign(refs_.size(), 0.0);
        for (std::size_t k = 0; k < samples_per_period_; ++k) {
            double t = (static_cast<double>(k) + 0.5) * dt_ + cfg_.phase_offset * period;
            t = std::fmod(t, period);
            if (t < 0.0) t += period;
            const std::size_t seg = schedule_.is_harmonic() ? 0 : schedule_.segment_at(t);
            const double response = dut.response(center + schedule_.level_at(t), schedule_.rate_at(t));
            for (std::size_t c = 0; c < refs_.size(); ++c) {
                const double u = refs_[c].value(t, seg);
                u_samples_[c][k] = u;
                deterministic_[c] += response * u * dt_;
            }
        }
    }

    StimulusSchedule schedule_;
    std::vector<ReferenceWaveform> refs_;
    MeasurementConfig cfg_;
    double gain_ = 1.0;
    std::vector<double> deterministic_;
    std::vector<double> slot_integrals_;
    std::vector<std::vector<double>> u_samples_;
    std::size_t samples_per_period_ = 0;
    double dt_ = 0.0;
};

namespace detail {

inline double unbiased_variance(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace detail

/// One estimate at the schedule's own center. `trial` selects the noise stream
/// (seeded from the noise model's seed and the trial index).
template <DeviceUnderTest Dut>
MeasurementResult measure(const Dut& dut, const StimulusSchedule& s, const ReferenceWaveform& u, const NoiseModel& noise,
                          const MeasurementConfig& cfg, std::uint64_t trial = 0) {
    const CorrelationMeter<Dut> meter(dut, s, u, cfg);
    auto rng = make_rng(noise.seed(), trial);
    auto values = meter.period_values(noise, rng);
    MeasurementResult r;
    r.seed = noise.seed();
    r.periods = cfg.periods;
    r.levels.push_back(s.center());
    r.estimates.push_back(meter.filter(values[0]));
    r.sample_variance.push_back(detail::unbiased_variance(values[0]));
    r.per_period.push_back(std::move(values[0]));
    return r;
}

struct ControlSweep {
    std::vector<double> waypoints;
    std::optional<double> sweep_rate;  // stimulus units per second; default spacing / (N_p T)
    double margin = 1.0;
    std::optional<double> omega_b;     // defaults to the device's bandwidth
};

/// pi / (T omega_B): fastest control-level drift that avoids aliasing.
inline double aliasing_limit(double period, double omega_b) { return std::numbers::pi / (period * omega_b); }

template <DeviceUnderTest Dut>
double sweep_bandwidth(const Dut& dut, const ControlSweep& sw) {
    if (sw.omega_b) return *sw.omega_b;
    if constexpr (requires { dut.bandwidth(); }) {
        return dut.bandwidth();
    } else {
        throw ArgumentError("sweep: device has no bandwidth; set omega_b");
    }
}

/// Effective drift rate of a sweep and the number of periods per waypoint.
inline std::pair<double, int> sweep_timing(const ControlSweep& sw, double period, int periods) {
    double spacing = 0.0;
    for (std::size_t i = 1; i < sw.waypoints.size(); ++i) {
        const double d = std::abs(sw.waypoints[i] - sw.waypoints[i - 1]);
        spacing = i == 1 ? d : std::min(spacing, d);
    }
    if (sw.sweep_rate) {
        if (!(*sw.sweep_rate > 0.0)) throw ArgumentError("sweep: sweep_rate must be positive");
        const int np = spacing > 0.0 ? std::max(1, static_cast<int>(std::floor(spacing / (*sw.sweep_rate * period) + 1e-9)))
                                     : periods;
        return {*sw.sweep_rate, np};
    }
    return {spacing / (periods * period), periods};
}

/// Estimates at each control level with the schedule recentered there.
/// E_c is held during each waypoint and stepped between them; the mean drift
/// rate (spacing over dwell) is checked against the aliasing limit.
template <DeviceUnderTest Dut>
MeasurementResult sweep(const Dut& dut, const StimulusSchedule& s, const ReferenceWaveform& u, const NoiseModel& noise,
                        const MeasurementConfig& cfg, const ControlSweep& sw, std::uint64_t trial = 0) {
    if (sw.waypoints.empty()) throw ArgumentError("sweep: no waypoints");
    if (!(sw.margin > 0.0) || sw.margin > 1.0) throw ArgumentError("sweep: aliasing margin must be in (0, 1]");
    const double omega_b = sweep_bandwidth(dut, sw);
    const double limit = sw.margin * aliasing_limit(s.period(), omega_b);
    const auto [rate, np] = sweep_timing(sw, s.period(), cfg.periods);
    if (sw.waypoints.size() > 1 && rate > limit * (1.0 + 1e-12)) {
        std::ostringstream os;
        os.precision(10);
        os << "sweep: control drift " << rate << " per second exceeds the aliasing limit pi/(T omega_B) = " << limit;
        throw AliasingError(os.str(), limit);
    }
    MeasurementConfig local = cfg;
    local.periods = np;
    auto rng = make_rng(noise.seed(), trial);
    MeasurementResult r;
    r.seed = noise.seed();
    r.periods = np;
    for (double ec : sw.waypoints) {
        const CorrelationMeter<Dut> meter(dut, s.recentered(ec), u, local);
        auto values = meter.period_values(noise, rng);
        r.levels.push_back(ec);
        r.estimates.push_back(meter.filter(values[0]));
        r.sample_variance.push_back(detail::unbiased_variance(values[0]));
        r.per_period.push_back(std::move(values[0]));
    }
    return r;
}

struct DualResult {
    double theta_c = 0.0;
    double theta_d = 0.0;
    double variance_c = 0.0;  // across periods
    double variance_d = 0.0;
    std::vector<double> per_period_c;
    std::vector<double> per_period_d;
};

/// Both channels over one stimulus and one noise realization.
template <DeviceUnderTest Dut>
DualResult measure_dual(const Dut& dut, const DualChannelSchedule& dual, const NoiseModel& noise,
                        const MeasurementConfig& cfg, std::uint64_t trial = 0) {
    const CorrelationMeter<Dut> meter(dut, dual.schedule, {dual.reference_c, dual.reference_d}, cfg);
    auto rng = make_rng(noise.seed(), trial);
    auto values = meter.period_values(noise, rng);
    DualResult r;
    r.theta_c = meter.filter(values[0]);
    r.theta_d = meter.filter(values[1]);
    r.variance_c = detail::unbiased_variance(values[0]);
    r.variance_d = detail::unbiased_variance(values[1]);
    r.per_period_c = std::move(values[0]);
    r.per_period_d = std::move(values[1]);
    return r;
}

struct SelfTestReport {
    double estimate = 0.0;
    double expected = 0.0;
    double deviation = 0.0;   // |estimate - expected|
    double tolerance = 0.0;   // 1e-9 of the measurement scale
    double factor = 1.0;      // expected / estimate
    bool passed = false;
};

/// Noise-free measurement of a closed-form calibrator compared with the
/// weighted integral of the calibrator computed independently.
inline SelfTestReport self_test(const Characteristic1D& calibrator, const StimulusSchedule& s,
                                const ReferenceWaveform& u, const AnyWeighting& w, const MeasurementConfig& cfg) {
    SelfTestReport r;
    r.estimate = measure(calibrator, s, u, NoiseModel::white(0.0), cfg).estimates.front();
    r.expected = background_residual(w, [&](double e) { return calibrator.response(e); });
    const auto dom = calibrator.domain();
    double peak = 0.0;
    for (int k = 0; k <= 512; ++k) peak = std::max(peak, std::abs(calibrator.response(dom.lo + dom.width() * k / 512.0)));
    const double scale = std::max(std::abs(r.expected), gamma_total(w) * peak);
    r.deviation = std::abs(r.estimate - r.expected);
    r.tolerance = 1e-9 * std::max(scale, std::numeric_limits<double>::min());
    r.factor = r.estimate != 0.0 ? r.expected / r.estimate : 0.0;
    r.passed = r.deviation <= r.tolerance;
    return r;
}

/// Raster measurement of a 2-D map: gain sum_ij u_ij (tau_ij I(x_i, y_j) + noise).
inline MeasurementResult measure_map(const CharacteristicMap2D& map, const ScanSchedule2D& scan, const NoiseModel& noise,
                                     const MeasurementConfig& cfg, std::uint64_t trial = 0) {
    if (noise.kind() != NoiseKind::white) throw ArgumentError("measure_map: only white noise is supported for raster scans");
    if (cfg.periods < 1) throw ArgumentError("MeasurementConfig: periods must be >= 1");
    for (const auto& p : scan.points) {
        if (!map.contains(p.x, p.y)) {
            std::ostringstream os;
            os << "measure_map: scan point (" << p.x << ", " << p.y << ") outside the map domain";
            throw DomainError(os.str());
        }
    }
    const double gain = cfg.gain == GainHandling::apply ? scan.gain : 1.0;
    double det = 0.0;
    for (std::size_t i = 0; i < scan.points.size(); ++i)
        det += scan.points[i].ref * scan.dwell(i) * map.response(scan.points[i].x, scan.points[i].y);
    auto rng = make_rng(noise.seed(), trial);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> values(static_cast<std::size_t>(cfg.periods), det);
    if (!noise.silent()) {
        for (auto& v : values)
            for (std::size_t i = 0; i < scan.points.size(); ++i)
                v += scan.points[i].ref * std::sqrt(noise.white_psd() * scan.dwell(i)) * normal(rng);
    }
    for (auto& v : values) v *= gain;
    MeasurementResult r;
    r.seed = noise.seed();
    r.periods = cfg.periods;
    r.levels.push_back(0.0);
    r.estimates.push_back(apply_filter(values, cfg, scan.period));
    r.sample_variance.push_back(detail::unbiased_variance(values));
    r.per_period.push_back(std::move(values));
    return r;
}

}  // namespace corrsynth
