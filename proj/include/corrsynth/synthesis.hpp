#pragma once

// Co-synthesis of the modulating signal E_M(t) and the correlation reference
// u(t) from a weighting function.
//
// A stimulus period is a chain of segments. Each segment starts at `level`
// (relative to the control level E_c), moves at constant `slope` and lasts
// `fraction` of the period; holds have slope 0. Durations are stored as
// fractions so dwell ratios survive serialization and arithmetic unchanged.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "corrsynth/errors.hpp"
#include "corrsynth/numerics.hpp"
#include "corrsynth/weighting.hpp"

namespace corrsynth {

enum class ScheduleKind { stepwise, continuous, harmonic, dynamic };
enum class ReferenceKind { bilevel, stepwise_general, harmonic };
enum class SegmentOrder { ascending, descending, randomized };

struct Segment {
    double level = 0.0;     // E_M at the segment start
    double slope = 0.0;     // dE_M/dt inside the segment
    double fraction = 0.0;  // dwell / period

    friend bool operator==(const Segment&, const Segment&) = default;
};

class StimulusSchedule {
public:
    StimulusSchedule() = default;

    StimulusSchedule(ScheduleKind kind, double period, double center, double range, std::vector<Segment> segments,
                     double gain)
        : kind_(kind), period_(period), center_(center), range_(range), segments_(std::move(segments)), gain_(gain) {
        if (!(period_ > 0.0)) throw ArgumentError("StimulusSchedule: period must be positive");
        if (kind_ == ScheduleKind::harmonic) throw ArgumentError("StimulusSchedule: use harmonic() for harmonic kinds");
        if (segments_.empty()) throw ArgumentError("StimulusSchedule: no segments");
        double total = 0.0;
        const double half = 0.5 * range_ * (1.0 + 1e-12) + 1e-300;
        for (const auto& s : segments_) {
            if (!(s.fraction > 0.0)) throw ArgumentError("StimulusSchedule: every dwell must be positive");
            if (std::abs(s.level) > half || std::abs(end_level(s)) > half)
                throw ArgumentError("StimulusSchedule: level outside [-E_m/2, E_m/2]");
            total += s.fraction;
        }
        if (std::abs(total - 1.0) > 8.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(segments_.size()))
            throw ArgumentError("StimulusSchedule: dwell fractions must sum to one period");
        index_starts();
    }

    /// E_M(t) = amplitude * sin(2 pi t / T + phase).
    static StimulusSchedule harmonic(double amplitude, double period, double center, double phase = 0.0,
                                     double gain = 1.0) {
        if (!(period > 0.0)) throw ArgumentError("harmonic schedule: period must be positive");
        if (!(amplitude > 0.0)) throw ArgumentError("harmonic schedule: amplitude must be positive");
        StimulusSchedule s;
        s.kind_ = ScheduleKind::harmonic;
        s.period_ = period;
        s.center_ = center;
        s.range_ = 2.0 * amplitude;
        s.amplitude_ = amplitude;
        s.phase_ = phase;
        s.gain_ = gain;
        return s;
    }

    ScheduleKind kind() const noexcept { return kind_; }
    double period() const noexcept { return period_; }
    double center() const noexcept { return center_; }
    double range() const noexcept { return range_; }
    double gain() const noexcept { return gain_; }
    double amplitude() const noexcept { return amplitude_; }
    double phase() const noexcept { return phase_; }
    const std::vector<Segment>& segments() const noexcept { return segments_; }
    bool is_harmonic() const noexcept { return kind_ == ScheduleKind::harmonic; }
    bool holds_only() const noexcept {
        return !is_harmonic() && std::all_of(segments_.begin(), segments_.end(), [](const Segment& s) { return s.slope == 0.0; });
    }

    double dwell(std::size_t i) const { return segments_.at(i).fraction * period_; }
    double segment_start(std::size_t i) const { return starts_.at(i); }
    double end_level(const Segment& s) const noexcept { return s.level + s.slope * s.fraction * period_; }

    /// Index of the segment active at time t (t reduced into [0, T)).
    std::size_t segment_at(double t) const {
        const double tm = wrap(t);
        auto it = std::upper_bound(starts_.begin(), starts_.end(), tm);
        return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - starts_.begin()) - 1));
    }

    /// E_M(t), relative to the center.
    double level_at(double t) const {
        if (is_harmonic()) return amplitude_ * std::sin(2.0 * std::numbers::pi * t / period_ + phase_);
        const double tm = wrap(t);
        const auto i = segment_at(tm);
        const auto& s = segments_[i];
        return s.level + s.slope * (tm - starts_[i]);
    }

    /// dE_M/dt at time t.
    double rate_at(double t) const {
        if (is_harmonic()) {
            const double w = 2.0 * std::numbers::pi / period_;
            return amplitude_ * w * std::cos(w * t + phase_);
        }
        return segments_[segment_at(t)].slope;
    }

    StimulusSchedule recentered(double new_center) const {
        StimulusSchedule s = *this;
        s.center_ = new_center;
        return s;
    }

    StimulusSchedule with_gain(double gain) const {
        StimulusSchedule s = *this;
        s.gain_ = gain;
        return s;
    }

    /// Segment lower/upper stimulus bounds relative to the center.
    std::pair<double, double> extent() const {
        if (is_harmonic()) return {-amplitude_, amplitude_};
        double lo = segments_.front().level;
        double hi = lo;
        for (const auto& s : segments_) {
            lo = std::min({lo, s.level, end_level(s)});
            hi = std::max({hi, s.level, end_level(s)});
        }
        return {lo, hi};
    }

    friend bool operator==(const StimulusSchedule& a, const StimulusSchedule& b) {
        return a.kind_ == b.kind_ && a.period_ == b.period_ && a.center_ == b.center_ && a.range_ == b.range_ &&
               a.segments_ == b.segments_ && a.gain_ == b.gain_ && a.amplitude_ == b.amplitude_ &&
               a.phase_ == b.phase_;
    }

private:
    double wrap(double t) const {
        double tm = std::fmod(t, period_);
        if (tm < 0.0) tm += period_;
        return tm;
    }

    void index_starts() {
        starts_.resize(segments_.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            starts_[i] = acc * period_;
            acc += segments_[i].fraction;
        }
    }

    ScheduleKind kind_ = ScheduleKind::stepwise;
    double period_ = 1.0;
    double center_ = 0.0;
    double range_ = 0.0;
    std::vector<Segment> segments_;
    std::vector<double> starts_;
    double gain_ = 1.0;
    double amplitude_ = 0.0;
    double phase_ = 0.0;
};

/// Correlation reference u(t). Stepwise kinds carry one value per stimulus
/// segment. The harmonic kind is u0 sin(omega t + phase); when
/// `half_period_signs` is set it is instead s_k u0 |sin(omega t)| on the k-th
/// reference half-period, which reduces to the pure sine for alternating signs.
class ReferenceWaveform {
public:
    ReferenceWaveform() = default;

    static ReferenceWaveform stepwise(ReferenceKind kind, std::vector<double> values) {
        if (kind == ReferenceKind::harmonic) throw ArgumentError("ReferenceWaveform: harmonic kind has no per-segment values");
        if (kind == ReferenceKind::bilevel) {
            for (double v : values)
                if (v != 1.0 && v != -1.0) throw ArgumentError("ReferenceWaveform: bilevel values must be +1 or -1");
        }
        ReferenceWaveform r;
        r.kind_ = kind;
        r.values_ = std::move(values);
        return r;
    }

    static ReferenceWaveform harmonic(double u0, double omega, double phase = 0.0, std::vector<int> half_period_signs = {}) {
        if (!(omega > 0.0)) throw ArgumentError("ReferenceWaveform: omega must be positive");
        ReferenceWaveform r;
        r.kind_ = ReferenceKind::harmonic;
        r.u0_ = u0;
        r.omega_ = omega;
        r.phase_ = phase;
        r.signs_ = std::move(half_period_signs);
        return r;
    }

    ReferenceKind kind() const noexcept { return kind_; }
    const std::vector<double>& values() const noexcept { return values_; }
    double amplitude() const noexcept { return u0_; }
    double omega() const noexcept { return omega_; }
    double phase() const noexcept { return phase_; }
    const std::vector<int>& half_period_signs() const noexcept { return signs_; }
    bool per_segment() const noexcept { return kind_ != ReferenceKind::harmonic; }

    /// u(t); `segment` is used by stepwise kinds only.
    double value(double t, std::size_t segment) const {
        if (per_segment()) return values_.at(segment);
        if (signs_.empty()) return u0_ * std::sin(omega_ * t + phase_);
        const double half = std::numbers::pi / omega_;
        const auto k = static_cast<std::size_t>(std::floor(t / half));
        const int s = signs_[std::min(k, signs_.size() - 1)];
        return s * u0_ * std::abs(std::sin(omega_ * t));
    }

    /// Integral of u over [t0, t1] inside one segment (t measured from period start).
    double integral(double t0, double t1, std::size_t segment) const {
        if (per_segment()) return values_.at(segment) * (t1 - t0);
        if (signs_.empty()) return u0_ / omega_ * (std::cos(omega_ * t0 + phase_) - std::cos(omega_ * t1 + phase_));
        const double half = std::numbers::pi / omega_;
        double sum = 0.0;
        double a = t0;
        while (a < t1) {
            const auto k = static_cast<std::size_t>(std::floor(a / half + 1e-12));
            const double b = std::min(t1, (static_cast<double>(k) + 1.0) * half);
            const int s = signs_[std::min(k, signs_.size() - 1)];
            sum += s * u0_ / omega_ * std::abs(std::cos(omega_ * a) - std::cos(omega_ * b));
            if (b <= a) break;
            a = b;
        }
        return sum;
    }

    friend bool operator==(const ReferenceWaveform&, const ReferenceWaveform&) = default;

private:
    ReferenceKind kind_ = ReferenceKind::bilevel;
    std::vector<double> values_;
    double u0_ = 0.0;
    double omega_ = 0.0;
    double phase_ = 0.0;
    std::vector<int> signs_;
};

struct Synthesis {
    StimulusSchedule schedule;
    ReferenceWaveform reference;
};

struct DualChannelSchedule {
    StimulusSchedule schedule;
    ReferenceWaveform reference_c;
    ReferenceWaveform reference_d;
    double mu_c = 1.0;
    double mu_d = 0.0;
};

struct ScanPoint {
    double x = 0.0;
    double y = 0.0;
    double fraction = 0.0;
    double ref = 1.0;

    friend bool operator==(const ScanPoint&, const ScanPoint&) = default;
};

struct ScanSchedule2D {
    double period = 1.0;
    double gain = 1.0;
    std::vector<ScanPoint> points;

    double dwell(std::size_t i) const { return points.at(i).fraction * period; }
};

// ---------------------------------------------------------------------------
// Gamma_w accumulator
// ---------------------------------------------------------------------------

/// Gamma_w(E) = integral of |K_w| from the bottom of the range, built from the
/// piecewise-linear profile and its delta components. Pieces are sign-constant:
/// either a lump (delta) or a linear stretch of |K_w|.
class GammaAccumulator {
public:
    struct Piece {
        double a = 0.0;       // start offset
        double b = 0.0;       // end offset (== a for lumps)
        double abs_a = 0.0;   // |K_w| at a
        double abs_b = 0.0;   // |K_w| at b
        double mass = 0.0;
        int sign = 0;
        double gamma_start = 0.0;
        bool lump = false;
    };

    explicit GammaAccumulator(const ContinuousWeighting& w) {
        std::vector<Piece> raw;
        const auto& knots = w.knots();
        for (std::size_t i = 1; i < knots.size(); ++i) {
            const auto& p = knots[i - 1];
            const auto& q = knots[i];
            auto push = [&](double a, double va, double b, double vb) {
                if (!(b > a)) return;
                const int s = numerics::sign_of(va + vb);
                const double mass = 0.5 * (b - a) * (std::abs(va) + std::abs(vb));
                if (mass <= 0.0) return;
                raw.push_back({a, b, std::abs(va), std::abs(vb), mass, s, 0.0, false});
            };
            if (p.value * q.value < 0.0) {
                const double root = p.offset + (q.offset - p.offset) * p.value / (p.value - q.value);
                push(p.offset, p.value, root, 0.0);
                push(root, 0.0, q.offset, q.value);
            } else {
                push(p.offset, p.value, q.offset, q.value);
            }
        }
        for (const auto& d : w.deltas()) {
            if (d.mass != 0.0) raw.push_back({d.offset, d.offset, 0.0, 0.0, std::abs(d.mass), numerics::sign_of(d.mass), 0.0, true});
        }
        // Lumps at x sit after stretches ending at x and before stretches starting at x.
        std::stable_sort(raw.begin(), raw.end(), [](const Piece& l, const Piece& r) {
            if (l.a != r.a) return l.a < r.a;
            return l.lump && !r.lump;
        });
        double g = 0.0;
        for (auto& p : raw) {
            p.gamma_start = g;
            g += p.mass;
        }
        pieces_ = std::move(raw);
        total_ = g;
        lower_ = -0.5 * w.range();
    }

    const std::vector<Piece>& pieces() const noexcept { return pieces_; }
    double total() const noexcept { return total_; }

    /// Gamma_w at an offset (lumps at the offset are included).
    double operator()(double offset) const {
        double g = 0.0;
        for (const auto& p : pieces_) {
            if (p.lump) {
                if (p.a <= offset) g += p.mass;
            } else if (offset >= p.b) {
                g += p.mass;
            } else if (offset > p.a) {
                g += partial_mass(p, offset - p.a);
            }
        }
        return g;
    }

    /// Left-continuous inverse: smallest offset with Gamma_w(offset) >= g.
    double inverse(double g) const {
        if (pieces_.empty()) return lower_;
        if (g <= 0.0) return pieces_.front().a;
        for (const auto& p : pieces_) {
            if (g <= p.gamma_start + p.mass) {
                if (p.lump) return p.a;
                return p.a + invert_partial(p, std::max(0.0, g - p.gamma_start));
            }
        }
        return pieces_.back().b;
    }

    static double partial_mass(const Piece& p, double x) {
        const double h = p.b - p.a;
        const double beta = (p.abs_b - p.abs_a) / h;
        return p.abs_a * x + 0.5 * beta * x * x;
    }

    static double invert_partial(const Piece& p, double m) {
        const double h = p.b - p.a;
        if (m >= p.mass) return h;
        const double alpha = p.abs_a;
        const double beta = (p.abs_b - p.abs_a) / h;
        const double disc = std::max(0.0, alpha * alpha + 2.0 * beta * m);
        const double denom = alpha + std::sqrt(disc);
        if (denom <= 0.0) return 0.0;
        return std::min(h, 2.0 * m / denom);
    }

private:
    std::vector<Piece> pieces_;
    double total_ = 0.0;
    double lower_ = 0.0;
};

// ---------------------------------------------------------------------------
// Synthesis operations
// ---------------------------------------------------------------------------

/// Stepwise stimulus with dwell tau_i = T |W_i| / sum |W_n| and bilevel
/// reference sign(W_i). Zero weights get no segment.
inline Synthesis synthesize_discrete(const DiscreteWeighting& w, double period,
                                     SegmentOrder order = SegmentOrder::ascending, std::uint64_t order_seed = 0) {
    if (!(period > 0.0)) throw ArgumentError("synthesize_discrete: period must be positive");
    const double gamma = w.gamma_total();
    if (gamma == 0.0) throw DesignError("synthesize_discrete: all weights are zero");
    std::vector<std::pair<Segment, double>> parts;
    for (const auto& n : w.nodes()) {
        if (n.weight == 0.0) continue;
        parts.push_back({Segment{n.level - w.center(), 0.0, std::abs(n.weight) / gamma}, n.weight > 0.0 ? 1.0 : -1.0});
    }
    if (order == SegmentOrder::descending) {
        std::reverse(parts.begin(), parts.end());
    } else if (order == SegmentOrder::randomized) {
        std::mt19937_64 rng(order_seed);
        std::shuffle(parts.begin(), parts.end(), rng);
    }
    std::vector<Segment> segments;
    std::vector<double> ref;
    for (const auto& [s, u] : parts) {
        segments.push_back(s);
        ref.push_back(u);
    }
    StimulusSchedule schedule(ScheduleKind::stepwise, period, w.center(), 2.0 * w.half_range(), std::move(segments),
                              gamma / period);
    return {std::move(schedule), ReferenceWaveform::stepwise(ReferenceKind::bilevel, std::move(ref))};
}

/// Continuous optimum: Gamma_w(E_M(t)) = Gamma_total t / T on t in [0, T)
/// (the period origin is shifted by T/2 from the symmetric form). Breakpoints
/// are the uniform time grid t_k = k T / samples, refined by a uniform E grid
/// of the same count so that stretches where |K_w| is small are not
/// under-resolved. Every breakpoint is an exact Gamma inverse; deltas become
/// holds of length T |mass| / Gamma_total.
inline Synthesis synthesize_continuous(const ContinuousWeighting& w, double period, int samples) {
    if (!(period > 0.0)) throw ArgumentError("synthesize_continuous: period must be positive");
    if (samples < 64) throw ArgumentError("synthesize_continuous: samples must be >= 64");
    const GammaAccumulator acc(w);
    const double gamma = acc.total();
    if (gamma == 0.0) throw DesignError("synthesize_continuous: weighting profile is identically zero");
    const double dg = gamma / samples;
    const double de = w.range() / samples;
    const double lower = -0.5 * w.range();
    std::vector<Segment> segments;
    std::vector<double> ref;
    std::vector<double> marks;
    for (const auto& p : acc.pieces()) {
        const double u = p.sign > 0 ? 1.0 : -1.0;
        marks.clear();
        for (auto k = static_cast<long>(std::floor(p.gamma_start / dg)) + 1;; ++k) {
            const double m = static_cast<double>(k) * dg - p.gamma_start;
            if (!(m < p.mass)) break;
            if (m > 0.0) marks.push_back(m);
        }
        if (!p.lump) {
            for (auto j = static_cast<long>(std::floor((p.a - lower) / de)) + 1;; ++j) {
                const double x = lower + static_cast<double>(j) * de - p.a;
                if (!(x < p.b - p.a)) break;
                if (x > 0.0) marks.push_back(GammaAccumulator::partial_mass(p, x));
            }
        }
        std::sort(marks.begin(), marks.end());
        const double eps = 1e-13 * gamma;
        double previous = 0.0;
        double x_prev = 0.0;
        auto emit = [&](double m, double x) {
            const double fraction = (m - previous) / gamma;
            segments.push_back({p.a + x_prev, p.lump ? 0.0 : (x - x_prev) / (fraction * period), fraction});
            ref.push_back(u);
            previous = m;
            x_prev = x;
        };
        for (double m : marks) {
            if (m - previous <= eps || p.mass - m <= eps) continue;
            emit(m, p.lump ? 0.0 : GammaAccumulator::invert_partial(p, m));
        }
        emit(p.mass, p.lump ? 0.0 : p.b - p.a);
    }
    // Re-normalize so the fractions sum to one (rounding of the mass steps).
    double total = 0.0;
    for (const auto& s : segments) total += s.fraction;
    for (auto& s : segments) {
        const double end = s.level + s.slope * s.fraction * period;
        s.fraction /= total;
        s.slope = s.slope == 0.0 ? 0.0 : (end - s.level) / (s.fraction * period);
    }
    StimulusSchedule schedule(ScheduleKind::continuous, period, w.center(), w.range(), std::move(segments),
                              gamma / period);
    return {std::move(schedule), ReferenceWaveform::stepwise(ReferenceKind::bilevel, std::move(ref))};
}

/// Two correlation channels over one stepwise stimulus. Dwell
/// tau_i = T r_i / sum r_n with r_i = sqrt(mu_c W_c^2 + mu_d W_d^2);
/// references u_c = W_c / tau_i and u_d = W_d / tau_i.
inline DualChannelSchedule synthesize_dual(const DiscreteWeighting& wc, const DiscreteWeighting& wd, double mu_c,
                                           double mu_d, double period) {
    if (!(period > 0.0)) throw ArgumentError("synthesize_dual: period must be positive");
    if (mu_c < 0.0 || mu_d < 0.0 || std::abs(mu_c + mu_d - 1.0) > 1e-12)
        throw ArgumentError("synthesize_dual: require mu_c, mu_d >= 0 and mu_c + mu_d = 1");
    if (wc.size() != wd.size() || wc.center() != wd.center())
        throw ArgumentError("synthesize_dual: channels must share the node set and center");
    for (std::size_t i = 0; i < wc.size(); ++i) {
        if (wc.nodes()[i].level != wd.nodes()[i].level)
            throw ArgumentError("synthesize_dual: channels must share the node set");
    }
    std::vector<double> r;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < wc.size(); ++i) {
        const double c = wc.nodes()[i].weight;
        const double d = wd.nodes()[i].weight;
        if (c == 0.0 && d == 0.0) continue;
        const double ri = std::sqrt(mu_c * c * c + mu_d * d * d);
        if (ri == 0.0) {
            std::ostringstream os;
            os << "synthesize_dual: node " << wc.nodes()[i].level << " receives zero dwell but carries weight in the "
               << (c != 0.0 ? "value" : "derivative") << " channel";
            throw DesignError(os.str());
        }
        r.push_back(ri);
        kept.push_back(i);
    }
    if (r.empty()) throw DesignError("synthesize_dual: all weights are zero");
    double sum = 0.0;
    for (double v : r) sum += v;
    std::vector<Segment> segments;
    std::vector<double> uc;
    std::vector<double> ud;
    double half = 0.0;
    for (std::size_t k = 0; k < kept.size(); ++k) {
        const auto i = kept[k];
        const double fraction = r[k] / sum;
        const double tau = fraction * period;
        segments.push_back({wc.nodes()[i].level - wc.center(), 0.0, fraction});
        uc.push_back(wc.nodes()[i].weight / tau);
        ud.push_back(wd.nodes()[i].weight / tau);
        half = std::max(half, std::abs(wc.nodes()[i].level - wc.center()));
    }
    StimulusSchedule schedule(ScheduleKind::stepwise, period, wc.center(), 2.0 * half, std::move(segments), 1.0);
    return {std::move(schedule), ReferenceWaveform::stepwise(ReferenceKind::stepwise_general, std::move(uc)),
            ReferenceWaveform::stepwise(ReferenceKind::stepwise_general, std::move(ud)), mu_c, mu_d};
}

struct NarrowbandSynthesis {
    StimulusSchedule schedule;
    ReferenceWaveform reference;
    std::vector<int> half_periods;  // per sign-constant interval, in E order
    std::vector<int> interval_signs;
    double distortion = 0.0;        // sum over intervals of |allocated - ideal| Gamma fraction
    bool pure_harmonic = false;     // reference signs alternate every half-period
};

/// Narrowband synthesis with a harmonic reference of angular frequency omega0.
/// Each sign-constant interval l of K_w gets tau_l = T_nominal mass_l / Gamma_total
/// rounded to a whole number of reference half-periods pi / omega0; the resulting
/// period is the sum of those half-periods. Inside each half-period the stimulus
/// sweeps an equal-Gamma chunk of its interval so that Gamma_w(E_M) advances in
/// proportion to the integral of |u|, which keeps the effective weighting balanced with a
/// sinusoidal reference.
inline NarrowbandSynthesis synthesize_narrowband(const ContinuousWeighting& w, double omega0, double u0,
                                                 double nominal_period, int samples_per_half_period = 32) {
    if (!(omega0 > 0.0)) throw ArgumentError("synthesize_narrowband: omega0 must be positive");
    if (!(u0 > 0.0)) throw ArgumentError("synthesize_narrowband: u0 must be positive");
    if (!(nominal_period > 0.0)) throw ArgumentError("synthesize_narrowband: period must be positive");
    if (samples_per_half_period < 2) throw ArgumentError("synthesize_narrowband: need >= 2 samples per half-period");
    const GammaAccumulator acc(w);
    const double gamma = acc.total();
    if (gamma == 0.0) throw DesignError("synthesize_narrowband: weighting is identically zero");

    struct SignInterval {
        int sign;
        double g0;
        double mass;
    };
    std::vector<SignInterval> intervals;
    for (const auto& p : acc.pieces()) {
        if (!intervals.empty() && intervals.back().sign == p.sign) {
            intervals.back().mass += p.mass;
        } else {
            intervals.push_back({p.sign, p.gamma_start, p.mass});
        }
    }
    const double half = std::numbers::pi / omega0;
    NarrowbandSynthesis out;
    int total_half = 0;
    for (const auto& iv : intervals) {
        const int m = static_cast<int>(std::lround(nominal_period * iv.mass / (gamma * half)));
        if (m <= 0) {
            std::ostringstream os;
            os << "synthesize_narrowband: interval with Gamma fraction " << iv.mass / gamma
               << " rounds to zero reference half-periods; increase the period or omega0";
            throw ResolutionError(os.str());
        }
        out.half_periods.push_back(m);
        out.interval_signs.push_back(iv.sign);
        total_half += m;
    }
    for (std::size_t l = 0; l < intervals.size(); ++l) {
        out.distortion += std::abs(static_cast<double>(out.half_periods[l]) / total_half - intervals[l].mass / gamma);
    }

    // Sign pattern: alternate whenever the remaining counts allow it.
    int pos = 0;
    int neg = 0;
    for (std::size_t l = 0; l < intervals.size(); ++l) (intervals[l].sign > 0 ? pos : neg) += out.half_periods[l];
    std::vector<int> pattern;
    int previous = pos >= neg ? -1 : 1;
    for (int k = 0; k < total_half; ++k) {
        int s = -previous;
        if ((s > 0 && pos == 0) || (s < 0 && neg == 0)) s = previous;
        (s > 0 ? pos : neg) -= 1;
        pattern.push_back(s);
        previous = s;
    }
    out.pure_harmonic = true;
    for (std::size_t k = 1; k < pattern.size(); ++k) out.pure_harmonic &= pattern[k] != pattern[k - 1];
    out.pure_harmonic &= pattern.size() % 2 == 0;

    // Chunks in E order within each sign class.
    std::vector<std::pair<std::size_t, int>> queue_pos;
    std::vector<std::pair<std::size_t, int>> queue_neg;
    for (std::size_t l = 0; l < intervals.size(); ++l) {
        for (int c = 0; c < out.half_periods[l]; ++c) (intervals[l].sign > 0 ? queue_pos : queue_neg).push_back({l, c});
    }
    std::size_t next_pos = 0;
    std::size_t next_neg = 0;
    const double period = half * total_half;
    std::vector<Segment> segments;
    const int sub = samples_per_half_period;
    for (int k = 0; k < total_half; ++k) {
        const auto [l, c] = pattern[static_cast<std::size_t>(k)] > 0 ? queue_pos[next_pos++] : queue_neg[next_neg++];
        const double chunk = intervals[l].mass / out.half_periods[l];
        const double g0 = intervals[l].g0 + chunk * c;
        auto level = [&](int j) {
            const double phase = std::numbers::pi * j / sub;
            return acc.inverse(g0 + chunk * 0.5 * (1.0 - std::cos(phase)));
        };
        double e0 = level(0);
        for (int j = 0; j < sub; ++j) {
            const double e1 = level(j + 1);
            const double fraction = 1.0 / (static_cast<double>(total_half) * sub);
            segments.push_back({e0, (e1 - e0) / (fraction * period), fraction});
            e0 = e1;
        }
    }
    const double abs_integral = total_half * 2.0 * u0 / omega0;
    out.schedule = StimulusSchedule(ScheduleKind::continuous, period, w.center(), w.range(), std::move(segments),
                                    gamma / abs_integral);
    out.reference = ReferenceWaveform::harmonic(u0, omega0, 0.0, std::move(pattern));
    return out;
}

/// Raster over the grid with tau_ij = T |K_w(x_i, y_j)| / Gamma_w; rows are
/// traversed alternately left-to-right and right-to-left. Zero weights are skipped.
inline ScanSchedule2D synthesize_2d(const Weighting2D& w, double period) {
    if (!(period > 0.0)) throw ArgumentError("synthesize_2d: period must be positive");
    const double gamma = w.gamma_total();
    if (gamma == 0.0) throw DesignError("synthesize_2d: all weights are zero");
    ScanSchedule2D out;
    out.period = period;
    out.gain = gamma / period;
    const auto nx = w.xs().size();
    for (std::size_t j = 0; j < w.ys().size(); ++j) {
        for (std::size_t step = 0; step < nx; ++step) {
            const auto i = (j % 2 == 0) ? step : nx - 1 - step;
            const double v = w.at(i, j);
            if (v == 0.0) continue;
            out.points.push_back({w.xs()[i], w.ys()[j], std::abs(v) / gamma, v > 0.0 ? 1.0 : -1.0});
        }
    }
    return out;
}

struct PackingSums {
    double ascending = 0.0;
    double descending = 0.0;
};

/// Sum of |E'_j| |K_w| over rising and falling speed nodes.
inline PackingSums packing_sums(const Weighting2D& w) {
    PackingSums s;
    for (std::size_t j = 0; j < w.ys().size(); ++j) {
        const double speed = w.ys()[j];
        for (std::size_t i = 0; i < w.xs().size(); ++i) {
            const double v = std::abs(w.at(i, j));
            if (speed > 0.0) s.ascending += speed * v;
            if (speed < 0.0) s.descending += -speed * v;
        }
    }
    return s;
}

/// Trajectory for a rate-dependent device: nodes are (E_i, E'_j). Each
/// nonzero node becomes a ramp of slope E'_j lasting tau_ij; rising ramps run
/// in ascending E_i, falling ramps in descending E_i, and the first ramp is
/// centered on its node level. Closure requires balanced packing.
inline Synthesis synthesize_dynamic(const Weighting2D& w, double period) {
    if (!(period > 0.0)) throw ArgumentError("synthesize_dynamic: period must be positive");
    const double gamma = w.gamma_total();
    for (std::size_t j = 0; j < w.ys().size(); ++j) {
        for (std::size_t i = 0; i < w.xs().size(); ++i) {
            if (w.at(i, j) != 0.0 && w.ys()[j] == 0.0)
                throw ArgumentError("synthesize_dynamic: node speeds must be nonzero");
        }
    }
    const auto sums = packing_sums(w);
    const double scale = std::max(sums.ascending, sums.descending);
    if (std::abs(sums.ascending - sums.descending) > 1e-9 * scale) {
        std::ostringstream os;
        os.precision(17);
        os << "synthesize_dynamic: balanced packing violated (ascending " << sums.ascending << ", descending "
           << sums.descending << ")";
        throw PackingError(os.str(), sums.ascending, sums.descending);
    }
    struct Node {
        double level;
        double speed;
        double weight;
    };
    std::vector<Node> up;
    std::vector<Node> down;
    for (std::size_t j = 0; j < w.ys().size(); ++j) {
        for (std::size_t i = 0; i < w.xs().size(); ++i) {
            const double v = w.at(i, j);
            if (v == 0.0) continue;
            (w.ys()[j] > 0.0 ? up : down).push_back({w.xs()[i], w.ys()[j], v});
        }
    }
    std::stable_sort(up.begin(), up.end(), [](const Node& a, const Node& b) { return a.level < b.level; });
    std::stable_sort(down.begin(), down.end(), [](const Node& a, const Node& b) { return a.level > b.level; });
    std::vector<Node> order = up;
    order.insert(order.end(), down.begin(), down.end());

    std::vector<double> absolute;
    std::vector<Segment> segments;
    std::vector<double> ref;
    double e = order.front().level - 0.5 * order.front().speed * period * std::abs(order.front().weight) / gamma;
    for (const auto& n : order) {
        const double fraction = std::abs(n.weight) / gamma;
        absolute.push_back(e);
        segments.push_back({e, n.speed, fraction});
        ref.push_back(n.weight > 0.0 ? 1.0 : -1.0);
        e += n.speed * fraction * period;
    }
    absolute.push_back(e);
    const auto [lo, hi] = std::minmax_element(absolute.begin(), absolute.end());
    const double center = 0.5 * (*lo + *hi);
    for (auto& s : segments) s.level -= center;
    StimulusSchedule schedule(ScheduleKind::dynamic, period, center, (*hi - *lo) * (1.0 + 1e-12), std::move(segments),
                              gamma / period);
    return {std::move(schedule), ReferenceWaveform::stepwise(ReferenceKind::bilevel, std::move(ref))};
}

// ---------------------------------------------------------------------------
// Effective weighting consistency
// ---------------------------------------------------------------------------

struct EffectiveWeighting {
    std::vector<double> grid;            // offsets relative to the center
    std::vector<double> density;         // T^-1 sum_i u(t_i) / |E'_M(t_i)| at each grid offset
    std::vector<DeltaComponent> lumps;   // holds: T^-1 integral of u over the hold
};

namespace detail {

inline void add_lump(std::vector<DeltaComponent>& lumps, double offset, double mass) {
    for (auto& l : lumps) {
        if (l.offset == offset) {
            l.mass += mass;
            return;
        }
    }
    lumps.push_back({offset, mass});
}

}  // namespace detail

/// Left side of the stimulus/reference consistency relation, evaluated at the
/// given offsets. Ramps contribute densities, holds contribute point masses.
inline EffectiveWeighting effective_weighting(const StimulusSchedule& s, const ReferenceWaveform& u,
                                              std::span<const double> grid) {
    EffectiveWeighting out;
    out.grid.assign(grid.begin(), grid.end());
    out.density.assign(grid.size(), 0.0);
    const double period = s.period();
    if (s.is_harmonic()) {
        // E_M = A sin(w t + phi): visits at the two roots per period.
        const double a = s.amplitude();
        const double w = 2.0 * std::numbers::pi / period;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double x = grid[k] / a;
            if (!(std::abs(x) < 1.0)) continue;
            const double theta = std::asin(x);
            const double speed = a * w * std::sqrt(1.0 - x * x);
            for (double arg : {theta, std::numbers::pi - theta}) {
                double t = (arg - s.phase()) / w;
                t = std::fmod(t, period);
                if (t < 0.0) t += period;
                out.density[k] += u.value(t, 0) / (speed * period);
            }
        }
        return out;
    }
    if (u.per_segment() && u.values().size() != s.segments().size())
        throw ArgumentError("effective_weighting: reference not aligned with the schedule segments");
    for (std::size_t i = 0; i < s.segments().size(); ++i) {
        const auto& seg = s.segments()[i];
        const double t0 = s.segment_start(i);
        const double dwell = seg.fraction * period;
        if (seg.slope == 0.0) {
            const double mass = u.per_segment() ? u.values()[i] * seg.fraction : u.integral(t0, t0 + dwell, i) / period;
            detail::add_lump(out.lumps, seg.level, mass);
            continue;
        }
        const double e_end = s.end_level(seg);
        const double lo = std::min(seg.level, e_end);
        const double hi = std::max(seg.level, e_end);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double e = grid[k];
            if (e < lo || e >= hi) continue;
            const double t = t0 + (e - seg.level) / seg.slope;
            out.density[k] += u.value(t, i) / (std::abs(seg.slope) * period);
        }
    }
    return out;
}

struct SynthesisReport {
    double max_residual = 0.0;
    double l2_residual = 0.0;  // root-mean-square over compared entries
    double tolerance = 0.0;
    bool coverage_ok = true;
    bool passed = false;
    std::string note;
};

namespace detail {

/// Factor c with effective weighting = c K_w for a calibrated (schedule, reference) pair.
inline double effective_scale(const StimulusSchedule& s, const ReferenceWaveform& u, double gamma) {
    if (u.kind() == ReferenceKind::bilevel) return 1.0 / gamma;
    return 1.0 / (s.gain() * s.period());
}

inline void finish(SynthesisReport& r, const std::vector<double>& residuals) {
    double sq = 0.0;
    for (double v : residuals) {
        r.max_residual = std::max(r.max_residual, std::abs(v));
        sq += v * v;
    }
    r.l2_residual = residuals.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(residuals.size()));
    r.passed = r.coverage_ok && r.max_residual < r.tolerance;
}

}  // namespace detail

/// Residual of the consistency relation against a discrete target: per level,
/// effective mass minus scaled W_i. Passes below 1e-9.
inline SynthesisReport verify_synthesis(const StimulusSchedule& s, const ReferenceWaveform& u,
                                        const DiscreteWeighting& w) {
    SynthesisReport r;
    r.tolerance = 1e-9;
    const auto eff = effective_weighting(s, u, std::span<const double>{});
    const double scale = detail::effective_scale(s, u, w.gamma_total());
    std::vector<double> residuals;
    std::vector<bool> used(eff.lumps.size(), false);
    for (const auto& n : w.nodes()) {
        const double offset = n.level - w.center();
        // Division, not the reciprocal: matches sign(W) |W| / Gamma bit for bit.
        const double target = u.kind() == ReferenceKind::bilevel ? n.weight / w.gamma_total() : n.weight * scale;
        double got = 0.0;
        bool found = false;
        for (std::size_t k = 0; k < eff.lumps.size(); ++k) {
            if (eff.lumps[k].offset == offset) {
                got = eff.lumps[k].mass;
                used[k] = true;
                found = true;
            }
        }
        if (!found && n.weight != 0.0) {
            r.coverage_ok = false;
            std::ostringstream os;
            os << "level " << n.level << " carries weight but is never visited; ";
            r.note += os.str();
        }
        residuals.push_back(got - target);
    }
    for (std::size_t k = 0; k < eff.lumps.size(); ++k) {
        if (!used[k]) residuals.push_back(eff.lumps[k].mass);
    }
    if (!s.holds_only()) {
        r.note += "schedule has ramps, which a discrete target cannot absorb; ";
        r.coverage_ok = false;
    }
    detail::finish(r, residuals);
    return r;
}

/// Residual against a continuous target. Densities are compared as averages
/// over `cells` equal cells spanning the profile support (the piecewise-linear
/// stimulus is exact at its breakpoints, so cell averages converge at second
/// order); holds are compared with the delta components. Passes below 1e-4.
inline SynthesisReport verify_synthesis(const StimulusSchedule& s, const ReferenceWaveform& u,
                                        const ContinuousWeighting& w, int cells = 251) {
    SynthesisReport r;
    r.tolerance = 1e-4;
    const double scale = detail::effective_scale(s, u, w.gamma_total());
    std::vector<double> residuals;
    const auto eff = effective_weighting(s, u, std::span<const double>{});
    // Deltas against holds.
    std::vector<bool> used(eff.lumps.size(), false);
    for (const auto& d : w.deltas()) {
        double got = 0.0;
        bool found = false;
        for (std::size_t k = 0; k < eff.lumps.size(); ++k) {
            if (std::abs(eff.lumps[k].offset - d.offset) <= 1e-12 * w.range()) {
                got += eff.lumps[k].mass;
                used[k] = true;
                found = true;
            }
        }
        if (!found) {
            r.coverage_ok = false;
            r.note += "delta component never held; ";
        }
        residuals.push_back(got - d.mass * scale);
    }
    // Holds not matching a delta: allowed only where the profile sweeps
    // through them (narrowband holds at chunk turning points carry no mass).
    for (std::size_t k = 0; k < eff.lumps.size(); ++k) {
        if (!used[k] && std::abs(eff.lumps[k].mass) > 0.0) residuals.push_back(eff.lumps[k].mass);
    }
    const auto& knots = w.knots();
    if (knots.size() >= 2 && !s.is_harmonic()) {
        const double lo = knots.front().offset;
        const double hi = knots.back().offset;
        const double width = (hi - lo) / cells;
        std::vector<double> got(static_cast<std::size_t>(cells), 0.0);
        const double period = s.period();
        for (std::size_t i = 0; i < s.segments().size(); ++i) {
            const auto& seg = s.segments()[i];
            if (seg.slope == 0.0) continue;
            const double t0 = s.segment_start(i);
            const double e0 = seg.level;
            const double e1 = s.end_level(seg);
            const double a = std::min(e0, e1);
            const double b = std::max(e0, e1);
            const int c0 = std::clamp(static_cast<int>(std::floor((a - lo) / width)), 0, cells - 1);
            const int c1 = std::clamp(static_cast<int>(std::floor((b - lo) / width)), 0, cells - 1);
            for (int c = c0; c <= c1; ++c) {
                const double ca = std::max(a, lo + c * width);
                const double cb = std::min(b, lo + (c + 1) * width);
                if (!(cb > ca)) continue;
                // Time window spent inside [ca, cb].
                double ta = t0 + (ca - e0) / seg.slope;
                double tb = t0 + (cb - e0) / seg.slope;
                if (ta > tb) std::swap(ta, tb);
                got[static_cast<std::size_t>(c)] += u.integral(ta, tb, i) / period;
            }
        }
        for (int c = 0; c < cells; ++c) {
            const double ca = lo + c * width;
            const double cb = (c + 1 == cells) ? hi : lo + (c + 1) * width;
            // Piecewise-linear profile: split at knots for exact quadrature.
            double exact = 0.0;
            double a = ca;
            for (const auto& k : knots) {
                if (k.offset > a && k.offset < cb) {
                    exact += numerics::gauss_legendre8([&](double e) { return w.profile(e); }, a, k.offset);
                    a = k.offset;
                }
            }
            exact += numerics::gauss_legendre8([&](double e) { return w.profile(e); }, a, cb);
            residuals.push_back((got[static_cast<std::size_t>(c)] - scale * exact) / (cb - ca));
        }
    }
    detail::finish(r, residuals);
    return r;
}

/// Bundled check that the ascending/descending sums of a dynamic weighting agree.
inline bool balanced_packing(const Weighting2D& w, double rel_tol = 1e-9) {
    const auto s = packing_sums(w);
    return std::abs(s.ascending - s.descending) <= rel_tol * std::max(s.ascending, s.descending);
}

}  // namespace corrsynth
