#pragma once

// Experiment configuration: a single TOML file parsed with toml++. Parsing
// collects every offending key with the constraint it violates before
// failing, so one run reports all problems at once.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <toml.hpp>

#include "corrsynth/correlation_meter.hpp"
#include "corrsynth/dut_model.hpp"
#include "corrsynth/errors.hpp"
#include "corrsynth/lockin_baseline.hpp"
#include "corrsynth/noise.hpp"
#include "corrsynth/weighting.hpp"

namespace corrsynth {

struct ConfigIssue {
    std::string key;
    std::string constraint;
};

class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<ConfigIssue> issues)
        : Error(summary(issues)), issues_(std::move(issues)) {}
    const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

private:
    static std::string summary(const std::vector<ConfigIssue>& issues) {
        std::ostringstream os;
        os << "invalid configuration:";
        for (const auto& i : issues) os << ' ' << i.key << " (" << i.constraint << ");";
        return os.str();
    }
    std::vector<ConfigIssue> issues_;
};

enum class Mode { discrete, continuous, dual, narrowband, map2d, dynamic, lockin };

inline const char* to_string(Mode m) {
    switch (m) {
        case Mode::discrete: return "discrete";
        case Mode::continuous: return "continuous";
        case Mode::dual: return "dual";
        case Mode::narrowband: return "narrowband";
        case Mode::map2d: return "map2d";
        case Mode::dynamic: return "dynamic";
        case Mode::lockin: return "lockin";
    }
    return "?";
}

struct DutSpec {
    std::string kind;                     // auger | nano_iv | map2d | dynamic
    Interval domain{};
    Interval y_domain{};                  // map2d: y axis; dynamic: rate axis
    std::map<std::string, double> params;
    std::string peak_shape = "gaussian";
    std::vector<double> background;       // auger polynomial
};

struct WeightingSpec {
    std::string kind;
    double center = 0.0;
    bool has_center = false;
    double step = 0.0;
    int degree = 1;
    int n = 5;
    double sidelobe_db = 40.0;
    double half_width = 0.0;
    double range = 0.0;
    std::vector<double> offsets;
    std::vector<double> weights;
    std::vector<double> weights_d;
    std::vector<double> values;
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<DeltaComponent> deltas;
};

struct SynthesisSpec {
    double period = 1.0;
    int samples = 4096;
    SegmentOrder order = SegmentOrder::ascending;
    std::uint64_t order_seed = 0;
    double omega0 = 0.0;
    double u0 = 1.0;
    double nominal_period = 0.0;
    int samples_per_half_period = 32;
    double mu_c = 0.5;
};

struct NoiseSpec {
    NoiseKind kind = NoiseKind::white;
    double psd = 0.0;
    std::vector<SpectrumPoint> table;
    double fundamental_period = 0.0;      // defaults to the synthesis period
    std::optional<std::uint64_t> seed;
};

struct SweepSpec {
    std::vector<double> waypoints;
    std::optional<double> sweep_rate;
    double margin = 1.0;
    std::optional<double> omega_b;
};

struct LockinSpec {
    double amplitude = 0.0;
    double frequency_hz = 0.0;
    int samples_per_period = 64;
    int periods = 1;
    double phase = 0.0;
};

struct CompareSpec {
    ComparisonSetup setup;
    std::vector<Target> targets{Target::full_current, Target::curve, Target::derivative};
};

struct ExperimentConfig {
    Mode mode = Mode::discrete;
    std::uint64_t seed = 0;
    int trials = 1;
    DutSpec dut;
    WeightingSpec weighting;
    SynthesisSpec synthesis;
    NoiseSpec noise;
    MeasurementConfig measurement;
    std::optional<SweepSpec> sweep;
    LockinSpec lockin;
    CompareSpec compare;
    std::string output_dir = "out";
    int plot_samples = 4096;
    std::string source;  // raw TOML text, hashed into output headers

    std::uint64_t hash(std::uint64_t seed_override, int trials_override) const {
        std::string s = source;
        s += "\nseed=" + std::to_string(seed_override) + "\ntrials=" + std::to_string(trials_override);
        return numerics::fnv1a(std::span<const char>(s.data(), s.size()));
    }
};

namespace detail {

class TomlReader {
public:
    explicit TomlReader(std::vector<ConfigIssue>& issues) : issues_(issues) {}

    void issue(std::string key, std::string constraint) { issues_.push_back({std::move(key), std::move(constraint)}); }

    const toml::table* table(const toml::table& parent, const std::string& prefix, const char* key, bool required) {
        const auto* node = parent.get(key);
        if (!node) {
            if (required) issue(join(prefix, key), "required section is missing");
            return nullptr;
        }
        if (!node->is_table()) {
            issue(join(prefix, key), "must be a table");
            return nullptr;
        }
        return node->as_table();
    }

    void allow(const toml::table& t, const std::string& prefix, std::initializer_list<const char*> keys) {
        std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& [k, v] : t) {
            if (!ok.count(std::string(k.str()))) issue(join(prefix, std::string(k.str())), "unknown key");
        }
    }

    template <class T>
    std::optional<T> get(const toml::table* t, const std::string& prefix, const char* key, bool required = false) {
        const std::string full = join(prefix, key);
        if (!t) return std::nullopt;
        const auto* node = t->get(key);
        if (!node) {
            if (required) issue(full, "required key is missing");
            return std::nullopt;
        }
        if constexpr (std::is_same_v<T, double>) {
            if (auto v = node->value<double>()) return *v;
            issue(full, "must be a number");
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
            if (node->is_integer()) return node->value<std::int64_t>();
            issue(full, "must be an integer");
        } else if constexpr (std::is_same_v<T, bool>) {
            if (node->is_boolean()) return node->value<bool>();
            issue(full, "must be a boolean");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (node->is_string()) return node->value<std::string>();
            issue(full, "must be a string");
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            if (const auto* arr = node->as_array()) {
                std::vector<double> out;
                for (const auto& e : *arr) {
                    auto v = e.value<double>();
                    if (!v) {
                        issue(full, "must be an array of numbers");
                        return std::nullopt;
                    }
                    out.push_back(*v);
                }
                return out;
            }
            issue(full, "must be an array of numbers");
        }
        return std::nullopt;
    }

    static std::string join(const std::string& prefix, const std::string& key) {
        return prefix.empty() ? key : prefix + "." + key;
    }

private:
    std::vector<ConfigIssue>& issues_;
};

inline void positive(TomlReader& r, const std::string& key, std::optional<double> v, double& out) {
    if (!v) return;
    if (!(*v > 0.0)) {
        r.issue(key, "must be > 0");
        return;
    }
    out = *v;
}

inline void at_least(TomlReader& r, const std::string& key, std::optional<std::int64_t> v, std::int64_t lo, int& out) {
    if (!v) return;
    if (*v < lo) {
        r.issue(key, "must be >= " + std::to_string(lo));
        return;
    }
    out = static_cast<int>(*v);
}

inline std::optional<Interval> interval(TomlReader& r, const toml::table* t, const std::string& prefix, const char* key,
                                        bool required) {
    auto v = r.get<std::vector<double>>(t, prefix, key, required);
    if (!v) return std::nullopt;
    if (v->size() != 2 || !((*v)[1] > (*v)[0])) {
        r.issue(TomlReader::join(prefix, key), "must be [lo, hi] with lo < hi");
        return std::nullopt;
    }
    return Interval{(*v)[0], (*v)[1]};
}

}  // namespace detail

inline std::optional<Mode> mode_from(const std::string& s) {
    if (s == "discrete") return Mode::discrete;
    if (s == "continuous") return Mode::continuous;
    if (s == "dual") return Mode::dual;
    if (s == "narrowband") return Mode::narrowband;
    if (s == "map2d") return Mode::map2d;
    if (s == "dynamic") return Mode::dynamic;
    if (s == "lockin") return Mode::lockin;
    return std::nullopt;
}

/// Parses and validates a TOML document. Throws ConfigError listing every
/// offending key; TOML syntax errors are reported against the key "toml".
inline ExperimentConfig parse_config(const std::string& text) {
    std::vector<ConfigIssue> issues;
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << e.description() << " at line " << e.source().begin.line;
        throw ConfigError(std::vector<ConfigIssue>{{"toml", os.str()}});
    }
    detail::TomlReader r(issues);
    ExperimentConfig cfg;
    cfg.source = text;
    r.allow(root, "", {"mode", "seed", "trials", "dut", "weighting", "synthesis", "noise", "measurement", "sweep",
                       "lockin", "compare", "output"});

    if (auto m = r.get<std::string>(&root, "", "mode", true)) {
        if (auto mm = mode_from(*m)) {
            cfg.mode = *mm;
        } else {
            r.issue("mode", "must be one of discrete|continuous|dual|narrowband|map2d|dynamic|lockin");
        }
    }
    if (auto s = r.get<std::int64_t>(&root, "", "seed")) {
        if (*s < 0) r.issue("seed", "must be >= 0");
        else cfg.seed = static_cast<std::uint64_t>(*s);
    }
    detail::at_least(r, "trials", r.get<std::int64_t>(&root, "", "trials"), 1, cfg.trials);

    // [dut]
    if (const auto* t = r.table(root, "", "dut", true)) {
        r.allow(*t, "dut", {"kind", "domain", "y_domain", "rate_domain", "params"});
        cfg.dut.kind = r.get<std::string>(t, "dut", "kind", true).value_or("");
        static const std::set<std::string> kinds{"auger", "nano_iv", "map2d", "dynamic"};
        if (!cfg.dut.kind.empty() && !kinds.count(cfg.dut.kind)) r.issue("dut.kind", "must be one of auger|nano_iv|map2d|dynamic");
        if (auto d = detail::interval(r, t, "dut", "domain", true)) cfg.dut.domain = *d;
        if (cfg.dut.kind == "map2d") {
            if (auto d = detail::interval(r, t, "dut", "y_domain", true)) cfg.dut.y_domain = *d;
        }
        if (cfg.dut.kind == "dynamic") {
            if (auto d = detail::interval(r, t, "dut", "rate_domain", true)) cfg.dut.y_domain = *d;
        }
        if (const auto* p = r.table(*t, "dut", "params", false)) {
            for (const auto& [k, v] : *p) {
                const std::string key(k.str());
                if (key == "peak_shape") {
                    if (auto s = v.value<std::string>()) cfg.dut.peak_shape = *s;
                    else r.issue("dut.params.peak_shape", "must be a string");
                } else if (key == "background") {
                    if (auto b = r.get<std::vector<double>>(p, "dut.params", "background")) cfg.dut.background = *b;
                } else if (auto num = v.value<double>()) {
                    cfg.dut.params[key] = *num;
                } else {
                    r.issue("dut.params." + key, "must be a number");
                }
            }
        }
        if (cfg.dut.peak_shape != "gaussian" && cfg.dut.peak_shape != "lorentzian")
            r.issue("dut.params.peak_shape", "must be gaussian|lorentzian");
    }

    // [weighting]
    const bool needs_weighting = cfg.mode != Mode::lockin;
    if (const auto* t = r.table(root, "", "weighting", needs_weighting)) {
        r.allow(*t, "weighting", {"kind", "center", "step", "degree", "n", "sidelobe_db", "half_width", "range", "offsets",
                                  "weights", "weights_d", "values", "xs", "ys", "deltas"});
        auto& w = cfg.weighting;
        w.kind = r.get<std::string>(t, "weighting", "kind", cfg.mode != Mode::dual).value_or(cfg.mode == Mode::dual ? "dual" : "");
        if (auto c = r.get<double>(t, "weighting", "center")) {
            w.center = *c;
            w.has_center = true;
        }
        static const std::set<std::string> kinds{"discrete", "derivative", "second_difference", "moment", "dolph_chebyshev",
                                                 "boxcar", "profile", "grid", "dual"};
        if (!w.kind.empty() && !kinds.count(w.kind))
            r.issue("weighting.kind",
                    "must be one of discrete|derivative|second_difference|moment|dolph_chebyshev|boxcar|profile|grid|dual");
        const bool k_discrete = w.kind == "discrete";
        const bool k_step = w.kind == "derivative" || w.kind == "second_difference";
        if (k_step) detail::positive(r, "weighting.step", r.get<double>(t, "weighting", "step", true), w.step);
        if (w.kind == "dolph_chebyshev") {
            detail::positive(r, "weighting.step", r.get<double>(t, "weighting", "step", true), w.step);
            detail::at_least(r, "weighting.n", r.get<std::int64_t>(t, "weighting", "n"), 3, w.n);
            detail::positive(r, "weighting.sidelobe_db", r.get<double>(t, "weighting", "sidelobe_db"), w.sidelobe_db);
        }
        if (w.kind == "boxcar") detail::positive(r, "weighting.half_width", r.get<double>(t, "weighting", "half_width", true), w.half_width);
        if (k_discrete || w.kind == "moment" || w.kind == "profile" || w.kind == "dual")
            w.offsets = r.get<std::vector<double>>(t, "weighting", "offsets", true).value_or(std::vector<double>{});
        if (k_discrete || w.kind == "dual") {
            w.weights = r.get<std::vector<double>>(t, "weighting", "weights", true).value_or(std::vector<double>{});
            if (w.weights.size() != w.offsets.size()) r.issue("weighting.weights", "must have one entry per offset");
        }
        if (w.kind == "dual") {
            w.weights_d = r.get<std::vector<double>>(t, "weighting", "weights_d", true).value_or(std::vector<double>{});
            if (w.weights_d.size() != w.offsets.size()) r.issue("weighting.weights_d", "must have one entry per offset");
        }
        if (w.kind == "moment") {
            detail::at_least(r, "weighting.degree", r.get<std::int64_t>(t, "weighting", "degree", true), 0, w.degree);
            if (w.offsets.size() < static_cast<std::size_t>(w.degree) + 2) r.issue("weighting.offsets", "need at least degree + 2 nodes");
        }
        if (w.kind == "profile") {
            w.values = r.get<std::vector<double>>(t, "weighting", "values", true).value_or(std::vector<double>{});
            if (w.values.size() != w.offsets.size()) r.issue("weighting.values", "must have one entry per offset");
            detail::positive(r, "weighting.range", r.get<double>(t, "weighting", "range", true), w.range);
            if (const auto* arr = t->get("deltas")) {
                if (const auto* a = arr->as_array()) {
                    for (const auto& e : *a) {
                        const auto* et = e.as_table();
                        auto off = et ? (*et)["offset"].value<double>() : std::nullopt;
                        auto mass = et ? (*et)["mass"].value<double>() : std::nullopt;
                        if (!off || !mass) {
                            r.issue("weighting.deltas", "entries must be {offset, mass} tables");
                            break;
                        }
                        w.deltas.push_back({*off, *mass});
                    }
                } else {
                    r.issue("weighting.deltas", "must be an array of {offset, mass}");
                }
            }
        }
        if (w.kind == "grid") {
            w.xs = r.get<std::vector<double>>(t, "weighting", "xs", true).value_or(std::vector<double>{});
            w.ys = r.get<std::vector<double>>(t, "weighting", "ys", true).value_or(std::vector<double>{});
            w.values = r.get<std::vector<double>>(t, "weighting", "values", true).value_or(std::vector<double>{});
            if (w.values.size() != w.xs.size() * w.ys.size()) r.issue("weighting.values", "must have len(xs) * len(ys) entries");
        }
        const bool grid_modes = cfg.mode == Mode::map2d || cfg.mode == Mode::dynamic;
        if (!w.kind.empty() && grid_modes != (w.kind == "grid"))
            r.issue("weighting.kind", grid_modes ? "map2d and dynamic modes need kind = grid" : "grid weightings need mode map2d or dynamic");
        if (cfg.mode == Mode::dual && w.kind != "dual") r.issue("weighting.kind", "dual mode needs kind = dual");
        if (cfg.mode != Mode::dual && w.kind == "dual") r.issue("weighting.kind", "kind = dual needs mode = dual");
        const bool continuous_modes = cfg.mode == Mode::continuous || cfg.mode == Mode::narrowband;
        if (continuous_modes && !(w.kind == "boxcar" || w.kind == "profile"))
            r.issue("weighting.kind", "continuous and narrowband modes need kind = boxcar or profile");
        if (cfg.mode == Mode::discrete && (w.kind == "boxcar" || w.kind == "profile"))
            r.issue("weighting.kind", "discrete mode needs a discrete weighting kind");
    }

    // [synthesis]
    if (const auto* t = r.table(root, "", "synthesis", false)) {
        r.allow(*t, "synthesis", {"period", "samples", "order", "order_seed", "omega0", "u0", "nominal_period",
                                  "samples_per_half_period", "mu_c"});
        auto& s = cfg.synthesis;
        detail::positive(r, "synthesis.period", r.get<double>(t, "synthesis", "period"), s.period);
        detail::at_least(r, "synthesis.samples", r.get<std::int64_t>(t, "synthesis", "samples"), 64, s.samples);
        if (auto o = r.get<std::string>(t, "synthesis", "order")) {
            if (*o == "ascending") s.order = SegmentOrder::ascending;
            else if (*o == "descending") s.order = SegmentOrder::descending;
            else if (*o == "randomized") s.order = SegmentOrder::randomized;
            else r.issue("synthesis.order", "must be ascending|descending|randomized");
        }
        if (auto v = r.get<std::int64_t>(t, "synthesis", "order_seed")) s.order_seed = static_cast<std::uint64_t>(*v);
        detail::positive(r, "synthesis.omega0", r.get<double>(t, "synthesis", "omega0", cfg.mode == Mode::narrowband), s.omega0);
        detail::positive(r, "synthesis.u0", r.get<double>(t, "synthesis", "u0"), s.u0);
        detail::positive(r, "synthesis.nominal_period", r.get<double>(t, "synthesis", "nominal_period"), s.nominal_period);
        detail::at_least(r, "synthesis.samples_per_half_period", r.get<std::int64_t>(t, "synthesis", "samples_per_half_period"), 2,
                         s.samples_per_half_period);
        if (auto mu = r.get<double>(t, "synthesis", "mu_c")) {
            if (*mu < 0.0 || *mu > 1.0) r.issue("synthesis.mu_c", "must be in [0, 1]");
            else s.mu_c = *mu;
        }
    } else if (cfg.mode == Mode::narrowband) {
        r.issue("synthesis.omega0", "required key is missing");
    }
    if (cfg.synthesis.nominal_period == 0.0) cfg.synthesis.nominal_period = cfg.synthesis.period;

    // [noise]
    if (const auto* t = r.table(root, "", "noise", false)) {
        r.allow(*t, "noise", {"kind", "P_n", "table", "fundamental_period", "seed"});
        auto kind = r.get<std::string>(t, "noise", "kind").value_or("white");
        if (kind == "white") {
            cfg.noise.kind = NoiseKind::white;
            if (auto p = r.get<double>(t, "noise", "P_n", true)) {
                if (*p < 0.0) r.issue("noise.P_n", "must be >= 0");
                else cfg.noise.psd = *p;
            }
        } else if (kind == "colored") {
            cfg.noise.kind = NoiseKind::colored;
            const auto* node = t->get("table");
            const auto* arr = node ? node->as_array() : nullptr;
            if (!arr || arr->empty()) {
                r.issue("noise.table", "colored noise needs a nonempty array of {l, P}");
            } else {
                for (const auto& e : *arr) {
                    const auto* et = e.as_table();
                    auto l = et ? (*et)["l"].value<double>() : std::nullopt;
                    auto p = et ? (*et)["P"].value<double>() : std::nullopt;
                    if (!l || !p || *p < 0.0 || *l < 0.0) {
                        r.issue("noise.table", "entries must be {l >= 0, P >= 0}");
                        break;
                    }
                    cfg.noise.table.push_back({*l, *p});
                }
            }
            detail::positive(r, "noise.fundamental_period", r.get<double>(t, "noise", "fundamental_period"),
                             cfg.noise.fundamental_period);
        } else {
            r.issue("noise.kind", "must be white|colored");
        }
        if (auto s = r.get<std::int64_t>(t, "noise", "seed")) cfg.noise.seed = static_cast<std::uint64_t>(*s);
    }

    // [measurement]
    if (const auto* t = r.table(root, "", "measurement", false)) {
        r.allow(*t, "measurement", {"periods", "sample_rate", "filter", "cutoff_hz", "slot_mode", "gain", "phase_offset"});
        auto& m = cfg.measurement;
        detail::at_least(r, "measurement.periods", r.get<std::int64_t>(t, "measurement", "periods"), 1, m.periods);
        detail::positive(r, "measurement.sample_rate", r.get<double>(t, "measurement", "sample_rate"), m.sample_rate);
        if (auto f = r.get<std::string>(t, "measurement", "filter")) {
            if (*f == "boxcar") m.filter = FilterKind::boxcar;
            else if (*f == "single_pole") m.filter = FilterKind::single_pole;
            else r.issue("measurement.filter", "must be boxcar|single_pole");
        }
        detail::positive(r, "measurement.cutoff_hz", r.get<double>(t, "measurement", "cutoff_hz", m.filter == FilterKind::single_pole),
                         m.cutoff_hz);
        if (auto s = r.get<bool>(t, "measurement", "slot_mode")) m.slot_mode = *s;
        if (auto g = r.get<std::string>(t, "measurement", "gain")) {
            if (*g == "apply") m.gain = GainHandling::apply;
            else if (*g == "raw") m.gain = GainHandling::raw;
            else r.issue("measurement.gain", "must be apply|raw");
        }
        if (auto p = r.get<double>(t, "measurement", "phase_offset")) m.phase_offset = *p;
    } else {
        cfg.measurement.slot_mode = true;
    }
    if (!cfg.measurement.slot_mode && !(cfg.measurement.sample_rate > 0.0) && cfg.mode != Mode::map2d && cfg.mode != Mode::lockin)
        r.issue("measurement.sample_rate", "required unless slot_mode = true");

    // [sweep]
    if (const auto* t = r.table(root, "", "sweep", false)) {
        r.allow(*t, "sweep", {"waypoints", "start", "stop", "count", "sweep_rate", "margin", "omega_b"});
        SweepSpec sw;
        if (auto wp = r.get<std::vector<double>>(t, "sweep", "waypoints")) {
            sw.waypoints = *wp;
        } else {
            auto a = r.get<double>(t, "sweep", "start", true);
            auto b = r.get<double>(t, "sweep", "stop", true);
            auto n = r.get<std::int64_t>(t, "sweep", "count", true);
            if (n && *n < 1) r.issue("sweep.count", "must be >= 1");
            if (a && b && n && *n >= 1) {
                for (std::int64_t k = 0; k < *n; ++k)
                    sw.waypoints.push_back(*n == 1 ? *a : *a + (*b - *a) * static_cast<double>(k) / static_cast<double>(*n - 1));
            }
        }
        if (auto v = r.get<double>(t, "sweep", "sweep_rate")) {
            if (*v > 0.0) sw.sweep_rate = *v;
            else r.issue("sweep.sweep_rate", "must be > 0");
        }
        if (auto v = r.get<double>(t, "sweep", "margin")) {
            if (*v > 0.0 && *v <= 1.0) sw.margin = *v;
            else r.issue("sweep.margin", "must be in (0, 1]");
        }
        if (auto v = r.get<double>(t, "sweep", "omega_b")) {
            if (*v > 0.0) sw.omega_b = *v;
            else r.issue("sweep.omega_b", "must be > 0");
        }
        cfg.sweep = sw;
    }

    // [lockin]
    if (const auto* t = r.table(root, "", "lockin", cfg.mode == Mode::lockin)) {
        r.allow(*t, "lockin", {"amplitude", "frequency_hz", "samples_per_period", "periods", "phase"});
        auto& l = cfg.lockin;
        detail::positive(r, "lockin.amplitude", r.get<double>(t, "lockin", "amplitude", true), l.amplitude);
        detail::positive(r, "lockin.frequency_hz", r.get<double>(t, "lockin", "frequency_hz", true), l.frequency_hz);
        detail::at_least(r, "lockin.samples_per_period", r.get<std::int64_t>(t, "lockin", "samples_per_period"), 4, l.samples_per_period);
        detail::at_least(r, "lockin.periods", r.get<std::int64_t>(t, "lockin", "periods"), 1, l.periods);
        if (auto p = r.get<double>(t, "lockin", "phase")) l.phase = *p;
    }

    // [compare]
    if (const auto* t = r.table(root, "", "compare", false)) {
        r.allow(*t, "compare", {"budget", "targets", "sigma", "peak_amplitude", "background_offset", "background_slope",
                                "waypoints", "span_sigmas", "test_time", "P_n", "trials", "lockin_periods",
                                "lockin_samples_per_period", "continuous_samples"});
        auto& c = cfg.compare.setup;
        if (auto b = r.get<double>(t, "compare", "budget")) {
            if (*b < 0.01 || *b > 0.10) r.issue("compare.budget", "must be in [0.01, 0.10]");
            else c.budget = *b;
        }
        if (const auto* node = t->get("targets")) {
            cfg.compare.targets.clear();
            const auto* arr = node->as_array();
            if (!arr) r.issue("compare.targets", "must be an array of strings");
            else {
                for (const auto& e : *arr) {
                    auto s = e.value<std::string>();
                    if (s && *s == "full_current") cfg.compare.targets.push_back(Target::full_current);
                    else if (s && *s == "curve") cfg.compare.targets.push_back(Target::curve);
                    else if (s && *s == "derivative") cfg.compare.targets.push_back(Target::derivative);
                    else r.issue("compare.targets", "entries must be full_current|curve|derivative");
                }
            }
        }
        detail::positive(r, "compare.sigma", r.get<double>(t, "compare", "sigma"), c.sigma);
        detail::positive(r, "compare.peak_amplitude", r.get<double>(t, "compare", "peak_amplitude"), c.peak_amplitude);
        if (auto v = r.get<double>(t, "compare", "background_offset")) c.background_offset = *v;
        if (auto v = r.get<double>(t, "compare", "background_slope")) c.background_slope = *v;
        detail::at_least(r, "compare.waypoints", r.get<std::int64_t>(t, "compare", "waypoints"), 5, c.waypoints);
        detail::positive(r, "compare.span_sigmas", r.get<double>(t, "compare", "span_sigmas"), c.span_sigmas);
        detail::positive(r, "compare.test_time", r.get<double>(t, "compare", "test_time"), c.test_time);
        detail::positive(r, "compare.P_n", r.get<double>(t, "compare", "P_n"), c.psd);
        detail::at_least(r, "compare.trials", r.get<std::int64_t>(t, "compare", "trials"), 2, c.trials);
        detail::at_least(r, "compare.lockin_periods", r.get<std::int64_t>(t, "compare", "lockin_periods"), 1, c.lockin_periods);
        detail::at_least(r, "compare.lockin_samples_per_period", r.get<std::int64_t>(t, "compare", "lockin_samples_per_period"), 4,
                         c.lockin_samples_per_period);
        detail::at_least(r, "compare.continuous_samples", r.get<std::int64_t>(t, "compare", "continuous_samples"), 64,
                         c.continuous_samples);
    }

    // [output]
    if (const auto* t = r.table(root, "", "output", false)) {
        r.allow(*t, "output", {"dir", "plot_samples"});
        if (auto d = r.get<std::string>(t, "output", "dir")) cfg.output_dir = *d;
        detail::at_least(r, "output.plot_samples", r.get<std::int64_t>(t, "output", "plot_samples"), 2, cfg.plot_samples);
    }

    if (!issues.empty()) throw ConfigError(std::move(issues));
    return cfg;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

inline double param(const DutSpec& d, const std::string& key, double fallback) {
    auto it = d.params.find(key);
    return it == d.params.end() ? fallback : it->second;
}

inline Characteristic1D build_dut_1d(const DutSpec& d) {
    std::optional<double> omega_b;
    if (d.params.count("omega_b")) omega_b = d.params.at("omega_b");
    if (d.kind == "auger") {
        AugerSpectrumModel m;
        m.peak_center = param(d, "peak_center", 0.5 * (d.domain.lo + d.domain.hi));
        m.peak_width = param(d, "peak_width", 1.0);
        m.peak_amplitude = param(d, "peak_amplitude", 1.0);
        m.peak_shape = d.peak_shape == "lorentzian" ? PeakShape::lorentzian : PeakShape::gaussian;
        m.background = d.background;
        m.domain = d.domain;
        return m.build(omega_b);
    }
    if (d.kind == "nano_iv") {
        NanoIvModel m;
        m.ohmic_conductance = param(d, "conductance", 1.0);
        const double cubic = param(d, "cubic", 0.0);
        const double step = param(d, "step_amplitude", 0.0);
        const double width = param(d, "step_width", 1.0);
        m.nonlinear_term = [=](double e) { return cubic * e * e * e + step * std::tanh(e / width); };
        m.domain = d.domain;
        m.max_ratio = param(d, "max_ratio", 0.1);
        return m.build(omega_b);
    }
    throw ArgumentError("dut.kind '" + d.kind + "' is not a one-dimensional characteristic");
}

/// Gaussian spot on a plane background.
inline CharacteristicMap2D build_dut_map(const DutSpec& d) {
    const double a = param(d, "spot_amplitude", 1.0);
    const double x0 = param(d, "spot_x", 0.5 * (d.domain.lo + d.domain.hi));
    const double y0 = param(d, "spot_y", 0.5 * (d.y_domain.lo + d.y_domain.hi));
    const double s = param(d, "spot_width", 1.0);
    const double b0 = param(d, "background_offset", 0.0);
    const double bx = param(d, "background_x", 0.0);
    const double by = param(d, "background_y", 0.0);
    return CharacteristicMap2D(
        [=](double x, double y) { return a * std::exp(-0.5 * ((x - x0) * (x - x0) + (y - y0) * (y - y0)) / (s * s)); },
        [=](double x, double y) { return b0 + bx * x + by * y; }, d.domain, d.y_domain);
}

/// Conductance plus displacement current: I = G E + C dE/dt + peak(E).
inline DynamicDut build_dut_dynamic(const DutSpec& d) {
    const double g = param(d, "conductance", 1.0);
    const double c = param(d, "capacitance", 0.0);
    const double a = param(d, "peak_amplitude", 0.0);
    const double e0 = param(d, "peak_center", 0.0);
    const double s = param(d, "peak_width", 1.0);
    return DynamicDut(
        [=](double e, double rate) {
            const double x = (e - e0) / s;
            return g * e + c * rate + a * std::exp(-0.5 * x * x);
        },
        d.domain, d.y_domain);
}

/// One-dimensional weighting around `center`.
inline AnyWeighting build_weighting(const WeightingSpec& w, double center) {
    auto discrete = [&](const std::vector<double>& offsets, const std::vector<double>& weights) {
        std::vector<WeightNode> nodes;
        for (std::size_t i = 0; i < offsets.size(); ++i) nodes.push_back({center + offsets[i], weights[i]});
        return DiscreteWeighting(std::move(nodes), center);
    };
    if (w.kind == "discrete") return discrete(w.offsets, w.weights);
    if (w.kind == "derivative")
        return discrete({-w.step, w.step}, {-0.5 / w.step, 0.5 / w.step});
    if (w.kind == "second_difference")
        return discrete({-w.step, 0.0, w.step}, {1.0, -2.0, 1.0});
    if (w.kind == "moment") {
        std::vector<double> levels;
        for (double o : w.offsets) levels.push_back(center + o);
        return moment_design(levels, w.degree, center);
    }
    if (w.kind == "dolph_chebyshev") return dolph_chebyshev_weighting(center, w.step, w.n, w.sidelobe_db);
    if (w.kind == "boxcar") return boxcar_with_end_deltas(center - w.half_width, center + w.half_width);
    if (w.kind == "profile") {
        std::vector<ProfileKnot> knots;
        for (std::size_t i = 0; i < w.offsets.size(); ++i) knots.push_back({w.offsets[i], w.values[i]});
        return ContinuousWeighting(center, w.range, std::move(knots), w.deltas);
    }
    throw ArgumentError("weighting.kind '" + w.kind + "' is not a one-dimensional weighting");
}

inline Weighting2D build_grid(const WeightingSpec& w) { return Weighting2D(w.xs, w.ys, w.values); }

inline NoiseModel build_noise(const NoiseSpec& n, double period, std::uint64_t seed) {
    const std::uint64_t s = n.seed.value_or(seed);
    if (n.kind == NoiseKind::white) return NoiseModel::white(n.psd, s);
    return NoiseModel::colored(n.table, n.fundamental_period > 0.0 ? n.fundamental_period : period, s);
}

}  // namespace corrsynth
