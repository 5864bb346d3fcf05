#pragma once

// Experiment pipelines behind the command-line tool. Every function writes
// deterministic files: no timestamps, fixed column order, doubles at 17
// significant digits, Monte-Carlo results gathered by trial index.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "corrsynth/config.hpp"
#include "corrsynth/correlation_meter.hpp"
#include "corrsynth/lockin_baseline.hpp"
#include "corrsynth/montecarlo.hpp"
#include "corrsynth/noise.hpp"
#include "corrsynth/serialization.hpp"
#include "corrsynth/synthesis.hpp"

namespace corrsynth {

namespace fs = std::filesystem;

struct RunOptions {
    std::optional<fs::path> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
};

struct RunOutcome {
    fs::path out_dir;
    std::vector<fs::path> files;
    Json summary;
};

inline std::string hash_hex(std::uint64_t h) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

/// Machine-readable failure document.
inline Json error_document(const std::vector<ConfigIssue>& issues) {
    Json j;
    j["status"] = "error";
    j["errors"] = Json::array();
    for (const auto& i : issues) j["errors"].push_back({{"key", i.key}, {"constraint", i.constraint}});
    return j;
}

inline std::vector<ConfigIssue> issues_from(const std::exception& e) {
    if (const auto* c = dynamic_cast<const ConfigError*>(&e)) return c->issues();
    std::string key = "runtime";
    if (dynamic_cast<const AliasingError*>(&e)) key = "sweep";
    else if (dynamic_cast<const DomainError*>(&e)) key = "domain";
    else if (dynamic_cast<const DesignError*>(&e) || dynamic_cast<const PackingError*>(&e)) key = "weighting";
    else if (dynamic_cast<const ResolutionError*>(&e)) key = "synthesis";
    else if (dynamic_cast<const AlignmentError*>(&e)) key = "measurement";
    return {{key, e.what()}};
}

inline ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(std::vector<ConfigIssue>{{"config", "cannot read file " + path.string()}});
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

namespace detail {

inline void write_file(const fs::path& p, const std::string& text, std::vector<fs::path>& files) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
    files.push_back(p);
}

inline std::string csv_banner(std::uint64_t hash) { return "# corrsynth config_hash=" + hash_hex(hash) + "\n"; }

struct Row {
    double level = 0.0;
    double estimate = 0.0;
    double variance = 0.0;
};

/// Rows of the estimates file. With one trial the variance is the across-period
/// sample variance; with several it is the variance of the trial estimates.
inline std::vector<Row> aggregate(const std::vector<MeasurementResult>& trials) {
    std::vector<Row> rows;
    const auto& first = trials.front();
    for (std::size_t k = 0; k < first.levels.size(); ++k) {
        std::vector<double> xs;
        for (const auto& t : trials) xs.push_back(t.estimates[k]);
        const auto st = sample_stats(xs);
        rows.push_back({first.levels[k], st.mean, trials.size() > 1 ? st.variance : first.sample_variance[k]});
    }
    return rows;
}

inline std::string estimates_csv(const std::vector<Row>& rows, int periods, std::uint64_t seed, std::uint64_t hash) {
    std::ostringstream os;
    os << csv_banner(hash) << "E_c,estimate,sample_variance,n_periods,seed\n";
    for (const auto& r : rows)
        os << format_double(r.level) << ',' << format_double(r.estimate) << ',' << format_double(r.variance) << ','
           << periods << ',' << seed << '\n';
    return os.str();
}

inline std::string trials_csv(const std::vector<MeasurementResult>& trials, std::uint64_t hash) {
    std::ostringstream os;
    os << csv_banner(hash) << "trial,E_c,estimate\n";
    for (std::size_t t = 0; t < trials.size(); ++t)
        for (std::size_t k = 0; k < trials[t].levels.size(); ++k)
            os << t << ',' << format_double(trials[t].levels[k]) << ',' << format_double(trials[t].estimates[k]) << '\n';
    return os.str();
}

inline std::vector<double> waypoints(const ExperimentConfig& cfg) {
    if (cfg.sweep && !cfg.sweep->waypoints.empty()) return cfg.sweep->waypoints;
    if (cfg.weighting.has_center) return {cfg.weighting.center};
    return {0.5 * (cfg.dut.domain.lo + cfg.dut.domain.hi)};
}

inline ControlSweep control_sweep(const ExperimentConfig& cfg) {
    ControlSweep sw;
    sw.waypoints = waypoints(cfg);
    if (cfg.sweep) {
        sw.sweep_rate = cfg.sweep->sweep_rate;
        sw.margin = cfg.sweep->margin;
        sw.omega_b = cfg.sweep->omega_b;
    }
    return sw;
}

inline DiscreteWeighting discrete_from(const std::vector<double>& offsets, const std::vector<double>& weights, double center) {
    std::vector<WeightNode> nodes;
    for (std::size_t i = 0; i < offsets.size(); ++i) nodes.push_back({center + offsets[i], weights[i]});
    return DiscreteWeighting(std::move(nodes), center);
}

/// Single-channel schedule for the 1-D modes, centered on `center`.
inline Synthesis synthesis_1d(const ExperimentConfig& cfg, double center) {
    const auto& s = cfg.synthesis;
    switch (cfg.mode) {
        case Mode::discrete:
            return synthesize_discrete(std::get<DiscreteWeighting>(build_weighting(cfg.weighting, center)), s.period,
                                       s.order, s.order_seed);
        case Mode::continuous:
            return synthesize_continuous(std::get<ContinuousWeighting>(build_weighting(cfg.weighting, center)), s.period,
                                         s.samples);
        case Mode::narrowband: {
            auto nb = synthesize_narrowband(std::get<ContinuousWeighting>(build_weighting(cfg.weighting, center)), s.omega0, s.u0, s.nominal_period,
                                            s.samples_per_half_period);
            return {std::move(nb.schedule), std::move(nb.reference)};
        }
        case Mode::dynamic:
            return synthesize_dynamic(build_grid(cfg.weighting), s.period);
        case Mode::lockin: {
            LockinConfig lc;
            lc.amplitude = cfg.lockin.amplitude;
            lc.omega = 2.0 * std::numbers::pi * cfg.lockin.frequency_hz;
            lc.phase = cfg.lockin.phase;
            lc.samples_per_period = cfg.lockin.samples_per_period;
            lc.periods = cfg.lockin.periods;
            return lockin_schedule(lc, center);
        }
        default:
            throw ArgumentError(std::string("no single-channel schedule for mode ") + to_string(cfg.mode));
    }
}

inline DualChannelSchedule dual_schedule(const ExperimentConfig& cfg, double center) {
    const auto& w = cfg.weighting;
    return synthesize_dual(discrete_from(w.offsets, w.weights, center), discrete_from(w.offsets, w.weights_d, center),
                           cfg.synthesis.mu_c, 1.0 - cfg.synthesis.mu_c, cfg.synthesis.period);
}

inline Json run_json(const ExperimentConfig& cfg, std::uint64_t seed, int trials, std::uint64_t hash,
                     const std::vector<fs::path>& files, Json summary) {
    Json j;
    j["status"] = "ok";
    j["config_hash"] = hash_hex(hash);
    j["mode"] = to_string(cfg.mode);
    j["seed"] = seed;
    j["trials"] = trials;
    Json names = Json::array();
    for (const auto& f : files) names.push_back(f.filename().string());
    j["outputs"] = names;
    j["summary"] = std::move(summary);
    j["config"] = cfg.source;
    return j;
}

}  // namespace detail

/// Executes the configured pipeline and writes estimates.csv (plus
/// estimates_d.csv for dual mode, trials.csv for several trials, report.json
/// for narrowband) and the run.json sidecar.
inline RunOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
    const std::uint64_t seed = opt.seed.value_or(cfg.seed);
    const int trials = opt.trials.value_or(cfg.trials);
    if (trials < 1) throw ConfigError(std::vector<ConfigIssue>{{"trials", "must be >= 1"}});
    const std::uint64_t hash = cfg.hash(seed, trials);
    RunOutcome out;
    out.out_dir = opt.out_dir.value_or(fs::path(cfg.output_dir));
    fs::create_directories(out.out_dir);
    const auto noise = build_noise(cfg.noise, cfg.synthesis.period, seed);
    const auto tcount = static_cast<std::size_t>(trials);
    Json summary = Json::object();
    auto& files = out.files;

    auto finish_single = [&](const std::vector<MeasurementResult>& res, const char* name) {
        detail::write_file(out.out_dir / name,
                           detail::estimates_csv(detail::aggregate(res), res.front().periods, noise.seed(), hash), files);
    };

    switch (cfg.mode) {
        case Mode::discrete:
        case Mode::continuous:
        case Mode::lockin:
        case Mode::narrowband: {
            const auto sw = detail::control_sweep(cfg);
            const auto syn = detail::synthesis_1d(cfg, sw.waypoints.front());
            const auto dut = build_dut_1d(cfg.dut);
            MeasurementConfig mc = cfg.measurement;
            if (cfg.mode == Mode::lockin) {
                mc.periods = cfg.lockin.periods;
                mc.slot_mode = false;
                mc.sample_rate = cfg.lockin.samples_per_period / syn.schedule.period();
            }
            auto res = run_trials<MeasurementResult>(
                tcount, [&](std::size_t t) { return sweep(dut, syn.schedule, syn.reference, noise, mc, sw, t); });
            finish_single(res, "estimates.csv");
            if (trials > 1) detail::write_file(out.out_dir / "trials.csv", detail::trials_csv(res, hash), files);
            summary["period"] = syn.schedule.period();
            summary["gain"] = syn.schedule.gain();
            summary["waypoints"] = sw.waypoints.size();
            if (cfg.mode == Mode::narrowband) {
                // Same weighting, same period, optimal bilevel schedule: the
                // variance ratio isolates the harmonic-reference penalty.
                const double ec = sw.waypoints.front();
                const auto w = std::get<ContinuousWeighting>(build_weighting(cfg.weighting, ec));
                const auto opt_syn = synthesize_continuous(w, syn.schedule.period(), cfg.synthesis.samples);
                MeasurementConfig single = mc;
                auto nb = run_trials<double>(tcount, [&](std::size_t t) {
                    return measure(dut, syn.schedule.recentered(ec), syn.reference, noise, single, t).estimates.front();
                });
                auto op = run_trials<double>(tcount, [&](std::size_t t) {
                    return measure(dut, opt_syn.schedule, opt_syn.reference, noise, single, t + tcount).estimates.front();
                });
                const auto snb = sample_stats(nb);
                const auto sop = sample_stats(op);
                const double predicted = std::numbers::pi * std::numbers::pi / 8.0;
                Json rep;
                rep["config_hash"] = hash_hex(hash);
                rep["trials"] = trials;
                rep["period"] = syn.schedule.period();
                rep["narrowband_variance"] = snb.variance;
                rep["optimal_variance"] = sop.variance;
                rep["measured_ratio"] = sop.variance > 0.0 ? snb.variance / sop.variance : 0.0;
                rep["predicted_ratio"] = predicted;
                rep["predicted_optimal_variance"] =
                    predict_variance_optimum(AnyWeighting(w), noise.psd_at(0.0), syn.schedule.period()).variance /
                    static_cast<double>(mc.periods);
                detail::write_file(out.out_dir / "report.json", rep.dump(2) + "\n", files);
                summary["measured_ratio"] = rep["measured_ratio"];
                summary["predicted_ratio"] = predicted;
            }
            break;
        }
        case Mode::dual: {
            const auto pts = detail::waypoints(cfg);
            const auto dut = build_dut_1d(cfg.dut);
            const auto base = detail::dual_schedule(cfg, pts.front());
            const auto npts = pts.size();
            auto res = run_trials<std::pair<MeasurementResult, MeasurementResult>>(tcount, [&](std::size_t t) {
                MeasurementResult c, d;
                c.seed = d.seed = noise.seed();
                c.periods = d.periods = cfg.measurement.periods;
                for (std::size_t k = 0; k < npts; ++k) {
                    DualChannelSchedule local = base;
                    local.schedule = base.schedule.recentered(pts[k]);
                    const auto r = measure_dual(dut, local, noise, cfg.measurement, t * npts + k);
                    c.levels.push_back(pts[k]);
                    d.levels.push_back(pts[k]);
                    c.estimates.push_back(r.theta_c);
                    d.estimates.push_back(r.theta_d);
                    c.sample_variance.push_back(r.variance_c);
                    d.sample_variance.push_back(r.variance_d);
                }
                return std::pair{c, d};
            });
            std::vector<MeasurementResult> rc, rd;
            for (auto& [c, d] : res) {
                rc.push_back(std::move(c));
                rd.push_back(std::move(d));
            }
            finish_single(rc, "estimates.csv");
            finish_single(rd, "estimates_d.csv");
            summary["mu_c"] = cfg.synthesis.mu_c;
            summary["waypoints"] = npts;
            break;
        }
        case Mode::map2d: {
            const auto map = build_dut_map(cfg.dut);
            const auto scan = synthesize_2d(build_grid(cfg.weighting), cfg.synthesis.period);
            auto res = run_trials<MeasurementResult>(
                tcount, [&](std::size_t t) { return measure_map(map, scan, noise, cfg.measurement, t); });
            finish_single(res, "estimates.csv");
            if (trials > 1) detail::write_file(out.out_dir / "trials.csv", detail::trials_csv(res, hash), files);
            summary["scan_points"] = scan.points.size();
            summary["gain"] = scan.gain;
            break;
        }
        case Mode::dynamic: {
            const auto dut = build_dut_dynamic(cfg.dut);
            const std::vector<double> pts =
                cfg.sweep && !cfg.sweep->waypoints.empty() ? cfg.sweep->waypoints : std::vector<double>{0.0};
            const auto syn = detail::synthesis_1d(cfg, 0.0);
            auto res = run_trials<MeasurementResult>(tcount, [&](std::size_t t) {
                MeasurementResult r;
                r.seed = noise.seed();
                r.periods = cfg.measurement.periods;
                for (std::size_t k = 0; k < pts.size(); ++k) {
                    // The grid carries absolute levels; waypoints shift it.
                    const auto m = measure(dut, syn.schedule.recentered(syn.schedule.center() + pts[k]), syn.reference,
                                           noise, cfg.measurement, t * pts.size() + k);
                    r.levels.push_back(pts[k]);
                    r.estimates.push_back(m.estimates.front());
                    r.sample_variance.push_back(m.sample_variance.front());
                }
                return r;
            });
            finish_single(res, "estimates.csv");
            summary["period"] = syn.schedule.period();
            break;
        }
    }
    detail::write_file(out.out_dir / "run.json", detail::run_json(cfg, seed, trials, hash, files, summary).dump(2) + "\n",
                       files);
    out.summary = std::move(summary);
    return out;
}

/// Schedule document or sampled waveform for the configured weighting.
inline std::string emit_schedule(const ExperimentConfig& cfg, bool csv) {
    const std::uint64_t hash = cfg.hash(cfg.seed, cfg.trials);
    const double center = detail::waypoints(cfg).front();
    if (cfg.mode == Mode::map2d) {
        const auto scan = synthesize_2d(build_grid(cfg.weighting), cfg.synthesis.period);
        if (csv) {
            std::ostringstream os;
            os << detail::csv_banner(hash) << "x,y,dwell,ref\n";
            for (std::size_t i = 0; i < scan.points.size(); ++i)
                os << format_double(scan.points[i].x) << ',' << format_double(scan.points[i].y) << ','
                   << format_double(scan.dwell(i)) << ',' << format_double(scan.points[i].ref) << '\n';
            return os.str();
        }
        auto j = to_json(scan);
        j["config_hash"] = hash_hex(hash);
        return j.dump(2) + "\n";
    }
    StimulusSchedule schedule;
    Json doc;
    if (cfg.mode == Mode::dual) {
        const auto d = detail::dual_schedule(cfg, center);
        schedule = d.schedule;
        doc = to_json(d.schedule, d.reference_c);
        doc["reference_d"] = to_json(d.schedule, d.reference_d)["reference"];
    } else {
        auto syn = detail::synthesis_1d(cfg, cfg.mode == Mode::dynamic ? 0.0 : center);
        schedule = syn.schedule;
        doc = to_json(syn.schedule, syn.reference);
    }
    if (csv) {
        std::ostringstream os;
        write_waveform_csv(os, schedule, cfg.plot_samples, "# corrsynth config_hash=" + hash_hex(hash));
        return os.str();
    }
    doc["config_hash"] = hash_hex(hash);
    return doc.dump(2) + "\n";
}

/// Lock-in versus optimal comparison for each configured target.
inline RunOutcome run_compare(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
    ComparisonSetup setup = cfg.compare.setup;
    setup.seed = opt.seed.value_or(cfg.seed);
    if (opt.trials) setup.trials = *opt.trials;
    setup.validate();
    const std::uint64_t hash = cfg.hash(setup.seed, setup.trials);
    RunOutcome out;
    out.out_dir = opt.out_dir.value_or(fs::path(cfg.output_dir));
    fs::create_directories(out.out_dir);
    Json rows = Json::array();
    std::ostringstream csv;
    csv << detail::csv_banner(hash)
        << "target,budget,lockin_systematic,optimal_systematic,lockin_variance,optimal_variance,ratio,"
           "lockin_amplitude,optimal_parameter,trials\n";
    for (Target t : cfg.compare.targets) {
        const auto r = compare_systems(t, setup);
        Json j;
        j["target"] = target_name(t);
        j["budget"] = r.budget;
        j["lockin_systematic"] = r.lockin_systematic;
        j["optimal_systematic"] = r.optimal_systematic;
        j["lockin_variance"] = r.lockin_variance;
        j["optimal_variance"] = r.optimal_variance;
        j["ratio"] = r.ratio;
        j["lockin_duration"] = r.lockin_duration;
        j["optimal_duration"] = r.optimal_duration;
        j["lockin_amplitude"] = r.lockin_amplitude;
        j["optimal_parameter"] = r.optimal_parameter;
        j["trials"] = r.trials;
        rows.push_back(j);
        csv << target_name(t) << ',' << format_double(r.budget) << ',' << format_double(r.lockin_systematic) << ','
            << format_double(r.optimal_systematic) << ',' << format_double(r.lockin_variance) << ','
            << format_double(r.optimal_variance) << ',' << format_double(r.ratio) << ','
            << format_double(r.lockin_amplitude) << ',' << format_double(r.optimal_parameter) << ',' << r.trials << '\n';
    }
    Json doc;
    doc["status"] = "ok";
    doc["config_hash"] = hash_hex(hash);
    doc["seed"] = setup.seed;
    doc["results"] = rows;
    detail::write_file(out.out_dir / "comparison.json", doc.dump(2) + "\n", out.files);
    detail::write_file(out.out_dir / "comparison.csv", csv.str(), out.files);
    out.summary = std::move(doc);
    return out;
}

// ---------------------------------------------------------------------------
// Self-test
// ---------------------------------------------------------------------------

struct SelfTestCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Optional overrides for the self-test, read from the [measurement] table of a
/// TOML file; only `gain`, `periods` and `slot_mode` are honored.
inline MeasurementConfig selftest_measurement(const std::optional<fs::path>& path) {
    MeasurementConfig mc;
    mc.slot_mode = true;
    if (!path) return mc;
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw ConfigError(std::vector<ConfigIssue>{{"config", "cannot read file " + path->string()}});
    std::ostringstream ss;
    ss << in.rdbuf();
    toml::table root;
    try {
        root = toml::parse(ss.str());
    } catch (const toml::parse_error& e) {
        throw ConfigError(std::vector<ConfigIssue>{{"toml", std::string(e.description())}});
    }
    std::vector<ConfigIssue> issues;
    if (const auto* t = root["measurement"].as_table()) {
        if (auto g = (*t)["gain"].value<std::string>()) {
            if (*g == "raw") mc.gain = GainHandling::raw;
            else if (*g != "apply") issues.push_back({"measurement.gain", "must be apply|raw"});
        }
        if (auto p = (*t)["periods"].value<std::int64_t>()) {
            if (*p < 1) issues.push_back({"measurement.periods", "must be >= 1"});
            else mc.periods = static_cast<int>(*p);
        }
        if (auto s = (*t)["slot_mode"].value<bool>()) mc.slot_mode = *s;
        if (!mc.slot_mode) mc.sample_rate = 1 << 16;
    }
    if (!issues.empty()) throw ConfigError(std::move(issues));
    return mc;
}

/// Calibrator suite over the bundled weightings plus synthesis residuals.
inline std::vector<SelfTestCheck> run_selftest(const MeasurementConfig& mc) {
    std::vector<SelfTestCheck> checks;
    const Interval dom{-8.0, 8.0};
    const Characteristic1D ramp([](double) { return 0.0; }, [](double e) { return 0.7 - 0.3 * e; }, dom, 1.0);
    const Characteristic1D peak([](double e) { return std::exp(-0.5 * e * e); }, [](double) { return 0.0; }, dom, 2.326);
    struct Bundled {
        std::string name;
        AnyWeighting w;
        bool rejects_linear;
    };
    std::vector<Bundled> library{
        {"boxcar_with_end_deltas", boxcar_with_end_deltas(-2.0, 2.0), true},
        {"derivative_stencil", DiscreteWeighting({{0.75, -2.0}, {1.25, 2.0}}, 1.0), false},
        {"second_difference", DiscreteWeighting({{-0.5, 1.0}, {0.0, -2.0}, {0.5, 1.0}}, 0.0), true},
        {"dolph_chebyshev_5", dolph_chebyshev_weighting(0.0, 0.75, 5, 40.0), true},
        {"moment_d1", moment_design({-1.5, -0.5, 0.5, 1.5}, 1, 0.0), true},
    };
    auto fmt = [](double v) {
        std::ostringstream os;
        os << std::setprecision(3) << std::scientific << v;
        return os.str();
    };
    for (const auto& b : library) {
        const Synthesis syn = std::holds_alternative<DiscreteWeighting>(b.w)
                                  ? synthesize_discrete(std::get<DiscreteWeighting>(b.w), 1.0)
                                  : synthesize_continuous(std::get<ContinuousWeighting>(b.w), 1.0, 4096);
        const auto rep = std::holds_alternative<DiscreteWeighting>(b.w)
                             ? verify_synthesis(syn.schedule, syn.reference, std::get<DiscreteWeighting>(b.w))
                             : verify_synthesis(syn.schedule, syn.reference, std::get<ContinuousWeighting>(b.w));
        checks.push_back({b.name + ": synthesis residual", rep.passed,
                          "max " + fmt(rep.max_residual) + " tol " + fmt(rep.tolerance)});
        const auto cal = self_test(peak, syn.schedule, syn.reference, b.w, mc);
        std::string d = "estimate " + fmt(cal.estimate) + " expected " + fmt(cal.expected);
        if (!cal.passed) d += " factor " + fmt(cal.factor);
        checks.push_back({b.name + ": gaussian calibrator", cal.passed, d});
        const double residual = background_residual(b.w, [&](double e) { return ramp.response(e); });
        if (b.rejects_linear) {
            const auto lin = self_test(ramp, syn.schedule, syn.reference, b.w, mc);
            checks.push_back({b.name + ": linear background rejection", lin.passed && std::abs(residual) < 1e-9,
                              "background residual " + fmt(residual) + " measured " + fmt(lin.estimate)});
        }
    }
    return checks;
}

}  // namespace corrsynth
