#pragma once

// JSON documents for weightings and schedules (exact round trip: doubles are
// written with 17 significant digits) and small CSV helpers.

#include <cstdio>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "corrsynth/errors.hpp"
#include "corrsynth/synthesis.hpp"
#include "corrsynth/weighting.hpp"

namespace corrsynth {

using Json = nlohmann::ordered_json;

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// --- weightings -------------------------------------------------------------

inline Json to_json(const DiscreteWeighting& w) {
    Json j;
    j["kind"] = "discrete";
    j["center"] = w.center();
    j["nodes"] = Json::array();
    for (const auto& n : w.nodes()) j["nodes"].push_back({{"level", n.level}, {"weight", n.weight}});
    return j;
}

inline Json to_json(const ContinuousWeighting& w) {
    Json j;
    j["kind"] = "continuous";
    j["center"] = w.center();
    j["range"] = w.range();
    j["profile"] = Json::array();
    for (const auto& k : w.knots()) j["profile"].push_back({{"offset", k.offset}, {"value", k.value}});
    j["deltas"] = Json::array();
    for (const auto& d : w.deltas()) j["deltas"].push_back({{"offset", d.offset}, {"mass", d.mass}});
    return j;
}

inline Json to_json(const Weighting2D& w) {
    return Json{{"kind", "grid"}, {"xs", w.xs()}, {"ys", w.ys()}, {"values", w.values()}};
}

inline Json to_json(const AnyWeighting& w) {
    return std::visit([](const auto& v) { return to_json(v); }, w);
}

using WeightingDocument = std::variant<DiscreteWeighting, ContinuousWeighting, Weighting2D>;

inline WeightingDocument weighting_from_json(const Json& j) {
    try {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "discrete") {
            std::vector<WeightNode> nodes;
            for (const auto& n : j.at("nodes")) nodes.push_back({n.at("level").get<double>(), n.at("weight").get<double>()});
            return DiscreteWeighting(std::move(nodes), j.at("center").get<double>());
        }
        if (kind == "continuous") {
            std::vector<ProfileKnot> knots;
            for (const auto& k : j.at("profile")) knots.push_back({k.at("offset").get<double>(), k.at("value").get<double>()});
            std::vector<DeltaComponent> deltas;
            for (const auto& d : j.value("deltas", Json::array()))
                deltas.push_back({d.at("offset").get<double>(), d.at("mass").get<double>()});
            return ContinuousWeighting(j.at("center").get<double>(), j.at("range").get<double>(), std::move(knots),
                                       std::move(deltas));
        }
        if (kind == "grid") {
            return Weighting2D(j.at("xs").get<std::vector<double>>(), j.at("ys").get<std::vector<double>>(),
                               j.at("values").get<std::vector<double>>());
        }
        throw ArgumentError("weighting JSON: unknown kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(std::string("weighting JSON: ") + e.what());
    }
}

// --- schedules --------------------------------------------------------------

inline const char* to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::stepwise: return "stepwise";
        case ScheduleKind::continuous: return "continuous";
        case ScheduleKind::harmonic: return "harmonic";
        case ScheduleKind::dynamic: return "dynamic";
    }
    return "?";
}

inline const char* to_string(ReferenceKind k) {
    switch (k) {
        case ReferenceKind::bilevel: return "bilevel";
        case ReferenceKind::stepwise_general: return "stepwise_general";
        case ReferenceKind::harmonic: return "harmonic";
    }
    return "?";
}

inline ScheduleKind schedule_kind_from(const std::string& s) {
    if (s == "stepwise") return ScheduleKind::stepwise;
    if (s == "continuous") return ScheduleKind::continuous;
    if (s == "harmonic") return ScheduleKind::harmonic;
    if (s == "dynamic") return ScheduleKind::dynamic;
    throw ArgumentError("schedule JSON: unknown kind '" + s + "'");
}

inline ReferenceKind reference_kind_from(const std::string& s) {
    if (s == "bilevel") return ReferenceKind::bilevel;
    if (s == "stepwise_general") return ReferenceKind::stepwise_general;
    if (s == "harmonic") return ReferenceKind::harmonic;
    throw ArgumentError("schedule JSON: unknown reference kind '" + s + "'");
}

/// {period, kind, center, range, gain, segments:[{level, slope, dwell, fraction, ref}], reference}
inline Json to_json(const StimulusSchedule& s, const ReferenceWaveform& u) {
    Json j;
    j["period"] = s.period();
    j["kind"] = to_string(s.kind());
    j["center"] = s.center();
    j["range"] = s.range();
    j["gain"] = s.gain();
    if (s.is_harmonic()) {
        j["amplitude"] = s.amplitude();
        j["phase"] = s.phase();
    }
    j["segments"] = Json::array();
    for (std::size_t i = 0; i < s.segments().size(); ++i) {
        const auto& seg = s.segments()[i];
        Json js{{"level", seg.level}, {"slope", seg.slope}, {"dwell", s.dwell(i)}, {"fraction", seg.fraction}};
        if (u.per_segment()) js["ref"] = u.values().at(i);
        j["segments"].push_back(std::move(js));
    }
    Json r{{"kind", to_string(u.kind())}};
    if (!u.per_segment()) {
        r["amplitude"] = u.amplitude();
        r["omega"] = u.omega();
        r["phase"] = u.phase();
        r["half_period_signs"] = u.half_period_signs();
    }
    j["reference"] = std::move(r);
    return j;
}

inline Synthesis schedule_from_json(const Json& j) {
    try {
        const auto kind = schedule_kind_from(j.at("kind").get<std::string>());
        const auto& r = j.at("reference");
        const auto rkind = reference_kind_from(r.at("kind").get<std::string>());
        Synthesis out;
        if (kind == ScheduleKind::harmonic) {
            out.schedule = StimulusSchedule::harmonic(j.at("amplitude").get<double>(), j.at("period").get<double>(),
                                                      j.at("center").get<double>(), j.at("phase").get<double>(),
                                                      j.at("gain").get<double>());
        } else {
            std::vector<Segment> segments;
            for (const auto& js : j.at("segments"))
                segments.push_back({js.at("level").get<double>(), js.at("slope").get<double>(), js.at("fraction").get<double>()});
            out.schedule = StimulusSchedule(kind, j.at("period").get<double>(), j.at("center").get<double>(),
                                            j.at("range").get<double>(), std::move(segments), j.at("gain").get<double>());
        }
        if (rkind == ReferenceKind::harmonic) {
            out.reference = ReferenceWaveform::harmonic(r.at("amplitude").get<double>(), r.at("omega").get<double>(),
                                                        r.at("phase").get<double>(),
                                                        r.value("half_period_signs", std::vector<int>{}));
        } else {
            std::vector<double> values;
            for (const auto& js : j.at("segments")) values.push_back(js.at("ref").get<double>());
            out.reference = ReferenceWaveform::stepwise(rkind, std::move(values));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(std::string("schedule JSON: ") + e.what());
    }
}

inline Json to_json(const ScanSchedule2D& s) {
    Json j{{"period", s.period}, {"gain", s.gain}, {"points", Json::array()}};
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        const auto& p = s.points[i];
        j["points"].push_back({{"x", p.x}, {"y", p.y}, {"dwell", s.dwell(i)}, {"fraction", p.fraction}, {"ref", p.ref}});
    }
    return j;
}

inline ScanSchedule2D scan_from_json(const Json& j) {
    ScanSchedule2D s;
    s.period = j.at("period").get<double>();
    s.gain = j.at("gain").get<double>();
    for (const auto& p : j.at("points"))
        s.points.push_back({p.at("x").get<double>(), p.at("y").get<double>(), p.at("fraction").get<double>(), p.at("ref").get<double>()});
    return s;
}

/// Two-column (t, E_M) waveform on a uniform time grid, absolute levels.
inline void write_waveform_csv(std::ostream& os, const StimulusSchedule& s, int samples, const std::string& banner = {}) {
    if (!banner.empty()) os << banner << '\n';
    os << "t,E_M\n";
    for (int k = 0; k < samples; ++k) {
        const double t = s.period() * k / samples;
        os << format_double(t) << ',' << format_double(s.center() + s.level_at(t)) << '\n';
    }
}

}  // namespace corrsynth
