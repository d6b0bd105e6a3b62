#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "signedflow/classification.hpp"
#include "signedflow/dynamics.hpp"
#include "signedflow/errors.hpp"
#include "signedflow/schedule.hpp"
#include "signedflow/time_varying.hpp"
#include "signedflow/topology.hpp"

namespace signedflow {

using nlohmann::json;

enum class Protocol { Linear, NonlinearAdditiveNode, NonlinearAdditiveEdge, GainFlow };

inline const char* to_string(Protocol p) {
    switch (p) {
        case Protocol::Linear: return "linear";
        case Protocol::NonlinearAdditiveNode: return "nonlinear-additive-node";
        case Protocol::NonlinearAdditiveEdge: return "nonlinear-additive-edge";
        case Protocol::GainFlow: return "gain-flow";
    }
    return "?";
}

inline Protocol protocol_from_string(const std::string& s) {
    if (s == "linear") return Protocol::Linear;
    if (s == "nonlinear-additive-node") return Protocol::NonlinearAdditiveNode;
    if (s == "nonlinear-additive-edge") return Protocol::NonlinearAdditiveEdge;
    if (s == "gain-flow") return Protocol::GainFlow;
    throw ScenarioError("unknown protocol '" + s + "'");
}

/// Everything a run needs: the schedule plus protocol, initial state and
/// integrator/classifier settings. Raw JSON of the nonlinearity/gain blocks
/// is kept so exports round-trip exactly.
struct Scenario {
    explicit Scenario(Schedule s) : schedule(std::move(s)) {}

    std::string name = "scenario";
    Schedule schedule;
    std::vector<std::string> labels;
    std::optional<std::vector<double>> x0;
    Protocol protocol = Protocol::Linear;
    std::optional<NonlinearitySpec> nonlinearity;
    std::optional<GainFunction> gain;
    json nonlinearity_json, gain_json;
    std::optional<double> step, t_end, tol, tail_fraction;

    double step_or_default() const { return step.value_or(1e-3); }
    double tol_or_default() const { return tol.value_or(1e-6); }
    double tail_or_default() const { return tail_fraction.value_or(0.2); }
};

// ---------------------------------------------------------------------------
// helpers

namespace detail {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline json ints_1based(const std::vector<int>& v) {
    json out = json::array();
    for (int i : v) out.push_back(i + 1);
    return out;
}

inline json camps_json(const CampPartition& c) {
    return json::array({ints_1based(c.camp1), ints_1based(c.camp2)});
}

template <typename T>
T require(const json& j, const std::string& field, const std::string& ctx) {
    if (!j.contains(field)) throw ScenarioError(ctx + ": missing field '" + field + "'");
    try {
        return j.at(field).get<T>();
    } catch (const json::exception& e) {
        throw ScenarioError(ctx + ": bad field '" + field + "': " + e.what());
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// scenario parsing

inline SignedMatrix matrix_from_json(const json& rows, int n, const std::string& ctx) {
    if (!rows.is_array() || static_cast<int>(rows.size()) != n)
        throw ScenarioError(ctx + ": matrix must be an array of " + std::to_string(n) + " rows");
    std::vector<std::vector<double>> data;
    for (int j = 0; j < n; ++j) {
        const json& row = rows.at(j);
        if (!row.is_array() || static_cast<int>(row.size()) != n)
            throw ScenarioError(ctx + ": row " + std::to_string(j + 1) + " must have " +
                                std::to_string(n) + " entries");
        data.push_back(row.get<std::vector<double>>());
    }
    SignedMatrix a = SignedMatrix::from_rows(data);
    const ValidationReport rep = validate(a);
    if (!rep.ok()) {
        const Violation& v = rep.violations.front();
        switch (v.kind) {
            case Violation::Kind::NonzeroDiagonal:
                throw ScenarioError(ctx + ": diagonal entry (" + std::to_string(v.j + 1) + "," +
                                    std::to_string(v.k + 1) + ") must be 0");
            case Violation::Kind::NonFinite:
                throw ScenarioError(ctx + ": entry (" + std::to_string(v.j + 1) + "," +
                                    std::to_string(v.k + 1) + ") is not finite");
            default:
                throw ScenarioError(ctx + ": entry (" + std::to_string(v.j + 1) + "," +
                                    std::to_string(v.k + 1) + ") exceeds the weight cap");
        }
    }
    return a;
}

inline Nonlinearity nonlinearity_from_json(const json& j, const std::string& ctx) {
    const std::string kind = detail::require<std::string>(j, "kind", ctx);
    if (kind == "identity") return Nonlinearity::identity();
    if (kind == "atan") return Nonlinearity::atan_plus_linear(detail::require<double>(j, "alpha", ctx));
    if (kind == "cubic") return Nonlinearity::cubic_plus_linear(detail::require<double>(j, "beta", ctx));
    if (kind == "spline")
        return Nonlinearity::tabulated_spline(detail::require<std::vector<double>>(j, "x", ctx),
                                              detail::require<std::vector<double>>(j, "y", ctx));
    throw ScenarioError(ctx + ": unknown nonlinearity kind '" + kind + "'");
}

inline NonlinearitySpec nonlinearity_spec_from_json(const json& j, int n) {
    try {
        NonlinearitySpec spec(nonlinearity_from_json(j, "nonlinearity"));
        if (j.contains("pairs")) {
            for (const json& p : j.at("pairs")) {
                const int i = detail::require<int>(p, "i", "nonlinearity.pairs");
                const int k = detail::require<int>(p, "j", "nonlinearity.pairs");
                if (i < 1 || i > n || k < 1 || k > n)
                    throw ScenarioError("nonlinearity.pairs: indices must be in 1..n");
                spec.set_pair(i - 1, k - 1, nonlinearity_from_json(p, "nonlinearity.pairs"));
            }
        }
        return spec;
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(std::string("nonlinearity: ") + e.what());
    }
}

inline GainFunction gain_from_json(const json& j, int n) {
    const std::string kind = detail::require<std::string>(j, "kind", "gain");
    if (kind == "one-plus-sin-squared") {
        const SignedMatrix support = matrix_from_json(j.at("support"), n, "gain.support");
        GainFunction g;
        g.name = kind;
        g.eval = [support](double, std::span<const double> x) {
            SignedMatrix a(support.n());
            for (int i = 0; i < support.n(); ++i)
                for (int k = 0; k < support.n(); ++k)
                    if (support(i, k) != 0.0) {
                        const double d = std::sin(x[i] - x[k]);
                        a.set(i, k, support(i, k) * (1.0 + d * d));
                    }
            return a;
        };
        return g;
    }
    if (kind == "constant") {
        const SignedMatrix m = matrix_from_json(j.at("matrix"), n, "gain.matrix");
        GainFunction g;
        g.name = kind;
        g.eval = [m](double, std::span<const double>) { return m; };
        return g;
    }
    throw ScenarioError("gain: unknown kind '" + kind + "'");
}

namespace detail {

inline Scenario scenario_from_json_impl(const json& j, const std::string& name) {
    const int n = detail::require<int>(j, "n", "scenario");
    if (n < 2) throw ScenarioError("scenario: n must be >= 2");
    if (!j.contains("segments") || !j.at("segments").is_array() || j.at("segments").empty())
        throw ScenarioError("scenario: needs a non-empty 'segments' array");

    std::vector<Segment> segs;
    int idx = 0;
    for (const json& sj : j.at("segments")) {
        const std::string ctx = "segments[" + std::to_string(idx++) + "]";
        segs.push_back(Segment{detail::require<double>(sj, "t_start", ctx),
                               detail::require<double>(sj, "t_end", ctx),
                               matrix_from_json(sj.at("matrix"), n, ctx)});
    }
    std::optional<double> period;
    if (j.contains("period") && !j.at("period").is_null())
        period = detail::require<double>(j, "period", "scenario");

    Scenario sc(Schedule::make(std::move(segs), period));
    sc.name = name;

    if (j.contains("labels")) {
        sc.labels = detail::require<std::vector<std::string>>(j, "labels", "scenario");
        if (static_cast<int>(sc.labels.size()) != n)
            throw ScenarioError("scenario: labels must have n entries");
    }
    if (j.contains("x0")) {
        sc.x0 = detail::require<std::vector<double>>(j, "x0", "scenario");
        if (static_cast<int>(sc.x0->size()) != n)
            throw ScenarioError("scenario: x0 must have n entries");
        for (double v : *sc.x0)
            if (!std::isfinite(v)) throw ScenarioError("scenario: x0 must be finite");
    }
    if (j.contains("protocol")) sc.protocol = protocol_from_string(j.at("protocol").get<std::string>());

    const bool additive = sc.protocol == Protocol::NonlinearAdditiveNode ||
                          sc.protocol == Protocol::NonlinearAdditiveEdge;
    if (additive) {
        if (!j.contains("nonlinearity"))
            throw ScenarioError("scenario: protocol '" + std::string(to_string(sc.protocol)) +
                                "' requires a 'nonlinearity' block");
        sc.nonlinearity_json = j.at("nonlinearity");
        sc.nonlinearity = nonlinearity_spec_from_json(sc.nonlinearity_json, n);
    } else if (j.contains("nonlinearity")) {
        throw ScenarioError("scenario: 'nonlinearity' is only valid for the additive protocols");
    }
    if (sc.protocol == Protocol::GainFlow) {
        if (!j.contains("gain")) throw ScenarioError("scenario: protocol 'gain-flow' requires a 'gain' block");
        sc.gain_json = j.at("gain");
        sc.gain = gain_from_json(sc.gain_json, n);
    } else if (j.contains("gain")) {
        throw ScenarioError("scenario: 'gain' is only valid for the gain-flow protocol");
    }

    if (j.contains("integrator")) {
        const json& ij = j.at("integrator");
        if (ij.contains("step")) sc.step = ij.at("step").get<double>();
        if (ij.contains("t_end")) sc.t_end = ij.at("t_end").get<double>();
        if (sc.step && !(*sc.step > 0.0)) throw ScenarioError("integrator.step must be > 0");
        if (sc.t_end && !(*sc.t_end > 0.0)) throw ScenarioError("integrator.t_end must be > 0");
    }
    if (j.contains("classifier")) {
        const json& cj = j.at("classifier");
        if (cj.contains("tol")) sc.tol = cj.at("tol").get<double>();
        if (cj.contains("tail_fraction")) sc.tail_fraction = cj.at("tail_fraction").get<double>();
    }
    return sc;
}

}  // namespace detail

inline Scenario scenario_from_json(const json& j, const std::string& name = "scenario") {
    try {
        return detail::scenario_from_json_impl(j, name);
    } catch (const json::exception& e) {
        throw ScenarioError(std::string("scenario: ") + e.what());
    }
}

inline json schedule_to_json(const Schedule& s) {
    json out;
    out["n"] = s.n();
    json segs = json::array();
    for (const Segment& seg : s.segments()) {
        json rows = json::array();
        for (int j = 0; j < s.n(); ++j) {
            json row = json::array();
            for (int k = 0; k < s.n(); ++k) row.push_back(seg.matrix(j, k));
            rows.push_back(std::move(row));
        }
        segs.push_back({{"t_start", seg.t_start}, {"t_end", seg.t_end}, {"matrix", std::move(rows)}});
    }
    out["segments"] = std::move(segs);
    if (s.periodic()) out["period"] = s.period();
    return out;
}

inline json scenario_to_json(const Scenario& sc) {
    json out = schedule_to_json(sc.schedule);
    if (!sc.labels.empty()) out["labels"] = sc.labels;
    if (sc.x0) out["x0"] = *sc.x0;
    out["protocol"] = to_string(sc.protocol);
    if (!sc.nonlinearity_json.is_null()) out["nonlinearity"] = sc.nonlinearity_json;
    if (!sc.gain_json.is_null()) out["gain"] = sc.gain_json;
    if (sc.step || sc.t_end) {
        json ij;
        if (sc.step) ij["step"] = *sc.step;
        if (sc.t_end) ij["t_end"] = *sc.t_end;
        out["integrator"] = std::move(ij);
    }
    if (sc.tol || sc.tail_fraction) {
        json cj;
        if (sc.tol) cj["tol"] = *sc.tol;
        if (sc.tail_fraction) cj["tail_fraction"] = *sc.tail_fraction;
        out["classifier"] = std::move(cj);
    }
    return out;
}

inline std::uint64_t scenario_hash(const Scenario& sc) {
    return detail::fnv1a(scenario_to_json(sc).dump());
}

inline Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ScenarioError("parse error in '" + path + "': " + e.what());
    }
    std::string stem = path;
    if (const auto slash = stem.find_last_of('/'); slash != std::string::npos)
        stem = stem.substr(slash + 1);
    if (const auto dot = stem.find_last_of('.'); dot != std::string::npos) stem = stem.substr(0, dot);
    return scenario_from_json(j, stem);
}

// ---------------------------------------------------------------------------
// built-in scenarios

/// Three agents, two of them mutually antagonistic and both observed by the
/// third; a QSC graph whose only balanced in-isolated subgraph is {1,2}.
inline Scenario builtin_example1(double a31 = 1.0, double a32 = 1.0) {
    SignedMatrix a(3);
    a.set(0, 1, -1.0);
    a.set(1, 0, -1.0);
    a.set(2, 0, a31);
    a.set(2, 1, a32);
    Scenario sc(Schedule::constant(std::move(a)));
    sc.name = "example1";
    sc.x0 = std::vector<double>{1.0, -1.0, 0.3};
    sc.t_end = 30.0;
    return sc;
}

/// Periodically switching third-agent attention. T0 = ln 3: with
/// x = (1, -1, -1/2) and only the (3<-1) arc active, x3 follows
/// x3(t) = 1 - (3/2) e^{-t} and first reaches 1/2 at t = ln 3; alternating
/// the active arc every T0 makes the solution 2*T0-periodic.
inline Scenario builtin_example2() {
    const double t0 = std::log(3.0);
    SignedMatrix m1(3), m2(3);
    for (SignedMatrix* m : {&m1, &m2}) {
        m->set(0, 1, -1.0);
        m->set(1, 0, -1.0);
    }
    m1.set(2, 0, 1.0);
    m2.set(2, 1, 1.0);
    Scenario sc(Schedule::make({Segment{0.0, t0, std::move(m1)}, Segment{t0, 2.0 * t0, std::move(m2)}},
                               2.0 * t0));
    sc.name = "example2";
    sc.x0 = std::vector<double>{1.0, -1.0, -0.5};
    sc.t_end = 100.0;
    return sc;
}

inline std::vector<std::string> builtin_names() { return {"example1", "example2"}; }

inline std::optional<Scenario> builtin_scenario(const std::string& name) {
    if (name == "example1") return builtin_example1();
    if (name == "example2") return builtin_example2();
    return std::nullopt;
}

/// Builtin name or a path to a scenario JSON file.
inline Scenario resolve_scenario(const std::string& ref) {
    if (auto b = builtin_scenario(ref)) return *b;
    return load_scenario_file(ref);
}

/// Default simulation horizon: 50 over the slowest stable mode of the static
/// spectrum when available, else 100.
inline double default_horizon(const Scenario& sc) {
    if (sc.t_end) return *sc.t_end;
    if (sc.protocol == Protocol::Linear && sc.schedule.is_constant()) {
        const HurwitzResult h = is_hurwitz(sc.schedule.segments().front().matrix);
        double lambda = 0.0;
        for (const auto& ev : h.spectrum) {
            const double re = -ev.real();  // spectrum holds eigenvalues of -L
            if (re > kHurwitzTol && (lambda == 0.0 || re < lambda)) lambda = re;
        }
        if (lambda > 0.0) return std::clamp(50.0 / lambda, 10.0, 600.0);
    }
    return 100.0;
}

// ---------------------------------------------------------------------------
// trajectory export

inline std::string trajectory_csv(const Trajectory& traj) {
    std::ostringstream out;
    out << 't';
    for (int j = 1; j <= traj.n(); ++j) out << ",x" << j;
    out << '\n';
    for (size_t i = 0; i < traj.size(); ++i) {
        out << detail::fmt17(traj.time(i));
        const auto x = traj.state(i);
        for (int j = 0; j < traj.n(); ++j) out << ',' << detail::fmt17(x[j]);
        out << '\n';
    }
    return out.str();
}

inline json trajectory_json(const Trajectory& traj) {
    json out;
    out["n"] = traj.n();
    out["meta"] = {{"protocol", traj.meta.protocol},
                   {"step", traj.meta.step},
                   {"t_end", traj.meta.t_end},
                   {"scenario_hash", traj.meta.scenario_hash}};
    out["times"] = traj.times();
    json states = json::array();
    for (size_t i = 0; i < traj.size(); ++i) {
        const auto x = traj.state(i);
        states.push_back(std::vector<double>(x.begin(), x.end()));
    }
    out["states"] = std::move(states);
    return out;
}

// ---------------------------------------------------------------------------
// reports

inline json outcome_to_json(const Outcome& o) {
    json out;
    out["kind"] = to_string(o.kind);
    out["x_star"] = o.x_star ? json(*o.x_star) : json(nullptr);
    if (o.rho) {
        out["rho"] = *o.rho;
        const auto [c1, c2] = o.camps();
        out["camps"] = json::array({detail::ints_1based(c1), detail::ints_1based(c2)});
    } else {
        out["rho"] = nullptr;
        out["camps"] = nullptr;
    }
    out["diagnostics"] = {{"tail_drift", o.diagnostics.tail_drift},
                          {"tail_spread", o.diagnostics.tail_spread},
                          {"band_delta", o.diagnostics.band_delta}};
    if (!o.note.empty()) out["note"] = o.note;
    return out;
}

inline json static_report_json(const SignedMatrix& a, const StaticPrediction& p,
                               const HurwitzResult& spectrum) {
    json out;
    const SccDecomposition scc = strongly_connected_components(a);
    json comps = json::array();
    for (const auto& c : scc.components) comps.push_back(detail::ints_1based(c));
    out["scc"] = std::move(comps);
    const QscResult qsc = is_quasi_strongly_connected(a);
    out["qsc"] = qsc.qsc;
    out["roots"] = detail::ints_1based(qsc.roots);
    out["balanced"] = p.camps.has_value();
    out["camps"] = p.camps ? detail::camps_json(*p.camps) : json(nullptr);
    out["isb_witness"] = p.isb_witness ? detail::ints_1based(*p.isb_witness) : json(nullptr);
    json spec = json::array();
    for (const auto& ev : spectrum.spectrum) spec.push_back(json::array({ev.real(), ev.imag()}));
    out["spectrum"] = std::move(spec);
    out["hurwitz"] = spectrum.hurwitz;
    out["prediction"] = outcome_to_json(outcome_from_static(p));
    if (p.v) out["v"] = *p.v;
    return out;
}

inline json analysis_report_json(const Scenario& sc, const ScheduleAnalysis& an) {
    json out;
    out["scenario"] = sc.name;
    out["n"] = sc.schedule.n();
    if (!sc.labels.empty()) out["labels"] = sc.labels;

    if (an.static_prediction && an.spectrum)
        out["static"] = static_report_json(sc.schedule.segments().front().matrix,
                                           *an.static_prediction, *an.spectrum);

    json segs = json::array();
    for (size_t i = 0; i < sc.schedule.segments().size(); ++i) {
        const Segment& seg = sc.schedule.segments()[i];
        const BalanceResult& bal = an.segment_balance[i];
        json sj{{"t_start", seg.t_start}, {"t_end", seg.t_end}, {"balanced", bal.balanced}};
        if (bal.balanced) sj["camps"] = detail::camps_json(bal.camps);
        segs.push_back(std::move(sj));
    }
    out["segments"] = std::move(segs);

    out["window"] = {{"T", an.window_T}, {"epsilon", an.window_epsilon}};
    out["usc"] = an.connectivity.usc.holds;
    out["usc_failure_t"] = an.connectivity.usc.first_failure_t
                               ? json(*an.connectivity.usc.first_failure_t)
                               : json(nullptr);
    out["uqsc"] = an.connectivity.uqsc.holds;
    out["esc"] = an.connectivity.esc;
    out["eqsc"] = an.connectivity.eqsc;
    out["cut_balance_K"] =
        an.connectivity.cut_balance_K ? json(*an.connectivity.cut_balance_K) : json(nullptr);
    out["type_symmetry_K"] =
        an.connectivity.type_symmetry_K ? json(*an.connectivity.type_symmetry_K) : json(nullptr);

    json edges = json::array();
    for (const EssentialEdge& e : an.essential.edges)
        edges.push_back({{"j", e.j + 1}, {"k", e.k + 1}, {"coop", e.coop}, {"comp", e.comp}});
    out["essential_edges"] = std::move(edges);

    if (an.cut_prediction) {
        json comps = json::array();
        for (const ComponentPrediction& c : an.cut_prediction->components) {
            json cj{{"nodes", detail::ints_1based(c.nodes)}, {"prediction", to_string(c.kind)}};
            if (c.camps) cj["camps"] = detail::camps_json(*c.camps);
            comps.push_back(std::move(cj));
        }
        out["component_predictions"] = std::move(comps);
    } else {
        out["component_predictions"] = nullptr;
    }
    out["prediction"] = outcome_to_json(an.predicted);
    return out;
}

inline json reconciliation_json(const Reconciliation& rec) {
    return {{"predicted", outcome_to_json(rec.predicted)},
            {"observed", outcome_to_json(rec.observed)},
            {"verdict", to_string(rec.verdict)},
            {"notes", rec.notes}};
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
}

}  // namespace signedflow
