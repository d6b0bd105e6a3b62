#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "signedflow/dynamics.hpp"
#include "signedflow/outcome.hpp"
#include "signedflow/topology.hpp"

namespace signedflow {

namespace detail {

inline double lsq_slope(const std::vector<double>& t, const std::vector<double>& y) {
    const size_t m = t.size();
    double tm = 0.0, ym = 0.0;
    for (size_t i = 0; i < m; ++i) { tm += t[i]; ym += y[i]; }
    tm /= m; ym /= m;
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < m; ++i) {
        num += (t[i] - tm) * (y[i] - ym);
        den += (t[i] - tm) * (t[i] - tm);
    }
    return den > 0.0 ? num / den : 0.0;
}

}  // namespace detail

/// Decide the outcome from the trailing tail_fraction of a trajectory.
///
/// Settled common moduli (tail spread and per-agent least-squares drift below
/// tol) mean modulus consensus, refined by the limit level and the tail sign
/// pattern. Otherwise the spread band between the two tail halves is
/// compared: a band that neither moves nor collapses is a persistent
/// disagreement of moduli (settled distinct limits or a bounded oscillation),
/// anything still moving stays inconclusive. The band comparison is used
/// instead of a least-squares slope because a periodic |x_i| has zero drift
/// in the limit yet its finite-window regression slope only decays like
/// 1/window; the half-band positions are phase-insensitive.
inline Outcome classify(const Trajectory& traj, double tol = 1e-6, double tail_fraction = 0.2) {
    if (!(tol > 0.0)) throw std::invalid_argument("classify: tol must be > 0");
    if (!(tail_fraction > 0.0 && tail_fraction < 1.0))
        throw std::invalid_argument("classify: tail_fraction must be in (0,1)");
    const size_t m = traj.size();
    const size_t tail = static_cast<size_t>(std::ceil(tail_fraction * static_cast<double>(m)));
    if (tail < 100)
        throw std::invalid_argument("classify: trajectory too short, tail window has " +
                                    std::to_string(tail) + " samples (needs >= 100)");
    const size_t start = m - tail;
    const int n = traj.n();

    std::vector<double> times(tail), spread(tail);
    std::vector<std::vector<double>> mod(n, std::vector<double>(tail));
    for (size_t i = 0; i < tail; ++i) {
        times[i] = traj.time(start + i);
        const auto x = traj.state(start + i);
        double lo = std::abs(x[0]), hi = lo;
        for (int j = 0; j < n; ++j) {
            const double v = std::abs(x[j]);
            mod[j][i] = v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        spread[i] = hi - lo;
    }

    double drift = 0.0;
    for (int j = 0; j < n; ++j) drift = std::max(drift, std::abs(detail::lsq_slope(times, mod[j])));
    const double spread_max = *std::max_element(spread.begin(), spread.end());

    Outcome out;
    out.diagnostics.tail_drift = drift;
    out.diagnostics.tail_spread = spread_max;

    if (spread_max < tol && drift < tol) {
        double level = 0.0;
        for (int j = 0; j < n; ++j)
            for (size_t i = 0; i < tail; ++i) level += mod[j][i];
        level /= static_cast<double>(n) * tail;
        if (level < tol) {
            out.kind = OutcomeKind::Stabilizing;
            out.x_star = 0.0;
            return out;
        }
        out.x_star = level;
        std::vector<int> rho(n);
        bool stable = true;
        for (int j = 0; j < n && stable; ++j) {
            const double s = sign_of(traj.state(m - 1)[j]);
            stable = s != 0.0;
            for (size_t i = 0; i < tail && stable; ++i)
                stable = traj.state(start + i)[j] * s > 0.0;
            rho[j] = static_cast<int>(s);
        }
        if (!stable) {
            out.kind = OutcomeKind::ModulusConsensus;
            return out;
        }
        out.rho = rho;
        const bool all_equal = std::all_of(rho.begin(), rho.end(), [&](int r) { return r == rho[0]; });
        out.kind = all_equal ? OutcomeKind::Consensus : OutcomeKind::Polarization;
        return out;
    }

    const size_t half = tail / 2;
    auto band = [&](size_t lo, size_t hi) {
        double mn = spread[lo], mx = spread[lo];
        for (size_t i = lo; i < hi; ++i) {
            mn = std::min(mn, spread[i]);
            mx = std::max(mx, spread[i]);
        }
        return std::pair{mn, mx};
    };
    const auto [amin, amax] = band(0, half);
    const auto [bmin, bmax] = band(half, tail);
    const double band_delta = std::max(std::abs(amin - bmin), std::abs(amax - bmax));
    out.diagnostics.band_delta = band_delta;

    const double band_tol = std::max(tol, 1e-3 * spread_max);
    if (band_delta < band_tol && bmax >= tol) {
        out.kind = OutcomeKind::NoModulusConsensus;
        return out;
    }
    out.kind = OutcomeKind::Inconclusive;
    return out;
}

// ---------------------------------------------------------------------------
// static limit structure

struct LimitFunctional {
    enum class Status { Bipartite, Stabilizing, NoModulusConsensus };
    Status status = Status::NoModulusConsensus;
    std::vector<int> rho;    // bipartite case
    std::vector<double> v;   // left eigenvector at 0, v^T rho = 1
};

/// For a constant matrix in the bipartite regime, the predicted limit of any
/// initial state x0 is rho (v^T x0).
inline LimitFunctional limit_functional(const SignedMatrix& a) {
    const StaticPrediction p = static_predict(a);
    LimitFunctional out;
    switch (p.kind) {
        case OutcomeKind::Consensus:
        case OutcomeKind::Polarization:
            out.status = LimitFunctional::Status::Bipartite;
            out.rho = *p.rho;
            out.v = *p.v;
            break;
        case OutcomeKind::Stabilizing:
            out.status = LimitFunctional::Status::Stabilizing;
            break;
        default:
            out.status = LimitFunctional::Status::NoModulusConsensus;
            break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// reconciliation

enum class Verdict { Agree, Refine, Conflict };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Agree: return "agree";
        case Verdict::Refine: return "refine";
        case Verdict::Conflict: return "conflict";
    }
    return "?";
}

struct Reconciliation {
    Outcome predicted, observed;
    Verdict verdict = Verdict::Conflict;
    std::string notes;
};

namespace detail {

inline bool rho_matches_up_to_flip(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    bool same = true, flipped = true;
    for (size_t i = 0; i < a.size(); ++i) {
        same &= a[i] == b[i];
        flipped &= a[i] == -b[i];
    }
    return same || flipped;
}

}  // namespace detail

/// Agree when the kinds match (bipartite sign patterns compared up to a
/// global flip, camps being unordered); refine when one side left the type
/// unresolved; conflict only for mutually exclusive kinds.
inline Reconciliation reconcile(const Outcome& predicted, const Outcome& observed) {
    Reconciliation rec{predicted, observed, Verdict::Conflict, ""};
    const OutcomeKind p = predicted.kind, o = observed.kind;

    if (p == o) {
        if (predicted.rho && observed.rho &&
            !detail::rho_matches_up_to_flip(*predicted.rho, *observed.rho)) {
            rec.notes = "kinds match but sign patterns differ beyond a global flip";
            return rec;
        }
        rec.verdict = Verdict::Agree;
        return rec;
    }
    if (p == OutcomeKind::Inconclusive || o == OutcomeKind::Inconclusive) {
        rec.verdict = Verdict::Refine;
        rec.notes = p == OutcomeKind::Inconclusive ? "prediction was inconclusive"
                                                   : "simulation did not settle";
        return rec;
    }
    if (p == OutcomeKind::ModulusConsensus && is_modulus_consensus(o)) {
        rec.verdict = Verdict::Refine;
        rec.notes = "modulus-consensus prediction refined to " + std::string(to_string(o));
        return rec;
    }
    if (o == OutcomeKind::ModulusConsensus &&
        (p == OutcomeKind::Consensus || p == OutcomeKind::Polarization)) {
        rec.verdict = Verdict::Refine;
        rec.notes = "observation left the consensus type unresolved";
        return rec;
    }
    // A bipartite protocol still sends the measure-zero initial states with
    // v^T x0 = 0 to zero; when the predicted limit level vanishes, a
    // stabilizing-looking run is the expected degenerate case, not a clash.
    if ((p == OutcomeKind::Consensus || p == OutcomeKind::Polarization) &&
        o == OutcomeKind::Stabilizing && predicted.x_star && *predicted.x_star < 1e-9) {
        rec.verdict = Verdict::Refine;
        rec.notes = "predicted limit level vanishes for this initial state";
        return rec;
    }
    rec.notes = std::string("predicted ") + to_string(p) + " but observed " + to_string(o);
    return rec;
}

}  // namespace signedflow
