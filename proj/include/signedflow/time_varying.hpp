#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "signedflow/errors.hpp"
#include "signedflow/outcome.hpp"
#include "signedflow/schedule.hpp"
#include "signedflow/topology.hpp"

namespace signedflow {

inline constexpr int kMaxCutBalanceNodes = 20;
/// One-period integral above this counts as a divergent essential interaction
/// (exact for piecewise-constant periodic signals up to roundoff).
inline constexpr double kEssentialTol = 1e-12;

// ---------------------------------------------------------------------------
// uniform connectivity window checks

struct WindowCheck {
    bool holds = false;
    double T = 0.0;
    double epsilon = 0.0;
    std::optional<double> first_failure_t;
};

namespace detail {

/// Prefix integrals of abs A(t), evaluated in O(n^2 + log #segments) per
/// query so window checks stay cheap on long recorded gain traces.
class WindowAccumulator {
public:
    explicit WindowAccumulator(const Schedule& s) : s_(&s), n_(s.n()) {
        const auto& segs = s.segments();
        prefix_.assign(segs.size() + 1, std::vector<double>(n_ * n_, 0.0));
        for (size_t i = 0; i < segs.size(); ++i) {
            const double len = segs[i].t_end - segs[i].t_start;
            for (int j = 0; j < n_; ++j)
                for (int k = 0; k < n_; ++k)
                    prefix_[i + 1][j * n_ + k] =
                        prefix_[i][j * n_ + k] + std::abs(segs[i].matrix(j, k)) * len;
        }
    }

    /// Entry-wise integral of abs A over [0, t].
    std::vector<double> integral_to(double t) const {
        const auto& segs = s_->segments();
        std::vector<double> out(n_ * n_, 0.0);
        double cycles = 0.0, tau = t;
        if (s_->periodic()) {
            const double p = s_->period();
            cycles = std::floor(t / p);
            tau = t - cycles * p;
            if (tau < 0.0) { tau += p; cycles -= 1.0; }
        } else if (t > s_->horizon()) {
            tau = s_->horizon();
            const SignedMatrix& last = segs.back().matrix;
            for (int j = 0; j < n_; ++j)
                for (int k = 0; k < n_; ++k)
                    out[j * n_ + k] += std::abs(last(j, k)) * (t - s_->horizon());
        }
        const size_t idx = segment_index(tau);
        const double partial = tau - segs[idx].t_start;
        const SignedMatrix& m = segs[idx].matrix;
        for (int j = 0; j < n_; ++j)
            for (int k = 0; k < n_; ++k)
                out[j * n_ + k] += cycles * prefix_.back()[j * n_ + k] +
                                   prefix_[idx][j * n_ + k] + std::abs(m(j, k)) * partial;
        return out;
    }

    SignedMatrix window(double t, double T) const {
        const std::vector<double> hi = integral_to(t + T), lo = integral_to(t);
        SignedMatrix out(n_);
        for (int j = 0; j < n_; ++j)
            for (int k = 0; k < n_; ++k)
                out.set(j, k, std::max(0.0, hi[j * n_ + k] - lo[j * n_ + k]));
        return out;
    }

private:
    size_t segment_index(double tau) const {
        const auto& segs = s_->segments();
        size_t lo = 0, hi = segs.size() - 1;
        while (lo < hi) {
            const size_t mid = (lo + hi) / 2;
            if (tau < segs[mid].t_end) hi = mid; else lo = mid + 1;
        }
        return lo;
    }

    const Schedule* s_;
    int n_;
    std::vector<std::vector<double>> prefix_;
};

inline bool skeleton_connected(const SignedMatrix& w, double eps, bool strong) {
    const SignedMatrix sk = epsilon_skeleton(w, eps);
    return strong ? strongly_connected_components(sk).strongly_connected()
                  : is_quasi_strongly_connected(sk).qsc;
}

/// Exact sampled check: the window integral W(t) is piecewise affine in t with
/// breakpoints where t or t+T crosses a segment boundary; adding the epsilon
/// crossing times of every entry makes the skeleton edge set constant between
/// consecutive sample points, so testing midpoints decides every t.
inline WindowCheck check_uniform(const Schedule& s, double T, double eps, double grid_step,
                                 bool strong) {
    if (!(T > 0.0)) throw std::invalid_argument("window check: T must be > 0");
    if (!(eps > 0.0)) throw std::invalid_argument("window check: epsilon must be > 0");
    if (grid_step < 0.0) throw std::invalid_argument("window check: grid step must be >= 0");

    WindowCheck out{true, T, eps, {}};
    const WindowAccumulator acc(s);
    const double range = s.periodic() ? s.period() : s.horizon();
    const double merge = 1e-12 * std::max(1.0, range + T);

    std::vector<double> pts{0.0, range};
    auto push = [&](double t) {
        if (t > merge && t < range - merge) pts.push_back(t);
    };
    if (s.periodic()) {
        const double p = s.period();
        for (double b : s.cycle_boundaries()) {
            push(b);
            // shifts of every repeated boundary b + m p - T that land in [0, p]
            const double base = b - T;
            for (double m = std::ceil(-base / p) - 1.0; base + m * p <= p + merge; m += 1.0)
                push(base + m * p);
        }
    } else {
        for (double b : s.cycle_boundaries()) {
            push(b);
            push(b - T);
        }
    }
    if (grid_step > 0.0)
        for (double t = grid_step; t < range; t += grid_step) push(t);
    std::sort(pts.begin(), pts.end());
    size_t kept = 1;
    for (size_t i = 1; i < pts.size(); ++i)
        if (pts[i] - pts[kept - 1] > merge) pts[kept++] = pts[i];
    pts.resize(kept);

    auto fail_at = [&](double t) {
        out.holds = false;
        out.first_failure_t = t;
    };

    const int n = s.n();
    for (size_t i = 0; i + 1 < pts.size() && out.holds; ++i) {
        const double u = pts[i], v = pts[i + 1];
        const SignedMatrix wu = acc.window(u, T), wv = acc.window(v, T);
        std::vector<double> sub{u, v};
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const double fu = wu(j, k) - eps, fv = wv(j, k) - eps;
                if ((fu < 0.0) != (fv < 0.0) && fu != fv)
                    sub.push_back(u + (v - u) * (-fu) / (fv - fu));
            }
        std::sort(sub.begin(), sub.end());
        for (size_t m = 0; m + 1 < sub.size() && out.holds; ++m) {
            const double mid = 0.5 * (sub[m] + sub[m + 1]);
            if (!skeleton_connected(acc.window(mid, T), eps, strong)) fail_at(mid);
        }
    }
    // held tail of a non-periodic schedule: W is constant for t >= horizon
    if (out.holds && !s.periodic() && !skeleton_connected(acc.window(range, T), eps, strong))
        fail_at(range);
    return out;
}

}  // namespace detail

inline WindowCheck check_usc(const Schedule& s, double T, double eps, double grid_step = 0.0) {
    return detail::check_uniform(s, T, eps, grid_step, /*strong=*/true);
}

inline WindowCheck check_uqsc(const Schedule& s, double T, double eps, double grid_step = 0.0) {
    return detail::check_uniform(s, T, eps, grid_step, /*strong=*/false);
}

/// Canonical window parameters under which the USC/UQSC checks are decisive
/// for piecewise-constant schedules: T = one period (the window integral is
/// then t-independent) or horizon + 1 for held-tail schedules, with epsilon
/// at half the smallest guaranteed window occupancy of a surviving arc.
inline std::pair<double, double> default_window(const Schedule& s) {
    if (s.periodic()) {
        const double T = s.period();
        const double mn = s.window_integral(0.0, T).min_nonzero_abs();
        return {T, mn > 0.0 ? 0.5 * mn : 1.0};
    }
    const double T = s.horizon() + 1.0;
    const double mn = s.segments().back().matrix.min_nonzero_abs();
    return {T, mn > 0.0 ? 0.5 * mn : 1.0};
}

// ---------------------------------------------------------------------------
// cut balance and type symmetry

/// Smallest K >= 1 bounding the two cross-partition flows against each other
/// for every segment and every nontrivial node partition, or nullopt when
/// some partition has strictly one-sided flow. Subsets containing node 1 are
/// enumerated in Gray-code order with O(n) flow updates per step; support
/// counts are tracked in exact integer arithmetic so that one-sidedness never
/// depends on float cancellation.
inline std::optional<double> cut_balance_constant(const Schedule& s) {
    const int n = s.n();
    if (n > kMaxCutBalanceNodes)
        throw CapExceeded("cut_balance_constant: n = " + std::to_string(n) + " exceeds the cap of " +
                          std::to_string(kMaxCutBalanceNodes));
    double K = 1.0;
    const uint32_t subsets = 1u << (n - 1);
    std::vector<char> side(n);
    for (const Segment& seg : s.segments()) {
        const SignedMatrix& a = seg.matrix;
        std::fill(side.begin(), side.end(), 0);
        side[0] = 1;
        double f_in = 0.0, f_out = 0.0;  // cross flows: j in V' listening to k outside, and back
        long c_in = 0, c_out = 0;
        for (int k = 1; k < n; ++k) {
            f_in += std::abs(a(0, k));
            c_in += a(0, k) != 0.0;
            f_out += std::abs(a(k, 0));
            c_out += a(k, 0) != 0.0;
        }

        uint32_t gray = 0;
        for (uint32_t i = 0;; ++i) {
            const bool full = gray + 1 == subsets;
            if (!full) {
                if ((c_in == 0) != (c_out == 0)) return std::nullopt;
                if (c_in > 0) K = std::max({K, f_in / f_out, f_out / f_in});
            }
            if (i + 1 == subsets) break;

            const int v = 1 + std::countr_zero(i + 1);
            gray ^= 1u << (v - 1);
            for (int u = 0; u < n; ++u) {
                if (u == v) continue;
                // same side before the flip: the pair becomes cross, otherwise
                // it stops being cross; the V' member of the cross pair is
                // whichever node has side 1, and u never changes sides here.
                const double sgn_update = side[u] == side[v] ? 1.0 : -1.0;
                const long cnt_update = side[u] == side[v] ? 1 : -1;
                const double a_vprime_out = side[u] ? a(u, v) : a(v, u);
                const double a_vprime_in = side[u] ? a(v, u) : a(u, v);
                f_in += sgn_update * std::abs(a_vprime_out);
                c_in += cnt_update * (a_vprime_out != 0.0);
                f_out += sgn_update * std::abs(a_vprime_in);
                c_out += cnt_update * (a_vprime_in != 0.0);
            }
            side[v] = !side[v];
        }
    }
    return K;
}

/// Smallest K >= 1 with K^-1 |a_kj(t)| <= |a_jk(t)| <= K |a_kj(t)| for all
/// pairs and times; nullopt if a pair is ever one-sided.
inline std::optional<double> type_symmetry_constant(const Schedule& s) {
    double K = 1.0;
    for (const Segment& seg : s.segments()) {
        const SignedMatrix& a = seg.matrix;
        for (int j = 0; j < s.n(); ++j)
            for (int k = j + 1; k < s.n(); ++k) {
                const double x = std::abs(a(j, k)), y = std::abs(a(k, j));
                if (x == 0.0 && y == 0.0) continue;
                if (x == 0.0 || y == 0.0) return std::nullopt;
                K = std::max({K, x / y, y / x});
            }
    }
    return K;
}

// ---------------------------------------------------------------------------
// essential interactions

struct EssentialEdge {
    int j, k;    // j listens to k
    bool coop;   // positive part diverges
    bool comp;   // negative part diverges
};

struct EssentialGraph {
    int n = 0;
    std::vector<EssentialEdge> edges;
    SignedMatrix support;  // 1 where an essential edge exists
    SccDecomposition scc;

    EssentialGraph(int nn, std::vector<EssentialEdge> e)
        : n(nn), edges(std::move(e)), support(nn) {
        for (const EssentialEdge& ed : edges) support.set(ed.j, ed.k, 1.0);
        scc = strongly_connected_components(support);
    }
};

/// The pair (j, k) interacts essentially when |a_jk| has a divergent integral:
/// a positive one-period integral (periodic case) or a nonzero held final
/// matrix entry (non-periodic case); split into cooperation/competition by
/// the positive/negative parts.
inline EssentialGraph essential_graph(const Schedule& s) {
    const int n = s.n();
    std::vector<EssentialEdge> edges;
    if (s.periodic()) {
        std::vector<double> pos(n * n, 0.0), neg(n * n, 0.0);
        for (const Segment& seg : s.segments()) {
            const double len = seg.t_end - seg.t_start;
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    const double w = seg.matrix(j, k);
                    if (w > 0.0) pos[j * n + k] += w * len;
                    if (w < 0.0) neg[j * n + k] -= w * len;
                }
        }
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const bool coop = pos[j * n + k] > kEssentialTol;
                const bool comp = neg[j * n + k] > kEssentialTol;
                if (coop || comp) edges.push_back({j, k, coop, comp});
            }
    } else {
        const SignedMatrix& last = s.segments().back().matrix;
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                if (last(j, k) != 0.0) edges.push_back({j, k, last(j, k) > 0.0, last(j, k) < 0.0});
    }
    return EssentialGraph(n, std::move(edges));
}

// ---------------------------------------------------------------------------
// predictors

struct ComponentPrediction {
    std::vector<int> nodes;
    OutcomeKind kind = OutcomeKind::Inconclusive;  // Consensus | Polarization | Stabilizing
    std::optional<CampPartition> camps;
};

struct CutBalancedPrediction {
    double K = 1.0;
    std::vector<ComponentPrediction> components;
    Outcome global;
};

/// Per-SCC outcome of the essential graph under cut balance: a component with
/// disjoint cooperation/competition sets and a balanced unit-signed graph
/// reaches bipartite consensus (consensus when nobody essentially competes),
/// anything else decays to zero. Globally, one strongly connected component
/// means modulus consensus of the predicted type; all-zero components mean a
/// stabilizing protocol; any other combination denies modulus consensus.
inline CutBalancedPrediction predict_cut_balanced(const Schedule& s) {
    const std::optional<double> K = cut_balance_constant(s);
    if (!K)
        throw std::invalid_argument("predict_cut_balanced: schedule is not cut-balanced");
    CutBalancedPrediction out;
    out.K = *K;
    const EssentialGraph g = essential_graph(s);

    for (const auto& nodes : g.scc.components) {
        ComponentPrediction cp;
        cp.nodes = nodes;
        std::vector<int> local(g.n, -1);
        for (size_t i = 0; i < nodes.size(); ++i) local[nodes[i]] = static_cast<int>(i);

        bool mixed = false, any_comp = false;
        std::vector<EssentialEdge> inside;
        for (const EssentialEdge& e : g.edges)
            if (local[e.j] >= 0 && local[e.k] >= 0) {
                mixed |= e.coop && e.comp;
                any_comp |= e.comp;
                inside.push_back(e);
            }

        if (mixed) {
            cp.kind = OutcomeKind::Stabilizing;
        } else if (nodes.size() == 1) {
            cp.kind = OutcomeKind::Consensus;  // an isolated opinion trivially agrees with itself
            cp.camps = CampPartition{{nodes[0]}, {}};
        } else {
            SignedMatrix unit(static_cast<int>(nodes.size()));
            for (const EssentialEdge& e : inside)
                unit.set(local[e.j], local[e.k], e.coop ? 1.0 : -1.0);
            const BalanceResult bal = hostile_camps(unit);
            if (!bal.balanced) {
                cp.kind = OutcomeKind::Stabilizing;
            } else {
                cp.kind = any_comp ? OutcomeKind::Polarization : OutcomeKind::Consensus;
                CampPartition camps;
                for (int i : bal.camps.camp1) camps.camp1.push_back(nodes[i]);
                for (int i : bal.camps.camp2) camps.camp2.push_back(nodes[i]);
                cp.camps = camps;
            }
        }
        out.components.push_back(std::move(cp));
    }

    const bool all_zero = std::all_of(out.components.begin(), out.components.end(),
                                      [](const auto& c) { return c.kind == OutcomeKind::Stabilizing; });
    if (all_zero) {
        out.global.kind = OutcomeKind::Stabilizing;
        out.global.x_star = 0.0;
    } else if (out.components.size() == 1) {
        const ComponentPrediction& c = out.components.front();
        out.global.kind = c.kind;
        if (c.camps) {
            CampPartition camps = *c.camps;
            out.global.rho = rho_from_camps(camps, g.n);
        }
    } else {
        out.global.kind = OutcomeKind::NoModulusConsensus;
    }
    return out;
}

/// Sufficient-condition predictor for general schedules: a time-invariant camp
/// division plus UQSC settles the bipartite type; USC with bounded weights
/// gives modulus consensus of unresolved type; otherwise inconclusive.
inline Outcome predict_usc(const Schedule& s, double T, double eps) {
    const int n = s.n();
    SignedMatrix pooled(n);
    bool conflict = false;
    for (const Segment& seg : s.segments()) {
        for (int j = 0; j < n && !conflict; ++j)
            for (int k = 0; k < n; ++k) {
                const double w = seg.matrix(j, k);
                if (w == 0.0) continue;
                const double sgn = sign_of(w);
                if (pooled(j, k) == 0.0) pooled.set(j, k, sgn);
                else if (pooled(j, k) != sgn) { conflict = true; break; }
            }
        if (conflict) break;
    }

    Outcome out;
    if (!conflict) {
        const BalanceResult camps = hostile_camps(pooled);
        if (camps.balanced && check_uqsc(s, T, eps).holds) {
            out.kind = camps.camps.camp2.empty() ? OutcomeKind::Consensus : OutcomeKind::Polarization;
            out.rho = rho_from_camps(camps.camps, n);
            out.note = "fixed hostile camps + UQSC";
            return out;
        }
    }
    if (s.max_abs() <= kWeightCap && check_usc(s, T, eps).holds) {
        out.kind = OutcomeKind::ModulusConsensus;
        out.note = "USC with bounded weights; type unresolved";
        return out;
    }
    out.kind = OutcomeKind::Inconclusive;
    return out;
}

// ---------------------------------------------------------------------------
// combined analysis

struct ConnectivityReport {
    WindowCheck usc, uqsc;
    bool esc = false, eqsc = false;
    std::optional<double> cut_balance_K, type_symmetry_K;
};

struct ScheduleAnalysis {
    ConnectivityReport connectivity;
    EssentialGraph essential;
    std::vector<BalanceResult> segment_balance;        // instantaneous, per segment
    std::optional<StaticPrediction> static_prediction; // constant schedules
    std::optional<HurwitzResult> spectrum;             // constant schedules
    std::optional<CutBalancedPrediction> cut_prediction;
    Outcome predicted;  // overall: static > cut-balanced > USC predictor
    double window_T = 0.0, window_epsilon = 0.0;
};

inline Outcome outcome_from_static(const StaticPrediction& p) {
    Outcome out;
    out.kind = p.kind;
    out.rho = p.rho;
    if (p.kind == OutcomeKind::Stabilizing) out.x_star = 0.0;
    return out;
}

inline ScheduleAnalysis analyze(const Schedule& s, std::optional<double> T = {},
                                std::optional<double> eps = {}) {
    const auto [t_default, eps_default] = default_window(s);
    const double Tw = T.value_or(t_default), ew = eps.value_or(eps_default);

    ScheduleAnalysis out{.connectivity = {}, .essential = essential_graph(s)};
    out.window_T = Tw;
    out.window_epsilon = ew;
    out.connectivity.usc = check_usc(s, Tw, ew);
    out.connectivity.uqsc = check_uqsc(s, Tw, ew);
    out.connectivity.esc = out.essential.scc.strongly_connected();
    out.connectivity.eqsc = is_quasi_strongly_connected(out.essential.support).qsc;
    out.connectivity.cut_balance_K = cut_balance_constant(s);
    out.connectivity.type_symmetry_K = type_symmetry_constant(s);

    // theorem-level implications; a violation is an internal inconsistency
    const ConnectivityReport& c = out.connectivity;
    auto internal_check = [](bool ok, const char* what) {
        if (!ok) throw std::logic_error(std::string("connectivity invariant violated: ") + what);
    };
    internal_check(!c.usc.holds || c.uqsc.holds, "USC => UQSC");
    internal_check(!c.usc.holds || c.esc, "USC => ESC");
    internal_check(!c.uqsc.holds || c.eqsc, "UQSC => EQSC");
    internal_check(!c.esc || c.eqsc, "ESC => EQSC");
    if (c.cut_balance_K) internal_check(!c.eqsc || c.esc, "cut balance: EQSC => ESC");
    if (c.type_symmetry_K) {
        internal_check(c.cut_balance_K.has_value(), "type symmetry => cut balance");
        internal_check(*c.cut_balance_K <= *c.type_symmetry_K + 1e-12,
                       "cut-balance K bounded by type-symmetry K");
    }

    for (const Segment& seg : s.segments())
        out.segment_balance.push_back(hostile_camps(seg.matrix));

    if (c.cut_balance_K) out.cut_prediction = predict_cut_balanced(s);
    if (s.is_constant()) {
        out.static_prediction = static_predict(s.segments().front().matrix);
        out.spectrum = is_hurwitz(s.segments().front().matrix);
        out.predicted = outcome_from_static(*out.static_prediction);
    } else if (out.cut_prediction) {
        out.predicted = out.cut_prediction->global;
    } else {
        out.predicted = predict_usc(s, Tw, ew);
    }
    return out;
}

}  // namespace signedflow
