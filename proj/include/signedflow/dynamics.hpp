#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "signedflow/errors.hpp"
#include "signedflow/schedule.hpp"
#include "signedflow/signed_matrix.hpp"

namespace signedflow {

/// Divided-difference switch to the derivative branch; avoids catastrophic
/// cancellation near the diagonal.
inline constexpr double kDividedDifferenceSwitch = 1e-8;

// ---------------------------------------------------------------------------
// gauge transformation

/// Element-wise conjugation a'_jk = d_j a_jk d_k by diagonal +-1 signs.
/// For the camp signs of a balanced matrix this turns A into abs A and
/// satisfies L[abs A] = D L[A] D exactly.
inline SignedMatrix gauge_transform(const std::vector<int>& d, const SignedMatrix& a) {
    if (static_cast<int>(d.size()) != a.n())
        throw std::invalid_argument("gauge_transform: sign vector length mismatch");
    for (int s : d)
        if (s != 1 && s != -1) throw std::invalid_argument("gauge_transform: signs must be +-1");
    SignedMatrix out(a.n());
    for (int j = 0; j < a.n(); ++j)
        for (int k = 0; k < a.n(); ++k) out.set(j, k, d[j] * a(j, k) * d[k]);
    return out;
}

inline Schedule gauge_transform(const std::vector<int>& d, const Schedule& s) {
    std::vector<Segment> segs;
    segs.reserve(s.segments().size());
    for (const Segment& seg : s.segments())
        segs.push_back({seg.t_start, seg.t_end, gauge_transform(d, seg.matrix)});
    return Schedule::make(std::move(segs),
                          s.periodic() ? std::optional<double>(s.period()) : std::nullopt);
}

// ---------------------------------------------------------------------------
// right-hand sides

namespace detail {

inline void eval_rhs_linear(const SignedMatrix& a, const double* x, double* dx) {
    const int n = a.n();
    for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) {
            const double w = a(j, k);
            if (w == 0.0) continue;
            acc += std::abs(w) * (x[k] * sign_of(w) - x[j]);
        }
        dx[j] = acc;
    }
}

}  // namespace detail

/// Componentwise protocol xdot_j = sum_k |a_jk| (x_k sgn a_jk - x_j);
/// algebraically equal to -L[A] x (cross-checked in debug builds).
inline std::vector<double> rhs_linear(const SignedMatrix& a, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != a.n())
        throw std::invalid_argument("rhs_linear: state length mismatch");
    std::vector<double> dx(x.size());
    detail::eval_rhs_linear(a, x.data(), dx.data());
#ifndef NDEBUG
    {
        const std::vector<double> lx = laplacian(a).apply(x);
        double scale = 1.0;
        for (double v : x) scale = std::max(scale, std::abs(v));
        for (size_t i = 0; i < dx.size(); ++i)
            assert(std::abs(dx[i] + lx[i]) <= 1e-9 * scale * std::max(1.0, a.inf_norm()));
    }
#endif
    return dx;
}

// ---------------------------------------------------------------------------
// nonlinearities (Assumption: h strictly increasing, C^1, h(0) = 0)

class Nonlinearity {
public:
    struct Impl {
        virtual ~Impl() = default;
        virtual double value(double x) const = 0;
        virtual double deriv(double x) const = 0;
        virtual std::string describe() const = 0;
    };

    double value(double x) const { return p_->value(x); }
    double deriv(double x) const { return p_->deriv(x); }
    std::string describe() const { return p_->describe(); }

    static Nonlinearity identity();
    static Nonlinearity atan_plus_linear(double alpha);   // x + alpha atan x, alpha > -1
    static Nonlinearity cubic_plus_linear(double beta);   // x + beta x^3, beta >= 0
    static Nonlinearity tabulated_spline(std::vector<double> xs, std::vector<double> ys);

private:
    explicit Nonlinearity(std::shared_ptr<const Impl> p) : p_(std::move(p)) {}

    /// Registration gate: h(0) = 0 and strict monotonicity with h' > 0,
    /// sampled on a fixed grid over [-10, 10].
    static Nonlinearity checked(std::shared_ptr<const Impl> p) {
        if (p->value(0.0) != 0.0)
            throw std::invalid_argument("nonlinearity " + p->describe() + ": h(0) must be 0");
        double prev = p->value(-10.0);
        for (int i = 1; i <= 400; ++i) {
            const double x = -10.0 + i * 0.05;
            const double v = p->value(x);
            if (!(v > prev) || !(p->deriv(x) > 0.0))
                throw std::invalid_argument("nonlinearity " + p->describe() +
                                            ": not strictly increasing near x=" + std::to_string(x));
            prev = v;
        }
        return Nonlinearity(std::move(p));
    }

    std::shared_ptr<const Impl> p_;
};

namespace detail {

struct IdentityFn final : Nonlinearity::Impl {
    double value(double x) const override { return x; }
    double deriv(double) const override { return 1.0; }
    std::string describe() const override { return "identity"; }
};

struct AtanPlusLinearFn final : Nonlinearity::Impl {
    double alpha;
    explicit AtanPlusLinearFn(double a) : alpha(a) {}
    double value(double x) const override { return x + alpha * std::atan(x); }
    double deriv(double x) const override { return 1.0 + alpha / (1.0 + x * x); }
    std::string describe() const override { return "atan(alpha=" + std::to_string(alpha) + ")"; }
};

struct CubicPlusLinearFn final : Nonlinearity::Impl {
    double beta;
    explicit CubicPlusLinearFn(double b) : beta(b) {}
    double value(double x) const override { return x + beta * x * x * x; }
    double deriv(double x) const override { return 1.0 + 3.0 * beta * x * x; }
    std::string describe() const override { return "cubic(beta=" + std::to_string(beta) + ")"; }
};

/// Monotone C^1 cubic interpolant (Fritsch-Carlson slopes), linearly extended
/// with the end slopes outside the table.
struct SplineFn final : Nonlinearity::Impl {
    std::vector<double> xs, ys, m;

    SplineFn(std::vector<double> x, std::vector<double> y) : xs(std::move(x)), ys(std::move(y)) {
        const size_t n = xs.size();
        if (n < 2 || ys.size() != n)
            throw std::invalid_argument("spline: need matching tables with >= 2 knots");
        for (size_t i = 1; i < n; ++i)
            if (!(xs[i] > xs[i - 1]) || !(ys[i] > ys[i - 1]))
                throw std::invalid_argument("spline: knots must be strictly increasing in x and y");
        bool origin = false;
        for (size_t i = 0; i < n; ++i) origin |= xs[i] == 0.0 && ys[i] == 0.0;
        if (!origin) throw std::invalid_argument("spline: a knot at the origin is required");

        std::vector<double> d(n - 1);
        for (size_t i = 0; i + 1 < n; ++i) d[i] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
        m.assign(n, 0.0);
        m.front() = d.front();
        m.back() = d.back();
        for (size_t i = 1; i + 1 < n; ++i) m[i] = 0.5 * (d[i - 1] + d[i]);
        for (size_t i = 0; i + 1 < n; ++i) {
            const double alpha = m[i] / d[i], beta = m[i + 1] / d[i];
            const double r = alpha * alpha + beta * beta;
            if (r > 9.0) {
                const double tau = 3.0 / std::sqrt(r);
                m[i] = tau * alpha * d[i];
                m[i + 1] = tau * beta * d[i];
            }
        }
    }

    size_t interval(double x) const {
        size_t lo = 0, hi = xs.size() - 1;
        while (hi - lo > 1) {
            const size_t mid = (lo + hi) / 2;
            (xs[mid] <= x ? lo : hi) = mid;
        }
        return lo;
    }

    double value(double x) const override {
        if (x <= xs.front()) return ys.front() + m.front() * (x - xs.front());
        if (x >= xs.back()) return ys.back() + m.back() * (x - xs.back());
        const size_t i = interval(x);
        const double h = xs[i + 1] - xs[i], t = (x - xs[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        return ys[i] * (2 * t3 - 3 * t2 + 1) + h * m[i] * (t3 - 2 * t2 + t) +
               ys[i + 1] * (-2 * t3 + 3 * t2) + h * m[i + 1] * (t3 - t2);
    }

    double deriv(double x) const override {
        if (x <= xs.front()) return m.front();
        if (x >= xs.back()) return m.back();
        const size_t i = interval(x);
        const double h = xs[i + 1] - xs[i], t = (x - xs[i]) / h;
        return (ys[i] * (6 * t * t - 6 * t) + h * m[i] * (3 * t * t - 4 * t + 1) +
                ys[i + 1] * (-6 * t * t + 6 * t) + h * m[i + 1] * (3 * t * t - 2 * t)) / h;
    }

    std::string describe() const override {
        return "spline(" + std::to_string(xs.size()) + " knots)";
    }
};

}  // namespace detail

inline Nonlinearity Nonlinearity::identity() {
    return checked(std::make_shared<detail::IdentityFn>());
}
inline Nonlinearity Nonlinearity::atan_plus_linear(double alpha) {
    if (!(alpha > -1.0)) throw std::invalid_argument("atan_plus_linear: alpha must be > -1");
    return checked(std::make_shared<detail::AtanPlusLinearFn>(alpha));
}
inline Nonlinearity Nonlinearity::cubic_plus_linear(double beta) {
    if (!(beta >= 0.0)) throw std::invalid_argument("cubic_plus_linear: beta must be >= 0");
    return checked(std::make_shared<detail::CubicPlusLinearFn>(beta));
}
inline Nonlinearity Nonlinearity::tabulated_spline(std::vector<double> xs, std::vector<double> ys) {
    return checked(std::make_shared<detail::SplineFn>(std::move(xs), std::move(ys)));
}

/// H[y, z] = (h(y) - h(z)) / (y - z), continuously extended with h'(z) on the
/// diagonal. Positive for every (y, z) under the registration assumptions.
inline double divided_difference(const Nonlinearity& h, double y, double z) {
    if (std::abs(y - z) < kDividedDifferenceSwitch) return h.deriv(z);
    return (h.value(y) - h.value(z)) / (y - z);
}

/// Per-pair nonlinearity table: a default h with optional (i, j) overrides.
class NonlinearitySpec {
public:
    explicit NonlinearitySpec(Nonlinearity def) : default_(std::move(def)) {}
    void set_pair(int i, int j, Nonlinearity h) { overrides_.insert_or_assign({i, j}, std::move(h)); }
    const Nonlinearity& at(int i, int j) const {
        const auto it = overrides_.find({i, j});
        return it == overrides_.end() ? default_ : it->second;
    }
    const Nonlinearity& default_fn() const { return default_; }
    const std::map<std::pair<int, int>, Nonlinearity>& overrides() const { return overrides_; }

private:
    Nonlinearity default_;
    std::map<std::pair<int, int>, Nonlinearity> overrides_;
};

enum class AdditiveVariant { NodeEvaluated, EdgeEvaluated };

/// State-dependent gain matrix F(t, x); evaluations must have zero diagonal
/// and stay bounded on compacts.
struct GainFunction {
    std::function<SignedMatrix(double, std::span<const double>)> eval;
    std::string name = "gain";
};

// ---------------------------------------------------------------------------
// trajectories

struct OpinionState {
    double t = 0.0;
    std::vector<double> x;
};

struct TrajectoryMeta {
    std::string protocol = "linear";
    double step = 0.0;
    double t_end = 0.0;
    std::uint64_t scenario_hash = 0;
};

class Trajectory {
public:
    explicit Trajectory(int n) : n_(n) {}

    void add(double t, const std::vector<double>& x) {
        assert(static_cast<int>(x.size()) == n_);
        if (!times_.empty() && !(t > times_.back()))
            throw IntegratorError("trajectory: timestamps must be strictly increasing");
        times_.push_back(t);
        data_.insert(data_.end(), x.begin(), x.end());
    }

    int n() const { return n_; }
    size_t size() const { return times_.size(); }
    double time(size_t i) const { return times_[i]; }
    const std::vector<double>& times() const { return times_; }
    std::span<const double> state(size_t i) const {
        return {data_.data() + i * static_cast<size_t>(n_), static_cast<size_t>(n_)};
    }
    std::span<const double> back() const { return state(size() - 1); }

    OpinionState sample(size_t i) const {
        const auto x = state(i);
        return {times_[i], {x.begin(), x.end()}};
    }

    /// Index of the sample at time t (within tol), or -1.
    std::ptrdiff_t index_at(double t, double tol = 1e-9) const {
        const auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
        if (it == times_.end() || std::abs(*it - t) > tol) return -1;
        return it - times_.begin();
    }

    TrajectoryMeta meta;

private:
    int n_;
    std::vector<double> times_;
    std::vector<double> data_;
};

struct IntegratorConfig {
    double step = 1e-3;
    bool monitor = true;            // max-modulus + per-segment contraction guards
    bool record_gain_trace = true;  // nonlinear protocols only
};

struct NonlinearRun {
    Trajectory trajectory;
    std::optional<Schedule> gain_trace;  // one matrix per accepted step (left endpoint)
};

// ---------------------------------------------------------------------------
// integration core

namespace detail {

inline double max_abs_of(const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

/// Walks the constant pieces of a schedule without ever mapping absolute time
/// back through fmod (which mislabels segments right at repeated boundaries).
struct ScheduleWalker {
    const Schedule* s;
    int seg = 0;
    double rep = 0.0;

    explicit ScheduleWalker(const Schedule& sched) : s(&sched) {}

    const SignedMatrix& matrix() const { return s->segments()[seg].matrix; }

    double piece_end() const {
        const bool last = seg + 1 == static_cast<int>(s->segments().size());
        if (!s->periodic())
            return last ? std::numeric_limits<double>::infinity() : s->segments()[seg].t_end;
        return rep * s->period() + s->segments()[seg].t_end;
    }

    void advance_to(double t) {
        while (piece_end() <= t) {
            ++seg;
            if (seg == static_cast<int>(s->segments().size())) {
                seg = 0;
                rep += 1.0;
            }
        }
    }
};

struct StepMonitor {
    explicit StepMonitor(bool on) : enabled(on) {}

    bool enabled;
    // piece-scoped contraction data (linear protocol only)
    bool contraction = false;
    std::vector<double> entry_x;
    double entry_max = 0.0;
    double theta0 = 1.0;
    double allowance = 0.0;

    void enter_piece(const std::vector<double>& x, double row_norm, double extent) {
        contraction = true;
        entry_x = x;
        entry_max = max_abs_of(x);
        theta0 = std::exp(-row_norm * extent);
        allowance = 0.0;
    }

    /// One accepted step: enforce the max-modulus bound (the exact flow is
    /// non-expanding in |.|_inf; only one-step integration error of order h^5
    /// may increase it) and, per piece, the contraction estimate
    /// |x_k(t)| <= theta0 |x_k(t0)| + (1 - theta0) |x(t0)|_inf.
    void after_step(const std::vector<double>& before, const std::vector<double>& after,
                    double h, double row_norm) {
        if (!enabled) return;
        const double pre = max_abs_of(before);
        const double l_norm = 2.0 * row_norm;  // |L[A]|_inf = 2 max_j sum |a_jk|
        const double eps_step =
            10.0 * std::pow(h, 5) * std::pow(1.0 + l_norm, 5) * std::max(1.0, pre);
        if (max_abs_of(after) > pre + eps_step)
            throw IntegratorError("max-modulus monitor violated; try a smaller step");
        allowance += eps_step;
        if (!contraction) return;
        for (size_t k = 0; k < after.size(); ++k) {
            const double bound = theta0 * std::abs(entry_x[k]) + (1.0 - theta0) * entry_max +
                                 allowance + 1e-12 * std::max(1.0, entry_max);
            if (std::abs(after[k]) > bound)
                throw IntegratorError("contraction monitor violated; try a smaller step");
        }
    }
};

inline void check_finite(const std::vector<double>& x) {
    for (double v : x)
        if (!std::isfinite(v)) throw IntegratorError("integration diverged to a non-finite state");
}

/// Classic 4th-order step for an autonomous piece RHS.
template <typename Rhs>
void rk4_autonomous(Rhs&& f, const std::vector<double>& x, double h, std::vector<double>& k1,
                    std::vector<double>& k2, std::vector<double>& k3, std::vector<double>& k4,
                    std::vector<double>& tmp, std::vector<double>& out) {
    const size_t n = x.size();
    f(x.data(), k1.data());
    for (size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    f(tmp.data(), k2.data());
    for (size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    f(tmp.data(), k3.data());
    for (size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
    f(tmp.data(), k4.data());
    out.resize(n);
    for (size_t i = 0; i < n; ++i)
        out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

inline void check_integrate_args(const Schedule& s, const std::vector<double>& x0, double t_end,
                                 const IntegratorConfig& cfg) {
    if (static_cast<int>(x0.size()) != s.n())
        throw std::invalid_argument("integrate: x0 length mismatch");
    for (double v : x0)
        if (!std::isfinite(v)) throw std::invalid_argument("integrate: x0 must be finite");
    if (!(t_end > 0.0)) throw std::invalid_argument("integrate: t_end must be > 0");
    if (!(cfg.step > 0.0)) throw std::invalid_argument("integrate: step must be > 0");
}

/// Shared driver for the scheduled protocols. PieceRhs(matrix) returns the
/// autonomous RHS of a constant piece; gain(matrix, x) the effective coupling
/// matrix recorded per accepted step (null for the linear protocol, where the
/// piece matrix itself is the coupling and the contraction guard applies).
template <typename MakeRhs, typename GainAt>
NonlinearRun integrate_scheduled(const Schedule& s, const std::vector<double>& x0, double t_end,
                                 const IntegratorConfig& cfg, MakeRhs&& make_rhs, GainAt&& gain_at,
                                 bool linear_protocol, bool want_trace) {
    check_integrate_args(s, x0, t_end, cfg);
    NonlinearRun run{Trajectory(s.n()), std::nullopt};
    Trajectory& traj = run.trajectory;
    traj.meta.step = cfg.step;
    traj.meta.t_end = t_end;
    traj.add(0.0, x0);

    std::vector<Segment> trace;
    std::vector<double> x = x0, xn;
    std::vector<double> k1(x.size()), k2(x.size()), k3(x.size()), k4(x.size()), tmp(x.size());
    ScheduleWalker walker(s);
    StepMonitor monitor(cfg.monitor);
    double t = 0.0;

    while (t < t_end) {
        walker.advance_to(t);
        const SignedMatrix& piece = walker.matrix();
        const double piece_exit = std::min(walker.piece_end(), t_end);
        auto rhs = make_rhs(piece);
        if (linear_protocol && cfg.monitor)
            monitor.enter_piece(x, piece.inf_norm(), piece_exit - t);

        while (t < piece_exit) {
            const double remaining = piece_exit - t;
            const bool landing = remaining <= cfg.step * (1.0 + 1e-9);
            const double h = landing ? remaining : cfg.step;

            decltype(auto) effective = gain_at(piece, x);  // by reference on the linear path
            if (want_trace) trace.push_back({t, 0.0, effective});

            rk4_autonomous(rhs, x, h, k1, k2, k3, k4, tmp, xn);
            check_finite(xn);
            monitor.after_step(x, xn, h, effective.inf_norm());
            x.swap(xn);
            t = landing ? piece_exit : t + h;
            traj.add(t, x);
        }
        if (linear_protocol) monitor.contraction = false;
    }

    if (want_trace && !trace.empty()) {
        for (size_t i = 0; i + 1 < trace.size(); ++i) trace[i].t_end = trace[i + 1].t_start;
        trace.back().t_end = t_end;
        run.gain_trace = Schedule::make(std::move(trace));
    }
    return run;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// public integrators

/// Linear protocol xdot = -L[A(t)] x over a piecewise-constant schedule.
/// Fixed-step classic 4th-order scheme; steps never straddle segment
/// boundaries (the last step of each piece is shortened to land exactly).
inline Trajectory integrate(const Schedule& s, const std::vector<double>& x0, double t_end,
                            const IntegratorConfig& cfg = {}) {
    auto run = detail::integrate_scheduled(
        s, x0, t_end, cfg,
        [](const SignedMatrix& a) {
            return [&a](const double* x, double* dx) { detail::eval_rhs_linear(a, x, dx); };
        },
        [](const SignedMatrix& a, const std::vector<double>&) -> const SignedMatrix& { return a; },
        /*linear_protocol=*/true, /*want_trace=*/false);
    run.trajectory.meta.protocol = "linear";
    return std::move(run.trajectory);
}

/// Effective coupling matrix of the additive protocols at state x:
/// node-evaluated  a_ij H_ij[x_j sgn a_ij, x_i]
/// edge-evaluated  a_ij H_ij[x_j sgn a_ij - x_i, 0].
inline SignedMatrix effective_gain(const SignedMatrix& a, const NonlinearitySpec& spec,
                                   const std::vector<double>& x, AdditiveVariant variant) {
    SignedMatrix out(a.n());
    for (int i = 0; i < a.n(); ++i)
        for (int j = 0; j < a.n(); ++j) {
            const double w = a(i, j);
            if (w == 0.0) continue;
            const Nonlinearity& h = spec.at(i, j);
            const double H = variant == AdditiveVariant::NodeEvaluated
                                 ? divided_difference(h, x[j] * sign_of(w), x[i])
                                 : divided_difference(h, x[j] * sign_of(w) - x[i], 0.0);
            out.set(i, j, w * H);
        }
    return out;
}

/// Additive nonlinear protocols. Node-evaluated:
///   xdot_i = sum_j |a_ij| (h_ij(x_j sgn a_ij) - h_ij(x_i))
/// edge-evaluated:
///   xdot_i = sum_j |a_ij| h_ij(x_j sgn a_ij - x_i)
/// Alongside the trajectory the effective gain matrix is recorded per step,
/// turning the run into a schedule reusable by every analyzer.
inline NonlinearRun integrate_nonlinear_additive(const Schedule& s, const NonlinearitySpec& spec,
                                                 const std::vector<double>& x0, double t_end,
                                                 const IntegratorConfig& cfg = {},
                                                 AdditiveVariant variant = AdditiveVariant::NodeEvaluated) {
    auto run = detail::integrate_scheduled(
        s, x0, t_end, cfg,
        [&spec, variant](const SignedMatrix& a) {
            return [&a, &spec, variant](const double* x, double* dx) {
                const int n = a.n();
                for (int i = 0; i < n; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j) {
                        const double w = a(i, j);
                        if (w == 0.0) continue;
                        const Nonlinearity& h = spec.at(i, j);
                        if (variant == AdditiveVariant::NodeEvaluated)
                            acc += std::abs(w) * (h.value(x[j] * sign_of(w)) - h.value(x[i]));
                        else
                            acc += std::abs(w) * h.value(x[j] * sign_of(w) - x[i]);
                    }
                    dx[i] = acc;
                }
            };
        },
        [&spec, variant](const SignedMatrix& a, const std::vector<double>& x) {
            return effective_gain(a, spec, x, variant);
        },
        /*linear_protocol=*/false, /*want_trace=*/cfg.record_gain_trace);
    run.trajectory.meta.protocol = variant == AdditiveVariant::NodeEvaluated
                                       ? "nonlinear-additive-node"
                                       : "nonlinear-additive-edge";
    return run;
}

/// Nonlinear Laplacian flow xdot_i = sum_j |F_ij(t,x)| (x_j sgn F_ij(t,x) - x_i)
/// with the gain matrix re-evaluated at every stage.
inline NonlinearRun integrate_gain_flow(const GainFunction& gain, const std::vector<double>& x0,
                                        double t_end, const IntegratorConfig& cfg = {}) {
    if (!gain.eval) throw std::invalid_argument("integrate_gain_flow: missing evaluator");
    for (double v : x0)
        if (!std::isfinite(v)) throw std::invalid_argument("integrate: x0 must be finite");
    if (!(t_end > 0.0)) throw std::invalid_argument("integrate: t_end must be > 0");
    if (!(cfg.step > 0.0)) throw std::invalid_argument("integrate: step must be > 0");

    const int n = static_cast<int>(x0.size());
    auto eval_gain = [&](double t, const std::vector<double>& x) {
        SignedMatrix a = gain.eval(t, std::span<const double>(x.data(), x.size()));
        if (a.n() != n) throw IntegratorError("gain evaluation returned a wrong-sized matrix");
        for (int i = 0; i < n; ++i) {
            if (a(i, i) != 0.0) throw IntegratorError("gain evaluation has a nonzero diagonal");
            for (int j = 0; j < n; ++j)
                if (!std::isfinite(a(i, j))) throw IntegratorError("gain evaluation is not finite");
        }
        return a;
    };

    NonlinearRun run{Trajectory(n), std::nullopt};
    run.trajectory.meta = {"gain-flow", cfg.step, t_end, 0};
    run.trajectory.add(0.0, x0);
    std::vector<Segment> trace;
    std::vector<double> x = x0, xn(n), tmp(n);
    std::vector<double> k1(n), k2(n), k3(n), k4(n);
    detail::StepMonitor monitor(cfg.monitor);
    double t = 0.0;

    while (t < t_end) {
        const double remaining = t_end - t;
        const bool landing = remaining <= cfg.step * (1.0 + 1e-9);
        const double h = landing ? remaining : cfg.step;

        const SignedMatrix a_left = eval_gain(t, x);
        if (cfg.record_gain_trace) trace.push_back({t, 0.0, a_left});

        detail::eval_rhs_linear(a_left, x.data(), k1.data());
        for (int i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
        detail::eval_rhs_linear(eval_gain(t + 0.5 * h, tmp), tmp.data(), k2.data());
        for (int i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
        detail::eval_rhs_linear(eval_gain(t + 0.5 * h, tmp), tmp.data(), k3.data());
        for (int i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
        detail::eval_rhs_linear(eval_gain(t + h, tmp), tmp.data(), k4.data());
        for (int i = 0; i < n; ++i) xn[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

        detail::check_finite(xn);
        monitor.after_step(x, xn, h, a_left.inf_norm());
        x.swap(xn);
        t = landing ? t_end : t + h;
        run.trajectory.add(t, x);
    }

    if (cfg.record_gain_trace && !trace.empty()) {
        for (size_t i = 0; i + 1 < trace.size(); ++i) trace[i].t_end = trace[i + 1].t_start;
        trace.back().t_end = t_end;
        run.gain_trace = Schedule::make(std::move(trace));
    }
    return run;
}

}  // namespace signedflow
