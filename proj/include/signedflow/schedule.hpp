#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "signedflow/errors.hpp"
#include "signedflow/signed_matrix.hpp"

namespace signedflow {

struct Segment {
    double t_start;
    double t_end;
    SignedMatrix matrix;
};

/// Piecewise-constant time-varying signed matrix A(t).
///
/// Segments partition [0, horizon). A periodic schedule repeats with
/// period == horizon; a non-periodic one holds its final matrix forever past
/// the horizon, so A(t) is defined on [0, inf) either way.
class Schedule {
public:
    static Schedule make(std::vector<Segment> segments, std::optional<double> period = {}) {
        if (segments.empty()) throw ScenarioError("schedule: needs at least one segment");
        const int n = segments.front().matrix.n();
        double t = 0.0;
        for (size_t i = 0; i < segments.size(); ++i) {
            Segment& s = segments[i];
            if (s.matrix.n() != n) throw ScenarioError("schedule: segment matrices differ in size");
            if (!(s.t_start < s.t_end))
                throw ScenarioError("schedule: segment " + std::to_string(i) + " needs t_start < t_end");
            if (std::abs(s.t_start - t) > 1e-9 * std::max(1.0, t))
                throw ScenarioError("schedule: segment " + std::to_string(i) +
                                    " does not start where the previous one ends");
            s.t_start = t;  // normalize away input rounding
            t = s.t_end;
        }
        Schedule out;
        out.segments_ = std::move(segments);
        if (period) {
            const double h = out.segments_.back().t_end;
            if (std::abs(*period - h) > 1e-9 * std::max(1.0, h))
                throw ScenarioError("schedule: period must equal the segment span");
            out.periodic_ = true;
        }
        return out;
    }

    static Schedule constant(SignedMatrix a, double span = 1.0) {
        return make({Segment{0.0, span, std::move(a)}});
    }

    int n() const { return segments_.front().matrix.n(); }
    const std::vector<Segment>& segments() const { return segments_; }
    double horizon() const { return segments_.back().t_end; }
    bool periodic() const { return periodic_; }
    double period() const { return horizon(); }

    bool is_constant() const {
        for (size_t i = 1; i < segments_.size(); ++i)
            if (!(segments_[i].matrix == segments_[0].matrix)) return false;
        return true;
    }

    /// Constant piece containing time t: segment index and the absolute end
    /// time of the piece (+inf on the held tail). Times within a relative
    /// snap distance of a boundary belong to the piece that starts there.
    std::pair<int, double> locate(double t) const {
        const double eps = snap_eps();
        const int last = static_cast<int>(segments_.size()) - 1;
        if (!periodic_) {
            for (int i = 0; i <= last; ++i)
                if (t < segments_[i].t_end - eps)
                    return {i, i == last ? std::numeric_limits<double>::infinity()
                                         : segments_[i].t_end};
            return {last, std::numeric_limits<double>::infinity()};
        }
        const double p = period();
        double rep = std::floor(t / p);
        double tau = t - rep * p;
        if (tau < 0.0) { tau += p; rep -= 1.0; }
        if (tau > p - eps) { tau = 0.0; rep += 1.0; }
        for (int i = 0; i <= last; ++i)
            if (tau < segments_[i].t_end - eps) return {i, rep * p + segments_[i].t_end};
        return {0, (rep + 1.0) * p + segments_[0].t_end};
    }

    const SignedMatrix& matrix_at(double t) const { return segments_[locate(t).first].matrix; }

    /// Exact window integral of abs A over [t, t+T] (piecewise-constant sums).
    SignedMatrix window_integral(double t, double T) const {
        if (!(T > 0.0)) throw std::invalid_argument("window_integral: T must be > 0");
        if (t < 0.0) throw std::invalid_argument("window_integral: t must be >= 0");
        SignedMatrix out(n());
        double cur = t, remaining = T;
        while (remaining > 0.0) {
            const auto [idx, end] = locate(cur);
            const double take = std::min(remaining, end - cur);
            const SignedMatrix& m = segments_[idx].matrix;
            for (int j = 0; j < n(); ++j)
                for (int k = 0; k < n(); ++k)
                    if (m(j, k) != 0.0) out.set(j, k, out(j, k) + std::abs(m(j, k)) * take);
            cur += take;
            remaining -= take;
            if (!(take > 0.0)) break;  // paranoia against infinite loops
        }
        return out;
    }

    double max_abs() const {
        double m = 0.0;
        for (const Segment& s : segments_) m = std::max(m, s.matrix.max_abs());
        return m;
    }

    /// Segment boundary times within one cycle: 0, interior ends, horizon.
    std::vector<double> cycle_boundaries() const {
        std::vector<double> b{0.0};
        for (const Segment& s : segments_) b.push_back(s.t_end);
        return b;
    }

private:
    Schedule() = default;
    double snap_eps() const { return 1e-9 * std::max(1.0, horizon()); }

    std::vector<Segment> segments_;
    bool periodic_ = false;
};

inline SignedMatrix window_integral(const Schedule& s, double t, double T) {
    return s.window_integral(t, T);
}

}  // namespace signedflow
