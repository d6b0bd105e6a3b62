#pragma once

#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "signedflow/errors.hpp"

namespace signedflow {

/// Weight magnitude cap checked by validate(); keeps schedules locally bounded
/// and protects the fixed-step integrator.
inline constexpr double kWeightCap = 1e6;

/// sgn into {-1, 0, 1}; a zero weight contributes nothing anywhere.
inline double sign_of(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

/// Dense signed adjacency matrix a_jk with row = listener: a_jk != 0 means
/// agent j listens to agent k (influence arc k -> j), a_jk < 0 antagonistically.
///
/// Storage is permissive so that validate() can report bad content (nonzero
/// diagonal, non-finite entries); every analysis and integration operation
/// assumes a matrix that passes validate().
class SignedMatrix {
public:
    explicit SignedMatrix(int n) : n_(n), w_(static_cast<size_t>(n) * n, 0.0) {
        if (n < 2) throw std::invalid_argument("SignedMatrix: agent count must be >= 2");
    }

    static SignedMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        const int n = static_cast<int>(rows.size());
        if (n < 2) throw std::invalid_argument("SignedMatrix: agent count must be >= 2");
        SignedMatrix a(n);
        for (int j = 0; j < n; ++j) {
            if (static_cast<int>(rows[j].size()) != n)
                throw std::invalid_argument("SignedMatrix: row " + std::to_string(j) +
                                            " has length " + std::to_string(rows[j].size()) +
                                            ", expected " + std::to_string(n));
            for (int k = 0; k < n; ++k) a.w_[static_cast<size_t>(j) * n + k] = rows[j][k];
        }
        return a;
    }

    int n() const { return n_; }

    double operator()(int j, int k) const { return w_[static_cast<size_t>(j) * n_ + k]; }

    /// Construction helper; instances are treated as immutable once shared.
    void set(int j, int k, double w) { w_[static_cast<size_t>(j) * n_ + k] = w; }

    bool operator==(const SignedMatrix& o) const { return n_ == o.n_ && w_ == o.w_; }

    double max_abs() const {
        double m = 0.0;
        for (double w : w_) m = std::max(m, std::abs(w));
        return m;
    }

    /// max_j sum_k |a_jk| (the |.|_inf operator norm on row-listener matrices).
    double inf_norm() const {
        double m = 0.0;
        for (int j = 0; j < n_; ++j) m = std::max(m, row_abs_sum(j));
        return m;
    }

    double row_abs_sum(int j) const {
        double s = 0.0;
        for (int k = 0; k < n_; ++k) s += std::abs((*this)(j, k));
        return s;
    }

    /// Smallest nonzero |a_jk|, or 0 for the zero matrix.
    double min_nonzero_abs() const {
        double m = 0.0;
        for (double w : w_) {
            const double v = std::abs(w);
            if (v > 0.0 && (m == 0.0 || v < m)) m = v;
        }
        return m;
    }

    bool is_zero() const {
        for (double w : w_)
            if (w != 0.0) return false;
        return true;
    }

    const std::vector<double>& data() const { return w_; }

private:
    int n_;
    std::vector<double> w_;
};

/// Signed Laplacian: L_jk = -a_jk off the diagonal, L_jj = sum_m |a_jm|.
class Laplacian {
public:
    explicit Laplacian(int n) : n_(n), m_(static_cast<size_t>(n) * n, 0.0) {}

    int n() const { return n_; }
    double operator()(int j, int k) const { return m_[static_cast<size_t>(j) * n_ + k]; }
    void set(int j, int k, double v) { m_[static_cast<size_t>(j) * n_ + k] = v; }

    double inf_norm() const {
        double m = 0.0;
        for (int j = 0; j < n_; ++j) {
            double s = 0.0;
            for (int k = 0; k < n_; ++k) s += std::abs((*this)(j, k));
            m = std::max(m, s);
        }
        return m;
    }

    /// y = L x
    std::vector<double> apply(const std::vector<double>& x) const {
        std::vector<double> y(n_, 0.0);
        for (int j = 0; j < n_; ++j) {
            double s = 0.0;
            for (int k = 0; k < n_; ++k) s += (*this)(j, k) * x[k];
            y[j] = s;
        }
        return y;
    }

private:
    int n_;
    std::vector<double> m_;
};

inline Laplacian laplacian(const SignedMatrix& a) {
    const int n = a.n();
    Laplacian l(n);
    for (int j = 0; j < n; ++j) {
        double d = 0.0;
        for (int k = 0; k < n; ++k) {
            d += std::abs(a(j, k));
            if (j != k) l.set(j, k, -a(j, k));
        }
        l.set(j, j, d);
    }
    return l;
}

/// Remove arcs of absolute weight below epsilon (entries with |a_jk| >= epsilon
/// are kept). Idempotent for fixed epsilon.
inline SignedMatrix epsilon_skeleton(const SignedMatrix& a, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon_skeleton: epsilon must be > 0");
    SignedMatrix out(a.n());
    for (int j = 0; j < a.n(); ++j)
        for (int k = 0; k < a.n(); ++k)
            if (std::abs(a(j, k)) >= epsilon) out.set(j, k, a(j, k));
    return out;
}

struct Violation {
    enum class Kind { NonzeroDiagonal, NonFinite, DigonSign, MagnitudeCap };
    Kind kind;
    int j, k;
    double value;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

/// Report-style check: nonzero diagonal, non-finite entries, weight-cap
/// overruns and (when flagged) digon pairs of opposite sign a_jk * a_kj < 0.
inline ValidationReport validate(const SignedMatrix& a, bool require_digon_symmetry = false) {
    ValidationReport rep;
    const int n = a.n();
    for (int j = 0; j < n; ++j) {
        if (a(j, j) != 0.0)
            rep.violations.push_back({Violation::Kind::NonzeroDiagonal, j, j, a(j, j)});
        for (int k = 0; k < n; ++k) {
            const double w = a(j, k);
            if (!std::isfinite(w))
                rep.violations.push_back({Violation::Kind::NonFinite, j, k, w});
            else if (std::abs(w) > kWeightCap)
                rep.violations.push_back({Violation::Kind::MagnitudeCap, j, k, w});
        }
    }
    if (require_digon_symmetry) {
        for (int j = 0; j < n; ++j)
            for (int k = j + 1; k < n; ++k)
                if (a(j, k) * a(k, j) < 0.0)
                    rep.violations.push_back({Violation::Kind::DigonSign, j, k, a(j, k) * a(k, j)});
    }
    return rep;
}

inline bool is_digon_sign_symmetric(const SignedMatrix& a) {
    for (int j = 0; j < a.n(); ++j)
        for (int k = j + 1; k < a.n(); ++k)
            if (a(j, k) * a(k, j) < 0.0) return false;
    return true;
}

}  // namespace signedflow
