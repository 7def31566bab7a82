#pragma once
#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <gsam/banded.hpp>
#include <gsam/core.hpp>

namespace gsam {

/// Total variation of the k-th discrete derivative, k in {0, 1, 2}.
struct TrendFilter
{
    int order = 0;
};

/// Root of the integrated squared second derivative of the natural cubic
/// interpolant. With squared = true the penalty is the integral itself,
/// which is not a seminorm and is only used for sparsity diagnostics.
struct SobolevSpline
{
    bool squared = false;
};

enum class BasisFamily
{
    polynomial,
    cubic_spline,
};

/// Indicator of span{1, g_1, ..., g_dim}.
struct BasisSubspace
{
    int dim = 3;
    BasisFamily family = BasisFamily::polynomial;
};

/// Indicator of monotone functions.
struct Isotonic
{
    bool increasing = true;
};

/// ||D f||_q for a user-supplied matrix acting on knot values.
struct MatrixSeminorm
{
    Matrix d;
    double q = 2.0;
};

using PenaltySpec = std::variant<TrendFilter, SobolevSpline, BasisSubspace, Isotonic, MatrixSeminorm>;

enum class Interp
{
    piecewise_constant,
    piecewise_linear,
};

inline bool is_indicator(const PenaltySpec& spec)
{
    return std::holds_alternative<BasisSubspace>(spec) || std::holds_alternative<Isotonic>(spec);
}

inline bool is_squared(const PenaltySpec& spec)
{
    const auto* s = std::get_if<SobolevSpline>(&spec);
    return s && s->squared;
}

inline Interp default_interp(const PenaltySpec& spec)
{
    if (const auto* tf = std::get_if<TrendFilter>(&spec); tf && tf->order == 0) return Interp::piecewise_constant;
    if (std::holds_alternative<Isotonic>(spec)) return Interp::piecewise_constant;
    return Interp::piecewise_linear;
}

inline void validate(const PenaltySpec& spec)
{
    if (const auto* tf = std::get_if<TrendFilter>(&spec)) {
        if (tf->order < 0 || tf->order > 2) throw ArgumentError("trend filter order must be 0, 1 or 2");
    } else if (const auto* b = std::get_if<BasisSubspace>(&spec)) {
        if (b->dim < 1) throw ArgumentError("basis dimension must be at least 1");
    } else if (const auto* m = std::get_if<MatrixSeminorm>(&spec)) {
        if (!(m->q >= 1.0)) throw ArgumentError("matrix seminorm needs q >= 1");
        if (!m->d.allFinite()) throw ArgumentError("matrix seminorm has non-finite entries");
    }
}

inline std::string to_string(const PenaltySpec& spec)
{
    if (const auto* tf = std::get_if<TrendFilter>(&spec)) return "tf" + std::to_string(tf->order);
    if (const auto* s = std::get_if<SobolevSpline>(&spec)) return s->squared ? "sobolev2" : "sobolev";
    if (const auto* b = std::get_if<BasisSubspace>(&spec)) {
        return "basis:" + std::to_string(b->dim) + (b->family == BasisFamily::cubic_spline ? ":spline" : "");
    }
    if (const auto* iso = std::get_if<Isotonic>(&spec)) return iso->increasing ? "isotonic" : "isotonic:dec";
    return "matrix";
}

/// Parses the command-line penalty names (tf0, tf1, tf2, sobolev, sobolev2, basis:M[:spline], isotonic[:dec]).
inline PenaltySpec parse_penalty(const std::string& name)
{
    if (name == "tf0" || name == "tf1" || name == "tf2") return TrendFilter{name[2] - '0'};
    if (name == "sobolev") return SobolevSpline{false};
    if (name == "sobolev2") return SobolevSpline{true};
    if (name == "isotonic" || name == "isotonic:inc") return Isotonic{true};
    if (name == "isotonic:dec") return Isotonic{false};
    if (name.rfind("basis:", 0) == 0) {
        std::string rest = name.substr(6);
        BasisFamily fam = BasisFamily::polynomial;
        if (auto pos = rest.find(':'); pos != std::string::npos) {
            const std::string tag = rest.substr(pos + 1);
            rest = rest.substr(0, pos);
            if (tag == "spline") fam = BasisFamily::cubic_spline;
            else if (tag != "poly") throw ArgumentError("unknown basis family '" + tag + "'");
        }
        std::size_t used = 0;
        int dim = 0;
        try {
            dim = std::stoi(rest, &used);
        } catch (const std::exception&) {
            throw ArgumentError("bad basis dimension in '" + name + "'");
        }
        if (used != rest.size() || dim < 1) throw ArgumentError("bad basis dimension in '" + name + "'");
        return BasisSubspace{dim, fam};
    }
    throw ArgumentError("unknown penalty '" + name + "'");
}

namespace detail {

inline void check_knots(const Vector& knots)
{
    for (Index i = 1; i < knots.size(); ++i) {
        if (!(knots(i) > knots(i - 1))) throw ArgumentError("knots must be strictly increasing");
    }
}

} // namespace detail

/**
 * Scaled k-th difference operator on (possibly uneven) knots:
 * row i of order j is j / (x_{i+j} - x_i) times the difference of rows i+1 and i of order j-1.
 * Order 0 is the identity. Rows evaluate the k-th discrete derivative.
 */
inline BandedRows scaled_difference(const Vector& knots, int order)
{
    const Index m = knots.size();
    BandedRows d;
    d.cols = m;
    d.coef = Matrix::Ones(m, 1);
    for (int j = 1; j <= order; ++j) {
        const Index rows = m - j;
        if (rows <= 0) {
            d.coef.resize(0, j + 1);
            return d;
        }
        Matrix next = Matrix::Zero(rows, j + 1);
        for (Index i = 0; i < rows; ++i) {
            const double scale = j / (knots(i + j) - knots(i));
            for (Index c = 0; c < j; ++c) {
                next(i, c + 1) += scale * d.coef(i + 1, c);
                next(i, c) -= scale * d.coef(i, c);
            }
        }
        d.coef = std::move(next);
    }
    return d;
}

/// Operator whose l1 norm is the trend filtering penalty of the given order:
/// first differences of the scaled order-k differences.
inline BandedRows trend_filter_operator(const Vector& knots, int order)
{
    const BandedRows inner = scaled_difference(knots, order);
    BandedRows d;
    d.cols = knots.size();
    const Index rows = std::max<Index>(0, inner.rows() - 1);
    d.coef = Matrix::Zero(rows, order + 2);
    for (Index i = 0; i < rows; ++i) {
        for (Index c = 0; c <= order; ++c) {
            d.coef(i, c + 1) += inner.coef(i + 1, c);
            d.coef(i, c) -= inner.coef(i, c);
        }
    }
    return d;
}

/**
 * Solves D^T u = g for the trend filtering operator D of the given order, assuming
 * g is orthogonal to the polynomials of that degree. D^T factors into transposed
 * first differences and diagonal scalings, so u comes from repeated cumulative sums,
 * which stays accurate when tiny knot gaps make D badly conditioned.
 */
inline Vector trend_filter_adjoint_solve(const Vector& knots, int order, const Vector& g)
{
    const Index m = knots.size();
    // D1^T v = z  <=>  v_i = -(z_0 + ... + z_i)
    auto peel = [](const Vector& z) {
        Vector v(z.size() - 1);
        double acc = 0.0;
        for (Index i = 0; i + 1 < z.size(); ++i) {
            acc += z(i);
            v(i) = -acc;
        }
        return v;
    };
    Vector z = g;
    for (int j = 1; j <= order; ++j) {
        Vector v = peel(z);
        for (Index i = 0; i < v.size(); ++i) v(i) *= (knots(i + j) - knots(i)) / j;
        z = std::move(v);
    }
    if (z.size() < 2 || m <= order + 1) return Vector();
    return peel(z);
}

/**
 * Reinsch representation of the natural cubic spline roughness on knots t:
 * integral of s''^2 equals f^T Q R^{-1} Q^T f, with Q^T stored as banded rows
 * and R tridiagonal. Needs at least three knots.
 */
struct SobolevOperator
{
    BandedRows qt;
    Vector r_diag;
    Vector r_off;

    static SobolevOperator build(const Vector& t)
    {
        const Index m = t.size();
        if (m < 3) throw ArgumentError("Sobolev operator needs at least 3 knots");
        SobolevOperator op;
        op.qt.cols = m;
        op.qt.coef.resize(m - 2, 3);
        op.r_diag.resize(m - 2);
        op.r_off = Vector::Zero(m - 2);
        for (Index i = 0; i + 2 < m; ++i) {
            const double h0 = t(i + 1) - t(i);
            const double h1 = t(i + 2) - t(i + 1);
            op.qt.coef(i, 0) = 1.0 / h0;
            op.qt.coef(i, 1) = -1.0 / h0 - 1.0 / h1;
            op.qt.coef(i, 2) = 1.0 / h1;
            op.r_diag(i) = (h0 + h1) / 3.0;
            if (i + 3 < m) op.r_off(i) = h1 / 6.0;
        }
        return op;
    }

    Index interior() const { return r_diag.size(); }

    BandedSpd r_matrix() const
    {
        BandedSpd r(interior(), 1);
        for (Index i = 0; i < interior(); ++i) {
            r(i, i) = r_diag(i);
            if (i + 1 < interior()) r(i + 1, i) = r_off(i);
        }
        return r;
    }

    /// Second derivatives of the natural interpolant at interior knots: R^{-1} Q^T f.
    Vector second_derivatives(const Vector& f) const
    {
        BandedSpd r = r_matrix();
        r.factorize();
        return r.solve(qt.apply(f));
    }

    double r_quadratic(const Vector& g) const
    {
        double s = g.cwiseAbs2().dot(r_diag);
        for (Index i = 0; i + 1 < interior(); ++i) s += 2.0 * r_off(i) * g(i) * g(i + 1);
        return s;
    }

    /// Lower bidiagonal Cholesky factor of R: diagonal and subdiagonal.
    std::pair<Vector, Vector> r_cholesky() const
    {
        const Index k = interior();
        Vector diag(k), sub = Vector::Zero(std::max<Index>(0, k - 1));
        for (Index i = 0; i < k; ++i) {
            const double d = r_diag(i) - (i > 0 ? sub(i - 1) * sub(i - 1) : 0.0);
            diag(i) = std::sqrt(d);
            if (i + 1 < k) sub(i) = r_off(i) / diag(i);
        }
        return {diag, sub};
    }

    /// Integral of the squared second derivative of the natural interpolant.
    double roughness(const Vector& f) const { return std::max(0.0, r_quadratic(second_derivatives(f))); }

    /// K f where K = Q R^{-1} Q^T.
    Vector apply_k(const Vector& f) const { return qt.apply_transpose(second_derivatives(f)); }

    /// Dense factor D with D^T D = K, namely D = L^{-1} Q^T where R = L L^T.
    Matrix dense_factor() const
    {
        Matrix r = Matrix::Zero(interior(), interior());
        for (Index i = 0; i < interior(); ++i) {
            r(i, i) = r_diag(i);
            if (i + 1 < interior()) r(i, i + 1) = r(i + 1, i) = r_off(i);
        }
        Eigen::LLT<Matrix> llt(r);
        return llt.matrixL().solve(qt.dense());
    }
};

/**
 * Columns [1, g_1, ..., g_dim] evaluated at the knots. The covariate is mapped
 * to [-1, 1] first. The cubic spline family uses u, u^2, u^3 and truncated
 * cubics (u - xi)_+^3 at equally spaced quantiles of the knots.
 */
inline Matrix basis_matrix(const Vector& knots, const BasisSubspace& spec)
{
    const Index m = knots.size();
    const double lo = knots.minCoeff();
    const double hi = knots.maxCoeff();
    const double mid = 0.5 * (lo + hi);
    const double half = (hi > lo) ? 0.5 * (hi - lo) : 1.0;
    const Vector u = (knots.array() - mid) / half;

    Matrix b(m, spec.dim + 1);
    b.col(0).setOnes();
    if (spec.family == BasisFamily::polynomial || spec.dim <= 3) {
        for (int c = 1; c <= spec.dim; ++c) b.col(c) = u.array().pow(c);
        return b;
    }
    for (int c = 1; c <= 3; ++c) b.col(c) = u.array().pow(c);
    const int n_trunc = spec.dim - 3;
    for (int k = 0; k < n_trunc; ++k) {
        const double qpos = static_cast<double>(k + 1) / (n_trunc + 1) * static_cast<double>(m - 1);
        const auto lo_i = static_cast<Index>(std::floor(qpos));
        const auto hi_i = std::min<Index>(lo_i + 1, m - 1);
        const double frac = qpos - static_cast<double>(lo_i);
        const double xi = (1.0 - frac) * u(lo_i) + frac * u(hi_i);
        b.col(4 + k) = (u.array() - xi).max(0.0).cube();
    }
    return b;
}

/**
 * Structural penalty of knot values f on the given knots. Indicator kinds return
 * 0 inside their set and +infinity outside.
 */
inline double penalty_value(const Vector& knots, const Vector& f, const PenaltySpec& spec)
{
    if (knots.size() != f.size()) throw ArgumentError("knots and values differ in length");
    if (!f.allFinite() || !knots.allFinite()) throw ArgumentError("penalty_value given non-finite entries");
    validate(spec);
    const Index m = f.size();
    constexpr double inf = std::numeric_limits<double>::infinity();

    if (const auto* tf = std::get_if<TrendFilter>(&spec)) {
        if (m <= tf->order + 1) return 0.0;
        detail::check_knots(knots);
        return trend_filter_operator(knots, tf->order).apply(f).lpNorm<1>();
    }
    if (const auto* s = std::get_if<SobolevSpline>(&spec)) {
        if (m < 3) return 0.0;
        detail::check_knots(knots);
        const double rough = SobolevOperator::build(knots).roughness(f);
        return s->squared ? rough : std::sqrt(rough);
    }
    if (const auto* b = std::get_if<BasisSubspace>(&spec)) {
        if (m <= b->dim + 1) return 0.0;
        const Matrix basis = basis_matrix(knots, *b);
        const Vector fit = basis * basis.colPivHouseholderQr().solve(f);
        return (f - fit).norm() <= 1e-8 * std::max(1.0, f.norm()) ? 0.0 : inf;
    }
    if (const auto* iso = std::get_if<Isotonic>(&spec)) {
        const double scale = 1e-8 * std::max(1.0, f.cwiseAbs().maxCoeff());
        for (Index i = 1; i < m; ++i) {
            const double step = iso->increasing ? f(i) - f(i - 1) : f(i - 1) - f(i);
            if (step < -scale) return inf;
        }
        return 0.0;
    }
    const auto& ms = std::get<MatrixSeminorm>(spec);
    if (ms.d.cols() != m) throw ArgumentError("matrix seminorm has " + std::to_string(ms.d.cols())
                                              + " columns but the component has " + std::to_string(m) + " knots");
    const Vector df = ms.d * f;
    if (std::isinf(ms.q)) return df.lpNorm<Eigen::Infinity>();
    if (ms.q == 1.0) return df.lpNorm<1>();
    if (ms.q == 2.0) return df.norm();
    return std::pow(df.cwiseAbs().array().pow(ms.q).sum(), 1.0 / ms.q);
}

} // namespace gsam
