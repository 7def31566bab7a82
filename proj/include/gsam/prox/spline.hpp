#pragma once
#include <cmath>
#include <gsam/banded.hpp>
#include <gsam/penalty.hpp>
#include <gsam/prox/sqrt_trick.hpp>

namespace gsam::prox {

struct ReinschFit
{
    Vector f;
    /// Second derivatives of the fitted natural spline at the interior knots.
    Vector g;
};

namespace detail {

/**
 * Least-squares system over the interior knots whose rows are L^T (R = L L^T, when
 * with_r is set) and diag(s) Q, where Q^T is op.qt. Rows are interleaved by leading
 * column; q_row[j] is the position of row j of Q in the system.
 */
inline BandedLeastSquares spline_system(const SobolevOperator& op, const Vector& s, bool with_r,
                                        std::vector<Index>& q_row)
{
    const Index m = op.qt.cols;
    const Index k = op.interior();
    BandedLeastSquares ls(k, 3);
    q_row.assign(static_cast<std::size_t>(m), 0);
    Vector diag, sub;
    if (with_r) std::tie(diag, sub) = op.r_cholesky();
    double row[3];
    Index j = 0;
    for (Index i = 0; i < k; ++i) {
        if (with_r) {
            row[0] = diag(i);
            row[1] = i + 1 < k ? sub(i) : 0.0;
            ls.add_row(i, row, i + 1 < k ? 2 : 1);
        }
        // rows of Q whose first nonzero is at column i
        for (; j < m && std::max<Index>(0, j - 2) == i; ++j) {
            const Index last = std::min(j, k - 1);
            Index len = 0;
            for (Index c = i; c <= last; ++c) row[len++] = s(j) * op.qt.coef(c, j - c);
            q_row[j] = ls.rows();
            ls.add_row(i, row, len);
        }
    }
    return ls;
}

} // namespace detail

/**
 * Weighted cubic smoothing spline on the knots, Reinsch form:
 *     minimize sum w (r - f)^2 + alpha f^T K f,  K = Q R^{-1} Q^T.
 * The second derivatives g solve (R + alpha Q^T W^{-1} Q) g = Q^T r, here as the
 * least-squares problem with design [L^T; sqrt(alpha) W^{-1/2} Q] (R = L L^T) so
 * that tiny knot gaps do not square the conditioning. f = r - alpha W^{-1} Q g is
 * read off the least-squares residual. Since Q^T f = R g, the roughness is g^T R g,
 * which stays accurate when f is nearly linear and recomputing it from f would cancel.
 */
inline ReinschFit reinsch_fit(const SobolevOperator& op, const Vector& r, const Vector& w, double alpha)
{
    if (alpha <= 0.0) return {r, op.second_derivatives(r)};
    const Index m = r.size();
    const Vector sw = w.cwiseSqrt();
    const double sa = std::sqrt(alpha);
    std::vector<Index> q_row;
    const BandedLeastSquares ls = detail::spline_system(op, sa * sw.cwiseInverse(), true, q_row);
    Vector b = Vector::Zero(ls.rows());
    for (Index j = 0; j < m; ++j) b(q_row[j]) = sw(j) * r(j) / sa;
    Vector g = ls.solve(b);
    const Vector res = ls.residual(b);
    Vector f(m);
    for (Index j = 0; j < m; ++j) f(j) = sa * res(q_row[j]) / sw(j);
    return {std::move(f), std::move(g)};
}

inline Vector reinsch_smooth(const SobolevOperator& op, const Vector& r, const Vector& w, double alpha)
{
    if (alpha <= 0.0) return r;
    return reinsch_fit(op, r, w, alpha).f;
}

/// Weighted least-squares straight line through (knots, r): the null space of the Sobolev penalty.
inline Vector weighted_linear_fit(const Vector& knots, const Vector& r, const Vector& w)
{
    const double sw = w.sum();
    const double xbar = knots.dot(w) / sw;
    const double rbar = r.dot(w) / sw;
    const Vector xc = knots.array() - xbar;
    const double sxx = xc.cwiseAbs2().dot(w);
    const double slope = sxx > 0.0 ? xc.cwiseProduct(w).dot(r) / sxx : 0.0;
    return (rbar + slope * xc.array()).matrix();
}

/**
 * Dual of the Sobolev seminorm in the empirical inner product, evaluated at
 * v = W (r - f_null) / n. Solves Q z = v in least squares (exact, since v is
 * orthogonal to the linear functions) and returns sqrt(z^T R z).
 */
inline double sobolev_dual(const SobolevOperator& op, const Vector& v)
{
    std::vector<Index> q_row;
    const BandedLeastSquares ls = detail::spline_system(op, Vector::Ones(v.size()), false, q_row);
    Vector b(ls.rows());
    for (Index j = 0; j < v.size(); ++j) b(q_row[j]) = v(j);
    const Vector z = ls.solve(b);
    return std::sqrt(std::max(0.0, op.r_quadratic(z)));
}

/**
 * min 1/2 ||r - f||_n^2 + lambda1 sqrt(integral f''^2) on weighted knots,
 * through the squared problem and the scalar root-find of sqrt_trick.
 */
inline SqrtTrickResult sobolev_prox(const Vector& knots, const Vector& r, const Vector& w, double lambda1,
                                    double hint = 0.0, const SqrtTrickSettings& settings = {})
{
    if (knots.size() < 3) return {r, 0.0, 0.0, true};
    const SobolevOperator op = SobolevOperator::build(knots);
    const double n = w.sum();
    const Vector f_null = weighted_linear_fit(knots, r, w);
    const double dual = sobolev_dual(op, w.cwiseProduct(r - f_null) / n);
    const double p_r = std::sqrt(op.roughness(r));
    return sqrt_trick(
        lambda1, dual, f_null, p_r,
        [&](double lt) {
            ReinschFit fit = reinsch_fit(op, r, w, 2.0 * n * lt);
            const double pen = std::sqrt(std::max(0.0, op.r_quadratic(fit.g)));
            return std::pair{std::move(fit.f), pen};
        },
        hint, settings);
}

/// min 1/2 ||r - f||_n^2 + gamma integral f''^2.
inline Vector sobolev_squared_prox(const Vector& knots, const Vector& r, const Vector& w, double gamma)
{
    if (knots.size() < 3 || gamma <= 0.0) return r;
    return reinsch_smooth(SobolevOperator::build(knots), r, w, 2.0 * w.sum() * gamma);
}

} // namespace gsam::prox
