#pragma once
#include <algorithm>
#include <cmath>
#include <vector>
#include <gsam/banded.hpp>
#include <gsam/error.hpp>
#include <gsam/penalty.hpp>
#include <gsam/prox/tv_dp.hpp>

namespace gsam::prox {

struct AdmmSettings
{
    int max_iter = 200000;
    double tol = 1e-8;
    int polish_every = 10;
};

/// State carried between calls on nearby targets: the last fused pattern and the ADMM iterates.
struct AdmmWarmStart
{
    std::vector<signed char> pattern;
    Vector alpha;
    /// Unscaled dual rho * u.
    Vector dual;
};

namespace detail {

/**
 * Given the sign pattern of D f, solves the KKT system of
 *     1/2 sum w (r - f)^2 + lam ||D f||_1
 * exactly: f = r - W^{-1} D^T u with u = lam*sign on nonzero rows and the
 * remaining multipliers chosen so that those rows of D f vanish. The latter is a
 * banded least-squares problem whose residual gives f directly; the multipliers
 * are then recovered from f by the adjoint solve. Returns false when they leave
 * [-lam, lam] or the signs of D f disagree with the pattern.
 */
inline bool polish_l1(const Vector& knots, int order, const BandedRows& d, const Vector& r, const Vector& w, double lam,
                      const std::vector<signed char>& sign, Vector& f_out)
{
    const Index m = r.size();
    const Index rows = d.rows();
    const Index width = d.width();
    std::vector<Index> zero;
    Vector u = Vector::Zero(rows);
    for (Index i = 0; i < rows; ++i) {
        if (sign[i] == 0) zero.push_back(i);
        else u(i) = lam * sign[i];
    }
    const Vector winv = w.cwiseInverse();
    const Vector base = r - winv.cwiseProduct(d.apply_transpose(u));
    Vector f = base;
    if (!zero.empty()) {
        // rows j of W^{-1/2} D_Z^T: columns a with zero[a] <= j <= zero[a] + width - 1
        const auto nz = static_cast<Index>(zero.size());
        BandedLeastSquares ls(nz, width);
        const Vector sw = w.cwiseSqrt();
        Vector rhs(m);
        std::vector<double> coef(static_cast<std::size_t>(width));
        std::vector<Index> used;
        Index lo = 0;
        for (Index j = 0; j < m; ++j) {
            while (lo < nz && zero[lo] + width - 1 < j) ++lo;
            Index len = 0;
            for (Index a = lo; a < nz && zero[a] <= j; ++a) coef[len++] = d.coef(zero[a], j - zero[a]) / sw(j);
            if (len == 0) continue;
            ls.add_row(lo, coef.data(), len);
            rhs(static_cast<Index>(used.size())) = sw(j) * base(j);
            used.push_back(j);
        }
        const Vector res = ls.residual(rhs.head(static_cast<Index>(used.size())));
        for (std::size_t a = 0; a < used.size(); ++a) f(used[a]) = res(static_cast<Index>(a)) / sw(used[a]);
    }
    const Vector full_u = trend_filter_adjoint_solve(knots, order, w.cwiseProduct(r - f));
    const double slack = lam * (1.0 + 1e-9);
    for (Index i : zero) {
        if (!(std::abs(full_u(i)) <= slack)) return false;
    }
    const Vector df = d.apply(f);
    const double scale = 1e-12 * std::max(1.0, f.cwiseAbs().maxCoeff());
    const Vector row_scale = d.row_abs_sums();
    for (Index i = 0; i < rows; ++i) {
        if (sign[i] != 0 && sign[i] * df(i) < -scale * row_scale(i)) return false;
    }
    f_out = std::move(f);
    return true;
}

} // namespace detail

/**
 * Trend filtering of order k >= 1 on uneven knots:
 *     minimize 1/2 sum w (r - f)^2 + lam ||D^{(k+1)} f||_1.
 *
 * ADMM splits alpha = D~^{(k)} f so the f-step is a banded least-squares solve and the
 * alpha-step is a 1-d fused lasso solved exactly by dynamic programming.
 * Every few iterations the fused pattern of alpha is used to solve the KKT
 * system exactly; a consistent pattern ends the iteration.
 */
inline Vector trend_filter_admm(const Vector& knots, const Vector& r, const Vector& w, double lam, int order,
                                const AdmmSettings& settings = {}, AdmmWarmStart* warm = nullptr)
{
    const Index m = r.size();
    if (order == 0) return tv_denoise_dp(r, w, lam);
    if (m <= order + 1 || lam <= 0.0) return r;

    const BandedRows dk = scaled_difference(knots, order);
    const BandedRows full = trend_filter_operator(knots, order);
    const Index na = dk.rows();

    const Vector sw = w.cwiseSqrt();
    auto factor = [&](double rho) { return BandedLeastSquares::stacked(sw, dk, std::sqrt(rho)); };

    // a pattern that is still optimal gives the exact answer without iterating
    if (warm && static_cast<Index>(warm->pattern.size()) == na - 1) {
        Vector exact;
        if (detail::polish_l1(knots, order, full, r, w, lam, warm->pattern, exact)) return exact;
    }
    const bool resume = warm && warm->alpha.size() == na && warm->dual.size() == na;

    // rho on the scale of lam keeps both residuals comparable at the start; an adapted
    // rho from an earlier target can be far off and stall the iteration
    double rho = lam;
    BandedLeastSquares system = factor(rho);
    const Vector swr = sw.cwiseProduct(r);
    Vector f = r;
    Vector alpha = resume ? warm->alpha : dk.apply(f);
    Vector u = resume ? Vector(warm->dual / rho) : Vector::Zero(na);
    const Vector ones = Vector::Ones(na);
    std::vector<signed char> last_pattern;
    double primal = 0.0, dual = 0.0;
    auto save = [&](const std::vector<signed char>& pattern) {
        if (!warm) return;
        warm->pattern = pattern;
        warm->alpha = alpha;
        warm->dual = rho * u;
    };

    for (int it = 1; it <= settings.max_iter; ++it) {
        f = system.solve(swr, std::sqrt(rho) * (alpha + u));
        const Vector df = dk.apply(f);
        const Vector alpha_old = alpha;
        alpha = tv_denoise_dp(df - u, ones, lam / rho);
        u += alpha - df;

        primal = (alpha - df).norm();
        dual = rho * dk.apply_transpose(alpha - alpha_old).norm();
        const double scale_p = std::max({1.0, df.norm(), alpha.norm()});
        const double scale_d = std::max(1.0, rho * dk.apply_transpose(u).norm());

        if (it % settings.polish_every == 0) {
            std::vector<signed char> pattern(na - 1);
            for (Index i = 0; i + 1 < na; ++i) {
                const double diff = alpha(i + 1) - alpha(i);
                pattern[i] = diff > 0.0 ? 1 : (diff < 0.0 ? -1 : 0);
            }
            if (pattern != last_pattern) {
                Vector exact;
                if (detail::polish_l1(knots, order, full, r, w, lam, pattern, exact)) {
                    save(pattern);
                    return exact;
                }
                last_pattern = std::move(pattern);
            }
            if (primal <= settings.tol * scale_p && dual <= settings.tol * scale_d) {
                save({});
                return f;
            }

            if (primal > 10.0 * dual) {
                rho *= 2.0;
                u /= 2.0;
                system = factor(rho);
            } else if (dual > 10.0 * primal) {
                rho /= 2.0;
                u *= 2.0;
                system = factor(rho);
            }
        }
    }
    if (resume) {
        // a stale warm state must not cost convergence
        warm->alpha.resize(0);
        warm->dual.resize(0);
        return trend_filter_admm(knots, r, w, lam, order, settings, warm);
    }
    throw SolverError("trend filtering ADMM did not converge", std::max(primal, dual));
}

} // namespace gsam::prox
