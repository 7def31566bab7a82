#pragma once
#include <algorithm>
#include <cmath>
#include <limits>
#include <gsam/core.hpp>
#include <gsam/error.hpp>

namespace gsam::prox {

struct SqrtTrickResult
{
    Vector f;
    /// Level of the squared problem that reproduces the seminorm solution (0 on the null branch).
    double lambda_tilde = 0.0;
    /// 2 * lambda_tilde * P(f); equals lambda1 up to the solver tolerance off the null branch.
    double stationarity = 0.0;
    bool null_fit = false;
};

struct SqrtTrickSettings
{
    double rel_tol = 1e-11;
    int max_iter = 300;
};

/**
 * Solves min 1/2 ||r - f||_n^2 + lambda1 P(f) given a solver for the squared problem
 * min 1/2 ||r - f||_n^2 + lt P(f)^2 that returns the pair (f_lt, P(f_lt)).
 *
 * `dual` is P*(f_interp - f_null). When lambda1 >= dual the answer is f_null.
 * Otherwise lt solves 2 lt P(f_lt) = lambda1; the left side is continuous and
 * nondecreasing in lt. The bracket starts at lambda1 / (2 P(r)), which never
 * overshoots because P(f_lt) <= P(r), or at `hint` when one is given, and is
 * widened by factors of 4. The root is then refined by the Illinois variant of
 * regula falsi on log(2 lt P(f_lt)) against log(lt), until the relative gap is
 * below rel_tol or the bracket on lt shrinks to machine precision.
 */
template <class SquaredSolver>
SqrtTrickResult sqrt_trick(double lambda1, double dual, const Vector& f_null, double p_of_r, SquaredSolver&& solve_squared,
                           double hint = 0.0, const SqrtTrickSettings& settings = {})
{
    SqrtTrickResult out;
    if (lambda1 >= dual || p_of_r <= 0.0) {
        out.f = f_null;
        out.null_fit = true;
        return out;
    }
    if (lambda1 <= 0.0) {
        out.f = solve_squared(0.0).first;
        return out;
    }

    auto eval = [&](double lt, Vector& f) {
        auto [fit, pen] = solve_squared(lt);
        f = std::move(fit);
        return 2.0 * lt * pen;
    };

    Vector f_lo, f_hi;
    double lo = lambda1 / (2.0 * p_of_r);
    double hi = 0.0;
    double g_lo = 0.0, g_hi = 0.0;
    if (hint > lo) {
        Vector f;
        const double g = eval(hint, f);
        if (g <= lambda1) {
            lo = hint;
            g_lo = g;
            f_lo = std::move(f);
        } else {
            hi = hint;
            g_hi = g;
            f_hi = std::move(f);
        }
    }
    if (f_lo.size() == 0) {
        // walk down from the hint, but never below the always-valid lower bracket
        double cand = hi > 0.0 ? std::max(hi / 4.0, lo) : lo;
        for (;;) {
            Vector f;
            const double g = eval(cand, f);
            if (g <= lambda1 || cand <= lo) {
                lo = cand;
                g_lo = g;
                f_lo = std::move(f);
                break;
            }
            hi = cand;
            g_hi = g;
            f_hi = std::move(f);
            cand = std::max(cand / 4.0, lo);
        }
    }
    if (f_hi.size() == 0) {
        double cand = lo * 4.0;
        for (int k = 0;; ++k) {
            Vector f;
            const double g = eval(cand, f);
            if (g >= lambda1) {
                hi = cand;
                g_hi = g;
                f_hi = std::move(f);
                break;
            }
            lo = cand;
            g_lo = g;
            f_lo = std::move(f);
            cand *= 4.0;
            if (k > 400 || !std::isfinite(cand)) throw SolverError("sqrt trick could not bracket the root", dual - g);
        }
    }

    const double target = std::log(lambda1);
    auto done = [&](double g) { return std::abs(g - lambda1) <= settings.rel_tol * lambda1; };
    if (done(g_lo)) {
        out = {f_lo, lo, g_lo, false};
        return out;
    }
    if (done(g_hi)) {
        out = {f_hi, hi, g_hi, false};
        return out;
    }

    double s_lo = std::log(lo), s_hi = std::log(hi);
    // g_lo may be 0 when P(f_lo) underflows; fall back to bisection then
    double h_lo = g_lo > 0.0 ? std::log(g_lo) - target : -1.0;
    double h_hi = std::log(g_hi) - target;
    bool lo_exact = g_lo > 0.0;
    int side = 0;
    for (int it = 0; it < settings.max_iter; ++it) {
        double s;
        if (lo_exact && h_hi > h_lo) s = s_hi - h_hi * (s_hi - s_lo) / (h_hi - h_lo);
        else s = 0.5 * (s_lo + s_hi);
        if (!(s > s_lo && s < s_hi)) s = 0.5 * (s_lo + s_hi);

        Vector f;
        const double lt = std::exp(s);
        const double g = eval(lt, f);
        const bool collapsed = s_hi - s_lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(s));
        if (done(g) || collapsed) {
            // a collapsed bracket locates lt to machine precision; any remaining gap in g
            // is rounding noise of the squared solver (closely spaced knots)
            out = {std::move(f), lt, g, false};
            return out;
        }
        const double h = g > 0.0 ? std::log(g) - target : -1.0;
        if (g < lambda1) {
            s_lo = s;
            h_lo = h;
            lo_exact = g > 0.0;
            if (side == -1) h_hi /= 2.0;
            side = -1;
        } else {
            s_hi = s;
            h_hi = h;
            if (side == 1) h_lo /= 2.0;
            side = 1;
        }
    }
    throw SolverError("sqrt trick did not converge", s_hi - s_lo);
}

} // namespace gsam::prox
