#pragma once
#include <vector>
#include <gsam/core.hpp>

namespace gsam::prox {

/**
 * Exact weighted 1-d fused lasso by dynamic programming:
 *
 *     minimize_b  1/2 sum_i w_i (y_i - b_i)^2 + lam sum_i |b_{i+1} - b_i|.
 *
 * The derivative of each forward message is piecewise linear; its breakpoints
 * live in a deque between indices l and r, each carrying the jump (slope,
 * offset) of the derivative across it. The left end tracks the
 * derivative itself and the right end its negation. Two new knots per
 * observation, so the whole pass is linear in n. Backtracking clips the
 * running value against the stored knots.
 */
inline Vector tv_denoise_dp(const Vector& y, const Vector& w, double lam)
{
    const Index n = y.size();
    if (n == 0) return y;
    if (n == 1 || lam <= 0.0) return y;

    struct Knot
    {
        double x, a, b;
    };
    // reused across calls; the ADMM inner loop calls this every iteration
    thread_local std::vector<Knot> q;
    thread_local std::vector<double> tm, tp;
    if (q.size() < static_cast<std::size_t>(2 * n)) {
        q.resize(2 * n);
        tm.resize(n - 1);
        tp.resize(n - 1);
    }

    tm[0] = -lam / w(0) + y(0);
    tp[0] = lam / w(0) + y(0);
    Index l = n - 1;
    Index r = n;
    q[l] = {tm[0], w(0), -w(0) * y(0) + lam};
    q[r] = {tp[0], -w(0), w(0) * y(0) + lam};
    double afirst = w(1);
    double bfirst = -lam - w(1) * y(1);
    double alast = -w(1);
    double blast = w(1) * y(1) - lam;

    for (Index k = 1; k < n - 1; ++k) {
        Index lo = l;
        while (lo <= r && afirst * q[lo].x + bfirst <= -lam) {
            afirst += q[lo].a;
            bfirst += q[lo].b;
            ++lo;
        }
        Index hi = r;
        while (hi >= lo && alast * q[hi].x + blast <= -lam) {
            alast += q[hi].a;
            blast += q[hi].b;
            --hi;
        }
        tm[k] = (-lam - bfirst) / afirst;
        tp[k] = (-lam - blast) / alast;
        l = lo - 1;
        r = hi + 1;
        q[l] = {tm[k], afirst, bfirst + lam};
        q[r] = {tp[k], alast, blast + lam};
        afirst = w(k + 1);
        bfirst = -lam - w(k + 1) * y(k + 1);
        alast = -w(k + 1);
        blast = w(k + 1) * y(k + 1) - lam;
    }

    Index lo = l;
    while (lo <= r && afirst * q[lo].x + bfirst <= 0.0) {
        afirst += q[lo].a;
        bfirst += q[lo].b;
        ++lo;
    }

    Vector beta(n);
    beta(n - 1) = -bfirst / afirst;
    for (Index k = n - 2; k >= 0; --k) {
        if (beta(k + 1) > tp[k]) beta(k) = tp[k];
        else if (beta(k + 1) < tm[k]) beta(k) = tm[k];
        else beta(k) = beta(k + 1);
    }
    return beta;
}

} // namespace gsam::prox
