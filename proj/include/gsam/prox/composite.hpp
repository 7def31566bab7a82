#pragma once
#include <cmath>
#include <variant>
#include <gsam/core.hpp>
#include <gsam/penalty.hpp>
#include <gsam/prox/basis.hpp>
#include <gsam/prox/isotonic.hpp>
#include <gsam/prox/matrix_seminorm.hpp>
#include <gsam/prox/spline.hpp>
#include <gsam/prox/trend_filter.hpp>
#include <gsam/prox/tv_dp.hpp>

namespace gsam::prox {

/**
 * One univariate subproblem
 *     minimize 1/2 ||r - f||_n^2 + gamma P(f) + kappa ||f||_n
 * on weighted knots. ||g||_n^2 = sum w g^2 / n with n = sum w.
 */
struct ProxProblem
{
    Vector r;
    Vector weights;
    Vector knots;
    double gamma = 0.0;
    double kappa = 0.0;
    PenaltySpec spec = TrendFilter{0};

    double n() const { return weights.sum(); }

    void validate() const
    {
        if (r.size() == 0) throw ArgumentError("prox problem is empty");
        if (weights.size() != r.size() || knots.size() != r.size()) {
            throw ArgumentError("prox problem: r, weights and knots differ in length");
        }
        if (!r.allFinite()) throw ArgumentError("prox problem: non-finite target");
        if (!(weights.minCoeff() > 0.0)) throw ArgumentError("prox problem: weights must be positive");
        if (!(gamma >= 0.0) || !(kappa >= 0.0)) throw ArgumentError("prox problem: gamma and kappa must be >= 0");
        gsam::validate(spec);
        gsam::detail::check_knots(knots);
    }
};

/// Carries the squared-problem level between calls so root-finds can start near the last answer.
struct ProxWarmStart
{
    double lambda_tilde = 0.0;
    AdmmWarmStart admm;
};

/// Structure-only solve (kappa ignored). gamma = 0 switches the structure penalty off, indicators included.
inline Vector prox_structure(const ProxProblem& pb, ProxWarmStart* warm = nullptr)
{
    pb.validate();
    if (pb.gamma == 0.0) return pb.r;
    const Vector& r = pb.r;
    const Vector& w = pb.weights;
    const double lam = pb.n() * pb.gamma;

    if (const auto* tf = std::get_if<TrendFilter>(&pb.spec)) {
        if (tf->order == 0) return tv_denoise_dp(r, w, lam);
        return trend_filter_admm(pb.knots, r, w, lam, tf->order, {}, warm ? &warm->admm : nullptr);
    }
    if (const auto* s = std::get_if<SobolevSpline>(&pb.spec)) {
        if (s->squared) return sobolev_squared_prox(pb.knots, r, w, pb.gamma);
        SqrtTrickResult res = sobolev_prox(pb.knots, r, w, pb.gamma, warm ? warm->lambda_tilde : 0.0);
        if (warm && !res.null_fit) warm->lambda_tilde = res.lambda_tilde;
        return std::move(res.f);
    }
    if (const auto* b = std::get_if<BasisSubspace>(&pb.spec)) return basis_projection(pb.knots, r, w, *b);
    if (const auto* iso = std::get_if<Isotonic>(&pb.spec)) return isotonic_pava(r, w, iso->increasing);

    const auto& ms = std::get<MatrixSeminorm>(pb.spec);
    if (ms.d.cols() != r.size()) throw ArgumentError("matrix seminorm does not match the number of knots");
    if (ms.q == 1.0) return matrix_l1_prox(ms.d, r, w, lam);
    if (ms.q == 2.0) {
        SqrtTrickResult res = matrix_l2_prox(ms.d, r, w, pb.gamma, warm ? warm->lambda_tilde : 0.0);
        if (warm && !res.null_fit) warm->lambda_tilde = res.lambda_tilde;
        return std::move(res.f);
    }
    throw ArgumentError("matrix seminorm prox supports q = 1 and q = 2 only");
}

/// (1 - kappa / ||f||_n)_+ f with ||.||_n weighted by w.
inline Vector soft_scale(const Vector& f, const Vector& w, double kappa)
{
    if (kappa < 0.0) throw ArgumentError("soft_scale needs kappa >= 0");
    const double norm = weighted_norm(f, w);
    if (norm <= kappa) return Vector::Zero(f.size());
    return (1.0 - kappa / norm) * f;
}

/// Unit-weight form: every entry is one observation.
inline Vector soft_scale(const Vector& f, double kappa) { return soft_scale(f, Vector::Ones(f.size()), kappa); }

namespace detail {

/**
 * min 1/2 ||r - f||_n^2 + gamma integral f''^2 + kappa ||f||_n.
 * Off zero, stationarity gives f = S_{alpha/(1+c)}(r) / (1+c) with c = kappa / ||f||_n,
 * where S_a is the Reinsch smoother at level a = 2 n gamma. c solves c ||f(c)||_n = kappa.
 */
inline Vector sobolev_squared_composite(const ProxProblem& pb)
{
    const Vector& r = pb.r;
    const Vector& w = pb.weights;
    const double norm_r = weighted_norm(r, w);
    if (norm_r <= pb.kappa) return Vector::Zero(r.size());
    if (pb.kappa == 0.0) return sobolev_squared_prox(pb.knots, r, w, pb.gamma);
    if (pb.knots.size() < 3 || pb.gamma == 0.0) return soft_scale(r, w, pb.kappa);

    const SobolevOperator op = SobolevOperator::build(pb.knots);
    const double alpha = 2.0 * pb.n() * pb.gamma;
    auto fit = [&](double c) { return Vector(reinsch_smooth(op, r, w, alpha / (1.0 + c)) / (1.0 + c)); };
    auto h = [&](double c, Vector& f) {
        f = fit(c);
        return c * weighted_norm(f, w);
    };

    Vector f;
    double lo = pb.kappa / (norm_r - pb.kappa);
    double hi = 2.0 * lo;
    while (h(hi, f) < pb.kappa) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) throw SolverError("squared Sobolev composite could not bracket", pb.kappa);
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        const double val = h(mid, f);
        if (std::abs(val - pb.kappa) <= 1e-14 * pb.kappa || hi / lo - 1.0 < 1e-15) return f;
        if (val < pb.kappa) lo = mid;
        else hi = mid;
    }
    return f;
}

} // namespace detail

/**
 * Full subproblem. For seminorm and cone-indicator penalties the answer is the
 * structure-only solution soft-scaled by kappa. The squared Sobolev penalty
 * does not factor that way and gets an exact scalar root-find instead.
 */
inline Vector prox_composite(const ProxProblem& pb, ProxWarmStart* warm = nullptr)
{
    pb.validate();
    if (is_squared(pb.spec) && pb.gamma > 0.0) return detail::sobolev_squared_composite(pb);
    return soft_scale(prox_structure(pb, warm), pb.weights, pb.kappa);
}

/// Objective of the univariate subproblem at f.
inline double prox_objective(const ProxProblem& pb, const Vector& f)
{
    const Vector diff = pb.r - f;
    double obj = 0.5 * diff.cwiseAbs2().dot(pb.weights) / pb.n();
    if (pb.gamma != 0.0) obj += pb.gamma * penalty_value(pb.knots, f, pb.spec);
    return obj + pb.kappa * weighted_norm(f, pb.weights);
}

} // namespace gsam::prox
