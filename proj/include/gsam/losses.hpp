#pragma once
#include <algorithm>
#include <cmath>
#include <string>
#include <gsam/core.hpp>

namespace gsam {

enum class LossKind
{
    gaussian,
    bernoulli_logit,
    poisson_log,
};

inline constexpr double poisson_clamp = 30.0;

inline std::string to_string(LossKind kind)
{
    switch (kind) {
        case LossKind::gaussian: return "gaussian";
        case LossKind::bernoulli_logit: return "logistic";
        case LossKind::poisson_log: return "poisson";
    }
    return "unknown";
}

inline LossKind parse_loss(const std::string& name)
{
    if (name == "gaussian") return LossKind::gaussian;
    if (name == "logistic" || name == "binomial") return LossKind::bernoulli_logit;
    if (name == "poisson") return LossKind::poisson_log;
    throw ArgumentError("unknown loss '" + name + "'");
}

inline void check_response(LossKind kind, double y)
{
    if (!std::isfinite(y)) throw ArgumentError("non-finite response");
    if (kind == LossKind::bernoulli_logit && y != 0.0 && y != 1.0) {
        throw ArgumentError("logistic loss needs responses in {0, 1}");
    }
    if (kind == LossKind::poisson_log && y < 0.0) throw ArgumentError("poisson loss needs nonnegative responses");
}

inline void check_responses(LossKind kind, const Vector& y)
{
    for (Index i = 0; i < y.size(); ++i) check_response(kind, y(i));
}

namespace detail {

inline double log1p_exp(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

inline double sigmoid(double t)
{
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

} // namespace detail

/**
 * Negative log-likelihood (up to constants) of one observation, as a function
 * of the link-scale value theta. Each has the form a*y*theta + b(theta).
 */
inline double loss_value(LossKind kind, double y, double theta)
{
    switch (kind) {
        case LossKind::gaussian: return (y - theta) * (y - theta);
        case LossKind::bernoulli_logit: return detail::log1p_exp(theta) - y * theta;
        case LossKind::poisson_log:
            return std::exp(std::clamp(theta, -poisson_clamp, poisson_clamp)) - y * theta;
    }
    return 0.0;
}

/// Derivative of loss_value in theta. The optimizer's pseudo-residual r_i is this value.
inline double loss_grad(LossKind kind, double y, double theta)
{
    switch (kind) {
        case LossKind::gaussian: return 2.0 * (theta - y);
        case LossKind::bernoulli_logit: return detail::sigmoid(theta) - y;
        case LossKind::poisson_log: return std::exp(std::clamp(theta, -poisson_clamp, poisson_clamp)) - y;
    }
    return 0.0;
}

/// Global bound on the second derivative. Poisson has none; see local_curvature_bound.
inline double curvature_bound(LossKind kind)
{
    switch (kind) {
        case LossKind::gaussian: return 2.0;
        case LossKind::bernoulli_logit: return 0.25;
        case LossKind::poisson_log: return std::exp(poisson_clamp);
    }
    return 0.0;
}

/// Curvature bound over the given link values (clamped for Poisson).
inline double local_curvature_bound(LossKind kind, const Vector& theta)
{
    if (kind != LossKind::poisson_log) return curvature_bound(kind);
    const double hi = std::clamp(theta.maxCoeff(), -poisson_clamp, poisson_clamp);
    return std::exp(hi);
}

inline double mean_loss(LossKind kind, const Vector& y, const Vector& theta)
{
    double s = 0.0;
    for (Index i = 0; i < y.size(); ++i) s += loss_value(kind, y(i), theta(i));
    return s / static_cast<double>(y.size());
}

/// Link value of the best constant fit (the intercept-only optimum).
inline double intercept_only_optimum(LossKind kind, const Vector& y)
{
    const double ybar = y.mean();
    switch (kind) {
        case LossKind::gaussian: return ybar;
        case LossKind::bernoulli_logit:
            if (ybar <= 0.0 || ybar >= 1.0) throw DegenerateDataError("logistic response is constant");
            return std::log(ybar / (1.0 - ybar));
        case LossKind::poisson_log:
            if (ybar <= 0.0) throw DegenerateDataError("poisson response is identically zero");
            return std::log(ybar);
    }
    return 0.0;
}

} // namespace gsam
