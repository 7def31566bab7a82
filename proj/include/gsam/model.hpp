#pragma once
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>
#include <gsam/core.hpp>
#include <gsam/losses.hpp>
#include <gsam/penalty.hpp>

namespace gsam {

/// One fitted univariate function, stored as values at the sorted distinct observed covariates.
struct ComponentFit
{
    Vector knots;
    Vector values;
    Interp interp = Interp::piecewise_linear;

    bool is_zero() const { return values.size() == 0 || values.cwiseAbs().maxCoeff() == 0.0; }

    /// Interpolated value; constant beyond the boundary knots.
    double evaluate(double x) const
    {
        const Index m = knots.size();
        if (m == 0) return 0.0;
        if (x <= knots(0)) return values(0);
        if (x >= knots(m - 1)) return values(m - 1);
        const double* begin = knots.data();
        const auto hi = static_cast<Index>(std::upper_bound(begin, begin + m, x) - begin);
        const Index lo = hi - 1;
        if (knots(lo) == x) return values(lo);
        if (interp == Interp::piecewise_constant) {
            // nearest knot; the exact midpoint goes to the left knot
            return (x - knots(lo) <= knots(hi) - x) ? values(lo) : values(hi);
        }
        const double s = (x - knots(lo)) / (knots(hi) - knots(lo));
        return (1.0 - s) * values(lo) + s * values(hi);
    }
};

struct Diagnostics
{
    int iterations = 0;
    double objective = 0.0;
    bool converged = false;
};

struct AdditiveModel
{
    double intercept = 0.0;
    std::vector<ComponentFit> components;
    LossKind loss = LossKind::gaussian;
    double lambda = 0.0;
    std::optional<double> omega;
    PenaltySpec penalty = TrendFilter{0};
    Diagnostics diagnostics;

    Index p() const { return static_cast<Index>(components.size()); }

    std::vector<Index> active_set() const
    {
        std::vector<Index> s;
        for (Index j = 0; j < p(); ++j) {
            if (!components[j].is_zero()) s.push_back(j);
        }
        return s;
    }

    Index active_size() const { return static_cast<Index>(active_set().size()); }
};

/// Structure and sparsity weights: (lambda^2, lambda), or (omega lambda^2, (1 - omega) lambda).
struct PenaltyWeights
{
    double structure;
    double sparsity;
};

inline PenaltyWeights penalty_weights(double lambda, std::optional<double> omega)
{
    if (omega) {
        if (*omega < 0.0 || *omega > 1.0) throw ArgumentError("omega must lie in [0, 1]");
        return {*omega * lambda * lambda, (1.0 - *omega) * lambda};
    }
    return {lambda * lambda, lambda};
}

inline double penalty_value(const ComponentFit& f, const PenaltySpec& spec)
{
    return penalty_value(f.knots, f.values, spec);
}

/// Link-scale predictions beta + sum_j f_j(x_new[., j]).
inline Vector predict(const AdditiveModel& model, const Matrix& x_new)
{
    if (x_new.cols() != model.p()) {
        throw ArgumentError("prediction matrix has " + std::to_string(x_new.cols()) + " columns, model has "
                            + std::to_string(model.p()) + " components");
    }
    Vector out = Vector::Constant(x_new.rows(), model.intercept);
    for (Index j = 0; j < model.p(); ++j) {
        const auto& c = model.components[j];
        if (c.is_zero()) continue;
        for (Index i = 0; i < x_new.rows(); ++i) out(i) += c.evaluate(x_new(i, j));
    }
    return out;
}

/// Mean loss + structure-weighted penalties + sparsity-weighted empirical norms.
inline double objective(const AdditiveModel& model, const Dataset& data)
{
    if (data.p() != model.p()) throw ArgumentError("model and data disagree on the number of features");
    const PenaltyWeights w = penalty_weights(model.lambda, model.omega);
    const Vector theta = predict(model, data.x);
    double total = mean_loss(model.loss, data.y, theta);
    for (Index j = 0; j < model.p(); ++j) {
        const auto& c = model.components[j];
        if (c.is_zero()) continue;
        Vector at_obs(data.n());
        for (Index i = 0; i < data.n(); ++i) at_obs(i) = c.evaluate(data.x(i, j));
        if (w.structure != 0.0) total += w.structure * penalty_value(c, model.penalty);
        total += w.sparsity * empirical_norm(at_obs);
    }
    if (!std::isfinite(total)) throw NumericalError("objective is not finite");
    return total;
}

} // namespace gsam
