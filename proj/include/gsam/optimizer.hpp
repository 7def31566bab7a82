#pragma once
#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <thread>
#include <vector>
#include <gsam/core.hpp>
#include <gsam/error.hpp>
#include <gsam/losses.hpp>
#include <gsam/model.hpp>
#include <gsam/penalty.hpp>
#include <gsam/prox/composite.hpp>

namespace gsam {

enum class StepPolicy
{
    fixed,
    backtracking,
    active_set,
};

/// One proximal-gradient step as accepted, with the pieces of the quadratic surrogate.
struct StepRecord
{
    int iteration = 0;
    double step = 0.0;
    double loss_at_y = 0.0;
    double grad_dot_delta = 0.0;
    double delta_sq = 0.0;
    double loss_new = 0.0;
    int backtracks = 0;
    bool restarted = false;

    double surrogate() const { return loss_at_y + grad_dot_delta + delta_sq / (2.0 * step); }
};

struct FitTrace
{
    /// Objective after every iteration (proximal gradient) or sweep (coordinate descent); entry 0 is the start.
    std::vector<double> objective;
    std::vector<StepRecord> steps;
};

struct FitOptions
{
    int max_iter = 2000;
    /// Stop when |F_k - F_{k+1}| <= rel_tol * |F_k|.
    double rel_tol = 1e-7;
    /// Additional requirement on the largest change of a fitted value (0 disables it).
    double x_tol = 0.0;
    bool acceleration = true;
    StepPolicy step_policy = StepPolicy::active_set;
    /// Step size for StepPolicy::fixed.
    double step = 0.0;
    double shrink = 0.5;
    std::optional<double> omega;
    const AdditiveModel* warm_start = nullptr;
    int threads = 1;
    FitTrace* trace = nullptr;

    void validate() const
    {
        if (max_iter < 1) throw ArgumentError("max_iter must be at least 1");
        if (!(rel_tol > 0.0)) throw ArgumentError("rel_tol must be positive");
        if (!(x_tol >= 0.0)) throw ArgumentError("x_tol must be nonnegative");
        if (!(shrink > 0.0 && shrink < 1.0)) throw ArgumentError("shrink must lie in (0, 1)");
        if (step_policy == StepPolicy::fixed && !(step > 0.0)) throw ArgumentError("fixed step policy needs step > 0");
        if (omega && (*omega < 0.0 || *omega > 1.0)) throw ArgumentError("omega must lie in [0, 1]");
        if (threads < 1) throw ArgumentError("threads must be at least 1");
    }
};

namespace detail {

inline void check_fit_inputs(const Dataset& data, const PenaltySpec& spec, double lambda)
{
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ArgumentError("lambda must be positive and finite");
    validate(spec);
    if (std::holds_alternative<MatrixSeminorm>(spec)) {
        throw ArgumentError("matrix seminorm penalties act on a fixed knot set and are not supported by the additive fit");
    }
    if (data.n() < 2) throw ArgumentError("need at least 2 observations");
}

/// Iterate of the additive fit: intercept, centered knot values per feature, and the link values.
struct FitState
{
    double beta = 0.0;
    std::vector<Vector> f;
    Vector theta;
};

class Problem
{
public:
    Problem(const Dataset& data, LossKind loss, const PenaltySpec& spec, double lambda, std::optional<double> omega)
        : data_(data), loss_(loss), spec_(spec), lambda_(lambda), omega_(omega), weights_(penalty_weights(lambda, omega))
    {
        check_responses(loss, data.y);
        grids_.reserve(data.p());
        for (Index j = 0; j < data.p(); ++j) grids_.push_back(FeatureGrid::build(data, j));
    }

    const Dataset& data() const { return data_; }
    LossKind loss() const { return loss_; }
    const PenaltySpec& spec() const { return spec_; }
    const PenaltyWeights& weights() const { return weights_; }
    const FeatureGrid& grid(Index j) const { return grids_[j]; }
    Index p() const { return data_.p(); }
    double n() const { return static_cast<double>(data_.n()); }

    void refresh_theta(FitState& s) const
    {
        s.theta = Vector::Constant(data_.n(), s.beta);
        for (Index j = 0; j < p(); ++j) {
            if (s.f[j].cwiseAbs().maxCoeff() == 0.0) continue;
            grids_[j].scatter_add(s.f[j], s.theta);
        }
    }

    FitState initial_state(const AdditiveModel* warm) const
    {
        FitState s;
        s.f.resize(p());
        for (Index j = 0; j < p(); ++j) s.f[j] = Vector::Zero(grids_[j].size());
        if (warm == nullptr) {
            s.beta = intercept_only_optimum(loss_, data_.y);
        } else {
            if (warm->p() != p()) throw ArgumentError("warm start has a different number of components");
            s.beta = warm->intercept;
            for (Index j = 0; j < p(); ++j) {
                const auto& c = warm->components[j];
                if (c.is_zero()) continue;
                const auto& g = grids_[j];
                for (Index k = 0; k < g.size(); ++k) s.f[j](k) = c.evaluate(g.knots(k));
                const double mean = weighted_mean(s.f[j], g.weights);
                s.f[j].array() -= mean;
                s.beta += mean;
            }
        }
        refresh_theta(s);
        return s;
    }

    double component_penalty(Index j, const Vector& f) const
    {
        if (f.cwiseAbs().maxCoeff() == 0.0) return 0.0;
        double v = weights_.sparsity * weighted_norm(f, grids_[j].weights);
        if (weights_.structure != 0.0) v += weights_.structure * penalty_value(grids_[j].knots, f, spec_);
        return v;
    }

    double objective(const FitState& s) const
    {
        double v = mean_loss(loss_, data_.y, s.theta);
        for (Index j = 0; j < p(); ++j) v += component_penalty(j, s.f[j]);
        return v;
    }

    AdditiveModel to_model(const FitState& s, int iterations, double obj, bool converged) const
    {
        AdditiveModel m;
        m.intercept = s.beta;
        m.loss = loss_;
        m.lambda = lambda_;
        m.omega = omega_;
        m.penalty = spec_;
        m.components.resize(p());
        for (Index j = 0; j < p(); ++j) m.components[j] = {grids_[j].knots, s.f[j], default_interp(spec_)};
        m.diagnostics = {iterations, obj, converged};
        return m;
    }

private:
    const Dataset& data_;
    LossKind loss_;
    PenaltySpec spec_;
    double lambda_;
    std::optional<double> omega_;
    PenaltyWeights weights_;
    std::vector<FeatureGrid> grids_;
};

inline double max_change(const FitState& a, const FitState& b)
{
    double d = std::abs(a.beta - b.beta);
    for (std::size_t j = 0; j < a.f.size(); ++j) {
        if (a.f[j].size() > 0) d = std::max(d, (a.f[j] - b.f[j]).cwiseAbs().maxCoeff());
    }
    return d;
}

/// Runs body(j) for every feature, split over up to `threads` threads.
template <class Body>
void for_each_feature(Index p, int threads, Body&& body)
{
    const int use = static_cast<int>(std::min<Index>(threads, p));
    if (use <= 1) {
        for (Index j = 0; j < p; ++j) body(j);
        return;
    }
    std::vector<std::exception_ptr> errors(use);
    std::vector<std::thread> pool;
    pool.reserve(use - 1);
    auto work = [&](int w) {
        try {
            for (Index j = w; j < p; j += use) body(j);
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    for (int w = 1; w < use; ++w) pool.emplace_back(work, w);
    work(0);
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

} // namespace detail

/**
 * Accelerated proximal gradient for the additive objective
 *     mean loss(beta + sum f_j) + lambda^2 sum P(f_j) + lambda sum ||f_j||_n.
 *
 * Each step takes a gradient step on the loss in the (beta, f_1..f_p) space with
 * the empirical inner product and applies the univariate composite prox to every
 * component. Unless the step is fixed, a step is accepted only when the quadratic
 * surrogate bounds the loss at the new point; otherwise the step shrinks. With
 * acceleration, an objective increase discards the momentum and redoes the step
 * from the current iterate. The first iterate is the intercept-only fit.
 */
inline AdditiveModel prox_gradient_fit(const Dataset& data, LossKind loss, const PenaltySpec& spec, double lambda,
                                       const FitOptions& options = {})
{
    options.validate();
    detail::check_fit_inputs(data, spec, lambda);
    const detail::Problem pb(data, loss, spec, lambda, options.omega);
    const Index p = pb.p();
    const double nobs = pb.n();

    detail::FitState x = pb.initial_state(options.warm_start);
    detail::FitState x_prev = x;
    double obj = pb.objective(x);
    if (!std::isfinite(obj)) throw DivergenceError(0);
    if (options.trace) options.trace->objective.push_back(obj);

    std::vector<prox::ProxWarmStart> warm(p);
    double momentum_t = 1.0;
    double t_prev = 0.0;

    // one prox-gradient step from y with step t; fills the surrogate pieces
    auto step_from = [&](const detail::FitState& y, double t, StepRecord& rec) {
        Vector g(data.n());
        for (Index i = 0; i < data.n(); ++i) g(i) = loss_grad(loss, data.y(i), y.theta(i));
        const double gmean = g.mean();
        detail::FitState out;
        out.f.resize(p);
        std::vector<double> shift(p, 0.0);
        detail::for_each_feature(p, options.threads, [&](Index j) {
            const auto& grid = pb.grid(j);
            Vector target = y.f[j] - t * (grid.aggregate(g).array() - gmean).matrix();
            target.array() -= weighted_mean(target, grid.weights);
            prox::ProxProblem sub{std::move(target), grid.weights, grid.knots, t * pb.weights().structure,
                                  t * pb.weights().sparsity, spec};
            Vector f = prox::prox_composite(sub, &warm[j]);
            if (f.cwiseAbs().maxCoeff() > 0.0) {
                shift[j] = weighted_mean(f, grid.weights);
                f.array() -= shift[j];
            }
            out.f[j] = std::move(f);
        });
        out.beta = y.beta - t * gmean;
        for (double s : shift) out.beta += s;
        pb.refresh_theta(out);

        rec.step = t;
        rec.loss_at_y = mean_loss(loss, data.y, y.theta);
        rec.loss_new = mean_loss(loss, data.y, out.theta);
        rec.grad_dot_delta = g.dot(out.theta - y.theta) / nobs;
        double dsq = (out.beta - y.beta) * (out.beta - y.beta);
        for (Index j = 0; j < p; ++j) {
            const Vector d = out.f[j] - y.f[j];
            dsq += d.cwiseAbs2().dot(pb.grid(j).weights) / nobs;
        }
        rec.delta_sq = dsq;
        return out;
    };

    auto majorized = [](const StepRecord& rec) {
        return rec.loss_new <= rec.surrogate() + 1e-12 * (1.0 + std::abs(rec.loss_at_y));
    };

    auto accepted_step = [&](const detail::FitState& y, int iter, StepRecord& rec) {
        const double curv = local_curvature_bound(loss, y.theta);
        double t = 0.0;
        switch (options.step_policy) {
            case StepPolicy::fixed: t = options.step; break;
            case StepPolicy::backtracking: t = t_prev > 0.0 ? t_prev / options.shrink : 1.0 / curv; break;
            case StepPolicy::active_set: {
                Index active = 0;
                for (Index j = 0; j < p; ++j) active += y.f[j].cwiseAbs().maxCoeff() > 0.0 ? 1 : 0;
                t = 1.0 / (curv * static_cast<double>(active + 1));
                break;
            }
        }
        rec.iteration = iter;
        rec.backtracks = 0;
        for (;;) {
            detail::FitState out = step_from(y, t, rec);
            if (options.step_policy == StepPolicy::fixed || majorized(rec)) {
                t_prev = t;
                return out;
            }
            t *= options.shrink;
            ++rec.backtracks;
            if (t < 1e-300) throw NumericalError("step size underflow while backtracking");
        }
    };

    bool converged = false;
    int iter = 0;
    for (iter = 1; iter <= options.max_iter; ++iter) {
        detail::FitState y;
        const double next_t = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum_t * momentum_t));
        const double beta_k = options.acceleration ? (momentum_t - 1.0) / next_t : 0.0;
        if (beta_k > 0.0) {
            y.beta = x.beta + beta_k * (x.beta - x_prev.beta);
            y.f.resize(p);
            for (Index j = 0; j < p; ++j) y.f[j] = x.f[j] + beta_k * (x.f[j] - x_prev.f[j]);
            y.theta = x.theta + beta_k * (x.theta - x_prev.theta);
        } else {
            y = x;
        }

        StepRecord rec;
        detail::FitState x_new = accepted_step(y, iter, rec);
        double obj_new = pb.objective(x_new);
        momentum_t = next_t;
        if (options.acceleration && beta_k > 0.0 && !(obj_new <= obj)) {
            momentum_t = 1.0;
            x_new = accepted_step(x, iter, rec);
            obj_new = pb.objective(x_new);
            rec.restarted = true;
        }
        if (!std::isfinite(obj_new)) throw DivergenceError(iter);
        if (options.trace) {
            options.trace->steps.push_back(rec);
            options.trace->objective.push_back(obj_new);
        }

        const double change = detail::max_change(x, x_new);
        const bool small_obj = std::abs(obj - obj_new) <= options.rel_tol * std::abs(obj);
        x_prev = std::move(x);
        x = std::move(x_new);
        obj = obj_new;
        if (small_obj && (options.x_tol == 0.0 || change <= options.x_tol)) {
            converged = true;
            break;
        }
    }
    return pb.to_model(x, std::min(iter, options.max_iter), obj, converged);
}

namespace detail {

/// One sweep of exact block minimization for squared-error loss. Returns the updated state.
inline void bcd_sweep(const Problem& pb, FitState& s, std::vector<prox::ProxWarmStart>& warm)
{
    const Dataset& data = pb.data();
    const Index p = pb.p();
    Vector fitted = s.theta.array() - s.beta;
    s.beta = (data.y - fitted).mean();
    Vector residual = data.y - fitted;
    residual.array() -= s.beta;
    for (Index j = 0; j < p; ++j) {
        const auto& grid = pb.grid(j);
        const bool was_zero = s.f[j].cwiseAbs().maxCoeff() == 0.0;
        if (!was_zero) grid.scatter_add(s.f[j], residual);  // residual is now r_{-j}
        Vector target = grid.aggregate(residual);
        target.array() -= weighted_mean(target, grid.weights);
        prox::ProxProblem sub{std::move(target), grid.weights, grid.knots, 0.5 * pb.weights().structure,
                              0.5 * pb.weights().sparsity, pb.spec()};
        Vector f = prox::prox_composite(sub, &warm[j]);
        if (f.cwiseAbs().maxCoeff() > 0.0) f.array() -= weighted_mean(f, grid.weights);
        // an inexact inner solve must never undo progress; near the optimum the objective is flat,
        // so differences at rounding level do not count
        const double old_obj = prox::prox_objective(sub, s.f[j]);
        if (prox::prox_objective(sub, f) > old_obj + 1e-13 * std::max(1.0, std::abs(old_obj))) f = s.f[j];
        s.f[j] = std::move(f);
        if (s.f[j].cwiseAbs().maxCoeff() > 0.0) grid.scatter_add(s.f[j], residual, -1.0);
    }
    pb.refresh_theta(s);
}

} // namespace detail

/**
 * Block coordinate descent for squared-error loss. A sweep sets the intercept to
 * the mean residual, then for each feature forms the partial residual, averages
 * it over tied covariate values, centers it and applies the composite prox with
 * half weights (the squared loss has curvature 2).
 */
inline AdditiveModel block_coordinate_fit(const Dataset& data, const PenaltySpec& spec, double lambda,
                                          const FitOptions& options = {})
{
    options.validate();
    detail::check_fit_inputs(data, spec, lambda);
    const detail::Problem pb(data, LossKind::gaussian, spec, lambda, options.omega);
    detail::FitState s = pb.initial_state(options.warm_start);
    std::vector<prox::ProxWarmStart> warm(pb.p());
    double obj = pb.objective(s);
    if (options.trace) options.trace->objective.push_back(obj);
    bool converged = false;
    int iter = 0;
    for (iter = 1; iter <= options.max_iter; ++iter) {
        const detail::FitState before = s;
        detail::bcd_sweep(pb, s, warm);
        const double obj_new = pb.objective(s);
        if (!std::isfinite(obj_new)) throw DivergenceError(iter);
        if (options.trace) options.trace->objective.push_back(obj_new);
        const bool small_obj = std::abs(obj - obj_new) <= options.rel_tol * std::abs(obj);
        const double change = detail::max_change(before, s);
        obj = obj_new;
        if (small_obj && (options.x_tol == 0.0 || change <= options.x_tol)) {
            converged = true;
            break;
        }
    }
    return pb.to_model(s, std::min(iter, options.max_iter), obj, converged);
}

/// Applies one coordinate-descent sweep to a fitted Gaussian model (fixed-point checks).
inline AdditiveModel bcd_sweep(const Dataset& data, const AdditiveModel& model)
{
    detail::check_fit_inputs(data, model.penalty, model.lambda);
    if (model.loss != LossKind::gaussian) throw ArgumentError("coordinate descent sweeps need squared-error loss");
    const detail::Problem pb(data, LossKind::gaussian, model.penalty, model.lambda, model.omega);
    detail::FitState s = pb.initial_state(&model);
    std::vector<prox::ProxWarmStart> warm(pb.p());
    detail::bcd_sweep(pb, s, warm);
    return pb.to_model(s, 1, pb.objective(s), true);
}

enum class Algorithm
{
    prox_gradient,
    block_coordinate,
};

inline AdditiveModel fit(const Dataset& data, LossKind loss, const PenaltySpec& spec, double lambda,
                         const FitOptions& options = {}, Algorithm algo = Algorithm::prox_gradient)
{
    if (algo == Algorithm::block_coordinate) {
        if (loss != LossKind::gaussian) throw ArgumentError("block coordinate descent needs squared-error loss");
        return block_coordinate_fit(data, spec, lambda, options);
    }
    return prox_gradient_fit(data, loss, spec, lambda, options);
}

namespace detail {

/// Centered knot averages of the negative loss gradient at the intercept-only fit, one per feature.
inline std::vector<std::pair<FeatureGrid, Vector>> null_gradients(const Dataset& data, LossKind loss)
{
    check_responses(loss, data.y);
    const double beta = intercept_only_optimum(loss, data.y);
    Vector g(data.n());
    for (Index i = 0; i < data.n(); ++i) g(i) = -loss_grad(loss, data.y(i), beta);
    std::vector<std::pair<FeatureGrid, Vector>> out;
    out.reserve(data.p());
    for (Index j = 0; j < data.p(); ++j) {
        FeatureGrid grid = FeatureGrid::build(data, j);
        Vector c = grid.aggregate(g);
        c.array() -= weighted_mean(c, grid.weights);
        out.emplace_back(std::move(grid), std::move(c));
    }
    return out;
}

} // namespace detail

/**
 * Upper bound on the smallest lambda giving an all-zero fit: max_j ||c_j||_n / (1 - omega),
 * where c_j is the centered knot average of the negative loss gradient at the
 * intercept-only fit. For squared-error loss and distinct covariate values this is
 * 2 ||y - ybar||_n.
 */
inline double lambda_max_bound(const Dataset& data, LossKind loss, std::optional<double> omega = {})
{
    const double sparse = omega ? 1.0 - *omega : 1.0;
    if (omega && (*omega < 0.0 || *omega > 1.0)) throw ArgumentError("omega must lie in [0, 1]");
    double best = 0.0;
    for (const auto& [grid, c] : detail::null_gradients(data, loss)) best = std::max(best, weighted_norm(c, grid.weights));
    if (best == 0.0) return 0.0;
    if (sparse == 0.0) return std::numeric_limits<double>::infinity();
    return best / sparse;
}

/**
 * Smallest lambda at which the fit is all zero. Feature j is null at lambda exactly when
 * ||S(c_j)||_n <= (1 - omega) lambda, with S the structure-only prox at level omega lambda^2
 * (and c_j as in lambda_max_bound). The left side does not increase with lambda, so each
 * feature's threshold is found by bisection. The result is pushed up by a relative
 * 1e-10 so that rounding in the fit's own prox calls cannot leave a residue there.
 * Squared penalties have no structure effect at zero, so their threshold is the bound itself.
 */
inline double lambda_max(const Dataset& data, LossKind loss, const PenaltySpec& spec, std::optional<double> omega = {})
{
    validate(spec);
    if (omega && (*omega < 0.0 || *omega > 1.0)) throw ArgumentError("omega must lie in [0, 1]");
    const double om = omega.value_or(0.0);
    const auto grads = detail::null_gradients(data, loss);
    double result = 0.0;
    for (const auto& [grid, c] : grads) {
        const double cn = weighted_norm(c, grid.weights);
        if (cn == 0.0) continue;
        if (om == 1.0) return std::numeric_limits<double>::infinity();
        double hi = cn / (1.0 - om);
        if (is_squared(spec) || (omega && om == 0.0)) {
            result = std::max(result, hi);
            continue;
        }
        auto excess = [&](double lam) {
            const PenaltyWeights w = penalty_weights(lam, omega);
            prox::ProxProblem sub{c, grid.weights, grid.knots, w.structure, 0.0, spec};
            return weighted_norm(prox::prox_structure(sub), grid.weights) - w.sparsity;
        };
        if (hi <= result || (result > 0.0 && excess(result) <= 0.0)) continue;
        double lo = result;
        for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (excess(mid) > 0.0) lo = mid;
            else hi = mid;
        }
        result = std::max(result, hi);
    }
    return result * (1.0 + 1e-10);
}

/**
 * Active-set sizes along a lambda grid with a Sobolev penalty, either the seminorm
 * (squared = false) or the squared seminorm (squared = true). Fits run from the
 * largest lambda with warm starts.
 */
inline std::vector<Index> sparsity_pattern_probe(const Dataset& data, bool squared, const std::vector<double>& lambdas,
                                                 LossKind loss = LossKind::gaussian, FitOptions options = {})
{
    std::vector<double> sorted = lambdas;
    std::vector<std::size_t> order(lambdas.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lambdas[a] > lambdas[b]; });
    std::vector<Index> sizes(lambdas.size(), 0);
    std::optional<AdditiveModel> prev;
    for (std::size_t idx : order) {
        options.warm_start = prev ? &*prev : nullptr;
        AdditiveModel m = prox_gradient_fit(data, loss, SobolevSpline{squared}, lambdas[idx], options);
        sizes[idx] = m.active_size();
        prev = std::move(m);
    }
    return sizes;
}

} // namespace gsam
