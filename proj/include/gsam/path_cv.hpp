#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>
#include <gsam/core.hpp>
#include <gsam/error.hpp>
#include <gsam/losses.hpp>
#include <gsam/model.hpp>
#include <gsam/optimizer.hpp>

namespace gsam {

enum class CvRule
{
    min,
    one_se,
};

inline std::string to_string(CvRule rule) { return rule == CvRule::min ? "min" : "1se"; }

inline CvRule parse_rule(const std::string& name)
{
    if (name == "min") return CvRule::min;
    if (name == "1se" || name == "one_se") return CvRule::one_se;
    throw ArgumentError("unknown selection rule '" + name + "' (expected min or 1se)");
}

struct PathResult
{
    std::vector<double> lambdas;
    std::vector<AdditiveModel> models;
    std::vector<double> cv_mean;
    std::vector<double> cv_se;
    std::optional<double> selected_lambda_min;
    std::optional<double> selected_lambda_1se;
    /// Index into `models` chosen by the requested rule, when cross-validation ran.
    std::optional<std::size_t> selected;
    /// Set when a fit along the path failed; models holds the fits before it.
    std::optional<std::string> failure;

    std::vector<Index> active_sizes() const
    {
        std::vector<Index> out;
        out.reserve(models.size());
        for (const auto& m : models) out.push_back(m.active_size());
        return out;
    }
};

/// n_lambda log-spaced values from lambda_max down to ratio * lambda_max.
inline std::vector<double> lambda_grid(double lambda_max_value, int n_lambda = 50, double ratio = 1e-3)
{
    if (n_lambda < 2) throw ArgumentError("n_lambda must be at least 2");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ArgumentError("ratio must lie in (0, 1)");
    if (!(lambda_max_value > 0.0)) throw DegenerateDataError("lambda_max is zero: the response carries no signal to fit");
    if (!std::isfinite(lambda_max_value)) throw ArgumentError("lambda_max is not finite");
    std::vector<double> grid(n_lambda);
    const double step = std::log(ratio) / (n_lambda - 1);
    for (int k = 0; k < n_lambda; ++k) grid[k] = lambda_max_value * std::exp(step * k);
    grid.front() = lambda_max_value;
    grid.back() = lambda_max_value * ratio;
    return grid;
}

inline std::vector<double> lambda_grid(const Dataset& data, LossKind loss, const PenaltySpec& spec, int n_lambda = 50,
                                       double ratio = 1e-3, std::optional<double> omega = {})
{
    return lambda_grid(lambda_max(data, loss, spec, omega), n_lambda, ratio);
}

namespace detail {

inline void check_grid(const std::vector<double>& grid)
{
    if (grid.empty()) throw ArgumentError("lambda grid is empty");
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!(grid[k] > 0.0) || !std::isfinite(grid[k])) throw ArgumentError("lambda grid entries must be positive");
        if (k > 0 && !(grid[k] < grid[k - 1])) throw ArgumentError("lambda grid must be strictly decreasing");
    }
}

} // namespace detail

/// Fits along the grid from the largest lambda, warm-starting each fit from the previous one.
inline PathResult fit_path(const Dataset& data, const PenaltySpec& spec, LossKind loss, const std::vector<double>& grid,
                           FitOptions options = {}, Algorithm algo = Algorithm::prox_gradient)
{
    detail::check_grid(grid);
    PathResult out;
    out.lambdas = grid;
    out.models.reserve(grid.size());
    for (double lam : grid) {
        options.warm_start = out.models.empty() ? nullptr : &out.models.back();
        try {
            out.models.push_back(fit(data, loss, spec, lam, options, algo));
        } catch (const NumericalError& e) {
            out.failure = "lambda " + std::to_string(lam) + ": " + e.what();
            out.lambdas.resize(out.models.size());
            break;
        }
    }
    return out;
}

/// Fold label of every row: a seeded shuffle dealt round-robin into k folds.
inline std::vector<int> fold_assignment(Index n, int k, std::uint64_t seed)
{
    if (k < 2) throw ArgumentError("need at least 2 folds");
    if (n < 2 * static_cast<Index>(k)) throw ArgumentError("need at least 2 observations per fold");
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold(n);
    for (Index pos = 0; pos < n; ++pos) fold[order[pos]] = static_cast<int>(pos % k);
    return fold;
}

struct FoldResult
{
    std::vector<AdditiveModel> models;
    /// Mean held-out loss per lambda.
    std::vector<double> losses;
};

/// Trains the path on `train` rows and scores each model on `valid` rows only.
inline FoldResult fit_fold(const Dataset& data, const PenaltySpec& spec, LossKind loss, const std::vector<double>& grid,
                           const std::vector<Index>& train, const std::vector<Index>& valid, const FitOptions& options = {},
                           Algorithm algo = Algorithm::prox_gradient)
{
    const Dataset tr = data.subset_rows(train);
    const Dataset va = data.subset_rows(valid);
    PathResult path = fit_path(tr, spec, loss, grid, options, algo);
    if (path.failure) throw NumericalError(*path.failure);
    FoldResult out;
    out.losses.reserve(grid.size());
    for (const auto& m : path.models) out.losses.push_back(mean_loss(loss, va.y, predict(m, va.x)));
    out.models = std::move(path.models);
    return out;
}

struct CvOptions
{
    int k = 5;
    std::uint64_t seed = 1;
    CvRule rule = CvRule::one_se;
    /// Folds run on up to this many threads.
    int threads = 1;
    FitOptions fit;
    Algorithm algo = Algorithm::prox_gradient;
};

/// Index of the smallest mean (first on ties) and of the largest lambda within one standard error of it.
inline std::pair<std::size_t, std::size_t> select_indices(const std::vector<double>& mean, const std::vector<double>& se)
{
    if (mean.empty() || mean.size() != se.size()) throw ArgumentError("cv statistics are empty or misaligned");
    const auto best = static_cast<std::size_t>(std::min_element(mean.begin(), mean.end()) - mean.begin());
    const double bound = mean[best] + se[best];
    std::size_t one_se = best;
    for (std::size_t k = 0; k <= best; ++k) {
        if (mean[k] <= bound) {
            one_se = k;
            break;
        }
    }
    return {best, one_se};
}

/**
 * K-fold cross-validation over a decreasing grid. Each fold fits the whole path on
 * its training rows; the statistics are the fold-average held-out loss and its
 * standard error sd / sqrt(K). The returned models are the full-data path, so the
 * selected model is the full-data refit at the chosen lambda.
 */
inline PathResult kfold_cv(const Dataset& data, const PenaltySpec& spec, LossKind loss, const std::vector<double>& grid,
                           const CvOptions& cv = {})
{
    detail::check_grid(grid);
    if (cv.threads < 1) throw ArgumentError("threads must be at least 1");
    const std::vector<int> fold = fold_assignment(data.n(), cv.k, cv.seed);
    std::vector<std::vector<double>> losses(cv.k);
    std::vector<std::exception_ptr> errors(cv.k);

    auto run = [&](int f) {
        std::vector<Index> train, valid;
        for (Index i = 0; i < data.n(); ++i) (fold[i] == f ? valid : train).push_back(i);
        try {
            losses[f] = fit_fold(data, spec, loss, grid, train, valid, cv.fit, cv.algo).losses;
        } catch (const DegenerateDataError& e) {
            errors[f] = std::make_exception_ptr(DegenerateDataError("fold " + std::to_string(f + 1) + ": " + e.what()));
        } catch (...) {
            errors[f] = std::current_exception();
        }
    };
    detail::for_each_feature(cv.k, cv.threads, [&](Index f) { run(static_cast<int>(f)); });
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    PathResult out = fit_path(data, spec, loss, grid, cv.fit, cv.algo);
    if (out.failure) throw NumericalError(*out.failure);
    const std::size_t m = grid.size();
    out.cv_mean.assign(m, 0.0);
    out.cv_se.assign(m, 0.0);
    for (std::size_t l = 0; l < m; ++l) {
        double sum = 0.0;
        for (int f = 0; f < cv.k; ++f) sum += losses[f][l];
        const double mean = sum / cv.k;
        double ss = 0.0;
        for (int f = 0; f < cv.k; ++f) ss += (losses[f][l] - mean) * (losses[f][l] - mean);
        out.cv_mean[l] = mean;
        out.cv_se[l] = std::sqrt(ss / (cv.k - 1)) / std::sqrt(static_cast<double>(cv.k));
    }
    const auto [best, one_se] = select_indices(out.cv_mean, out.cv_se);
    out.selected_lambda_min = grid[best];
    out.selected_lambda_1se = grid[one_se];
    out.selected = cv.rule == CvRule::min ? best : one_se;
    return out;
}

} // namespace gsam
