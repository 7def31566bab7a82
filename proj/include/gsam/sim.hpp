#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>
#include <gsam/core.hpp>
#include <gsam/error.hpp>
#include <gsam/model.hpp>
#include <gsam/path_cv.hpp>

namespace gsam::sim {

inline constexpr double domain_lo = -2.5;
inline constexpr double domain_hi = 2.5;

/**
 * Four signal functions per scenario on [-2.5, 2.5]. These are representative
 * shapes, not the original figures:
 *   1  piecewise constant (steps)
 *   2  piecewise linear (hinges)
 *   3  smooth, strongly curved
 *   4  smooth, gently curved
 *   5  one of each kind: step, line, sinusoid, hinge
 */
class Scenario
{
public:
    explicit Scenario(int id) : id_(id)
    {
        if (id < 1 || id > 5) throw ArgumentError("scenario must be 1..5, got " + std::to_string(id));
        for (int k = 0; k < 4; ++k) offset_[k] = raw_mean(k);
    }

    int id() const { return id_; }

    /// Signal k (0..3) at x, centered under the uniform distribution on the domain.
    double operator()(int k, double x) const { return raw(k, x) - offset_[k]; }

private:
    double raw(int k, double x) const
    {
        using std::numbers::pi;
        switch (id_) {
            case 1:
                switch (k) {
                    case 0: return x > 0.0 ? 1.5 : -1.5;
                    case 1: return (x >= -1.0 && x < 1.0) ? 1.0 : -1.0;
                    case 2: return x > 1.5 ? 2.0 : 0.0;
                    default: return x < -1.5 ? -1.0 : (x < 0.5 ? 0.5 : 2.0);
                }
            case 2:
                switch (k) {
                    case 0: return std::abs(x);
                    case 1: return 2.0 * std::max(x - 0.5, 0.0);
                    case 2: return x;
                    default: return -std::abs(x + 1.0);
                }
            case 3:
                switch (k) {
                    case 0: return 1.5 * std::sin(pi * x / 2.0);
                    case 1: return 0.5 * x * x;
                    case 2: return 2.0 * std::exp(-x * x);
                    default: return std::sin(2.0 * x);
                }
            case 4:
                switch (k) {
                    case 0: return 2.0 * std::sin(x);
                    case 1: return 0.3 * x * x;
                    case 2: return std::cos(x);
                    default: return x * x * x / 8.0;
                }
            default:
                switch (k) {
                    case 0: return x > -0.5 ? 1.0 : -1.0;
                    case 1: return 0.8 * x;
                    case 2: return std::sin(2.0 * x);
                    default: return 1.5 * std::max(x, 0.0);
                }
        }
    }

    /// Midpoint rule on a fine grid; steps land between grid points.
    double raw_mean(int k) const
    {
        constexpr int cells = 200000;
        const double h = (domain_hi - domain_lo) / cells;
        double s = 0.0;
        for (int i = 0; i < cells; ++i) s += raw(k, domain_lo + (i + 0.5) * h);
        return s / cells;
    }

    int id_;
    std::array<double, 4> offset_{};
};

struct SimData
{
    Dataset data;
    /// True f_j at the observed points (n x p); columns beyond the fourth are zero.
    Matrix truth;
};

/// y_i = f1 + f2 + f3 + f4 + noise_sd * N(0, 1), x ~ U(-2.5, 2.5) elementwise.
inline SimData generate(int scenario, Index n, Index p, std::uint64_t seed, double noise_sd = 1.0)
{
    if (p < 4) throw ArgumentError("simulation needs p >= 4, got " + std::to_string(p));
    if (n < 2) throw ArgumentError("simulation needs n >= 2");
    const Scenario sc(scenario);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(domain_lo, domain_hi);
    std::normal_distribution<double> noise(0.0, 1.0);
    Matrix x(n, p);
    Matrix truth = Matrix::Zero(n, p);
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) x(i, j) = unif(rng);
        double s = 0.0;
        for (int k = 0; k < 4; ++k) {
            truth(i, k) = sc(k, x(i, k));
            s += truth(i, k);
        }
        y(i) = s + noise_sd * noise(rng);
    }
    return {Dataset::create(std::move(y), std::move(x)), std::move(truth)};
}

/// n^-1 sum_i (sum_j fhat_j(x_ij) - sum_j f0_j(x_ij))^2; the intercept is not part of either side.
inline double component_mse(const AdditiveModel& model, const Matrix& x, const Matrix& truth)
{
    if (x.rows() != truth.rows() || x.cols() != truth.cols() || x.cols() != model.p()) {
        throw ArgumentError("component_mse: model, design and truth disagree in shape");
    }
    if (x.rows() == 0) throw ArgumentError("component_mse: no observations");
    Vector diff = -truth.rowwise().sum();
    for (Index j = 0; j < model.p(); ++j) {
        const auto& c = model.components[j];
        if (c.is_zero()) continue;
        for (Index i = 0; i < x.rows(); ++i) diff(i) += c.evaluate(x(i, j));
    }
    return diff.squaredNorm() / static_cast<double>(x.rows());
}

enum class FeatureRole
{
    signal,
    uniform_noise,
    permuted_noise,
};

struct AugmentedData
{
    Dataset data;
    std::vector<FeatureRole> roles;
    /// For permuted columns, the original column they shuffle; -1 otherwise.
    std::vector<Index> source;
};

/**
 * Appends n_uniform columns drawn from U(0, 1) and n_permuted columns that are
 * row permutations of the original columns (cycling through them when there are
 * fewer). Original columns are labeled as signal.
 */
inline AugmentedData augment_with_noise(const Dataset& data, int n_uniform = 10, int n_permuted = 10,
                                        std::uint64_t seed = 1)
{
    if (n_uniform < 0 || n_permuted < 0) throw ArgumentError("noise column counts must be nonnegative");
    const Index n = data.n();
    const Index p0 = data.p();
    const Index p = p0 + n_uniform + n_permuted;
    Matrix x(n, p);
    x.leftCols(p0) = data.x;
    std::vector<FeatureRole> roles(p0, FeatureRole::signal);
    std::vector<Index> source(p0, -1);
    std::vector<std::string> names = data.feature_names;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int k = 0; k < n_uniform; ++k) {
        for (Index i = 0; i < n; ++i) x(i, p0 + k) = unif(rng);
        roles.push_back(FeatureRole::uniform_noise);
        source.push_back(-1);
        names.push_back("noise_unif_" + std::to_string(k + 1));
    }
    std::vector<Index> perm(n);
    for (int k = 0; k < n_permuted; ++k) {
        const Index src = k % p0;
        std::iota(perm.begin(), perm.end(), Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        const Index col = p0 + n_uniform + k;
        for (Index i = 0; i < n; ++i) x(i, col) = data.x(perm[i], src);
        roles.push_back(FeatureRole::permuted_noise);
        source.push_back(src);
        names.push_back("noise_perm_" + std::to_string(k + 1) + "_" + data.feature_names[src]);
    }
    return {Dataset::create(data.y, std::move(x), std::move(names)), std::move(roles), std::move(source)};
}

struct SelectionScore
{
    double tpr = 0.0;
    double fpr = 0.0;
};

/// TPR = |S & signal| / |signal|, FPR = |S & noise| / |noise| (0 when a group is empty).
inline SelectionScore score_selection(const std::vector<Index>& active, const std::vector<FeatureRole>& roles)
{
    Index signal = 0, noise = 0, hit = 0, false_hit = 0;
    for (auto r : roles) (r == FeatureRole::signal ? signal : noise) += 1;
    for (Index j : active) {
        if (j < 0 || j >= static_cast<Index>(roles.size())) throw ArgumentError("active index out of range");
        (roles[j] == FeatureRole::signal ? hit : false_hit) += 1;
    }
    SelectionScore s;
    if (signal > 0) s.tpr = static_cast<double>(hit) / static_cast<double>(signal);
    if (noise > 0) s.fpr = static_cast<double>(false_hit) / static_cast<double>(noise);
    return s;
}

enum class Selection
{
    test,
    cv,
};

struct ReplicateOptions
{
    int n_lambda = 50;
    double ratio = 1e-3;
    Selection select = Selection::test;
    /// Size of the independent test sample for Selection::test (0 means n).
    Index n_test = 0;
    double noise_sd = 1.0;
    CvOptions cv;
    FitOptions fit;
};

struct ReplicateResult
{
    double mse = 0.0;
    double lambda = 0.0;
    Index active = 0;
};

/// Seed of the independent test sample paired with a training seed.
inline std::uint64_t test_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

/**
 * One simulation replicate: fit the path on a fresh sample, choose lambda by the
 * squared prediction error on an independent sample (or by cross-validation), and
 * report the component MSE of the chosen fit at the training points.
 */
inline ReplicateResult run_replicate(int scenario, Index n, Index p, std::uint64_t seed, const PenaltySpec& spec,
                                     const ReplicateOptions& opt = {})
{
    const SimData train = generate(scenario, n, p, seed, opt.noise_sd);
    const auto grid = lambda_grid(train.data, LossKind::gaussian, spec, opt.n_lambda, opt.ratio, opt.fit.omega);
    std::size_t pick = 0;
    PathResult path;
    if (opt.select == Selection::test) {
        path = fit_path(train.data, spec, LossKind::gaussian, grid, opt.fit);
        if (path.failure) throw NumericalError(*path.failure);
        const SimData test = generate(scenario, opt.n_test > 0 ? opt.n_test : n, p, test_seed(seed), opt.noise_sd);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < path.models.size(); ++k) {
            const double err = mean_loss(LossKind::gaussian, test.data.y, predict(path.models[k], test.data.x));
            if (err < best) {
                best = err;
                pick = k;
            }
        }
    } else {
        CvOptions cv = opt.cv;
        cv.fit = opt.fit;
        path = kfold_cv(train.data, spec, LossKind::gaussian, grid, cv);
        pick = *path.selected;
    }
    const AdditiveModel& m = path.models[pick];
    return {component_mse(m, train.data.x, train.truth), grid[pick], m.active_size()};
}

struct PipelineOptions
{
    int n_uniform = 10;
    int n_permuted = 10;
    double train_fraction = 0.75;
    std::uint64_t seed = 1;
    LossKind loss = LossKind::gaussian;
    int n_lambda = 50;
    double ratio = 1e-3;
    CvOptions cv;
};

struct PipelineResult
{
    AugmentedData augmented;
    std::vector<Index> train_rows;
    std::vector<Index> test_rows;
    PathResult path;
    AdditiveModel model;
    /// Mean loss of the selected model on the held-out rows.
    double test_loss = 0.0;
    SelectionScore score;
};

/**
 * Noise-augmentation analysis: append labeled noise columns, split rows at random
 * into training and test parts, cross-validate on the training part, and score the
 * selected model on the test rows and on how many noise columns it keeps.
 * Seeds for augmentation, split and folds are derived from options.seed.
 */
inline PipelineResult run_pipeline(const Dataset& data, const PenaltySpec& spec, const PipelineOptions& opt = {})
{
    if (!(opt.train_fraction > 0.0 && opt.train_fraction < 1.0)) throw ArgumentError("train_fraction must lie in (0, 1)");
    PipelineResult out;
    out.augmented = augment_with_noise(data, opt.n_uniform, opt.n_permuted, opt.seed);
    const Index n = data.n();
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(opt.seed + 1);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<Index>(std::lround(opt.train_fraction * static_cast<double>(n)));
    if (n_train < 2 || n_train >= n) throw ArgumentError("train/test split leaves an empty part");
    out.train_rows.assign(order.begin(), order.begin() + n_train);
    out.test_rows.assign(order.begin() + n_train, order.end());
    std::sort(out.train_rows.begin(), out.train_rows.end());
    std::sort(out.test_rows.begin(), out.test_rows.end());

    const Dataset train = out.augmented.data.subset_rows(out.train_rows);
    const Dataset test = out.augmented.data.subset_rows(out.test_rows);
    const auto grid = lambda_grid(train, opt.loss, spec, opt.n_lambda, opt.ratio, opt.cv.fit.omega);
    CvOptions cv = opt.cv;
    cv.seed = opt.seed + 2;
    out.path = kfold_cv(train, spec, opt.loss, grid, cv);
    out.model = out.path.models[*out.path.selected];
    out.test_loss = mean_loss(opt.loss, test.y, predict(out.model, test.x));
    out.score = score_selection(out.model.active_set(), out.augmented.roles);
    return out;
}

} // namespace gsam::sim
