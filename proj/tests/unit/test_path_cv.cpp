#include <gtest/gtest.h>
#include <gsam/path_cv.hpp>
#include "helpers.hpp"

namespace gsam {
namespace {

FitOptions tight()
{
    FitOptions o;
    o.rel_tol = 1e-12;
    o.x_tol = 1e-10;
    o.max_iter = 20000;
    return o;
}

TEST(LambdaGrid, LogSpacedExample)
{
    const auto g = lambda_grid(1.0, 3, 0.01);
    ASSERT_EQ(g.size(), 3u);
    EXPECT_DOUBLE_EQ(g[0], 1.0);
    EXPECT_NEAR(g[1], 0.1, 1e-15);
    EXPECT_DOUBLE_EQ(g[2], 0.01);
}

TEST(LambdaGrid, LengthAndOrder)
{
    for (int n : {2, 7, 50}) {
        const auto g = lambda_grid(3.5, n, 1e-3);
        ASSERT_EQ(static_cast<int>(g.size()), n);
        for (std::size_t k = 1; k < g.size(); ++k) EXPECT_LT(g[k], g[k - 1]);
        EXPECT_NEAR(g.back(), 3.5e-3, 1e-15);
    }
}

TEST(LambdaGrid, Errors)
{
    EXPECT_THROW(lambda_grid(1.0, 1), ArgumentError);
    EXPECT_THROW(lambda_grid(1.0, 5, 1.0), ArgumentError);
    EXPECT_THROW(lambda_grid(0.0, 5), DegenerateDataError);
    const Dataset flat = Dataset::create(Vector::Constant(20, 2.0), testing::signal_data(20, 2, 1).x);
    EXPECT_THROW(lambda_grid(flat, LossKind::gaussian, TrendFilter{0}), DegenerateDataError);
}

TEST(FitPath, NullAtGridHead)
{
    for (LossKind loss : {LossKind::gaussian, LossKind::bernoulli_logit, LossKind::poisson_log}) {
        const Dataset d = testing::signal_data(60, 4, 31, loss);
        const auto grid = lambda_grid(d, loss, TrendFilter{1}, 6, 0.05);
        const PathResult path = fit_path(d, TrendFilter{1}, loss, grid);
        ASSERT_FALSE(path.failure);
        ASSERT_EQ(path.models.size(), grid.size());
        EXPECT_EQ(path.models.front().active_size(), 0) << to_string(loss);
        EXPECT_GT(path.models.back().active_size(), 0) << to_string(loss);
        const auto sizes = path.active_sizes();
        EXPECT_EQ(sizes.size(), grid.size());
    }
}

TEST(FitPath, WarmStartMatchesColdStart)
{
    const Dataset d = testing::signal_data(50, 3, 32);
    for (const PenaltySpec& spec : std::vector<PenaltySpec>{TrendFilter{0}, SobolevSpline{false}}) {
        const auto grid = lambda_grid(d, LossKind::gaussian, spec, 8, 0.02);
        const PathResult path = fit_path(d, spec, LossKind::gaussian, grid, tight());
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const AdditiveModel cold = fit(d, LossKind::gaussian, spec, grid[k], tight());
            const double warm_obj = objective(path.models[k], d), cold_obj = objective(cold, d);
            EXPECT_LE(warm_obj, cold_obj + 1e-8) << to_string(spec) << " k=" << k;
            EXPECT_NEAR(warm_obj, cold_obj, 1e-6 * std::max(1.0, cold_obj)) << to_string(spec) << " k=" << k;
        }
    }
}

TEST(FitPath, PathFitsAreSweepFixedPoints)
{
    const Dataset d = testing::signal_data(50, 3, 33);
    const auto grid = lambda_grid(d, LossKind::gaussian, TrendFilter{0}, 6, 0.05);
    const PathResult path = fit_path(d, TrendFilter{0}, LossKind::gaussian, grid, tight());
    for (const auto& m : path.models) {
        const AdditiveModel swept = bcd_sweep(d, m);
        EXPECT_NEAR(objective(swept, d), objective(m, d), 1e-9 * std::max(1.0, objective(m, d)));
    }
}

TEST(FitPath, RejectsBadGrids)
{
    const Dataset d = testing::signal_data(30, 2, 34);
    EXPECT_THROW(fit_path(d, TrendFilter{0}, LossKind::gaussian, {}), ArgumentError);
    EXPECT_THROW(fit_path(d, TrendFilter{0}, LossKind::gaussian, {0.1, 0.2}), ArgumentError);
    EXPECT_THROW(fit_path(d, TrendFilter{0}, LossKind::gaussian, {0.1, -0.2}), ArgumentError);
}

TEST(Folds, DeterministicAndBalanced)
{
    const auto a = fold_assignment(53, 5, 9), b = fold_assignment(53, 5, 9), c = fold_assignment(53, 5, 10);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    std::vector<int> count(5, 0);
    for (int f : a) ++count[f];
    for (int k : count) EXPECT_TRUE(k == 10 || k == 11);
    EXPECT_THROW(fold_assignment(9, 5, 1), ArgumentError);
    EXPECT_THROW(fold_assignment(20, 1, 1), ArgumentError);
}

TEST(Folds, ValidationRowsDoNotLeakIntoTraining)
{
    const Dataset d = testing::signal_data(60, 3, 35);
    const auto grid = lambda_grid(d, LossKind::gaussian, TrendFilter{0}, 5, 0.05);
    const auto fold = fold_assignment(d.n(), 5, 3);
    std::vector<Index> train, valid;
    for (Index i = 0; i < d.n(); ++i) (fold[i] == 0 ? valid : train).push_back(i);
    Dataset poisoned = d;
    for (Index i : valid) poisoned.y(i) = 1e6;
    const FoldResult clean = fit_fold(d, TrendFilter{0}, LossKind::gaussian, grid, train, valid);
    const FoldResult dirty = fit_fold(poisoned, TrendFilter{0}, LossKind::gaussian, grid, train, valid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        EXPECT_EQ(clean.models[k].intercept, dirty.models[k].intercept);
        for (Index j = 0; j < d.p(); ++j) EXPECT_EQ(clean.models[k].components[j].values, dirty.models[k].components[j].values);
        // the sentinel shows up in the held-out loss only
        EXPECT_GT(dirty.losses[k], 1e10);
        EXPECT_LT(clean.losses[k], 10.0);
    }
}

TEST(SelectRule, DefiningInequalities)
{
    const std::vector<double> mean{5.0, 3.0, 2.2, 2.0, 2.1, 2.6};
    const std::vector<double> se{0.1, 0.1, 0.1, 0.3, 0.1, 0.1};
    const auto [best, one_se] = select_indices(mean, se);
    EXPECT_EQ(best, 3u);
    EXPECT_EQ(one_se, 2u);
    // ties pick the first minimum
    EXPECT_EQ(select_indices({1.0, 1.0}, {0.0, 0.0}).first, 0u);
    EXPECT_THROW(select_indices({}, {}), ArgumentError);
}

TEST(KFoldCv, StatisticsAndSelection)
{
    const Dataset d = testing::signal_data(80, 4, 36);
    const auto grid = lambda_grid(d, LossKind::gaussian, TrendFilter{0}, 10, 0.01);
    CvOptions cv;
    cv.seed = 4;
    for (CvRule rule : {CvRule::min, CvRule::one_se}) {
        cv.rule = rule;
        const PathResult res = kfold_cv(d, TrendFilter{0}, LossKind::gaussian, grid, cv);
        ASSERT_EQ(res.cv_mean.size(), grid.size());
        ASSERT_EQ(res.cv_se.size(), grid.size());
        ASSERT_TRUE(res.selected && res.selected_lambda_min && res.selected_lambda_1se);
        const auto best = static_cast<std::size_t>(std::min_element(res.cv_mean.begin(), res.cv_mean.end()) - res.cv_mean.begin());
        EXPECT_EQ(*res.selected_lambda_min, grid[best]);
        EXPECT_GE(*res.selected_lambda_1se, *res.selected_lambda_min);
        // largest lambda with cv_mean <= min + se at the minimizer
        const double bound = res.cv_mean[best] + res.cv_se[best];
        std::size_t first = 0;
        while (res.cv_mean[first] > bound) ++first;
        EXPECT_EQ(*res.selected_lambda_1se, grid[first]);
        EXPECT_EQ(*res.selected, rule == CvRule::min ? best : first);
        for (double s : res.cv_se) EXPECT_GE(s, 0.0);
    }
}

TEST(KFoldCv, MeanIsFoldAverage)
{
    const Dataset d = testing::signal_data(50, 3, 37);
    const auto grid = lambda_grid(d, LossKind::gaussian, SobolevSpline{false}, 5, 0.05);
    CvOptions cv;
    cv.k = 4;
    cv.seed = 8;
    const PathResult res = kfold_cv(d, SobolevSpline{false}, LossKind::gaussian, grid, cv);
    const auto fold = fold_assignment(d.n(), cv.k, cv.seed);
    std::vector<double> sum(grid.size(), 0.0);
    for (int f = 0; f < cv.k; ++f) {
        std::vector<Index> train, valid;
        for (Index i = 0; i < d.n(); ++i) (fold[i] == f ? valid : train).push_back(i);
        const auto fr = fit_fold(d, SobolevSpline{false}, LossKind::gaussian, grid, train, valid);
        for (std::size_t k = 0; k < grid.size(); ++k) sum[k] += fr.losses[k];
    }
    for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_NEAR(res.cv_mean[k], sum[k] / cv.k, 1e-12);
}

TEST(KFoldCv, DeterministicAcrossRunsAndThreads)
{
    const Dataset d = testing::signal_data(60, 3, 38);
    const auto grid = lambda_grid(d, LossKind::gaussian, TrendFilter{0}, 6, 0.02);
    CvOptions cv;
    cv.seed = 12;
    const PathResult a = kfold_cv(d, TrendFilter{0}, LossKind::gaussian, grid, cv);
    cv.threads = 3;
    const PathResult b = kfold_cv(d, TrendFilter{0}, LossKind::gaussian, grid, cv);
    EXPECT_EQ(a.cv_mean, b.cv_mean);
    EXPECT_EQ(a.cv_se, b.cv_se);
    EXPECT_EQ(a.selected, b.selected);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        for (Index j = 0; j < d.p(); ++j) EXPECT_EQ(a.models[k].components[j].values, b.models[k].components[j].values);
    }
}

TEST(KFoldCv, PureNoiseSelectsNearGridHead)
{
    std::mt19937_64 rng(39);
    std::normal_distribution<double> e(0.0, 1.0);
    int near_null = 0;
    for (int rep = 0; rep < 5; ++rep) {
        const Dataset base = testing::signal_data(80, 4, 100 + rep);
        Vector y(base.n());
        for (Index i = 0; i < y.size(); ++i) y(i) = e(rng);
        const Dataset d = Dataset::create(std::move(y), base.x);
        const auto grid = lambda_grid(d, LossKind::gaussian, TrendFilter{0}, 10, 0.01);
        const PathResult res = kfold_cv(d, TrendFilter{0}, LossKind::gaussian, grid);
        if (*res.selected <= 2) ++near_null;
    }
    EXPECT_GE(near_null, 4);
}

TEST(KFoldCv, DegenerateLogisticFoldIsNamed)
{
    const Dataset base = testing::signal_data(20, 2, 40);
    const auto fold = fold_assignment(20, 2, 5);
    // one positive response: the fold holding it out trains on zeros only
    Vector y = Vector::Zero(20);
    Index pos = 0;
    while (fold[pos] != 1) ++pos;
    y(pos) = 1.0;
    const Dataset d = Dataset::create(std::move(y), base.x);
    CvOptions cv;
    cv.k = 2;
    cv.seed = 5;
    try {
        kfold_cv(d, TrendFilter{0}, LossKind::bernoulli_logit, {1.0, 0.5}, cv);
        FAIL() << "expected a degenerate fold";
    } catch (const DegenerateDataError& e) {
        EXPECT_NE(std::string(e.what()).find("fold 2"), std::string::npos) << e.what();
    }
}

TEST(KFoldCv, RejectsBadOptions)
{
    const Dataset d = testing::signal_data(30, 2, 41);
    CvOptions cv;
    cv.k = 1;
    EXPECT_THROW(kfold_cv(d, TrendFilter{0}, LossKind::gaussian, {1.0, 0.5}, cv), ArgumentError);
    cv.k = 5;
    cv.threads = 0;
    EXPECT_THROW(kfold_cv(d, TrendFilter{0}, LossKind::gaussian, {1.0, 0.5}, cv), ArgumentError);
    EXPECT_THROW(parse_rule("median"), ArgumentError);
    EXPECT_EQ(parse_rule("1se"), CvRule::one_se);
}

} // namespace
} // namespace gsam
