// Runs the ten acceptance checks and prints one PASS/FAIL line for each.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>
#include <gsam/gsam.hpp>
#include <gsam/prox/tv_dp.hpp>
#include <oracle/oracle.hpp>

using namespace gsam;

namespace {

struct Outcome
{
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v)
{
    char buf[96];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

double norm_n(const Vector& f, const Vector& w) { return weighted_norm(f, w); }

FitOptions tight()
{
    FitOptions o;
    o.rel_tol = 1e-13;
    o.x_tol = 1e-11;
    o.max_iter = 20000;
    return o;
}

/// x ~ U(-2.5, 2.5); the first `signals` columns carry a step and a sinusoid.
Dataset signal_data(Index n, Index p, std::uint64_t seed, LossKind loss = LossKind::gaussian, int signals = 2,
                    double scale = 1.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.5, 2.5);
    std::normal_distribution<double> e(0.0, 1.0);
    Matrix x(n, p);
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) x(i, j) = u(rng);
        double s = 0.0;
        if (signals > 0) s += x(i, 0) > 0.0 ? 1.0 : -1.0;
        if (signals > 1) s += std::sin(2.0 * x(i, 1));
        s *= scale;
        switch (loss) {
            case LossKind::gaussian: y(i) = s + e(rng); break;
            case LossKind::bernoulli_logit: y(i) = std::bernoulli_distribution(1.0 / (1.0 + std::exp(-2.0 * s)))(rng); break;
            case LossKind::poisson_log: y(i) = std::poisson_distribution<int>(std::exp(0.5 * s))(rng); break;
        }
    }
    return Dataset::create(std::move(y), std::move(x));
}

// 1. Composite prox against the oracle.
Outcome composite_prox()
{
    const auto t0 = Clock::now();
    const std::vector<PenaltySpec> kinds{TrendFilter{0},    TrendFilter{1},   TrendFilter{2},  SobolevSpline{false},
                                         SobolevSpline{true}, BasisSubspace{3}, Isotonic{true}};
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> nrm(0.0, 1.0);
    double worst_gap = 0.0, worst_kkt = 0.0;
    const int n_kinds = static_cast<int>(kinds.size()) + 2;
    for (int rep = 0; rep < 200; ++rep) {
        const Index m = 3 + static_cast<Index>(u(rng) * 38);
        Vector t(m), r(m), w(m);
        double s = 0.0;
        for (Index i = 0; i < m; ++i) {
            s += 0.1 + u(rng);
            t(i) = s;
            r(i) = nrm(rng) + std::sin(s);
            w(i) = 1.0 + std::floor(u(rng) * 3.0);
        }
        const int kind = rep % n_kinds;
        PenaltySpec spec;
        if (kind < static_cast<int>(kinds.size())) {
            spec = kinds[kind];
        } else {
            const Index rows = 1 + static_cast<Index>(u(rng) * (m - 1));
            spec = MatrixSeminorm{Matrix::NullaryExpr(rows, m, [&] { return nrm(rng); }),
                                  kind == static_cast<int>(kinds.size()) ? 1.0 : 2.0};
        }
        const double gamma = std::pow(10.0, -3.0 + 3.0 * u(rng));
        const double kappa = 0.5 * u(rng);
        const prox::ProxProblem pb{r, w, t, gamma, kappa, spec};
        const Vector f = prox::prox_composite(pb);
        const Vector o = oracle::oracle_univariate(r, w, t, gamma, kappa, spec);
        worst_gap = std::max(worst_gap, norm_n(f - o, w));
        worst_kkt = std::max(worst_kkt, oracle::kkt_certificate(f, r, w, t, gamma, kappa, spec));
    }
    const double secs = seconds_since(t0);
    return {worst_gap <= 1e-6 && worst_kkt <= 1e-7 && secs < 60.0,
            "max ||prox - oracle||_n " + fmt("%.2e", worst_gap) + ", max KKT " + fmt("%.2e", worst_kkt) + ", "
                + fmt("%.1f s", secs)};
}

// 2. Square-root trick.
Outcome sqrt_trick()
{
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> gap(0.2, 1.2), u(0.0, 1.0);
    double worst_stat = 0.0, worst_fine = 0.0, worst_null = 0.0;
    int null_branch = 0;
    for (int rep = 0; rep < 50; ++rep) {
        const Index m = 25;
        Vector t(m), w(m), r(m);
        t(0) = 0.0;
        for (Index i = 1; i < m; ++i) t(i) = t(i - 1) + gap(rng);
        for (Index i = 0; i < m; ++i) {
            w(i) = 1.0 + std::floor(u(rng) * 3.0);
            r(i) = std::sin(t(i)) + (u(rng) - 0.5);
        }
        const SobolevOperator op = SobolevOperator::build(t);
        const double dual = prox::sobolev_dual(op, w.cwiseProduct(r - prox::weighted_linear_fit(t, r, w)) / w.sum());
        const double lambda1 = dual * std::pow(10.0, -2.5 + 2.3 * u(rng));
        const auto res = prox::sobolev_prox(t, r, w, lambda1);
        if (res.null_fit) {
            ++null_branch;
        } else {
            const double p = std::sqrt(op.roughness(res.f));
            worst_stat = std::max(worst_stat, std::abs(2.0 * res.lambda_tilde * p - lambda1) / lambda1);
        }
        worst_fine = std::max(worst_fine, norm_n(res.f - oracle::sobolev_fine_grid(t, r, w, lambda1, 64), w));
        // linear input: the null fit for every lambda
        const Vector lin = (0.3 - 0.7 * t.array()).matrix();
        for (double l : {1e-8, 1e-2, 1.0, 1e4}) {
            const auto nl = prox::sobolev_prox(t, lin, w, l);
            worst_null = std::max(worst_null, nl.null_fit ? (nl.f - lin).cwiseAbs().maxCoeff() : 1.0);
        }
    }
    return {worst_stat <= 1e-8 && worst_fine <= 1e-4 && worst_null <= 1e-12,
            "max stationarity rel err " + fmt("%.2e", worst_stat) + ", max fine-grid gap " + fmt("%.2e", worst_fine)
                + ", linear-input deviation " + fmt("%.1e", worst_null) + ", null-branch instances "
                + std::to_string(null_branch)};
}

// 3. lambda_max nulls the fit.
Outcome lambda_max_nulling()
{
    const std::vector<PenaltySpec> specs{TrendFilter{0}, TrendFilter{1}, SobolevSpline{false}};
    std::string detail;
    bool pass = true;
    for (LossKind loss : {LossKind::gaussian, LossKind::bernoulli_logit, LossKind::poisson_log}) {
        int null_ok = 0, active = 0;
        for (int rep = 0; rep < 50; ++rep) {
            const Dataset d = signal_data(80, 10, 3000 + rep, loss, 2, 1.5);
            const PenaltySpec& spec = specs[rep % specs.size()];
            const double lm = lambda_max(d, loss, spec);
            if (fit(d, loss, spec, lm).active_size() == 0) ++null_ok;
            if (fit(d, loss, spec, 0.5 * lm).active_size() > 0) ++active;
        }
        pass = pass && null_ok == 50 && active >= 45;
        detail += to_string(loss) + " null " + std::to_string(null_ok) + "/50 active@0.5 " + std::to_string(active) + "/50; ";
    }
    detail.resize(detail.size() - 2);
    return {pass, detail};
}

// 4. All-or-nothing versus partial sparsity.
Outcome sparsity_patterns()
{
    int squared_bad = 0, points = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const Dataset d = signal_data(60, 6, 4000 + rep);
        const double top = 1.5 * lambda_max_bound(d, LossKind::gaussian);
        std::vector<double> grid;
        for (int k = 0; k < 12; ++k) grid.push_back(top * std::pow(0.6, k));
        for (Index s : sparsity_pattern_probe(d, true, grid)) {
            ++points;
            if (s != 0 && s != d.p()) ++squared_bad;
        }
    }
    const Dataset d = signal_data(120, 8, 4100, LossKind::gaussian, 2, 2.0);
    const double top = lambda_max(d, LossKind::gaussian, SobolevSpline{false});
    std::vector<double> grid;
    for (int k = 0; k < 15; ++k) grid.push_back(1.01 * top * std::pow(0.7, k));
    const auto sizes = sparsity_pattern_probe(d, false, grid);
    const auto partial = std::count_if(sizes.begin(), sizes.end(), [](Index s) { return s > 0 && s < 8; });
    return {squared_bad == 0 && partial > 0,
            "squared: " + std::to_string(points - squared_bad) + "/" + std::to_string(points)
                + " grid points in {0,p}; seminorm: " + std::to_string(partial) + " partial grid points"};
}

double max_component_gap(const AdditiveModel& a, const AdditiveModel& b)
{
    double gap = std::abs(a.intercept - b.intercept);
    for (Index j = 0; j < a.p(); ++j) {
        gap = std::max(gap, (a.components[j].values - b.components[j].values).cwiseAbs().maxCoeff());
    }
    return gap;
}

// 5 and 6 share instances: algorithm agreement, majorization and monotone BCD traces.
struct AgreementStats
{
    double worst_rel = 0.0;
    double worst_sweep = 0.0;
    double worst_major = -1e300;
    double worst_increase = -1e300;
    int instances = 0;
};

AgreementStats agreement_runs()
{
    AgreementStats st;
    for (int rep = 0; rep < 30; ++rep) {
        const Dataset d = signal_data(60, 8, 5000 + rep);
        for (const PenaltySpec& spec : {PenaltySpec{TrendFilter{0}}, PenaltySpec{SobolevSpline{false}}}) {
            const double lam = (0.15 + 0.02 * (rep % 10)) * lambda_max(d, LossKind::gaussian, spec);
            FitTrace pg_trace, bcd_trace;
            FitOptions o = tight();
            o.trace = &pg_trace;
            const AdditiveModel pg = prox_gradient_fit(d, LossKind::gaussian, spec, lam, o);
            o.trace = &bcd_trace;
            const AdditiveModel bcd = block_coordinate_fit(d, spec, lam, o);
            const double a = objective(pg, d), b = objective(bcd, d);
            st.worst_rel = std::max(st.worst_rel, std::abs(a - b) / std::abs(b));
            st.worst_sweep = std::max({st.worst_sweep, max_component_gap(bcd_sweep(d, pg), pg), max_component_gap(bcd_sweep(d, bcd), bcd)});
            for (const auto& s : pg_trace.steps) st.worst_major = std::max(st.worst_major, s.loss_new - s.surrogate());
            for (std::size_t k = 1; k < bcd_trace.objective.size(); ++k) {
                st.worst_increase = std::max(st.worst_increase, bcd_trace.objective[k] - bcd_trace.objective[k - 1]);
            }
            ++st.instances;
        }
    }
    // majorization also under non-quadratic losses and backtracking
    for (StepPolicy policy : {StepPolicy::active_set, StepPolicy::backtracking}) {
        for (LossKind loss : {LossKind::bernoulli_logit, LossKind::poisson_log}) {
            for (int rep = 0; rep < 5; ++rep) {
                const Dataset d = signal_data(70, 5, 5100 + rep, loss);
                FitTrace trace;
                FitOptions o;
                o.step_policy = policy;
                o.trace = &trace;
                prox_gradient_fit(d, loss, TrendFilter{1}, 0.3 * lambda_max(d, loss, TrendFilter{1}), o);
                for (const auto& s : trace.steps) st.worst_major = std::max(st.worst_major, s.loss_new - s.surrogate());
            }
        }
    }
    return st;
}

Outcome algorithm_agreement(const AgreementStats& st)
{
    return {st.worst_rel <= 1e-6 && st.worst_sweep <= 1e-9,
            std::to_string(st.instances) + " fits, max relative objective gap " + fmt("%.2e", st.worst_rel)
                + ", max sweep displacement " + fmt("%.2e", st.worst_sweep)};
}

Outcome majorization(const AgreementStats& st)
{
    return {st.worst_major <= 1e-10 && st.worst_increase <= 1e-12,
            "max loss - surrogate " + fmt("%.2e", st.worst_major) + ", max BCD objective increase "
                + fmt("%.2e", st.worst_increase)};
}

double mean_mse(int scenario, Index n, const PenaltySpec& spec, int reps, std::uint64_t seed0)
{
    sim::ReplicateOptions opt;
    double s = 0.0;
    for (int rep = 0; rep < reps; ++rep) s += sim::run_replicate(scenario, n, 6, seed0 + rep, spec, opt).mse;
    return s / reps;
}

// 7. Scenario 1 ordering.
Outcome scenario_one_ordering()
{
    const auto t0 = Clock::now();
    const double tf0 = mean_mse(1, 200, TrendFilter{0}, 25, 7000);
    const double basis = mean_mse(1, 200, BasisSubspace{3}, 25, 7000);
    const double secs = seconds_since(t0);
    return {tf0 < basis && secs < 600.0,
            "mean MSE tf0 " + fmt("%.4f", tf0) + " vs basis:3 " + fmt("%.4f", basis) + ", " + fmt("%.1f s", secs)};
}

// 8. MSE falls with n.
Outcome rate_sanity()
{
    const double sob_100 = mean_mse(4, 100, SobolevSpline{false}, 25, 8000);
    const double sob_400 = mean_mse(4, 400, SobolevSpline{false}, 25, 8100);
    const double tf1_100 = mean_mse(4, 100, TrendFilter{1}, 25, 8000);
    const double tf1_400 = mean_mse(4, 400, TrendFilter{1}, 25, 8100);
    return {sob_400 < sob_100 && tf1_400 < tf1_100,
            "sobolev " + fmt("%.4f", sob_100) + " -> " + fmt("%.4f", sob_400) + ", tf1 " + fmt("%.4f", tf1_100) + " -> "
                + fmt("%.4f", tf1_400)};
}

/// Best of several timings, to damp scheduler noise.
double best_time(int repeats, const std::function<void()>& work)
{
    double best = 1e300;
    for (int k = 0; k < repeats; ++k) {
        const auto t0 = Clock::now();
        work();
        best = std::min(best, seconds_since(t0));
    }
    return best;
}

/// Seconds per prox-gradient iteration with every component active; setup cost cancels in the difference.
double per_iteration_time(Index p)
{
    const Dataset d = signal_data(200, p, 9000 + p);
    const double lam = 0.05 * lambda_max(d, LossKind::gaussian, TrendFilter{0});
    auto timed = [&](int iterations, int& done) {
        FitOptions o;
        o.max_iter = iterations;
        o.rel_tol = 1e-300;
        return best_time(5, [&] { done = prox_gradient_fit(d, LossKind::gaussian, TrendFilter{0}, lam, o).diagnostics.iterations; });
    };
    int short_iters = 0, long_iters = 0;
    const double short_time = timed(5, short_iters), long_time = timed(30, long_iters);
    if (long_iters <= short_iters) throw std::runtime_error("timing fit converged before the iteration budget");
    return (long_time - short_time) / (long_iters - short_iters);
}

// 9. Complexity scaling.
Outcome complexity_scaling()
{
    std::mt19937_64 rng(909);
    std::normal_distribution<double> e(0.0, 1.0);
    auto tv_time = [&](Index n, int repeats) {
        Vector y(n), w = Vector::Ones(n);
        for (Index i = 0; i < n; ++i) y(i) = (i * 7 / n) % 2 + e(rng);
        return best_time(repeats, [&] { prox::tv_denoise_dp(y, w, 5.0); });
    };
    const double small = tv_time(10000, 20), large = tv_time(100000, 5);
    const double tv_ratio = large / small;
    const double pg_ratio = per_iteration_time(500) / per_iteration_time(50);
    return {tv_ratio <= 15.0 && pg_ratio <= 15.0,
            "TV prox n=1e5/1e4 time ratio " + fmt("%.2f", tv_ratio) + ", prox-gradient iteration p=500/50 ratio "
                + fmt("%.2f", pg_ratio)};
}

/// Stand-in for the housing data: 10 columns that all carry signal of different shapes.
Dataset housing_stand_in(std::uint64_t seed)
{
    const Index n = 506, p = 10;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.5, 2.5);
    std::normal_distribution<double> e(0.0, 1.0);
    Matrix x(n, p);
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) x(i, j) = u(rng);
        const Eigen::RowVectorXd r = x.row(i);
        y(i) = (r(0) > 0.0 ? 1.5 : -1.5) + 1.5 * std::sin(r(1)) + 0.6 * r(2) + 0.4 * r(3) * r(3) - 1.2 * std::abs(r(4))
               + (r(5) > 1.0 ? 2.0 : 0.0) + std::cos(1.5 * r(6)) + 0.8 * std::max(r(7), 0.0) + 0.2 * r(8) * r(8) * r(8)
               - 1.5 * std::exp(-r(9) * r(9)) + e(rng);
    }
    std::vector<std::string> names;
    for (Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
    return Dataset::create(std::move(y), std::move(x), std::move(names));
}

// 10. End-to-end noise-augmentation pipeline.
Outcome pipeline()
{
    double tpr = 0.0, fpr = 0.0;
    const int seeds = 10;
    for (int s = 0; s < seeds; ++s) {
        sim::PipelineOptions opt;
        opt.seed = 10000 + 17 * s;
        const auto res = sim::run_pipeline(housing_stand_in(500 + s), TrendFilter{0}, opt);
        tpr += res.score.tpr;
        fpr += res.score.fpr;
    }
    tpr /= seeds;
    fpr /= seeds;
    return {fpr <= 0.5 && tpr >= 0.5, "mean TPR " + fmt("%.3f", tpr) + ", mean FPR " + fmt("%.3f", fpr) + " over 10 seeds"};
}

} // namespace

/// With no arguments every criterion runs; otherwise only the listed numbers.
int main(int argc, char** argv)
{
    std::vector<int> wanted;
    for (int a = 1; a < argc; ++a) wanted.push_back(std::atoi(argv[a]));
    int failures = 0, ran = 0;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), id) == wanted.end()) return;
        ++ran;
        const auto t0 = Clock::now();
        Outcome out;
        try {
            out = check();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        if (!out.pass) ++failures;
        std::printf("criterion %2d %-28s %s  (%s; %.1f s)\n", id, name, out.pass ? "PASS" : "FAIL", out.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    };
    report(1, "composite-prox-equivalence", composite_prox);
    report(2, "sqrt-trick", sqrt_trick);
    report(3, "lambda-max-nulling", lambda_max_nulling);
    report(4, "sparsity-patterns", sparsity_patterns);
    AgreementStats st;
    bool have_stats = false;
    auto stats = [&]() -> const AgreementStats& {
        if (!have_stats) {
            st = agreement_runs();
            have_stats = true;
        }
        return st;
    };
    report(5, "algorithm-agreement", [&] { return algorithm_agreement(stats()); });
    report(6, "majorization-monotonicity", [&] { return majorization(stats()); });
    report(7, "scenario1-ordering", scenario_one_ordering);
    report(8, "rate-sanity", rate_sanity);
    report(9, "complexity-scaling", complexity_scaling);
    report(10, "end-to-end-pipeline", pipeline);
    std::printf("%d of %d criteria passed\n", ran - failures, ran);
    return failures == 0 ? 0 : 1;
}
