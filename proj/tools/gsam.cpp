#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>
#include <CLI11.hpp>
#include <gsam/gsam.hpp>
#include <gsam/io/csv.hpp>
#include <gsam/io/json.hpp>

namespace {

constexpr int exit_usage = 2;
constexpr int exit_numerical = 3;
constexpr int exit_other = 1;

int default_threads()
{
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

struct DataArgs
{
    std::string path;
    std::string response = "y";
};

struct FitArgs
{
    std::string penalty = "tf0";
    std::string loss = "gaussian";
    std::string algo = "prox";
    double omega = -1.0;
    int max_iter = 2000;
    double rel_tol = 1e-7;
    int threads = 1;

    gsam::FitOptions options() const
    {
        gsam::FitOptions o;
        o.max_iter = max_iter;
        o.rel_tol = rel_tol;
        o.threads = threads;
        if (omega >= 0.0) o.omega = omega;
        return o;
    }

    gsam::Algorithm algorithm() const
    {
        if (algo == "prox") return gsam::Algorithm::prox_gradient;
        if (algo == "bcd") return gsam::Algorithm::block_coordinate;
        throw gsam::ArgumentError("unknown algorithm '" + algo + "' (expected prox or bcd)");
    }
};

void add_data(CLI::App* cmd, DataArgs& d)
{
    cmd->add_option("--data", d.path, "CSV file with a header row")->required()->check(CLI::ExistingFile);
    cmd->add_option("--response", d.response, "name of the response column")->capture_default_str();
}

void add_fit(CLI::App* cmd, FitArgs& f)
{
    cmd->add_option("--penalty", f.penalty, "tf0|tf1|tf2|sobolev|sobolev2|basis:M[:spline]|isotonic[:dec]")
        ->capture_default_str();
    cmd->add_option("--loss", f.loss, "gaussian|logistic|poisson")->capture_default_str();
    cmd->add_option("--algo", f.algo, "prox|bcd")->capture_default_str();
    cmd->add_option("--omega", f.omega, "structure/sparsity split in [0,1]; unset couples lambda^2 and lambda");
    cmd->add_option("--max-iter", f.max_iter)->capture_default_str();
    cmd->add_option("--tol", f.rel_tol, "relative objective change")->capture_default_str();
}

gsam::Dataset load(const DataArgs& d) { return gsam::io::to_dataset(gsam::io::read_csv_file(d.path), d.response); }

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path);
    if (!out) throw gsam::ArgumentError("cannot write '" + path + "'");
    out << text;
}

void write_json(const std::string& path, const gsam::io::Json& j)
{
    if (path.empty() || path == "-") std::cout << j.dump(2) << '\n';
    else write_text(path, j.dump(2) + "\n");
}

/// Long format (feature, x, fitted) at the knots of every component.
void dump_components(const std::string& path, const gsam::AdditiveModel& m, const std::vector<std::string>& names)
{
    std::ofstream out(path);
    if (!out) throw gsam::ArgumentError("cannot write '" + path + "'");
    out << "feature,x,fitted\n";
    for (gsam::Index j = 0; j < m.p(); ++j) {
        const auto& c = m.components[j];
        for (gsam::Index k = 0; k < c.knots.size(); ++k) {
            out << gsam::io::quote_field(names[j]) << ',' << gsam::io::format_double(c.knots(k)) << ','
                << gsam::io::format_double(c.values(k)) << '\n';
        }
    }
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

void print_path_table(const gsam::PathResult& p)
{
    const bool cv = !p.cv_mean.empty();
    std::cout << "  k       lambda   |S|" << (cv ? "      cv_mean        cv_se" : "      objective") << '\n';
    for (std::size_t k = 0; k < p.models.size(); ++k) {
        std::cout << fmt("%3.0f", static_cast<double>(k)) << fmt(" %12.6g", p.lambdas[k])
                  << fmt(" %5.0f", static_cast<double>(p.models[k].active_size()));
        if (cv) {
            std::cout << fmt(" %12.6g", p.cv_mean[k]) << fmt(" %12.6g", p.cv_se[k]);
            if (p.selected && *p.selected == k) std::cout << "  <- selected";
        } else {
            std::cout << fmt(" %14.8g", p.models[k].diagnostics.objective);
        }
        std::cout << '\n';
    }
}

std::vector<double> make_grid(const gsam::Dataset& data, gsam::LossKind loss, const gsam::PenaltySpec& spec,
                              const gsam::FitOptions& opt, int n_lambda, double ratio)
{
    return gsam::lambda_grid(data, loss, spec, n_lambda, ratio, opt.omega);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Generalized sparse additive models"};
    app.require_subcommand(1);
    int threads = default_threads();
    app.add_option("--threads", threads, "worker threads for folds, replicates and per-feature prox calls")
        ->check(CLI::PositiveNumber);

    // fit
    DataArgs fit_data;
    FitArgs fit_args;
    double fit_lambda = 0.0;
    std::string fit_out, fit_dump;
    auto* fit_cmd = app.add_subcommand("fit", "fit one model at a given lambda");
    add_data(fit_cmd, fit_data);
    add_fit(fit_cmd, fit_args);
    fit_cmd->add_option("--lambda", fit_lambda, "penalty level (> 0)")->required();
    fit_cmd->add_option("--out", fit_out, "model JSON (stdout when omitted)");
    fit_cmd->add_option("--dump-components", fit_dump, "long-format CSV of fitted components");

    // predict
    std::string pred_model, pred_data, pred_out;
    auto* pred_cmd = app.add_subcommand("predict", "evaluate a saved model on new rows");
    pred_cmd->add_option("--model", pred_model, "model JSON")->required()->check(CLI::ExistingFile);
    pred_cmd->add_option("--data", pred_data, "CSV with the model's feature columns")->required()->check(CLI::ExistingFile);
    pred_cmd->add_option("--out", pred_out, "predictions CSV (stdout when omitted)");

    // path
    DataArgs path_data;
    FitArgs path_args;
    int path_n = 50;
    double path_ratio = 1e-3;
    std::string path_out;
    auto* path_cmd = app.add_subcommand("path", "fit along a decreasing lambda grid with warm starts");
    add_data(path_cmd, path_data);
    add_fit(path_cmd, path_args);
    path_cmd->add_option("--n-lambda", path_n)->capture_default_str();
    path_cmd->add_option("--ratio", path_ratio, "smallest lambda relative to lambda_max")->capture_default_str();
    path_cmd->add_option("--out", path_out, "PathResult JSON");

    // cv
    DataArgs cv_data;
    FitArgs cv_args;
    int cv_n = 50, cv_k = 5, cv_unif = 0, cv_perm = 0;
    double cv_ratio = 1e-3, cv_holdout = 0.0;
    std::uint64_t cv_seed = 1;
    std::string cv_rule = "1se", cv_out, cv_model_out, cv_dump;
    auto* cv_cmd = app.add_subcommand("cv", "K-fold cross-validation over the lambda grid");
    add_data(cv_cmd, cv_data);
    add_fit(cv_cmd, cv_args);
    cv_cmd->add_option("--n-lambda", cv_n)->capture_default_str();
    cv_cmd->add_option("--ratio", cv_ratio)->capture_default_str();
    cv_cmd->add_option("--k", cv_k, "number of folds")->capture_default_str();
    cv_cmd->add_option("--rule", cv_rule, "min|1se")->capture_default_str();
    cv_cmd->add_option("--seed", cv_seed)->capture_default_str();
    cv_cmd->add_option("--augment-uniform", cv_unif, "append this many U(0,1) noise columns");
    cv_cmd->add_option("--augment-permuted", cv_perm, "append this many permuted copies of the original columns");
    cv_cmd->add_option("--holdout", cv_holdout, "fraction of rows held out as a test set (e.g. 0.25)");
    cv_cmd->add_option("--out", cv_out, "PathResult JSON");
    cv_cmd->add_option("--model-out", cv_model_out, "selected model JSON");
    cv_cmd->add_option("--dump-components", cv_dump, "long-format CSV of the selected model's components");

    // simulate
    int sim_scenario = 1, sim_p = 6, sim_reps = 10, sim_n_lambda = 50;
    std::vector<int> sim_n{100};
    std::vector<std::string> sim_penalties{"tf0"};
    std::uint64_t sim_seed = 1;
    std::string sim_select = "test", sim_out;
    auto* sim_cmd = app.add_subcommand("simulate", "replicate the synthetic-scenario study");
    sim_cmd->add_option("--scenario", sim_scenario, "1..5")->check(CLI::Range(1, 5))->capture_default_str();
    sim_cmd->add_option("--n", sim_n, "sample sizes")->capture_default_str();
    sim_cmd->add_option("--p", sim_p)->capture_default_str();
    sim_cmd->add_option("--reps", sim_reps)->capture_default_str();
    sim_cmd->add_option("--seed", sim_seed)->capture_default_str();
    sim_cmd->add_option("--penalty", sim_penalties, "one or more penalties to compare")->capture_default_str();
    sim_cmd->add_option("--select", sim_select, "test|cv")->capture_default_str();
    sim_cmd->add_option("--n-lambda", sim_n_lambda)->capture_default_str();
    sim_cmd->add_option("--out", sim_out, "per-replicate CSV");

    // lambda-max
    DataArgs lm_data;
    FitArgs lm_args;
    auto* lm_cmd = app.add_subcommand("lambda-max", "smallest lambda with an all-zero fit");
    add_data(lm_cmd, lm_data);
    add_fit(lm_cmd, lm_args);

    // sparsity-probe
    DataArgs sp_data;
    FitArgs sp_args;
    bool sp_squared = false;
    int sp_n = 20;
    double sp_ratio = 1e-2;
    auto* sp_cmd = app.add_subcommand("sparsity-probe", "active-set sizes along a grid with the Sobolev penalty");
    add_data(sp_cmd, sp_data);
    add_fit(sp_cmd, sp_args);
    sp_cmd->add_flag("--squared", sp_squared, "use the squared Sobolev seminorm");
    sp_cmd->add_option("--n-lambda", sp_n)->capture_default_str();
    sp_cmd->add_option("--ratio", sp_ratio)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return exit_usage;
    }

    try {
        if (*fit_cmd) {
            fit_args.threads = threads;
            const auto data = load(fit_data);
            const auto spec = gsam::parse_penalty(fit_args.penalty);
            const auto m = gsam::fit(data, gsam::parse_loss(fit_args.loss), spec, fit_lambda, fit_args.options(),
                                     fit_args.algorithm());
            write_json(fit_out, gsam::io::model_to_json(m, data.feature_names));
            if (!fit_dump.empty()) dump_components(fit_dump, m, data.feature_names);
            std::cerr << "lambda " << fit_lambda << ": |S| = " << m.active_size() << ", objective "
                      << fmt("%.10g", m.diagnostics.objective) << ", iterations " << m.diagnostics.iterations
                      << (m.diagnostics.converged ? "" : " (not converged)") << '\n';
        } else if (*pred_cmd) {
            std::ifstream in(pred_model);
            const auto doc = gsam::io::model_from_json(gsam::io::Json::parse(in));
            const auto table = gsam::io::read_csv_file(pred_data);
            gsam::Matrix x;
            if (!doc.feature_names.empty()) {
                x = gsam::io::select_columns(table, doc.feature_names);
            } else {
                if (table.values.cols() != doc.model.p()) throw gsam::ArgumentError("column count does not match the model");
                x = table.values;
            }
            const gsam::Vector link = gsam::predict(doc.model, x);
            gsam::Matrix out(link.size(), 2);
            for (gsam::Index i = 0; i < link.size(); ++i) {
                out(i, 0) = link(i);
                switch (doc.model.loss) {
                    case gsam::LossKind::gaussian: out(i, 1) = link(i); break;
                    case gsam::LossKind::bernoulli_logit: out(i, 1) = gsam::detail::sigmoid(link(i)); break;
                    case gsam::LossKind::poisson_log:
                        out(i, 1) = std::exp(std::clamp(link(i), -gsam::poisson_clamp, gsam::poisson_clamp));
                        break;
                }
            }
            std::ostringstream ss;
            gsam::io::write_csv(ss, {"link", "mean"}, out);
            if (pred_out.empty()) std::cout << ss.str();
            else write_text(pred_out, ss.str());
        } else if (*path_cmd) {
            path_args.threads = threads;
            const auto data = load(path_data);
            const auto spec = gsam::parse_penalty(path_args.penalty);
            const auto loss = gsam::parse_loss(path_args.loss);
            const auto opt = path_args.options();
            const auto grid = make_grid(data, loss, spec, opt, path_n, path_ratio);
            const auto path = gsam::fit_path(data, spec, loss, grid, opt, path_args.algorithm());
            print_path_table(path);
            if (!path_out.empty()) write_json(path_out, gsam::io::path_to_json(path, data.feature_names));
            if (path.failure) {
                std::cerr << "path stopped early: " << *path.failure << '\n';
                return exit_numerical;
            }
        } else if (*cv_cmd) {
            const auto data = load(cv_data);
            const auto spec = gsam::parse_penalty(cv_args.penalty);
            const auto loss = gsam::parse_loss(cv_args.loss);
            gsam::CvOptions cv;
            cv.k = cv_k;
            cv.seed = cv_seed;
            cv.rule = gsam::parse_rule(cv_rule);
            cv.threads = threads;
            cv.fit = cv_args.options();
            cv.algo = cv_args.algorithm();
            gsam::PathResult path;
            std::vector<std::string> names = data.feature_names;
            if (cv_holdout > 0.0 || cv_unif > 0 || cv_perm > 0) {
                gsam::sim::PipelineOptions po;
                po.n_uniform = cv_unif;
                po.n_permuted = cv_perm;
                po.train_fraction = cv_holdout > 0.0 ? 1.0 - cv_holdout : 0.75;
                po.seed = cv_seed;
                po.loss = loss;
                po.n_lambda = cv_n;
                po.ratio = cv_ratio;
                po.cv = cv;
                const auto res = gsam::sim::run_pipeline(data, spec, po);
                path = res.path;
                names = res.augmented.data.feature_names;
                print_path_table(path);
                std::cout << "train rows " << res.train_rows.size() << ", test rows " << res.test_rows.size() << '\n';
                std::cout << "selected lambda " << fmt("%.6g", path.lambdas[*path.selected]) << ", |S| = "
                          << res.model.active_size() << '\n';
                std::cout << "test loss " << fmt("%.6g", res.test_loss) << '\n';
                if (cv_unif + cv_perm > 0) {
                    std::cout << "TPR " << fmt("%.3f", res.score.tpr) << ", FPR " << fmt("%.3f", res.score.fpr) << '\n';
                }
            } else {
                const auto grid = make_grid(data, loss, spec, cv.fit, cv_n, cv_ratio);
                path = gsam::kfold_cv(data, spec, loss, grid, cv);
                print_path_table(path);
                std::cout << "lambda_min " << fmt("%.6g", *path.selected_lambda_min) << ", lambda_1se "
                          << fmt("%.6g", *path.selected_lambda_1se) << '\n';
            }
            if (!cv_out.empty()) write_json(cv_out, gsam::io::path_to_json(path, names));
            const auto& chosen = path.models[*path.selected];
            if (!cv_model_out.empty()) write_json(cv_model_out, gsam::io::model_to_json(chosen, names));
            if (!cv_dump.empty()) dump_components(cv_dump, chosen, names);
        } else if (*sim_cmd) {
            if (sim_select != "test" && sim_select != "cv") throw gsam::ArgumentError("--select must be test or cv");
            gsam::sim::ReplicateOptions ro;
            ro.select = sim_select == "test" ? gsam::sim::Selection::test : gsam::sim::Selection::cv;
            ro.n_lambda = sim_n_lambda;
            struct Row
            {
                std::string method;
                int n;
                int rep;
                gsam::sim::ReplicateResult r;
            };
            std::vector<Row> rows;
            for (const auto& pen : sim_penalties) {
                const auto spec = gsam::parse_penalty(pen);
                for (int n : sim_n) {
                    std::vector<Row> batch(sim_reps);
                    gsam::detail::for_each_feature(sim_reps, threads, [&](gsam::Index rep) {
                        const std::uint64_t seed = sim_seed + 1000003ULL * static_cast<std::uint64_t>(rep)
                                                   + 7919ULL * static_cast<std::uint64_t>(n);
                        batch[rep] = {pen, n, static_cast<int>(rep),
                                      gsam::sim::run_replicate(sim_scenario, n, sim_p, seed, spec, ro)};
                    });
                    rows.insert(rows.end(), batch.begin(), batch.end());
                }
            }
            if (!sim_out.empty()) {
                std::ofstream out(sim_out);
                if (!out) throw gsam::ArgumentError("cannot write '" + sim_out + "'");
                out << "scenario,method,n,rep,mse,lambda,active\n";
                for (const auto& r : rows) {
                    out << sim_scenario << ',' << r.method << ',' << r.n << ',' << r.rep << ','
                        << gsam::io::format_double(r.r.mse) << ',' << gsam::io::format_double(r.r.lambda) << ','
                        << r.r.active << '\n';
                }
            }
            std::cout << "scenario " << sim_scenario << ", p = " << sim_p << ", " << sim_reps << " replicates\n";
            std::cout << "method         n     mean_mse       se\n";
            for (const auto& pen : sim_penalties) {
                for (int n : sim_n) {
                    double s = 0.0, ss = 0.0;
                    int c = 0;
                    for (const auto& r : rows) {
                        if (r.method != pen || r.n != n) continue;
                        s += r.r.mse;
                        ss += r.r.mse * r.r.mse;
                        ++c;
                    }
                    const double mean = s / c;
                    const double se = c > 1 ? std::sqrt(std::max(0.0, (ss - c * mean * mean) / (c - 1)) / c) : 0.0;
                    char buf[128];
                    std::snprintf(buf, sizeof(buf), "%-12s %5d %12.6g %8.3g\n", pen.c_str(), n, mean, se);
                    std::cout << buf;
                }
            }
        } else if (*lm_cmd) {
            const auto data = load(lm_data);
            const auto spec = gsam::parse_penalty(lm_args.penalty);
            const auto loss = gsam::parse_loss(lm_args.loss);
            const auto opt = lm_args.options();
            std::cout << "lambda_max " << fmt("%.17g", gsam::lambda_max(data, loss, spec, opt.omega)) << '\n';
            std::cout << "conservative_bound " << fmt("%.17g", gsam::lambda_max_bound(data, loss, opt.omega)) << '\n';
        } else if (*sp_cmd) {
            sp_args.threads = threads;
            const auto data = load(sp_data);
            const auto loss = gsam::parse_loss(sp_args.loss);
            const gsam::PenaltySpec spec = gsam::SobolevSpline{sp_squared};
            const auto opt = sp_args.options();
            const auto grid = make_grid(data, loss, spec, opt, sp_n, sp_ratio);
            const auto sizes = gsam::sparsity_pattern_probe(data, sp_squared, grid, loss, opt);
            std::cout << "      lambda   |S|\n";
            for (std::size_t k = 0; k < grid.size(); ++k) {
                std::cout << fmt("%12.6g", grid[k]) << fmt(" %5.0f", static_cast<double>(sizes[k])) << '\n';
            }
        }
    } catch (const gsam::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const gsam::io::CsvError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return exit_other;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_other;
    }
    return 0;
}
