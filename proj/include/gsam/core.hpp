#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>
#include <Eigen/Dense>
#include <gsam/error.hpp>

namespace gsam {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/**
 * Responses plus an n x p design.
 *
 * sort_index[j] is the permutation that sorts column j ascending (stable,
 * so tied values keep their original order).
 */
struct Dataset
{
    Vector y;
    Matrix x;
    std::vector<std::vector<Index>> sort_index;
    std::vector<std::string> feature_names;

    Index n() const { return y.size(); }
    Index p() const { return x.cols(); }

    static Dataset create(Vector y, Matrix x, std::vector<std::string> names = {})
    {
        if (y.size() < 2) throw ArgumentError("dataset needs at least 2 observations");
        if (x.cols() < 1) throw ArgumentError("dataset needs at least 1 feature");
        if (x.rows() != y.size()) {
            throw ArgumentError("design has " + std::to_string(x.rows()) + " rows but response has "
                                + std::to_string(y.size()));
        }
        if (!y.allFinite() || !x.allFinite()) throw ArgumentError("dataset contains non-finite entries");
        if (names.empty()) {
            names.reserve(x.cols());
            for (Index j = 0; j < x.cols(); ++j) names.push_back("x" + std::to_string(j + 1));
        }
        if (static_cast<Index>(names.size()) != x.cols()) throw ArgumentError("feature name count mismatch");

        Dataset d;
        d.y = std::move(y);
        d.x = std::move(x);
        d.feature_names = std::move(names);
        d.sort_index.resize(d.x.cols());
        for (Index j = 0; j < d.x.cols(); ++j) {
            auto& order = d.sort_index[j];
            order.resize(d.x.rows());
            std::iota(order.begin(), order.end(), Index{0});
            const auto col = d.x.col(j);
            std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return col(a) < col(b); });
        }
        return d;
    }

    Dataset subset_rows(std::span<const Index> rows) const
    {
        Vector ys(static_cast<Index>(rows.size()));
        Matrix xs(static_cast<Index>(rows.size()), p());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            ys(static_cast<Index>(i)) = y(rows[i]);
            xs.row(static_cast<Index>(i)) = x.row(rows[i]);
        }
        return create(std::move(ys), std::move(xs), feature_names);
    }
};

/**
 * Distinct sorted covariate values of one feature with tie multiplicities.
 * knot_of[i] maps observation i to its knot.
 */
struct FeatureGrid
{
    Vector knots;
    Vector weights;
    std::vector<Index> knot_of;

    Index size() const { return knots.size(); }
    Index n_obs() const { return static_cast<Index>(knot_of.size()); }

    static FeatureGrid build(const Dataset& data, Index j)
    {
        const auto col = data.x.col(j);
        const auto& order = data.sort_index[j];
        FeatureGrid g;
        g.knot_of.assign(data.n(), 0);
        std::vector<double> k, w;
        for (Index pos = 0; pos < data.n(); ++pos) {
            const Index i = order[pos];
            if (k.empty() || col(i) != k.back()) {
                k.push_back(col(i));
                w.push_back(0.0);
            }
            w.back() += 1.0;
            g.knot_of[i] = static_cast<Index>(k.size()) - 1;
        }
        g.knots = Eigen::Map<Vector>(k.data(), static_cast<Index>(k.size()));
        g.weights = Eigen::Map<Vector>(w.data(), static_cast<Index>(w.size()));
        return g;
    }

    /// Weighted average of per-observation values within each knot.
    Vector aggregate(const Vector& per_obs) const
    {
        Vector out = Vector::Zero(size());
        for (Index i = 0; i < n_obs(); ++i) out(knot_of[i]) += per_obs(i);
        return out.cwiseQuotient(weights);
    }

    /// Adds knot values back onto observations.
    void scatter_add(const Vector& knot_values, Vector& per_obs, double scale = 1.0) const
    {
        for (Index i = 0; i < n_obs(); ++i) per_obs(i) += scale * knot_values(knot_of[i]);
    }
};

/// Root mean square of a function's values at the n observations.
inline double empirical_norm(const Vector& values)
{
    if (values.size() == 0) throw ArgumentError("empirical_norm of an empty vector");
    return std::sqrt(values.squaredNorm() / static_cast<double>(values.size()));
}

/// Same norm computed from knot values and multiplicities (weights sum to n).
inline double weighted_norm(const Vector& values, const Vector& weights)
{
    return std::sqrt(values.cwiseAbs2().dot(weights) / weights.sum());
}

inline double weighted_mean(const Vector& values, const Vector& weights)
{
    return values.dot(weights) / weights.sum();
}

} // namespace gsam
