#pragma once
#include <cmath>
#include <limits>
#include <Eigen/SVD>
#include <gsam/core.hpp>

namespace gsam::prox {

/// Conjugate exponent: 1 <-> inf, 2 <-> 2.
inline double conjugate_exponent(double q)
{
    if (q == 1.0) return std::numeric_limits<double>::infinity();
    if (std::isinf(q)) return 1.0;
    return q / (q - 1.0);
}

inline double lp_norm(const Vector& v, double q)
{
    if (v.size() == 0) return 0.0;
    if (std::isinf(q)) return v.lpNorm<Eigen::Infinity>();
    if (q == 1.0) return v.lpNorm<1>();
    if (q == 2.0) return v.norm();
    return std::pow(v.cwiseAbs().array().pow(q).sum(), 1.0 / q);
}

/**
 * ||D (D^T D)^+ v||_{q*} with 1/q + 1/q* = 1. Ranks below 1e-10 times the largest
 * singular value are dropped. Returns +inf when v is not in the row space of D
 * (relative residual above 1e-8). For D with full row rank this is the dual of
 * f -> ||D f||_q; otherwise it bounds the dual from above.
 */
inline double dual_norm_matrix(const Matrix& d, const Vector& v, double q)
{
    if (d.cols() != v.size()) {
        throw ArgumentError("dual_norm_matrix: D has " + std::to_string(d.cols()) + " columns but v has "
                            + std::to_string(v.size()) + " entries");
    }
    if (!(q >= 1.0)) throw ArgumentError("dual_norm_matrix needs q >= 1");
    const double vnorm = v.norm();
    if (vnorm == 0.0) return 0.0;
    if (d.rows() == 0) return std::numeric_limits<double>::infinity();

    Eigen::JacobiSVD<Matrix> svd(d, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double cutoff = 1e-10 * s(0);
    Index rank = 0;
    while (rank < s.size() && s(rank) > cutoff) ++rank;
    if (rank == 0) return std::numeric_limits<double>::infinity();

    const auto vr = svd.matrixV().leftCols(rank);
    const Vector coord = vr.transpose() * v;
    if ((v - vr * coord).norm() > 1e-8 * vnorm) return std::numeric_limits<double>::infinity();
    const Vector w = svd.matrixU().leftCols(rank) * coord.cwiseQuotient(s.head(rank));
    return lp_norm(w, conjugate_exponent(q));
}

} // namespace gsam::prox
