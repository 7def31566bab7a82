#pragma once
#include <cmath>
#include <Eigen/QR>
#include <gsam/penalty.hpp>

namespace gsam::prox {

/// Weighted least-squares projection of r onto the columns of b.
inline Vector weighted_projection(const Matrix& b, const Vector& r, const Vector& w)
{
    const Vector sw = w.cwiseSqrt();
    const Matrix bw = sw.asDiagonal() * b;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(bw);
    const Vector coef = cod.solve(sw.cwiseProduct(r));
    return b * coef;
}

inline Vector basis_projection(const Vector& knots, const Vector& r, const Vector& w, const BasisSubspace& spec)
{
    return weighted_projection(basis_matrix(knots, spec), r, w);
}

} // namespace gsam::prox
