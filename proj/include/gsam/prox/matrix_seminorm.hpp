#pragma once
#include <algorithm>
#include <cmath>
#include <vector>
#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <gsam/error.hpp>
#include <gsam/prox/dual_norm.hpp>
#include <gsam/prox/sqrt_trick.hpp>
#include <gsam/prox/trend_filter.hpp>

namespace gsam::prox {

namespace detail {

/// Orthonormal basis of the null space of d.
inline Matrix null_basis(const Matrix& d)
{
    const Index n = d.cols();
    if (d.rows() == 0) return Matrix::Identity(n, n);
    Eigen::JacobiSVD<Matrix> svd(d, Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    Index rank = 0;
    while (rank < s.size() && s(rank) > 1e-10 * s(0)) ++rank;
    return svd.matrixV().rightCols(n - rank);
}

inline Vector weighted_null_projection(const Matrix& d, const Vector& r, const Vector& w)
{
    const Matrix nb = null_basis(d);
    if (nb.cols() == 0) return Vector::Zero(r.size());
    const Vector sw = w.cwiseSqrt();
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(sw.asDiagonal() * nb);
    return nb * cod.solve(sw.cwiseProduct(r));
}

/// Exact solve of min 1/2 sum w (r - f)^2 + lam ||D f||_1 for a given sign pattern of D f.
inline bool polish_l1_dense(const Matrix& d, const Vector& r, const Vector& w, double lam,
                            const std::vector<signed char>& sign, Vector& f_out)
{
    const Index rows = d.rows();
    std::vector<Index> zero;
    Vector u = Vector::Zero(rows);
    for (Index i = 0; i < rows; ++i) {
        if (sign[i] == 0) zero.push_back(i);
        else u(i) = lam * sign[i];
    }
    const Vector winv = w.cwiseInverse();
    if (!zero.empty()) {
        const auto nz = static_cast<Index>(zero.size());
        Matrix dz(nz, d.cols());
        for (Index a = 0; a < nz; ++a) dz.row(a) = d.row(zero[a]);
        const Vector base = r - winv.cwiseProduct(d.transpose() * u);
        const Matrix gram = dz * winv.asDiagonal() * dz.transpose();
        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(gram);
        const Vector uz = cod.solve(dz * base);
        for (Index a = 0; a < nz; ++a) {
            if (!(std::abs(uz(a)) <= lam * (1.0 + 1e-9))) return false;
            u(zero[a]) = std::clamp(uz(a), -lam, lam);
        }
    }
    Vector f = r - winv.cwiseProduct(d.transpose() * u);
    const Vector df = d * f;
    const double scale = 1e-10 * std::max(1.0, f.cwiseAbs().maxCoeff());
    const Vector row_scale = d.cwiseAbs().rowwise().sum();
    for (Index i = 0; i < rows; ++i) {
        const double tol = scale * std::max(1.0, row_scale(i));
        if (sign[i] == 0 && std::abs(df(i)) > tol) return false;
        if (sign[i] != 0 && sign[i] * df(i) < -tol) return false;
    }
    f_out = std::move(f);
    return true;
}

} // namespace detail

/// min 1/2 sum w (r - f)^2 + lam ||D f||_1 for a dense D, by ADMM on z = D f with exact polishing.
inline Vector matrix_l1_prox(const Matrix& d, const Vector& r, const Vector& w, double lam,
                             const AdmmSettings& settings = {})
{
    if (lam <= 0.0 || d.rows() == 0) return r;
    const Index rows = d.rows();
    const Matrix dtd = d.transpose() * d;
    auto factor = [&](double rho) {
        Matrix a = rho * dtd;
        a.diagonal() += w;
        return Eigen::LLT<Matrix>(a);
    };
    double rho = lam;
    Eigen::LLT<Matrix> system = factor(rho);
    const Vector wr = w.cwiseProduct(r);
    Vector f = r;
    Vector z = d * f;
    Vector u = Vector::Zero(rows);
    std::vector<signed char> last_pattern;
    double primal = 0.0, dual = 0.0;
    for (int it = 1; it <= settings.max_iter; ++it) {
        f = system.solve(wr + rho * d.transpose() * (z - u));
        const Vector df = d * f;
        const Vector z_old = z;
        const Vector target = df + u;
        const double thr = lam / rho;
        z = (target.array().abs() - thr).max(0.0) * target.array().sign();
        u += df - z;
        primal = (df - z).norm();
        dual = rho * (d.transpose() * (z - z_old)).norm();

        if (it % settings.polish_every == 0) {
            std::vector<signed char> pattern(rows);
            for (Index i = 0; i < rows; ++i) pattern[i] = z(i) > 0.0 ? 1 : (z(i) < 0.0 ? -1 : 0);
            if (pattern != last_pattern) {
                Vector exact;
                if (detail::polish_l1_dense(d, r, w, lam, pattern, exact)) return exact;
                last_pattern = std::move(pattern);
            }
            const double scale_p = std::max({1.0, df.norm(), z.norm()});
            const double scale_d = std::max(1.0, rho * (d.transpose() * u).norm());
            if (primal <= settings.tol * scale_p && dual <= settings.tol * scale_d) return f;
            if (primal > 10.0 * dual) {
                rho *= 2.0;
                u /= 2.0;
                system = factor(rho);
            } else if (dual > 10.0 * primal) {
                rho /= 2.0;
                u *= 2.0;
                system = factor(rho);
            }
        }
    }
    throw SolverError("matrix seminorm ADMM did not converge", std::max(primal, dual));
}

/// min 1/2 ||r - f||_n^2 + lambda1 ||D f||_2 via the squared problem (W + 2 n lt D^T D) f = W r.
inline SqrtTrickResult matrix_l2_prox(const Matrix& d, const Vector& r, const Vector& w, double lambda1,
                                      double hint = 0.0)
{
    const double n = w.sum();
    const Vector f_null = detail::weighted_null_projection(d, r, w);
    const double dual = dual_norm_matrix(d, w.cwiseProduct(r - f_null) / n, 2.0);
    const Matrix dtd = d.transpose() * d;
    const Vector wr = w.cwiseProduct(r);
    return sqrt_trick(
        lambda1, dual, f_null, (d * r).norm(),
        [&](double lt) {
            Matrix a = (2.0 * n * lt) * dtd;
            a.diagonal() += w;
            Vector f = a.ldlt().solve(wr);
            const double pen = (d * f).norm();
            return std::pair{std::move(f), pen};
        },
        hint);
}

} // namespace gsam::prox
