#pragma once
#include <algorithm>
#include <cmath>
#include <vector>
#include <gsam/core.hpp>

namespace gsam {

/**
 * Symmetric positive-definite band matrix with an in-place LDL^T factorization.
 * Only the lower band is stored: entry (i, j) with 0 <= i - j <= bandwidth.
 */
class BandedSpd
{
public:
    BandedSpd(Index n, Index bandwidth)
        : n_(n), bw_(bandwidth), band_(Matrix::Zero(n, bandwidth + 1))
    {}

    Index size() const { return n_; }
    Index bandwidth() const { return bw_; }

    double& operator()(Index i, Index j)
    {
        if (i < j) std::swap(i, j);
        return band_(i, i - j);
    }

    double operator()(Index i, Index j) const
    {
        if (i < j) std::swap(i, j);
        return (i - j > bw_) ? 0.0 : band_(i, i - j);
    }

    void factorize()
    {
        for (Index i = 0; i < n_; ++i) {
            const Index k0 = std::max<Index>(0, i - bw_);
            for (Index j = k0; j <= i; ++j) {
                double s = band_(i, i - j);
                for (Index k = k0; k < j; ++k) {
                    s -= band_(i, i - k) * band_(k, 0) * band_(j, j - k);
                }
                if (j < i) {
                    band_(i, i - j) = s / band_(j, 0);
                } else {
                    if (!(s > 0.0) || !std::isfinite(s)) {
                        throw NumericalError("band matrix is not positive definite at row " + std::to_string(i));
                    }
                    band_(i, 0) = s;
                }
            }
        }
        factored_ = true;
    }

    Vector solve(const Vector& b) const
    {
        if (!factored_) throw NumericalError("BandedSpd::solve called before factorize");
        Vector x = b;
        for (Index i = 0; i < n_; ++i) {
            for (Index k = std::max<Index>(0, i - bw_); k < i; ++k) x(i) -= band_(i, i - k) * x(k);
        }
        for (Index i = 0; i < n_; ++i) x(i) /= band_(i, 0);
        for (Index i = n_ - 1; i >= 0; --i) {
            for (Index k = i + 1; k <= std::min(n_ - 1, i + bw_); ++k) x(i) -= band_(k, k - i) * x(k);
        }
        return x;
    }

private:
    Index n_;
    Index bw_;
    Matrix band_;
    bool factored_ = false;
};

/**
 * Banded operator whose row i has coefficients coef(i, 0..width-1) at columns
 * i..i+width-1. Discrete difference operators have this shape.
 */
struct BandedRows
{
    Matrix coef;
    Index cols = 0;

    Index rows() const { return coef.rows(); }
    Index width() const { return coef.cols(); }

    Vector apply(const Vector& f) const
    {
        Vector out = Vector::Zero(rows());
        for (Index i = 0; i < rows(); ++i) {
            for (Index c = 0; c < width(); ++c) out(i) += coef(i, c) * f(i + c);
        }
        return out;
    }

    Vector apply_transpose(const Vector& u) const
    {
        Vector out = Vector::Zero(cols);
        for (Index i = 0; i < rows(); ++i) {
            for (Index c = 0; c < width(); ++c) out(i + c) += coef(i, c) * u(i);
        }
        return out;
    }

    Matrix dense() const
    {
        Matrix d = Matrix::Zero(rows(), cols);
        for (Index i = 0; i < rows(); ++i) {
            for (Index c = 0; c < width(); ++c) d(i, i + c) = coef(i, c);
        }
        return d;
    }

    /// Row sums of absolute coefficients, used to scale zero tests on D f.
    Vector row_abs_sums() const { return coef.cwiseAbs().rowwise().sum(); }
};

/// D_S diag(s) D_S^T as a band matrix, where D_S keeps the listed rows of d (increasing order).
inline BandedSpd weighted_gram(const BandedRows& d, const Vector& s, const std::vector<Index>& rows)
{
    const auto k = static_cast<Index>(rows.size());
    const Index width = d.width();
    BandedSpd g(k, std::max<Index>(0, width - 1));
    for (Index a = 0; a < k; ++a) {
        const Index ra = rows[a];
        for (Index b = a; b >= 0 && ra - rows[b] < width; --b) {
            const Index rb = rows[b];
            double acc = 0.0;
            for (Index c = 0; c < width; ++c) {
                const Index cb = ra + c - rb;
                if (cb < width) acc += d.coef(ra, c) * d.coef(rb, cb) * s(ra + c);
            }
            g(a, b) = acc;
        }
    }
    return g;
}

inline BandedSpd weighted_gram(const BandedRows& d, const Vector& s)
{
    std::vector<Index> all(d.rows());
    for (Index i = 0; i < d.rows(); ++i) all[i] = i;
    return weighted_gram(d, s, all);
}

/**
 * Banded least squares by Givens QR: rows are added one at a time, each with its
 * nonzeros at consecutive columns start..start+len-1 (len <= bandwidth), in
 * nondecreasing order of start so that no fill leaves the band. The QR
 * form avoids the squared conditioning of the normal equations, which matters
 * for difference operators scaled by tiny knot gaps.
 */
class BandedLeastSquares
{
public:
    BandedLeastSquares(Index cols, Index bandwidth)
        : cols_(cols), bw_(std::max<Index>(1, bandwidth)), r_(Matrix::Zero(cols, std::max<Index>(1, bandwidth)))
    {}

    /**
     * minimize ||diag(d) f - top||^2 + ||s B f - bottom||^2. Rows are interleaved
     * (row i of diag(d), then row i of s B); stacked_rhs builds the matching right-hand side.
     */
    static BandedLeastSquares stacked(const Vector& d, const BandedRows& b, double s)
    {
        BandedLeastSquares ls(d.size(), b.width());
        Vector row(b.width());
        for (Index i = 0; i < d.size(); ++i) {
            ls.add_row(i, &d(i), 1);
            if (i < b.rows()) {
                row = s * b.coef.row(i).transpose();
                ls.add_row(i, row.data(), b.width());
            }
        }
        return ls;
    }

    static Vector stacked_rhs(const Vector& top, const Vector& bottom)
    {
        Vector rhs(top.size() + bottom.size());
        Index pos = 0;
        for (Index i = 0; i < top.size(); ++i) {
            rhs(pos++) = top(i);
            if (i < bottom.size()) rhs(pos++) = bottom(i);
        }
        return rhs;
    }

    void add_row(Index start, const double* coef, Index len)
    {
        if (len > bw_ || start < 0 || (!starts_.empty() && start < starts_.back())) {
            throw ArgumentError("banded least squares: rows must fit the band and come in nondecreasing column order");
        }
        std::vector<double> v(static_cast<std::size_t>(bw_), 0.0);
        for (Index c = 0; c < len; ++c) v[c] = coef[c];
        starts_.push_back(start);
        for (Index k = 0; k < bw_; ++k) {
            const Index col = start + k;
            double cs = 1.0, sn = 0.0;
            if (col < cols_ && v[0] != 0.0) {
                const double h = std::hypot(r_(col, 0), v[0]);
                cs = r_(col, 0) / h;
                sn = v[0] / h;
                r_(col, 0) = h;
                for (Index c = 1; c < bw_ && col + c < cols_; ++c) {
                    const double a = r_(col, c), bv = v[c];
                    r_(col, c) = cs * a + sn * bv;
                    v[c] = -sn * a + cs * bv;
                }
            }
            rot_.push_back(cs);
            rot_.push_back(sn);
            for (Index c = 0; c + 1 < bw_; ++c) v[c] = v[c + 1];
            v[bw_ - 1] = 0.0;
        }
    }

    Index rows() const { return static_cast<Index>(starts_.size()); }

    /// Least-squares solution for the right-hand side of the rows in the order added.
    Vector solve(const Vector& rhs) const
    {
        if (rhs.size() != rows()) throw ArgumentError("banded least squares: right-hand side has the wrong length");
        Vector y = Vector::Zero(cols_);
        std::size_t pos = 0;
        for (Index i = 0; i < rows(); ++i) {
            double t = rhs(i);
            for (Index k = 0; k < bw_; ++k, pos += 2) {
                const Index col = starts_[i] + k;
                if (col >= cols_) continue;
                const double cs = rot_[pos], sn = rot_[pos + 1];
                const double a = y(col);
                y(col) = cs * a + sn * t;
                t = -sn * a + cs * t;
            }
        }
        for (Index i = cols_ - 1; i >= 0; --i) {
            if (!(r_(i, 0) > 0.0)) throw NumericalError("banded least squares is rank deficient at column " + std::to_string(i));
            for (Index c = 1; c < bw_ && i + c < cols_; ++c) y(i) -= r_(i, c) * y(i + c);
            y(i) /= r_(i, 0);
        }
        return y;
    }

    /**
     * rhs minus its least-squares fit, formed by rotating the leftover components
     * back through Q. Accurate to rounding in rhs even when R is ill-conditioned.
     */
    Vector residual(const Vector& rhs) const
    {
        if (rhs.size() != rows()) throw ArgumentError("banded least squares: right-hand side has the wrong length");
        Vector y = Vector::Zero(cols_);
        Vector t = rhs;
        std::size_t pos = 0;
        for (Index i = 0; i < rows(); ++i) {
            for (Index k = 0; k < bw_; ++k, pos += 2) {
                const Index col = starts_[i] + k;
                if (col >= cols_) continue;
                const double a = y(col);
                y(col) = rot_[pos] * a + rot_[pos + 1] * t(i);
                t(i) = -rot_[pos + 1] * a + rot_[pos] * t(i);
            }
        }
        y.setZero();
        for (Index i = rows() - 1; i >= 0; --i) {
            pos = static_cast<std::size_t>((i + 1) * bw_ * 2);
            for (Index k = bw_ - 1; k >= 0; --k) {
                pos -= 2;
                const Index col = starts_[i] + k;
                if (col >= cols_) continue;
                const double yc = y(col);
                y(col) = rot_[pos] * yc - rot_[pos + 1] * t(i);
                t(i) = rot_[pos + 1] * yc + rot_[pos] * t(i);
            }
        }
        return t;
    }

    /// Solution for a system built by stacked().
    Vector solve(const Vector& top, const Vector& bottom) const { return solve(stacked_rhs(top, bottom)); }

private:
    Index cols_;
    Index bw_;
    Matrix r_;
    std::vector<Index> starts_;
    std::vector<double> rot_;
};

} // namespace gsam
