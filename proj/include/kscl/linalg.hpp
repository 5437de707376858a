#pragma once

#include <cstddef>
#include <vector>

namespace kscl {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Everything in this project is small
// (K x K Gram matrices with K <= ~16, D x L bases with D <= a few hundred),
// so plain loops over contiguous storage are all we need.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);

    // Builds a D x K matrix whose k-th column is columns[k].
    static Matrix from_columns(const std::vector<Vec>& columns);

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }
    double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }

    Vec column(std::size_t c) const;

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct EigenResult {
    Vec eigenvalues;     // sorted non-increasing
    Matrix eigenvectors; // column i pairs with eigenvalues[i]; orthonormal columns
};

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Converges when the off-diagonal Frobenius mass drops below 1e-12 * ||A||_F
// (hard cap of 100 sweeps). Eigenvalues come back sorted descending and each
// eigenvector is sign-flipped so its largest-magnitude entry is positive
// (ties broken by lowest index), which makes results deterministic.
// Throws NonSquare / NonSymmetric / NonFinite.
EigenResult sym_eig(const Matrix& a);

// Gram matrix V^T V of the columns of v (the K x K dual form; K << D makes
// this much cheaper than the D x D outer-product form with the same nonzero
// spectrum). Result is exactly symmetric by construction. Throws NonFinite.
Matrix gram(const Matrix& v);

// y = A x.  Throws DimensionMismatch.
Vec matvec(const Matrix& a, const Vec& x);

// y = A^T x.  Throws DimensionMismatch.
Vec transpose_matvec(const Matrix& a, const Vec& x);

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& v);
double frobenius_norm(const Matrix& a);

} // namespace kscl
