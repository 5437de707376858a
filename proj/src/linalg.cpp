#include "kscl/linalg.hpp"

#include "kscl/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kscl {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_columns(const std::vector<Vec>& columns) {
    if (columns.empty()) return Matrix();
    const std::size_t d = columns[0].size();
    Matrix m(d, columns.size());
    for (std::size_t k = 0; k < columns.size(); ++k) {
        if (columns[k].size() != d)
            fail(Errc::DimensionMismatch, "from_columns: ragged column lengths");
        for (std::size_t i = 0; i < d; ++i) m(i, k) = columns[k][i];
    }
    return m;
}

Vec Matrix::column(std::size_t c) const {
    Vec out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, c);
    return out;
}

bool Matrix::all_finite() const {
    for (double x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double x : a.data()) s += x * x;
    return std::sqrt(s);
}

Vec matvec(const Matrix& a, const Vec& x) {
    if (a.cols() != x.size()) fail(Errc::DimensionMismatch, "matvec: cols != len(x)");
    Vec y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* row = a.row_ptr(i);
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

Vec transpose_matvec(const Matrix& a, const Vec& x) {
    if (a.rows() != x.size()) fail(Errc::DimensionMismatch, "transpose_matvec: rows != len(x)");
    Vec y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* row = a.row_ptr(i);
        const double xi = x[i];
        for (std::size_t j = 0; j < a.cols(); ++j) y[j] += row[j] * xi;
    }
    return y;
}

Matrix gram(const Matrix& v) {
    if (!v.all_finite()) fail(Errc::NonFinite, "gram: non-finite input");
    const std::size_t k = v.cols();
    Matrix g(k, k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i; j < k; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < v.rows(); ++r) s += v(r, i) * v(r, j);
            g(i, j) = s;
            g(j, i) = s;
        }
    }
    return g;
}

namespace {

// One Jacobi rotation zeroing b(p,q), accumulating the rotation into v.
void jacobi_rotate(Matrix& b, Matrix& v, std::size_t p, std::size_t q) {
    const double bpq = b(p, q);
    if (bpq == 0.0) return;
    const double theta = (b(q, q) - b(p, p)) / (2.0 * bpq);
    const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    const double c = 1.0 / std::sqrt(t * t + 1.0);
    const double s = t * c;
    const std::size_t n = b.rows();

    for (std::size_t r = 0; r < n; ++r) {
        const double brp = b(r, p);
        const double brq = b(r, q);
        b(r, p) = c * brp - s * brq;
        b(r, q) = s * brp + c * brq;
    }
    for (std::size_t r = 0; r < n; ++r) {
        const double bpr = b(p, r);
        const double bqr = b(q, r);
        b(p, r) = c * bpr - s * bqr;
        b(q, r) = s * bpr + c * bqr;
    }
    for (std::size_t r = 0; r < n; ++r) {
        const double vrp = v(r, p);
        const double vrq = v(r, q);
        v(r, p) = c * vrp - s * vrq;
        v(r, q) = s * vrp + c * vrq;
    }
}

double offdiag_mass(const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = i + 1; j < b.cols(); ++j) s += 2.0 * b(i, j) * b(i, j);
    return std::sqrt(s);
}

} // namespace

EigenResult sym_eig(const Matrix& a) {
    const std::size_t n = a.rows();
    if (n != a.cols()) fail(Errc::NonSquare, "sym_eig: matrix is not square");
    if (!a.all_finite()) fail(Errc::NonFinite, "sym_eig: non-finite entries");

    double max_abs = 0.0;
    for (double x : a.data()) max_abs = std::max(max_abs, std::abs(x));
    const double sym_tol = 1e-12 * std::max(1.0, max_abs);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(a(i, j) - a(j, i)) > sym_tol)
                fail(Errc::NonSymmetric, "sym_eig: asymmetry beyond tolerance");

    // Work on the symmetrized copy so round-off asymmetry cannot leak in.
    Matrix b(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        b(i, i) = a(i, i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double m = 0.5 * (a(i, j) + a(j, i));
            b(i, j) = m;
            b(j, i) = m;
        }
    }

    Matrix v = Matrix::identity(n);
    const double norm_a = frobenius_norm(b);
    const double stop = 1e-12 * norm_a;

    constexpr int kMaxSweeps = 100;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        if (offdiag_mass(b) <= stop) break;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) jacobi_rotate(b, v, p, q);
    }

    // Canonical sign: largest-magnitude entry of each eigenvector positive,
    // ties broken by lowest index.
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double m = std::abs(v(r, c));
            if (m > best) {
                best = m;
                arg = r;
            }
        }
        if (v(arg, c) < 0.0)
            for (std::size_t r = 0; r < n; ++r) v(r, c) = -v(r, c);
    }

    // Stable descending sort keeps Jacobi output order within ties.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return b(i, i) > b(j, j); });

    EigenResult out;
    out.eigenvalues.resize(n);
    out.eigenvectors = Matrix(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        out.eigenvalues[c] = b(order[c], order[c]);
        for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, c) = v(r, order[c]);
    }
    return out;
}

} // namespace kscl
