#include "kscl/subspace.hpp"

#include "kscl/error.hpp"

#include <cmath>
#include <string>

namespace kscl {

namespace {

bool finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

void check_dim(const InstanceSubspace& s, std::span<const double> v) {
    if (s.basis.rows() != v.size())
        fail(Errc::DimensionMismatch,
             "query dim " + std::to_string(v.size()) + " vs subspace dim " +
                 std::to_string(s.basis.rows()));
}

Vec basis_coefficients(const InstanceSubspace& s, std::span<const double> v) {
    const Matrix& w = s.basis;
    Vec c(w.cols(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const double* row = w.row_ptr(r);
        const double vr = v[r];
        for (std::size_t j = 0; j < w.cols(); ++j) c[j] += row[j] * vr;
    }
    return c;
}

} // namespace

EmbeddingVector EmbeddingVector::require_unit(Vec v) {
    if (!finite(v)) fail(Errc::NonFinite, "embedding has non-finite entries");
    const double n = norm2(v);
    if (std::abs(n - 1.0) > 1e-8)
        fail(Errc::NonUnitKey, "embedding norm " + std::to_string(n) + " != 1");
    return EmbeddingVector{std::move(v)};
}

EmbeddingVector EmbeddingVector::normalized(Vec v) {
    if (!finite(v)) fail(Errc::NonFinite, "embedding has non-finite entries");
    double n = norm2(v);
    if (n < 1e-12) n += 1e-12;
    for (double& x : v) x /= n;
    return EmbeddingVector{std::move(v)};
}

std::size_t select_rank(const Vec& eigenvalues, const TruncationPolicy& policy) {
    Vec kept;
    kept.reserve(eigenvalues.size());
    for (double lam : eigenvalues) {
        const double clamped = lam < 0.0 ? 0.0 : lam;
        if (clamped > policy.rank_epsilon) kept.push_back(clamped);
    }
    if (kept.empty()) fail(Errc::AllZeroSpectrum, "no eigenvalue above rank_epsilon");

    double total = 0.0;
    for (double lam : kept) total += lam;
    const double threshold = policy.rho * total;

    double cum = 0.0;
    for (std::size_t l = 0; l < kept.size(); ++l) {
        cum += kept[l];
        if (cum >= threshold) return l + 1;
    }
    return kept.size(); // round-off shortfall at rho = 1
}

InstanceSubspace build_subspace(std::span<const EmbeddingVector> keys,
                                const TruncationPolicy& policy, std::uint64_t tag) {
    if (keys.empty()) fail(Errc::EmptyKeys, "no key embeddings");
    const std::size_t d = keys[0].dim();
    const std::size_t k = keys.size();
    if (k > d)
        fail(Errc::KExceedsDim,
             "K=" + std::to_string(k) + " exceeds embedding dim " + std::to_string(d));
    for (const EmbeddingVector& key : keys) {
        if (key.dim() != d) fail(Errc::DimensionMismatch, "key dims disagree");
        const double n = norm2(key.values);
        if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-8)
            fail(Errc::NonUnitKey, "key norm " + std::to_string(n) + " != 1");
    }

    InstanceSubspace out;
    out.instance_tag = tag;

    if (k == 1) {
        // One-shot case: the subspace collapses to the key's own line, so the
        // projection length reduces to an absolute cosine. Storing the key
        // verbatim keeps that reduction bit-exact.
        out.basis = Matrix::from_columns({keys[0].values});
        const double mass = dot(keys[0].values, keys[0].values);
        out.retained_eigenvalues = {mass};
        out.total_eigenmass = mass;
        return out;
    }

    Matrix v(d, k);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < d; ++i) v(i, j) = keys[j].values[i];

    const EigenResult eig = sym_eig(gram(v));

    double total_mass = 0.0;
    for (double lam : eig.eigenvalues) total_mass += lam < 0.0 ? 0.0 : lam;
    out.total_eigenmass = total_mass;

    const std::size_t rank = select_rank(eig.eigenvalues, policy);

    // Dual-form basis map: w_i = V u_i / sqrt(lambda_i), followed by one
    // modified Gram-Schmidt pass. The map already gives near-orthonormal
    // columns; the sweep removes the residual that division by a small
    // sqrt(lambda) can amplify, without changing the span.
    Matrix basis(d, rank);
    for (std::size_t j = 0; j < rank; ++j) {
        const double inv_sqrt_lam = 1.0 / std::sqrt(eig.eigenvalues[j]);
        Vec w(d, 0.0);
        for (std::size_t col = 0; col < k; ++col) {
            const double coef = eig.eigenvectors(col, j) * inv_sqrt_lam;
            for (std::size_t i = 0; i < d; ++i) w[i] += coef * v(i, col);
        }
        for (std::size_t prev = 0; prev < j; ++prev) {
            double proj = 0.0;
            for (std::size_t i = 0; i < d; ++i) proj += basis(i, prev) * w[i];
            for (std::size_t i = 0; i < d; ++i) w[i] -= proj * basis(i, prev);
        }
        const double n = norm2(w);
        for (std::size_t i = 0; i < d; ++i) basis(i, j) = w[i] / n;
    }

    out.basis = std::move(basis);
    out.retained_eigenvalues.assign(eig.eigenvalues.begin(), eig.eigenvalues.begin() + rank);
    return out;
}

double projection_length(const InstanceSubspace& s, std::span<const double> v) {
    check_dim(s, v);
    const Vec c = basis_coefficients(s, v);
    if (c.size() == 1) return std::abs(c[0]);
    return norm2(c);
}

double projection_distance(const InstanceSubspace& s, std::span<const double> v) {
    const double len = projection_length(s, v);
    return std::sqrt(std::max(0.0, 1.0 - len * len));
}

Vec project(const InstanceSubspace& s, std::span<const double> v) {
    check_dim(s, v);
    const Vec c = basis_coefficients(s, v);
    const Matrix& w = s.basis;
    Vec out(w.rows(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const double* row = w.row_ptr(r);
        double sum = 0.0;
        for (std::size_t j = 0; j < w.cols(); ++j) sum += row[j] * c[j];
        out[r] = sum;
    }
    return out;
}

} // namespace kscl
