#pragma once

#include "kscl/linalg.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace kscl {

// Unit-length feature vector. The contrastive geometry lives on the unit
// sphere; every embedding entering subspace construction or scoring is
// expected to carry norm 1 (to 1e-8).
struct EmbeddingVector {
    Vec values;

    std::size_t dim() const { return values.size(); }

    // Validates unit norm and finiteness; throws NonUnitKey / NonFinite.
    static EmbeddingVector require_unit(Vec v);

    // Scales v to unit norm (norm guard 1e-12); throws NonFinite.
    static EmbeddingVector normalized(Vec v);
};

struct TruncationPolicy {
    double rho = 1.0;            // fraction of eigenvalue mass to retain, (0, 1]
    double rank_epsilon = 1e-10; // eigenvalues at or below this count as rank zero
};

// Truncated orthonormal basis of the span of one instance's K key embeddings.
// basis is D x L with orthonormal columns (eigenvectors of V V^T for the
// largest eigenvalues, computed through the K x K dual form); immutable once
// built and safe to share across threads.
struct InstanceSubspace {
    Matrix basis;                 // D x L
    Vec retained_eigenvalues;     // length L, descending, all > rank_epsilon
    double total_eigenmass = 0.0; // sum of all K eigenvalues before truncation
    std::uint64_t instance_tag = 0;

    std::size_t dim() const { return basis.rows(); }
    std::size_t rank() const { return basis.cols(); }
};

// Smallest L whose leading eigenvalues cover rho of the spectrum mass, where
// the spectrum is first clamped at zero and floored at rank_epsilon.
// eigenvalues must be sorted descending. Throws AllZeroSpectrum when nothing
// survives the floor.
std::size_t select_rank(const Vec& eigenvalues, const TruncationPolicy& policy);

// Builds the instance subspace of the given keys: Gram of the keys in the
// K x K dual form, eigendecomposition, rho-truncation, then the basis map
// w_i = V u_i / sqrt(lambda_i). Throws EmptyKeys / NonUnitKey / KExceedsDim /
// DimensionMismatch.
InstanceSubspace build_subspace(std::span<const EmbeddingVector> keys,
                                const TruncationPolicy& policy, std::uint64_t tag);

// ||W^T v||_2: cosine of the acute angle between the query and the subspace.
double projection_length(const InstanceSubspace& s, std::span<const double> v);

// sqrt(max(0, 1 - projection_length^2)): distance from a unit query to its
// projection.
double projection_distance(const InstanceSubspace& s, std::span<const double> v);

// W W^T v, the orthogonal projection of v onto the subspace.
Vec project(const InstanceSubspace& s, std::span<const double> v);

} // namespace kscl
