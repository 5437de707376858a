#pragma once

#include "kscl/data.hpp"
#include "kscl/encoder.hpp"
#include "kscl/subspace.hpp"

namespace kscl {

// One retained basis direction of an instance subspace, decomposed back onto
// the K augmentations that span it.
struct BasisComponent {
    double eigenvalue = 0.0;
    Vec weights;           // unit-norm combination weights, one per augmentation
    Vec embedding_weights; // inner products <w_i, v_k>; squared norm equals eigenvalue
    Vec synthesized;       // weighted combination of the K raw augmented inputs
};

struct BasisVizResult {
    std::uint64_t instance_id = 0;
    std::size_t k_shots = 0;
    double rho = 0.0;
    double total_eigenmass = 0.0;
    double retained_mass = 0.0; // sum of retained eigenvalues
    std::vector<BasisComponent> components;
};

// Embeds the K key views of one instance with the (frozen) key encoder,
// decomposes the spanned subspace, and expresses every retained basis vector
// as a weighted combination of the raw augmented inputs. The synthesized
// input is the weight-sum-normalized combination, so duplicate augmentations
// reproduce the instance exactly; when the weights nearly cancel the raw
// combination is emitted instead.
BasisVizResult synthesize_basis(const MlpParams& key_encoder, const Instance& instance,
                                const AugmentationConfig& aug, const TruncationPolicy& policy);

} // namespace kscl
