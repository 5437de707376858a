#include "kscl/viz.hpp"

#include "kscl/error.hpp"

#include <cmath>

namespace kscl {

BasisVizResult synthesize_basis(const MlpParams& key_encoder, const Instance& instance,
                                const AugmentationConfig& aug, const TruncationPolicy& policy) {
    validate(aug);
    const std::size_t k = aug.k_shots;

    std::vector<Vec> raw_views;
    std::vector<EmbeddingVector> embeddings;
    raw_views.reserve(k);
    embeddings.reserve(k);
    for (std::size_t draw = 0; draw < k; ++draw) {
        raw_views.push_back(augment(instance, aug, draw));
        embeddings.push_back(embed(key_encoder, raw_views.back()));
    }

    const InstanceSubspace subspace = build_subspace(embeddings, policy, instance.id);

    BasisVizResult out;
    out.instance_id = instance.id;
    out.k_shots = k;
    out.rho = policy.rho;
    out.total_eigenmass = subspace.total_eigenmass;

    const std::size_t f = instance.features.size();
    for (std::size_t i = 0; i < subspace.rank(); ++i) {
        BasisComponent comp;
        comp.eigenvalue = subspace.retained_eigenvalues[i];
        out.retained_mass += comp.eigenvalue;

        comp.embedding_weights.resize(k);
        comp.weights.resize(k);
        const double inv_sqrt_lam = 1.0 / std::sqrt(comp.eigenvalue);
        for (std::size_t j = 0; j < k; ++j) {
            double w = 0.0;
            for (std::size_t r = 0; r < subspace.dim(); ++r)
                w += subspace.basis(r, i) * embeddings[j].values[r];
            comp.embedding_weights[j] = w;
            comp.weights[j] = w * inv_sqrt_lam;
        }

        double weight_sum = 0.0;
        for (double w : comp.weights) weight_sum += w;
        const double denom = std::abs(weight_sum) > 1e-9 ? weight_sum : 1.0;
        comp.synthesized.assign(f, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            const double coef = comp.weights[j] / denom;
            for (std::size_t r = 0; r < f; ++r) comp.synthesized[r] += coef * raw_views[j][r];
        }
        out.components.push_back(std::move(comp));
    }
    return out;
}

} // namespace kscl
