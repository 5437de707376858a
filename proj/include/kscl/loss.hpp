#pragma once

#include "kscl/subspace.hpp"

#include <span>
#include <vector>

namespace kscl {

struct ContrastiveScores {
    std::size_t positive_index = 0;
    Vec lengths;              // projection length per candidate, each in [0, 1]
    double temperature = 0.2; // softmax temperature tau
};

struct LossOutput {
    double loss = 0.0;
    Vec probabilities;  // softmax over lengths / tau, sums to 1
    Vec grad_wrt_query; // d(loss)/d(query), key side treated as constant
};

// Softmax over lengths / tau with max-subtraction. Throws PositiveOutOfRange
// on an empty candidate set or out-of-range positive, InvalidConfig on a
// non-positive temperature.
Vec kshot_probabilities(const ContrastiveScores& scores);

// Negative log-likelihood of the positive candidate under the projection
// softmax, plus its gradient with respect to the query embedding. Candidate
// bases never receive gradient (stop-gradient on the key side): the gradient
// is sum_n (p_n - [n==positive]) / tau * W_n W_n^T v / s_n, with a zero
// contribution where s_n falls below grad_epsilon (the square root is not
// differentiable at zero; the zero subgradient keeps gradients bounded).
LossOutput kshot_loss_and_grad(std::span<const double> query,
                               std::span<const InstanceSubspace* const> candidates,
                               std::size_t positive_index, double temperature);

// Convenience overload over a contiguous candidate array.
LossOutput kshot_loss_and_grad(std::span<const double> query,
                               std::span<const InstanceSubspace> candidates,
                               std::size_t positive_index, double temperature);

// One-shot baseline: softmax over signed cosines (inner products of unit
// vectors) divided by tau.
Vec oneshot_probabilities(std::span<const double> query,
                          std::span<const EmbeddingVector> keys, double temperature);

inline constexpr double kGradEpsilon = 1e-8;

} // namespace kscl
