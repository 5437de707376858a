#include "kscl/loss.hpp"

#include "kscl/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kscl {

namespace {

// Softmax of scores / tau, max-subtracted. Returns probabilities and the
// stably computed -log p[index].
double softmax_nll(const Vec& scores, double tau, std::size_t index, Vec& probs) {
    const double maxs = *std::max_element(scores.begin(), scores.end());
    probs.resize(scores.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        probs[i] = std::exp((scores[i] - maxs) / tau);
        denom += probs[i];
    }
    for (double& p : probs) p /= denom;
    return std::log(denom) - (scores[index] - maxs) / tau;
}

void check_scores(std::size_t n, std::size_t positive, double tau) {
    if (n == 0 || positive >= n)
        fail(Errc::PositiveOutOfRange,
             "positive index " + std::to_string(positive) + " with " + std::to_string(n) +
                 " candidates");
    if (!(tau > 0.0)) fail(Errc::InvalidConfig, "temperature must be > 0");
}

} // namespace

Vec kshot_probabilities(const ContrastiveScores& scores) {
    check_scores(scores.lengths.size(), scores.positive_index, scores.temperature);
    for (double s : scores.lengths)
        if (!std::isfinite(s) || s < 0.0 || s > 1.0 + 1e-8)
            fail(Errc::NonFinite, "projection length " + std::to_string(s) + " outside [0, 1]");
    Vec probs;
    softmax_nll(scores.lengths, scores.temperature, scores.positive_index, probs);
    return probs;
}

LossOutput kshot_loss_and_grad(std::span<const double> query,
                               std::span<const InstanceSubspace* const> candidates,
                               std::size_t positive_index, double temperature) {
    check_scores(candidates.size(), positive_index, temperature);
    const std::size_t d = query.size();
    const std::size_t n = candidates.size();

    // Basis coefficients W^T v for every candidate, stored flat; they are
    // needed twice (scores, then gradient) and candidate counts can reach the
    // queue capacity, so no per-candidate allocations here.
    std::vector<std::size_t> offset(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (candidates[i]->dim() != d)
            fail(Errc::DimensionMismatch, "candidate " + std::to_string(i) + " dim mismatch");
        offset[i + 1] = offset[i] + candidates[i]->rank();
    }
    Vec coeffs(offset[n], 0.0);
    Vec scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Matrix& w = candidates[i]->basis;
        double* c = coeffs.data() + offset[i];
        const std::size_t rank = w.cols();
        for (std::size_t r = 0; r < d; ++r) {
            const double* row = w.row_ptr(r);
            const double vr = query[r];
            for (std::size_t j = 0; j < rank; ++j) c[j] += row[j] * vr;
        }
        if (rank == 1) {
            scores[i] = std::abs(c[0]);
        } else {
            double s = 0.0;
            for (std::size_t j = 0; j < rank; ++j) s += c[j] * c[j];
            scores[i] = std::sqrt(s);
        }
    }

    LossOutput out;
    out.loss = softmax_nll(scores, temperature, positive_index, out.probabilities);

    // d(loss)/dv = sum_n (p_n - [n==pos]) / tau * W_n W_n^T v / s_n, with the
    // zero subgradient where s_n vanishes (key side is a constant).
    out.grad_wrt_query.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (scores[i] <= kGradEpsilon) continue;
        const double alpha =
            (out.probabilities[i] - (i == positive_index ? 1.0 : 0.0)) / temperature / scores[i];
        if (alpha == 0.0) continue;
        const Matrix& w = candidates[i]->basis;
        const double* c = coeffs.data() + offset[i];
        const std::size_t rank = w.cols();
        for (std::size_t r = 0; r < d; ++r) {
            const double* row = w.row_ptr(r);
            double s = 0.0;
            for (std::size_t j = 0; j < rank; ++j) s += row[j] * c[j];
            out.grad_wrt_query[r] += alpha * s;
        }
    }
    return out;
}

LossOutput kshot_loss_and_grad(std::span<const double> query,
                               std::span<const InstanceSubspace> candidates,
                               std::size_t positive_index, double temperature) {
    std::vector<const InstanceSubspace*> ptrs(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) ptrs[i] = &candidates[i];
    return kshot_loss_and_grad(query, std::span<const InstanceSubspace* const>(ptrs),
                               positive_index, temperature);
}

Vec oneshot_probabilities(std::span<const double> query,
                          std::span<const EmbeddingVector> keys, double temperature) {
    check_scores(keys.size(), 0, temperature);
    Vec scores(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
        if (keys[i].dim() != query.size())
            fail(Errc::DimensionMismatch, "key " + std::to_string(i) + " dim mismatch");
        double s = 0.0;
        for (std::size_t r = 0; r < query.size(); ++r) s += keys[i].values[r] * query[r];
        scores[i] = s;
    }
    Vec probs;
    softmax_nll(scores, temperature, 0, probs);
    return probs;
}

} // namespace kscl
