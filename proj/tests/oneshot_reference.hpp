// Reference one-shot contrastive loop used as the oracle for the K = 1
// equivalence checks. It never touches the subspace / loss / queue / trainer
// modules: the dictionary holds raw key vectors, scores are absolute cosines
// computed inline, and the gradient is assembled from the softmax by hand.
// Data, RNG streams and the encoder are shared with the system under test so
// both sides consume identical draws.
#pragma once

#include "kscl/data.hpp"
#include "kscl/encoder.hpp"
#include "kscl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

namespace kscl_test {

struct OneShotResult {
    std::vector<double> step_losses;
    kscl::MlpParams query_encoder;
};

inline OneShotResult reference_oneshot_loop(const kscl::TrainConfig& cfg,
                                            const std::vector<kscl::Instance>& dataset) {
    using namespace kscl;

    Rng init_rng(StreamKey(cfg.seed).with("encoder-init"));
    EncoderPair pair = EncoderPair::create(cfg.encoder_dims(), cfg.encoder_momentum, init_rng);
    SgdState opt = SgdState::zeros(pair.query);
    AugmentationConfig aug = cfg.augmentation();
    aug.k_shots = 1;

    std::deque<Vec> dictionary; // key vectors, oldest first

    OneShotResult result;
    std::uint64_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double t = static_cast<double>(epoch) / static_cast<double>(cfg.epochs);
        const double lr =
            cfg.cosine_decay ? cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t))
                             : cfg.base_lr;

        // same shuffle stream and algorithm as the trainer
        Rng shuffle_rng(StreamKey(cfg.seed).with("shuffle").with(epoch));
        std::vector<std::size_t> order(dataset.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = shuffle_rng.below(i);
            std::swap(order[i - 1], order[j]);
        }

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - start);

            std::vector<Vec> batch_keys(count);
            std::vector<Vec> batch_queries(count);
            for (std::size_t i = 0; i < count; ++i) {
                const Instance& inst = dataset[order[start + i]];
                batch_keys[i] = embed(pair.key, augment(inst, aug, 0, step)).values;
                batch_queries[i] = augment(inst, aug, 1, step);
            }

            const std::vector<Vec> negatives(dictionary.begin(), dictionary.end());

            MlpGrads grads = zero_grads(pair.query);
            double loss_sum = 0.0;
            ForwardCache cache;
            for (std::size_t i = 0; i < count; ++i) {
                const Vec v = forward(pair.query, batch_queries[i], cache).values;
                const std::size_t n = 1 + negatives.size();

                Vec scores(n);
                std::vector<int> signs(n);
                auto cosine = [&](const Vec& key, std::size_t slot) {
                    double c = 0.0;
                    for (std::size_t r = 0; r < v.size(); ++r) c += key[r] * v[r];
                    signs[slot] = c < 0.0 ? -1 : 1;
                    scores[slot] = std::abs(c);
                };
                cosine(batch_keys[i], 0);
                for (std::size_t m = 0; m < negatives.size(); ++m) cosine(negatives[m], m + 1);

                const double maxs = *std::max_element(scores.begin(), scores.end());
                Vec probs(n);
                double denom = 0.0;
                for (std::size_t m = 0; m < n; ++m) {
                    probs[m] = std::exp((scores[m] - maxs) / cfg.temperature);
                    denom += probs[m];
                }
                for (double& p : probs) p /= denom;
                loss_sum += std::log(denom) - (scores[0] - maxs) / cfg.temperature;

                Vec grad_v(v.size(), 0.0);
                for (std::size_t m = 0; m < n; ++m) {
                    if (scores[m] <= 1e-8) continue;
                    const double alpha = (probs[m] - (m == 0 ? 1.0 : 0.0)) / cfg.temperature *
                                         static_cast<double>(signs[m]);
                    const Vec& key = m == 0 ? batch_keys[i] : negatives[m - 1];
                    for (std::size_t r = 0; r < v.size(); ++r) grad_v[r] += alpha * key[r];
                }
                accumulate(grads, backward(pair.query, cache, grad_v));
            }
            scale(grads, 1.0 / static_cast<double>(count));
            sgd_step(pair.query, grads, {lr, cfg.weight_decay, cfg.sgd_momentum}, opt);
            momentum_update(pair);
            for (Vec& key : batch_keys) {
                dictionary.push_back(std::move(key));
                while (dictionary.size() > cfg.queue_capacity) dictionary.pop_front();
            }
            result.step_losses.push_back(loss_sum / static_cast<double>(count));
        }
    }
    result.query_encoder = pair.query;
    return result;
}

} // namespace kscl_test
