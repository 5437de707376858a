#pragma once

#include "kscl/data.hpp"
#include "kscl/encoder.hpp"
#include "kscl/queue.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace kscl {

struct DatasetSpec {
    std::size_t num_classes = 10;
    std::size_t instances_per_class = 200;
    std::size_t feature_dim = 64;
    double class_separation = 6.0;
};

struct EncoderSpec {
    std::vector<std::size_t> hidden_dims{128, 64};
    std::size_t embed_dim = 32;
};

struct AugmentationParams {
    double noise_sigma = 0.8;
    double mask_fraction = 0.2;
    double scale_jitter_lo = 0.85;
    double scale_jitter_hi = 1.15;
    std::size_t rotation_pairs = 8;
};

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    double base_lr = 0.03;
    bool cosine_decay = true;
    double weight_decay = 1e-4;
    double sgd_momentum = 0.9;
    std::size_t k_shots = 3;
    double rho = 0.4;
    double temperature = 0.2;
    std::size_t queue_capacity = 128;
    double encoder_momentum = 0.999;
    double rank_epsilon = 1e-10;
    std::uint64_t seed = 42;
    DatasetSpec data;
    EncoderSpec encoder;
    AugmentationParams aug;

    AugmentationConfig augmentation() const {
        return {k_shots,
                aug.noise_sigma,
                aug.mask_fraction,
                aug.scale_jitter_lo,
                aug.scale_jitter_hi,
                aug.rotation_pairs,
                seed};
    }

    std::vector<std::size_t> encoder_dims() const {
        std::vector<std::size_t> dims{data.feature_dim};
        dims.insert(dims.end(), encoder.hidden_dims.begin(), encoder.hidden_dims.end());
        dims.push_back(encoder.embed_dim);
        return dims;
    }
};

struct TrainReport {
    std::vector<double> step_losses;      // batch-mean loss per optimizer step
    std::vector<double> epoch_mean_loss;  // mean of step losses per epoch
    std::vector<double> epoch_seconds;    // wall clock; the one non-deterministic field
    double mean_retained_rank = 0.0;      // mean L of positive subspaces over training
    std::size_t steps = 0;
};

struct PretrainResult {
    TrainReport report;
    Checkpoint checkpoint;
};

// The end-to-end pretraining loop. Per minibatch: the key encoder embeds K
// views per instance and the instance subspace is built fresh; the query
// encoder embeds the query view; candidates are the instance's own subspace
// (positive) plus a queue snapshot taken before this step's enqueue; the
// contrastive gradient flows through the query encoder only; then SGD step,
// momentum update, and enqueue of the batch's subspaces, in that order.
// Deterministic given config.seed. Throws InvalidConfig / NonFiniteLoss.
PretrainResult pretrain(const TrainConfig& config, const std::vector<Instance>& dataset);

struct ProbeConfig {
    std::size_t epochs = 300;
    double lr = 0.5;
    double holdout_fraction = 0.2;
    std::uint64_t seed = 42;
    bool permute_labels = false; // chance-level control: permute labels before training
};

struct ProbeReport {
    double holdout_accuracy = 0.0;
    double train_accuracy = 0.0;
    std::vector<double> per_class_accuracy; // on the held-out split
    std::size_t holdout_count = 0;
};

// Linear probing: freezes the encoder, embeds un-augmented instances, trains
// a single linear softmax layer by full-batch gradient descent on a seeded
// 80/20 split, and reports held-out accuracy.
ProbeReport linear_probe(const MlpParams& encoder, const std::vector<Instance>& dataset,
                         std::size_t num_classes, const ProbeConfig& cfg);

struct SweepCell {
    std::size_t k_shots = 1;
    double rho = 1.0;
};

struct SweepRow {
    std::size_t k_shots = 0;
    double rho = 0.0;
    std::uint64_t seed = 0;
    double probe_accuracy = 0.0;
    double mean_retained_rank = 0.0;
    double sec_per_epoch = 0.0;
};

// Pretrain + probe per (cell, seed) with matched randomness: cells at the
// same seed share the dataset, shuffles and augmentation streams.
std::vector<SweepRow> ablation_sweep(const TrainConfig& base, const ProbeConfig& probe_base,
                                     std::span<const SweepCell> cells,
                                     std::span<const std::uint64_t> seeds);

} // namespace kscl
