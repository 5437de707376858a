#pragma once

#include "kscl/linalg.hpp"
#include "kscl/rng.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace kscl {

struct Instance {
    std::uint64_t id = 0;
    Vec features;          // raw feature vector, dimension F
    int latent_class = 0;  // hidden from pretraining; used only by the probe
};

// Vector-space augmentation family: coordinate-plane rotations stand in for
// geometric transforms, masking for crop/cutout, additive noise and scale
// jitter for photometric jitter. Every draw is keyed by
// (seed, instance id, draw_index, step) so loading order cannot change the
// sample sequence.
struct AugmentationConfig {
    std::size_t k_shots = 3;
    double noise_sigma = 0.0;
    double mask_fraction = 0.0;            // in [0, 1)
    double scale_jitter_lo = 1.0;          // 0 < lo <= hi
    double scale_jitter_hi = 1.0;
    std::size_t rotation_pairs = 0;        // number of coordinate-plane rotations
    std::uint64_t seed = 0;
};

struct AugmentationBatch {
    std::uint64_t instance_id = 0;
    Vec query_view;
    std::vector<Vec> key_views; // K views
};

// Synthetic clustered dataset: class means drawn uniformly on the sphere of
// radius class_separation, instances = mean + unit Gaussian noise.
// Deterministic given seed. Throws InvalidConfig.
std::vector<Instance> generate_dataset(std::size_t num_classes, std::size_t instances_per_class,
                                       std::size_t feature_dim, double class_separation,
                                       std::uint64_t seed);

void validate(const AugmentationConfig& config); // throws InvalidConfig

// One stochastic view of an instance. Applies, in order: rotation_pairs
// random coordinate-plane rotations (angle uniform in [-pi/8, pi/8]), scale
// jitter, additive Gaussian noise, then zeroing of floor(mask_fraction * F)
// distinct coordinates.
Vec augment(const Instance& instance, const AugmentationConfig& config, std::uint64_t draw_index,
            std::uint64_t step = 0);

// K key views (draw indices 0..K-1) plus one query view (draw index K) per
// instance.
std::vector<AugmentationBatch> make_batch(std::span<const Instance> instances,
                                          const AugmentationConfig& config,
                                          std::uint64_t step = 0);

// Flat binary dataset file: magic "KSCLDS1", little-endian u64/u32 header
// fields (instance count, feature dim, class count), then per instance
// u64 id, u32 label, F little-endian f64 features.
void save_dataset(const std::vector<Instance>& data, std::size_t num_classes,
                  const std::string& path);

struct LoadedDataset {
    std::vector<Instance> instances;
    std::size_t num_classes = 0;
};

LoadedDataset load_dataset(const std::string& path); // throws IoError / CheckpointCorrupt

// CSV mirror for inspection: header "id,label,f0..f{F-1}".
void export_dataset_csv(const std::vector<Instance>& data, const std::string& path);

} // namespace kscl
