#pragma once

#include "kscl/linalg.hpp"
#include "kscl/rng.hpp"
#include "kscl/subspace.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace kscl {

// Small fully connected embedding network: rectifier hidden layers, a linear
// output layer, then L2 normalization onto the unit sphere. Stands in for
// the usual backbone + MLP head at desk scale.
struct MlpParams {
    struct Layer {
        Matrix weight; // out x in
        Vec bias;      // out
    };
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.front().weight.cols(); }
    std::size_t output_dim() const { return layers.back().weight.rows(); }
};

// Per-layer weights drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases
// zero. dims = {input, hidden..., output}.
MlpParams init_mlp(const std::vector<std::size_t>& dims, Rng& rng);

struct ForwardCache {
    std::vector<Vec> inputs;  // inputs[l] feeds layer l; inputs[0] is the raw input
    std::vector<Vec> preacts; // preacts[l] = W_l * inputs[l] + b_l
    Vec prenorm;              // final linear output before normalization
    double norm_divisor = 0.0;
    Vec embedding;
};

// Full forward pass keeping the activation cache for backward.
// Throws DimensionMismatch / NonFiniteActivation.
EmbeddingVector forward(const MlpParams& params, const Vec& input, ForwardCache& cache);

// Forward without a cache, for key-side and evaluation paths.
EmbeddingVector embed(const MlpParams& params, const Vec& input);

struct MlpGrads {
    struct Layer {
        Matrix weight;
        Vec bias;
    };
    std::vector<Layer> layers;
};

MlpGrads zero_grads(const MlpParams& params);
void accumulate(MlpGrads& into, const MlpGrads& g);
void scale(MlpGrads& g, double factor);

// Backprop of grad_wrt_embedding through the normalization Jacobian
// (I - v v^T)/||f|| and the stacked layers. Throws ShapeMismatch.
MlpGrads backward(const MlpParams& params, const ForwardCache& cache,
                  const Vec& grad_wrt_embedding);

// Query encoder plus its momentum (EMA) copy. The key side never sees
// gradients; it only moves through momentum_update.
struct EncoderPair {
    MlpParams query;
    MlpParams key;
    double momentum = 0.999;

    static EncoderPair create(const std::vector<std::size_t>& dims, double momentum, Rng& rng);
};

// key <- m * key + (1 - m) * query, elementwise. Throws ShapeMismatch.
void momentum_update(EncoderPair& pair);

struct SgdConfig {
    double learning_rate = 0.03;
    double weight_decay = 0.0;
    double momentum = 0.9;
};

struct SgdState {
    std::vector<MlpGrads::Layer> velocity; // mirrors parameter shapes

    static SgdState zeros(const MlpParams& params);
};

// SGD with momentum; weight decay is folded into the gradient
// (g <- g + wd * p) before the velocity update. Throws ShapeMismatch /
// NonFiniteGradient.
void sgd_step(MlpParams& params, const MlpGrads& grads, const SgdConfig& cfg, SgdState& state);

// ---------------------------------------------------------------------------
// Checkpoint file ("KSCL1"): magic, u32 layer count, per-layer u32 out/in
// shape descriptors, then little-endian f64 payloads for query params, key
// params and optimizer velocity. See README for the exact layout.
// ---------------------------------------------------------------------------

struct Checkpoint {
    EncoderPair encoders;
    SgdState opt_state;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path); // throws CheckpointCorrupt / IoError

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);

} // namespace kscl
