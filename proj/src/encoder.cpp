#include "kscl/encoder.hpp"

#include "kscl/error.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

namespace kscl {

namespace {

void check_same_shape(const MlpParams& a, const MlpParams& b, const char* what) {
    if (a.layers.size() != b.layers.size()) fail(Errc::ShapeMismatch, what);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].weight.rows() != b.layers[l].weight.rows() ||
            a.layers[l].weight.cols() != b.layers[l].weight.cols() ||
            a.layers[l].bias.size() != b.layers[l].bias.size())
            fail(Errc::ShapeMismatch, what);
    }
}

} // namespace

MlpParams init_mlp(const std::vector<std::size_t>& dims, Rng& rng) {
    if (dims.size() < 2) fail(Errc::InvalidConfig, "encoder needs at least input and output dims");
    MlpParams params;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t in = dims[l];
        const std::size_t out = dims[l + 1];
        MlpParams::Layer layer{Matrix(out, in), Vec(out, 0.0)};
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

EmbeddingVector forward(const MlpParams& params, const Vec& input, ForwardCache& cache) {
    if (input.size() != params.input_dim())
        fail(Errc::DimensionMismatch, "input dim " + std::to_string(input.size()) +
                                          " vs encoder input " +
                                          std::to_string(params.input_dim()));
    const std::size_t last = params.layers.size() - 1;
    cache.inputs.assign(params.layers.size(), Vec());
    cache.preacts.assign(params.layers.size(), Vec());

    Vec act = input;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        cache.inputs[l] = act;
        Vec z = matvec(params.layers[l].weight, act);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += params.layers[l].bias[i];
        for (double x : z)
            if (!std::isfinite(x)) fail(Errc::NonFiniteActivation, "layer " + std::to_string(l));
        cache.preacts[l] = z;
        if (l < last)
            for (double& x : z) x = x > 0.0 ? x : 0.0;
        act = std::move(z);
    }

    cache.prenorm = act;
    double n = norm2(act);
    if (n < 1e-12) n += 1e-12;
    cache.norm_divisor = n;
    for (double& x : act) x /= n;
    cache.embedding = act;
    return EmbeddingVector{std::move(act)};
}

EmbeddingVector embed(const MlpParams& params, const Vec& input) {
    ForwardCache cache;
    return forward(params, input, cache);
}

MlpGrads zero_grads(const MlpParams& params) {
    MlpGrads g;
    for (const auto& layer : params.layers)
        g.layers.push_back({Matrix(layer.weight.rows(), layer.weight.cols()),
                            Vec(layer.bias.size(), 0.0)});
    return g;
}

void accumulate(MlpGrads& into, const MlpGrads& g) {
    if (into.layers.size() != g.layers.size()) fail(Errc::ShapeMismatch, "grad accumulate");
    for (std::size_t l = 0; l < g.layers.size(); ++l) {
        auto& dst = into.layers[l];
        const auto& src = g.layers[l];
        if (dst.weight.data().size() != src.weight.data().size() ||
            dst.bias.size() != src.bias.size())
            fail(Errc::ShapeMismatch, "grad accumulate");
        for (std::size_t i = 0; i < dst.weight.data().size(); ++i)
            dst.weight.data()[i] += src.weight.data()[i];
        for (std::size_t i = 0; i < dst.bias.size(); ++i) dst.bias[i] += src.bias[i];
    }
}

void scale(MlpGrads& g, double factor) {
    for (auto& layer : g.layers) {
        for (double& w : layer.weight.data()) w *= factor;
        for (double& b : layer.bias) b *= factor;
    }
}

MlpGrads backward(const MlpParams& params, const ForwardCache& cache,
                  const Vec& grad_wrt_embedding) {
    if (cache.inputs.size() != params.layers.size() || cache.embedding.empty())
        fail(Errc::ShapeMismatch, "cache does not match params");
    if (grad_wrt_embedding.size() != params.output_dim())
        fail(Errc::ShapeMismatch, "embedding grad dim");

    // Normalization Jacobian: g_f = (g - v (v . g)) / ||f||.
    const Vec& v = cache.embedding;
    const double vg = dot(v, grad_wrt_embedding);
    Vec g(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        g[i] = (grad_wrt_embedding[i] - v[i] * vg) / cache.norm_divisor;

    MlpGrads grads = zero_grads(params);
    const std::size_t last = params.layers.size() - 1;
    for (std::size_t l = last + 1; l-- > 0;) {
        // g currently holds d(loss)/d(activation of layer l).
        Vec gz = std::move(g);
        if (l < last) {
            const Vec& z = cache.preacts[l];
            for (std::size_t i = 0; i < gz.size(); ++i)
                if (z[i] <= 0.0) gz[i] = 0.0;
        }
        const Vec& in = cache.inputs[l];
        Matrix& gw = grads.layers[l].weight;
        for (std::size_t r = 0; r < gw.rows(); ++r) {
            double* row = gw.row_ptr(r);
            const double gr = gz[r];
            for (std::size_t c = 0; c < gw.cols(); ++c) row[c] = gr * in[c];
        }
        grads.layers[l].bias = gz;
        if (l > 0) g = transpose_matvec(params.layers[l].weight, gz);
    }
    return grads;
}

EncoderPair EncoderPair::create(const std::vector<std::size_t>& dims, double momentum, Rng& rng) {
    EncoderPair pair;
    pair.query = init_mlp(dims, rng);
    pair.key = pair.query; // key starts as an exact copy
    pair.momentum = momentum;
    return pair;
}

void momentum_update(EncoderPair& pair) {
    check_same_shape(pair.query, pair.key, "momentum_update: query/key shapes differ");
    const double m = pair.momentum;
    for (std::size_t l = 0; l < pair.key.layers.size(); ++l) {
        auto& kw = pair.key.layers[l].weight.data();
        const auto& qw = pair.query.layers[l].weight.data();
        for (std::size_t i = 0; i < kw.size(); ++i) kw[i] = m * kw[i] + (1.0 - m) * qw[i];
        auto& kb = pair.key.layers[l].bias;
        const auto& qb = pair.query.layers[l].bias;
        for (std::size_t i = 0; i < kb.size(); ++i) kb[i] = m * kb[i] + (1.0 - m) * qb[i];
    }
}

SgdState SgdState::zeros(const MlpParams& params) {
    SgdState s;
    for (const auto& layer : params.layers)
        s.velocity.push_back({Matrix(layer.weight.rows(), layer.weight.cols()),
                              Vec(layer.bias.size(), 0.0)});
    return s;
}

void sgd_step(MlpParams& params, const MlpGrads& grads, const SgdConfig& cfg, SgdState& state) {
    if (grads.layers.size() != params.layers.size() ||
        state.velocity.size() != params.layers.size())
        fail(Errc::ShapeMismatch, "sgd_step: layer counts differ");
    if (cfg.learning_rate < 0.0) fail(Errc::InvalidConfig, "learning rate must be >= 0");

    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto step_array = [&](std::vector<double>& p, const std::vector<double>& g,
                              std::vector<double>& vel) {
            if (p.size() != g.size() || p.size() != vel.size())
                fail(Errc::ShapeMismatch, "sgd_step: shapes differ at layer " + std::to_string(l));
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (!std::isfinite(g[i]))
                    fail(Errc::NonFiniteGradient, "layer " + std::to_string(l));
                const double eff = g[i] + cfg.weight_decay * p[i];
                vel[i] = cfg.momentum * vel[i] + eff;
                p[i] -= cfg.learning_rate * vel[i];
            }
        };
        step_array(params.layers[l].weight.data(), grads.layers[l].weight.data(),
                   state.velocity[l].weight.data());
        step_array(params.layers[l].bias, grads.layers[l].bias, state.velocity[l].bias);
    }
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[5] = {'K', 'S', 'C', 'L', '1'};

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 4);
}

uint32_t get_u32(std::istream& in) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) fail(Errc::CheckpointCorrupt, "truncated header");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[i]) << (8 * i);
    return v;
}

void put_f64(std::ostream& out, double x) {
    const uint64_t bits = std::bit_cast<uint64_t>(x);
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

double get_f64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) fail(Errc::CheckpointCorrupt, "truncated payload");
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

void put_params(std::ostream& out, const MlpParams& p) {
    for (const auto& layer : p.layers) {
        for (double w : layer.weight.data()) put_f64(out, w);
        for (double b : layer.bias) put_f64(out, b);
    }
}

MlpParams get_params(std::istream& in, const std::vector<std::pair<uint32_t, uint32_t>>& shapes) {
    MlpParams p;
    for (auto [out_dim, in_dim] : shapes) {
        MlpParams::Layer layer{Matrix(out_dim, in_dim), Vec(out_dim)};
        for (double& w : layer.weight.data()) w = get_f64(in);
        for (double& b : layer.bias) b = get_f64(in);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

} // namespace

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
    check_same_shape(ckpt.encoders.query, ckpt.encoders.key, "checkpoint: query/key shapes");
    out.write(kMagic, sizeof(kMagic));
    put_u32(out, static_cast<uint32_t>(ckpt.encoders.query.layers.size()));
    for (const auto& layer : ckpt.encoders.query.layers) {
        put_u32(out, static_cast<uint32_t>(layer.weight.rows()));
        put_u32(out, static_cast<uint32_t>(layer.weight.cols()));
    }
    put_f64(out, ckpt.encoders.momentum);
    put_params(out, ckpt.encoders.query);
    put_params(out, ckpt.encoders.key);
    for (const auto& layer : ckpt.opt_state.velocity) {
        for (double w : layer.weight.data()) put_f64(out, w);
        for (double b : layer.bias) put_f64(out, b);
    }
}

Checkpoint read_checkpoint(std::istream& in) {
    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        fail(Errc::CheckpointCorrupt, "bad magic");
    const uint32_t num_layers = get_u32(in);
    if (num_layers == 0 || num_layers > 64) fail(Errc::CheckpointCorrupt, "bad layer count");
    std::vector<std::pair<uint32_t, uint32_t>> shapes;
    for (uint32_t l = 0; l < num_layers; ++l) {
        const uint32_t out_dim = get_u32(in);
        const uint32_t in_dim = get_u32(in);
        if (out_dim == 0 || in_dim == 0 || out_dim > 1u << 20 || in_dim > 1u << 20)
            fail(Errc::CheckpointCorrupt, "bad layer shape");
        shapes.emplace_back(out_dim, in_dim);
    }
    Checkpoint ckpt;
    ckpt.encoders.momentum = get_f64(in);
    ckpt.encoders.query = get_params(in, shapes);
    ckpt.encoders.key = get_params(in, shapes);
    for (auto [out_dim, in_dim] : shapes) {
        MlpGrads::Layer layer{Matrix(out_dim, in_dim), Vec(out_dim)};
        for (double& w : layer.weight.data()) w = get_f64(in);
        for (double& b : layer.bias) b = get_f64(in);
        ckpt.opt_state.velocity.push_back(std::move(layer));
    }
    in.peek();
    if (!in.eof()) fail(Errc::CheckpointCorrupt, "trailing bytes");
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::IoError, "cannot open " + path + " for writing");
    write_checkpoint(ckpt, out);
    if (!out) fail(Errc::IoError, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::IoError, "cannot open " + path);
    return read_checkpoint(in);
}

} // namespace kscl
