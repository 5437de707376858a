#include "kscl/data.hpp"

#include "kscl/error.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>

namespace kscl {

std::vector<Instance> generate_dataset(std::size_t num_classes, std::size_t instances_per_class,
                                       std::size_t feature_dim, double class_separation,
                                       std::uint64_t seed) {
    if (num_classes < 1 || instances_per_class < 1 || feature_dim < 1)
        fail(Errc::InvalidConfig, "dataset counts must be >= 1");
    if (!(class_separation > 0.0)) fail(Errc::InvalidConfig, "class_separation must be > 0");

    std::vector<Vec> means(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        Rng rng(StreamKey(seed).with("class-mean").with(c));
        Vec m(feature_dim);
        for (double& x : m) x = rng.normal();
        const double n = norm2(m);
        const double scale = class_separation / (n > 0.0 ? n : 1.0);
        for (double& x : m) x *= scale;
        means[c] = std::move(m);
    }

    std::vector<Instance> out;
    out.reserve(num_classes * instances_per_class);
    std::uint64_t id = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        for (std::size_t i = 0; i < instances_per_class; ++i, ++id) {
            Rng rng(StreamKey(seed).with("instance").with(id));
            Instance inst;
            inst.id = id;
            inst.latent_class = static_cast<int>(c);
            inst.features.resize(feature_dim);
            for (std::size_t f = 0; f < feature_dim; ++f)
                inst.features[f] = means[c][f] + rng.normal();
            out.push_back(std::move(inst));
        }
    }
    return out;
}

void validate(const AugmentationConfig& config) {
    if (config.k_shots < 1) fail(Errc::InvalidConfig, "k_shots must be >= 1");
    if (config.noise_sigma < 0.0) fail(Errc::InvalidConfig, "noise_sigma must be >= 0");
    if (config.mask_fraction < 0.0 || config.mask_fraction >= 1.0)
        fail(Errc::InvalidConfig, "mask_fraction must be in [0, 1)");
    if (!(config.scale_jitter_lo > 0.0) || config.scale_jitter_lo > config.scale_jitter_hi)
        fail(Errc::InvalidConfig, "scale jitter needs 0 < lo <= hi");
}

Vec augment(const Instance& instance, const AugmentationConfig& config, std::uint64_t draw_index,
            std::uint64_t step) {
    validate(config);
    const std::size_t f = instance.features.size();
    Rng rng(StreamKey(config.seed).with("augment").with(instance.id).with(draw_index).with(step));

    Vec x = instance.features;

    for (std::size_t r = 0; r < config.rotation_pairs && f >= 2; ++r) {
        const std::size_t i = rng.below(f);
        std::size_t j = rng.below(f - 1);
        if (j >= i) ++j;
        const double theta = rng.uniform(-std::numbers::pi / 8.0, std::numbers::pi / 8.0);
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        const double xi = x[i];
        const double xj = x[j];
        x[i] = c * xi - s * xj;
        x[j] = s * xi + c * xj;
    }

    const double scale = rng.uniform(config.scale_jitter_lo, config.scale_jitter_hi);
    for (double& v : x) v *= scale;

    if (config.noise_sigma > 0.0)
        for (double& v : x) v += config.noise_sigma * rng.normal();

    const std::size_t mask_count =
        static_cast<std::size_t>(config.mask_fraction * static_cast<double>(f));
    if (mask_count > 0) {
        // Partial Fisher-Yates for a uniform subset of mask_count coordinates.
        std::vector<std::size_t> idx(f);
        for (std::size_t i = 0; i < f; ++i) idx[i] = i;
        for (std::size_t i = 0; i < mask_count; ++i) {
            const std::size_t j = i + rng.below(f - i);
            std::swap(idx[i], idx[j]);
            x[idx[i]] = 0.0;
        }
    }
    return x;
}

std::vector<AugmentationBatch> make_batch(std::span<const Instance> instances,
                                          const AugmentationConfig& config, std::uint64_t step) {
    validate(config);
    std::vector<AugmentationBatch> out;
    out.reserve(instances.size());
    for (const Instance& inst : instances) {
        AugmentationBatch batch;
        batch.instance_id = inst.id;
        batch.key_views.reserve(config.k_shots);
        for (std::size_t k = 0; k < config.k_shots; ++k)
            batch.key_views.push_back(augment(inst, config, k, step));
        batch.query_view = augment(inst, config, config.k_shots, step);
        out.push_back(std::move(batch));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset file I/O
// ---------------------------------------------------------------------------

namespace {

constexpr char kDatasetMagic[7] = {'K', 'S', 'C', 'L', 'D', 'S', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) fail(Errc::CheckpointCorrupt, "truncated dataset file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void put_f64(std::ostream& out, double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); }

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

} // namespace

void save_dataset(const std::vector<Instance>& data, std::size_t num_classes,
                  const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::IoError, "cannot open " + path + " for writing");
    out.write(kDatasetMagic, sizeof(kDatasetMagic));
    put_u64(out, data.size());
    put_u64(out, data.empty() ? 0 : data[0].features.size());
    put_u64(out, num_classes);
    for (const Instance& inst : data) {
        put_u64(out, inst.id);
        put_u64(out, static_cast<std::uint64_t>(inst.latent_class));
        for (double v : inst.features) put_f64(out, v);
    }
    if (!out) fail(Errc::IoError, "write failed: " + path);
}

LoadedDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::IoError, "cannot open " + path);
    char magic[7];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kDatasetMagic, sizeof(kDatasetMagic)) != 0)
        fail(Errc::CheckpointCorrupt, "bad dataset magic");
    const std::uint64_t count = get_u64(in);
    const std::uint64_t dim = get_u64(in);
    const std::uint64_t classes = get_u64(in);
    if (count > 1u << 28 || dim > 1u << 20) fail(Errc::CheckpointCorrupt, "bad dataset header");
    LoadedDataset out;
    out.num_classes = classes;
    out.instances.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Instance inst;
        inst.id = get_u64(in);
        inst.latent_class = static_cast<int>(get_u64(in));
        inst.features.resize(dim);
        for (double& v : inst.features) v = get_f64(in);
        out.instances.push_back(std::move(inst));
    }
    in.peek();
    if (!in.eof()) fail(Errc::CheckpointCorrupt, "trailing bytes in dataset file");
    return out;
}

void export_dataset_csv(const std::vector<Instance>& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(Errc::IoError, "cannot open " + path + " for writing");
    out << "id,label";
    const std::size_t dim = data.empty() ? 0 : data[0].features.size();
    for (std::size_t f = 0; f < dim; ++f) out << ",f" << f;
    out << "\n";
    char buf[32];
    for (const Instance& inst : data) {
        out << inst.id << "," << inst.latent_class;
        for (double v : inst.features) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << "," << buf;
        }
        out << "\n";
    }
    if (!out) fail(Errc::IoError, "write failed: " + path);
}

} // namespace kscl
