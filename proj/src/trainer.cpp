#include "kscl/trainer.hpp"

#include "kscl/error.hpp"
#include "kscl/loss.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <string>

namespace kscl {

namespace {

void validate(const TrainConfig& cfg) {
    if (cfg.epochs < 1 || cfg.batch_size < 1) fail(Errc::InvalidConfig, "epochs/batch_size >= 1");
    if (cfg.base_lr < 0.0) fail(Errc::InvalidConfig, "base_lr must be >= 0");
    if (!(cfg.temperature > 0.0)) fail(Errc::InvalidConfig, "temperature must be > 0");
    if (!(cfg.rho > 0.0) || cfg.rho > 1.0) fail(Errc::InvalidConfig, "rho must be in (0, 1]");
    if (cfg.k_shots < 1) fail(Errc::InvalidConfig, "k_shots must be >= 1");
    if (cfg.k_shots > cfg.encoder.embed_dim)
        fail(Errc::InvalidConfig, "k_shots exceeds embedding dim");
    if (cfg.queue_capacity < 1) fail(Errc::InvalidConfig, "queue_capacity must be >= 1");
    if (cfg.encoder_momentum < 0.0 || cfg.encoder_momentum >= 1.0)
        fail(Errc::InvalidConfig, "encoder momentum must be in [0, 1)");
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.below(i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

double epoch_lr(const TrainConfig& cfg, std::size_t epoch) {
    if (!cfg.cosine_decay) return cfg.base_lr;
    const double t = static_cast<double>(epoch) / static_cast<double>(cfg.epochs);
    return cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

} // namespace

PretrainResult pretrain(const TrainConfig& cfg, const std::vector<Instance>& dataset) {
    validate(cfg);
    if (dataset.empty()) fail(Errc::InvalidConfig, "empty dataset");
    if (dataset[0].features.size() != cfg.data.feature_dim)
        fail(Errc::InvalidConfig, "dataset feature dim disagrees with config");

    Rng init_rng(StreamKey(cfg.seed).with("encoder-init"));
    EncoderPair pair = EncoderPair::create(cfg.encoder_dims(), cfg.encoder_momentum, init_rng);
    SgdState opt = SgdState::zeros(pair.query);
    SubspaceQueue queue(cfg.queue_capacity);
    const AugmentationConfig aug = cfg.augmentation();
    const TruncationPolicy policy{cfg.rho, cfg.rank_epsilon};

    TrainReport report;
    double rank_sum = 0.0;
    std::size_t rank_count = 0;
    std::uint64_t step = 0;

    std::vector<const InstanceSubspace*> candidates;
    std::vector<EmbeddingVector> key_embeddings;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = epoch_lr(cfg, epoch);
        Rng shuffle_rng(StreamKey(cfg.seed).with("shuffle").with(epoch));
        const std::vector<std::size_t> order = shuffled_indices(dataset.size(), shuffle_rng);

        const std::size_t epoch_first_step = report.step_losses.size();
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++step) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - start);
            std::vector<Instance> batch_instances;
            batch_instances.reserve(count);
            for (std::size_t i = 0; i < count; ++i)
                batch_instances.push_back(dataset[order[start + i]]);
            const std::vector<AugmentationBatch> views = make_batch(batch_instances, aug, step);

            // Key side: embed the K views and build this step's subspaces.
            std::vector<std::shared_ptr<const InstanceSubspace>> batch_subspaces;
            batch_subspaces.reserve(count);
            for (const AugmentationBatch& v : views) {
                key_embeddings.clear();
                for (const Vec& view : v.key_views)
                    key_embeddings.push_back(embed(pair.key, view));
                batch_subspaces.push_back(std::make_shared<InstanceSubspace>(
                    build_subspace(key_embeddings, policy, v.instance_id)));
                rank_sum += static_cast<double>(batch_subspaces.back()->rank());
                ++rank_count;
            }

            // Negatives come from the queue as it stood before this step.
            const auto snapshot = queue.negatives_snapshot();

            MlpGrads grads = zero_grads(pair.query);
            double loss_sum = 0.0;
            ForwardCache cache;
            for (std::size_t i = 0; i < count; ++i) {
                const EmbeddingVector q = forward(pair.query, views[i].query_view, cache);
                candidates.clear();
                candidates.push_back(batch_subspaces[i].get());
                for (const auto& s : snapshot) candidates.push_back(s.get());
                const LossOutput out =
                    kshot_loss_and_grad(q.values, candidates, 0, cfg.temperature);
                if (!std::isfinite(out.loss))
                    fail(Errc::NonFiniteLoss,
                         "step " + std::to_string(step) + ", instance " +
                             std::to_string(views[i].instance_id) + ", score[positive]=" +
                             std::to_string(projection_length(*candidates[0], q.values)));
                loss_sum += out.loss;
                accumulate(grads, backward(pair.query, cache, out.grad_wrt_query));
            }
            scale(grads, 1.0 / static_cast<double>(count));
            sgd_step(pair.query, grads, {lr, cfg.weight_decay, cfg.sgd_momentum}, opt);
            momentum_update(pair);
            queue.enqueue_batch(batch_subspaces);

            report.step_losses.push_back(loss_sum / static_cast<double>(count));
        }

        double epoch_sum = 0.0;
        for (std::size_t s = epoch_first_step; s < report.step_losses.size(); ++s)
            epoch_sum += report.step_losses[s];
        report.epoch_mean_loss.push_back(
            epoch_sum / static_cast<double>(report.step_losses.size() - epoch_first_step));
        report.epoch_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }

    report.steps = report.step_losses.size();
    report.mean_retained_rank = rank_count > 0 ? rank_sum / static_cast<double>(rank_count) : 0.0;

    PretrainResult result;
    result.report = std::move(report);
    result.checkpoint.encoders = std::move(pair);
    result.checkpoint.opt_state = std::move(opt);
    return result;
}

// ---------------------------------------------------------------------------
// Linear probe
// ---------------------------------------------------------------------------

ProbeReport linear_probe(const MlpParams& encoder, const std::vector<Instance>& dataset,
                         std::size_t num_classes, const ProbeConfig& cfg) {
    if (dataset.empty() || num_classes < 1) fail(Errc::InvalidConfig, "probe needs data/classes");
    if (!(cfg.holdout_fraction > 0.0) || cfg.holdout_fraction >= 1.0)
        fail(Errc::InvalidConfig, "holdout_fraction must be in (0, 1)");
    if (cfg.epochs < 1 || !(cfg.lr > 0.0)) fail(Errc::InvalidConfig, "probe epochs/lr");

    const std::size_t n = dataset.size();
    const std::size_t d = encoder.output_dim();
    const std::size_t c = num_classes;

    // Frozen features of the raw (un-augmented) instances.
    std::vector<Vec> features(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        features[i] = embed(encoder, dataset[i].features).values;
        labels[i] = dataset[i].latent_class;
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
            fail(Errc::InvalidConfig, "label outside [0, num_classes)");
    }

    if (cfg.permute_labels) {
        Rng rng(StreamKey(cfg.seed).with("probe-permute"));
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = rng.below(i);
            std::swap(labels[i - 1], labels[j]);
        }
    }

    Rng split_rng(StreamKey(cfg.seed).with("probe-split"));
    const std::vector<std::size_t> order = shuffled_indices(n, split_rng);
    const std::size_t holdout = std::max<std::size_t>(
        1, static_cast<std::size_t>(cfg.holdout_fraction * static_cast<double>(n)));
    const std::size_t train_count = n - holdout;

    // Single linear layer trained with softmax cross-entropy, full batch.
    Matrix w(c, d);
    Vec b(c, 0.0);
    Vec logits(c), probs(c);
    Matrix gw(c, d);
    Vec gb(c, 0.0);

    auto fill_logits = [&](const Vec& x) {
        for (std::size_t k = 0; k < c; ++k) {
            const double* row = w.row_ptr(k);
            double s = b[k];
            for (std::size_t j = 0; j < d; ++j) s += row[j] * x[j];
            logits[k] = s;
        }
    };

    for (std::size_t it = 0; it < cfg.epochs; ++it) {
        gw = Matrix(c, d);
        gb.assign(c, 0.0);
        for (std::size_t t = 0; t < train_count; ++t) {
            const std::size_t i = order[t];
            const Vec& x = features[i];
            fill_logits(x);
            double maxl = logits[0];
            for (double v : logits) maxl = std::max(maxl, v);
            double denom = 0.0;
            for (std::size_t k = 0; k < c; ++k) {
                probs[k] = std::exp(logits[k] - maxl);
                denom += probs[k];
            }
            for (std::size_t k = 0; k < c; ++k) {
                const double delta =
                    probs[k] / denom - (static_cast<int>(k) == labels[i] ? 1.0 : 0.0);
                double* row = gw.row_ptr(k);
                for (std::size_t j = 0; j < d; ++j) row[j] += delta * x[j];
                gb[k] += delta;
            }
        }
        const double scale = cfg.lr / static_cast<double>(train_count);
        for (std::size_t k = 0; k < c; ++k) {
            double* wrow = w.row_ptr(k);
            const double* grow = gw.row_ptr(k);
            for (std::size_t j = 0; j < d; ++j) wrow[j] -= scale * grow[j];
            b[k] -= scale * gb[k];
        }
    }

    auto predict = [&](const Vec& x) {
        fill_logits(x);
        std::size_t arg = 0;
        for (std::size_t k = 1; k < c; ++k)
            if (logits[k] > logits[arg]) arg = k;
        return static_cast<int>(arg);
    };

    ProbeReport report;
    report.holdout_count = holdout;
    std::size_t train_hits = 0;
    for (std::size_t t = 0; t < train_count; ++t)
        if (predict(features[order[t]]) == labels[order[t]]) ++train_hits;
    report.train_accuracy = static_cast<double>(train_hits) / static_cast<double>(train_count);

    std::vector<std::size_t> class_total(c, 0), class_hits(c, 0);
    std::size_t hits = 0;
    for (std::size_t t = train_count; t < n; ++t) {
        const std::size_t i = order[t];
        const int pred = predict(features[i]);
        ++class_total[labels[i]];
        if (pred == labels[i]) {
            ++hits;
            ++class_hits[labels[i]];
        }
    }
    report.holdout_accuracy = static_cast<double>(hits) / static_cast<double>(holdout);
    report.per_class_accuracy.resize(c);
    for (std::size_t k = 0; k < c; ++k)
        report.per_class_accuracy[k] =
            class_total[k] > 0
                ? static_cast<double>(class_hits[k]) / static_cast<double>(class_total[k])
                : 0.0;
    return report;
}

std::vector<SweepRow> ablation_sweep(const TrainConfig& base, const ProbeConfig& probe_base,
                                     std::span<const SweepCell> cells,
                                     std::span<const std::uint64_t> seeds) {
    std::vector<SweepRow> rows;
    for (std::uint64_t seed : seeds) {
        TrainConfig seed_cfg = base;
        seed_cfg.seed = seed;
        const std::vector<Instance> dataset =
            generate_dataset(seed_cfg.data.num_classes, seed_cfg.data.instances_per_class,
                             seed_cfg.data.feature_dim, seed_cfg.data.class_separation, seed);
        for (const SweepCell& cell : cells) {
            TrainConfig cfg = seed_cfg;
            cfg.k_shots = cell.k_shots;
            cfg.rho = cell.rho;
            PretrainResult result = pretrain(cfg, dataset);
            ProbeConfig pcfg = probe_base;
            pcfg.seed = seed;
            const ProbeReport probe = linear_probe(result.checkpoint.encoders.query, dataset,
                                                   cfg.data.num_classes, pcfg);
            double sec = 0.0;
            for (double s : result.report.epoch_seconds) sec += s;
            sec /= static_cast<double>(result.report.epoch_seconds.size());
            rows.push_back({cell.k_shots, cell.rho, seed, probe.holdout_accuracy,
                            result.report.mean_retained_rank, sec});
        }
    }
    return rows;
}

} // namespace kscl
