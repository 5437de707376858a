#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kscl/data.hpp"
#include "kscl/error.hpp"
#include "kscl/subspace.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace kscl;

namespace {

AugmentationConfig all_off(std::size_t k, std::uint64_t seed) {
    return {k, 0.0, 0.0, 1.0, 1.0, 0, seed};
}

} // namespace

TEST_CASE("generate_dataset is deterministic and validates its inputs") {
    const auto a = generate_dataset(3, 5, 8, 2.0, 77);
    const auto b = generate_dataset(3, 5, 8, 2.0, 77);
    REQUIRE(a.size() == 15);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].features == b[i].features);
        CHECK(a[i].latent_class == b[i].latent_class);
    }
    const auto c = generate_dataset(3, 5, 8, 2.0, 78);
    CHECK(a[0].features != c[0].features);

    CHECK_THROWS_WITH_AS(generate_dataset(0, 5, 8, 2.0, 1), doctest::Contains("InvalidConfig"),
                         Error);
    CHECK_THROWS_WITH_AS(generate_dataset(3, 5, 8, -1.0, 1), doctest::Contains("InvalidConfig"),
                         Error);
}

TEST_CASE("single-class dataset is well-formed") {
    const auto data = generate_dataset(1, 10, 6, 3.0, 5);
    REQUIRE(data.size() == 10);
    for (const auto& inst : data) CHECK(inst.latent_class == 0);
}

TEST_CASE("large separation makes nearest-centroid labeling exact") {
    const std::size_t classes = 4;
    const auto data = generate_dataset(classes, 50, 16, 100.0, 13);

    // nearest-centroid oracle on the generated data
    std::vector<Vec> centroids(classes, Vec(16, 0.0));
    std::vector<std::size_t> counts(classes, 0);
    for (const auto& inst : data) {
        for (std::size_t f = 0; f < 16; ++f) centroids[inst.latent_class][f] += inst.features[f];
        ++counts[inst.latent_class];
    }
    for (std::size_t c = 0; c < classes; ++c)
        for (double& x : centroids[c]) x /= static_cast<double>(counts[c]);

    std::size_t hits = 0;
    for (const auto& inst : data) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < classes; ++c) {
            double dist = 0.0;
            for (std::size_t f = 0; f < 16; ++f) {
                const double e = inst.features[f] - centroids[c][f];
                dist += e * e;
            }
            if (dist < best_d) {
                best_d = dist;
                best = c;
            }
        }
        if (static_cast<int>(best) == inst.latent_class) ++hits;
    }
    CHECK(hits == data.size());
}

TEST_CASE("all-off augmentation is the identity") {
    const auto data = generate_dataset(1, 1, 8, 1.0, 3);
    const Vec view = augment(data[0], all_off(2, 3), 0);
    CHECK(view == data[0].features);
}

TEST_CASE("masking zeroes exactly the configured count") {
    const auto data = generate_dataset(1, 1, 8, 1.0, 3);
    AugmentationConfig cfg = all_off(1, 9);
    cfg.mask_fraction = 0.25;
    for (std::uint64_t draw = 0; draw < 20; ++draw) {
        const Vec view = augment(data[0], cfg, draw);
        std::size_t zeros = 0;
        for (double v : view)
            if (v == 0.0) ++zeros;
        REQUIRE(zeros == 2); // floor(0.25 * 8)
    }
}

TEST_CASE("distinct draws give distinct views under noise") {
    const auto data = generate_dataset(1, 1, 8, 1.0, 3);
    AugmentationConfig cfg = all_off(1, 11);
    cfg.noise_sigma = 0.1;
    std::set<Vec> seen;
    for (std::uint64_t draw = 0; draw < 1000; ++draw) seen.insert(augment(data[0], cfg, draw));
    CHECK(seen.size() >= 991); // collision rate < 1%
}

TEST_CASE("augmentation is deterministic in all stream keys") {
    const auto data = generate_dataset(1, 2, 8, 1.0, 3);
    AugmentationConfig cfg{3, 0.5, 0.1, 0.9, 1.1, 4, 21};
    const Vec a = augment(data[0], cfg, 2, 5);
    const Vec b = augment(data[0], cfg, 2, 5);
    CHECK(a == b);
    CHECK(a != augment(data[0], cfg, 3, 5)); // draw index matters
    CHECK(a != augment(data[0], cfg, 2, 6)); // step matters
    CHECK(a != augment(data[1], cfg, 2, 5)); // instance id matters

    CHECK(a.size() == 8);
    for (double v : a) CHECK(std::isfinite(v));
}

TEST_CASE("augmentation config validation") {
    const auto data = generate_dataset(1, 1, 8, 1.0, 3);
    AugmentationConfig bad = all_off(1, 0);
    bad.mask_fraction = 1.0;
    CHECK_THROWS_WITH_AS(augment(data[0], bad, 0), doctest::Contains("InvalidConfig"), Error);
    bad = all_off(0, 0);
    CHECK_THROWS_WITH_AS(augment(data[0], bad, 0), doctest::Contains("InvalidConfig"), Error);
    bad = all_off(1, 0);
    bad.scale_jitter_lo = 1.2;
    bad.scale_jitter_hi = 0.9;
    CHECK_THROWS_WITH_AS(augment(data[0], bad, 0), doctest::Contains("InvalidConfig"), Error);
}

TEST_CASE("make_batch structure") {
    const auto data = generate_dataset(2, 3, 8, 1.0, 3);
    AugmentationConfig cfg = all_off(5, 31);
    cfg.noise_sigma = 0.2;
    const auto batches = make_batch(data, cfg, 0);
    REQUIRE(batches.size() == 6);
    for (std::size_t i = 0; i < batches.size(); ++i) {
        CHECK(batches[i].instance_id == data[i].id);
        CHECK(batches[i].key_views.size() == 5);
        CHECK(batches[i].query_view.size() == 8);
    }

    cfg.k_shots = 1;
    const auto pair_views = make_batch(data, cfg, 0);
    CHECK(pair_views[0].key_views.size() == 1); // one key + one query

    const auto again = make_batch(data, cfg, 0);
    CHECK(pair_views[0].query_view == again[0].query_view);
    CHECK(pair_views[0].key_views[0] == again[0].key_views[0]);
}

TEST_CASE("identical key views collapse the subspace to rank one") {
    const auto data = generate_dataset(1, 1, 8, 1.0, 3);
    const auto batches = make_batch(data, all_off(3, 7), 0);
    REQUIRE(batches[0].key_views.size() == 3);
    CHECK(batches[0].key_views[0] == batches[0].key_views[1]);
    CHECK(batches[0].key_views[0] == batches[0].key_views[2]);

    std::vector<EmbeddingVector> keys;
    for (const Vec& view : batches[0].key_views) keys.push_back(EmbeddingVector::normalized(view));
    const InstanceSubspace s = build_subspace(keys, {1.0, 1e-10}, 0);
    CHECK(s.rank() == 1);
}

TEST_CASE("dataset binary round-trip and CSV export") {
    const auto data = generate_dataset(3, 4, 6, 2.0, 99);
    const auto dir = std::filesystem::temp_directory_path();
    const std::string bin = (dir / "kscl_test_dataset.bin").string();
    const std::string csv = (dir / "kscl_test_dataset.csv").string();

    save_dataset(data, 3, bin);
    const LoadedDataset loaded = load_dataset(bin);
    CHECK(loaded.num_classes == 3);
    REQUIRE(loaded.instances.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(loaded.instances[i].id == data[i].id);
        CHECK(loaded.instances[i].latent_class == data[i].latent_class);
        CHECK(loaded.instances[i].features == data[i].features); // bit-exact
    }

    export_dataset_csv(data, csv);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "id,label,f0,f1,f2,f3,f4,f5");

    {
        std::ofstream out(bin, std::ios::binary);
        out << "garbage";
    }
    CHECK_THROWS_WITH_AS(load_dataset(bin), doctest::Contains("CheckpointCorrupt"), Error);
    std::filesystem::remove(bin);
    std::filesystem::remove(csv);
}
