#include "kscl/selfcheck.hpp"

#include "kscl/encoder.hpp"
#include "kscl/linalg.hpp"
#include "kscl/loss.hpp"
#include "kscl/rng.hpp"
#include "kscl/subspace.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

namespace kscl {

namespace {

constexpr std::uint64_t kSelfcheckSeed = 20240917;

Vec random_unit(std::size_t d, Rng& rng) {
    Vec v(d);
    for (double& x : v) x = rng.normal();
    const double n = norm2(v);
    for (double& x : v) x /= n;
    return v;
}

std::vector<EmbeddingVector> random_keys(std::size_t k, std::size_t d, Rng& rng) {
    std::vector<EmbeddingVector> keys;
    keys.reserve(k);
    for (std::size_t i = 0; i < k; ++i) keys.push_back(EmbeddingVector{random_unit(d, rng)});
    return keys;
}

struct Checker {
    std::ostringstream oss;
    bool ok = true;

    void require(bool cond, const std::string& invariant) {
        if (!cond && ok) {
            ok = false;
            oss << invariant;
        }
    }
};

// --------------------------------------------------------------------------
// Suite 1: eigensolver residuals on random Gram (PSD) matrices.
// --------------------------------------------------------------------------
void suite_eigensolver(Checker& chk) {
    Rng rng(StreamKey(kSelfcheckSeed).with("eig"));
    for (int trial = 0; trial < 200 && chk.ok; ++trial) {
        const std::size_t k = 1 + rng.below(8);
        const std::size_t d = k + rng.below(8);
        Matrix v(d, k);
        for (double& x : v.data()) x = rng.normal();
        const Matrix a = gram(v);
        const EigenResult eig = sym_eig(a);

        double lam_max = 0.0;
        double trace = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            lam_max = std::max(lam_max, std::abs(eig.eigenvalues[i]));
            trace += a(i, i);
            chk.require(eig.eigenvalues[i] >= -1e-10, "gram eigenvalue PSD bound violated");
            if (i + 1 < k)
                chk.require(eig.eigenvalues[i] >= eig.eigenvalues[i + 1],
                            "eigenvalues not sorted descending");
        }

        double lam_sum = 0.0;
        for (double lam : eig.eigenvalues) lam_sum += lam;
        chk.require(std::abs(lam_sum - trace) <= 1e-8 * std::max(1.0, std::abs(trace)),
                    "trace preservation violated");

        for (std::size_t i = 0; i < k && chk.ok; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                double d_ij = 0.0;
                for (std::size_t r = 0; r < k; ++r)
                    d_ij += eig.eigenvectors(r, i) * eig.eigenvectors(r, j);
                chk.require(std::abs(d_ij - (i == j ? 1.0 : 0.0)) <= 1e-10,
                            "eigenvector orthonormality violated");
            }
            const Vec w = eig.eigenvectors.column(i);
            const Vec aw = matvec(a, w);
            double resid = 0.0;
            for (std::size_t r = 0; r < k; ++r) {
                const double e = aw[r] - eig.eigenvalues[i] * w[r];
                resid += e * e;
            }
            chk.require(std::sqrt(resid) <= 1e-8 * std::max(1.0, lam_max),
                        "eigen-residual bound violated");
        }
    }
}

// --------------------------------------------------------------------------
// Suite 2: subspace geometry. The fault hook corrupts projections here.
// --------------------------------------------------------------------------
void suite_geometry(Checker& chk, FaultInjection fault) {
    Rng rng(StreamKey(kSelfcheckSeed).with("geom"));
    auto projected = [fault](const InstanceSubspace& s, const Vec& v) {
        Vec p = project(s, v);
        if (fault == FaultInjection::FlipProjectionSign && !p.empty()) p[0] = -p[0];
        return p;
    };

    for (int trial = 0; trial < 100 && chk.ok; ++trial) {
        const std::size_t d = 4 + rng.below(10);
        const std::size_t k = 1 + rng.below(std::min<std::size_t>(d, 6));
        const auto keys = random_keys(k, d, rng);
        const InstanceSubspace s = build_subspace(keys, {1.0, 1e-10}, trial);
        const Vec q = random_unit(d, rng);

        // Pythagoras (projection length and distance from the same query).
        const double len = projection_length(s, q);
        const double dist = projection_distance(s, q);
        chk.require(std::abs(len * len + dist * dist - 1.0) <= 1e-8,
                    "Pythagoras identity violated");
        chk.require(len >= 0.0 && len <= 1.0 + 1e-8, "projection length outside [0, 1]");

        // Idempotence of the projection.
        const Vec p = projected(s, q);
        const Vec pp = projected(s, p);
        double err = 0.0;
        for (std::size_t i = 0; i < d; ++i) err = std::max(err, std::abs(pp[i] - p[i]));
        chk.require(err <= 1e-8, "projection idempotence violated");

        // Residual orthogonal to the subspace.
        for (std::size_t j = 0; j < s.rank() && chk.ok; ++j) {
            double r = 0.0;
            for (std::size_t i = 0; i < d; ++i) r += (q[i] - p[i]) * s.basis(i, j);
            chk.require(std::abs(r) <= 1e-8, "projection residual not orthogonal to basis");
        }

        // Full-rank reconstruction of the keys (rho = 1).
        double key_resid = 0.0;
        for (const auto& key : keys) {
            const Vec pk = projected(s, key.values);
            for (std::size_t i = 0; i < d; ++i) {
                const double e = key.values[i] - pk[i];
                key_resid += e * e;
            }
        }
        chk.require(key_resid <= 1e-10 * static_cast<double>(k),
                    "rho=1 key reconstruction residual too large");
    }

    // Dual-form check: K x K route vs direct D x D decomposition.
    for (int trial = 0; trial < 50 && chk.ok; ++trial) {
        const std::size_t d = 3 + rng.below(8); // D <= 10
        const std::size_t k = 1 + rng.below(std::min<std::size_t>(d, 4));
        const auto keys = random_keys(k, d, rng);
        const InstanceSubspace s = build_subspace(keys, {1.0, 1e-10}, trial);

        Matrix sigma(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                double sum = 0.0;
                for (const auto& key : keys) sum += key.values[i] * key.values[j];
                sigma(i, j) = sum;
            }
        const EigenResult eig = sym_eig(sigma);
        InstanceSubspace direct;
        direct.basis = Matrix(d, s.rank());
        for (std::size_t c = 0; c < s.rank(); ++c)
            for (std::size_t r = 0; r < d; ++r) direct.basis(r, c) = eig.eigenvectors(r, c);
        direct.retained_eigenvalues.assign(eig.eigenvalues.begin(),
                                           eig.eigenvalues.begin() + s.rank());

        const Vec q = random_unit(d, rng);
        chk.require(std::abs(projection_length(s, q) - projection_length(direct, q)) <= 1e-8,
                    "dual-form projection length disagrees with direct decomposition");
    }
}

// --------------------------------------------------------------------------
// Suite 3: one-shot reduction (K = 1 score is an absolute cosine).
// --------------------------------------------------------------------------
void suite_oneshot(Checker& chk) {
    Rng rng(StreamKey(kSelfcheckSeed).with("oneshot"));
    for (int trial = 0; trial < 1000 && chk.ok; ++trial) {
        const std::size_t d = 2 + rng.below(31);
        const Vec key = random_unit(d, rng);
        const Vec q = random_unit(d, rng);
        const InstanceSubspace s =
            build_subspace(std::vector<EmbeddingVector>{EmbeddingVector{key}}, {1.0, 1e-10}, 0);
        chk.require(s.rank() == 1, "K=1 subspace rank is not 1");
        chk.require(std::abs(projection_length(s, q) - std::abs(dot(key, q))) <= 1e-10,
                    "K=1 projection length differs from |cosine|");
    }
}

// --------------------------------------------------------------------------
// Suite 4: analytic gradients against central finite differences.
// --------------------------------------------------------------------------
void suite_gradients(Checker& chk) {
    Rng rng(StreamKey(kSelfcheckSeed).with("grad"));
    const double h = 1e-5;

    for (int trial = 0; trial < 25 && chk.ok; ++trial) {
        const std::size_t d = 16;
        const std::size_t n = 8;
        std::vector<InstanceSubspace> candidates;
        for (std::size_t i = 0; i < n; ++i)
            candidates.push_back(build_subspace(random_keys(3, d, rng), {0.9, 1e-10}, i));
        Vec q = random_unit(d, rng);
        const std::size_t pos = rng.below(n);

        const LossOutput out = kshot_loss_and_grad(q, candidates, pos, 0.2);
        double max_rel = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double keep = q[i];
            q[i] = keep + h;
            const double up = kshot_loss_and_grad(q, candidates, pos, 0.2).loss;
            q[i] = keep - h;
            const double down = kshot_loss_and_grad(q, candidates, pos, 0.2).loss;
            q[i] = keep;
            const double fd = (up - down) / (2.0 * h);
            max_rel = std::max(max_rel, std::abs(out.grad_wrt_query[i] - fd) /
                                            std::max(1e-3, std::abs(fd)));
        }
        chk.require(max_rel <= 1e-4, "query gradient disagrees with finite differences");
    }

    // End-to-end through the encoder on a tiny configuration.
    Rng init(StreamKey(kSelfcheckSeed).with("grad-net"));
    const std::vector<std::size_t> dims{10, 12, 8};
    MlpParams params = init_mlp(dims, init);
    std::vector<InstanceSubspace> candidates;
    for (std::size_t i = 0; i < 4; ++i)
        candidates.push_back(build_subspace(random_keys(2, 8, init), {1.0, 1e-10}, i));
    Vec input(10);
    for (double& x : input) x = init.normal();

    auto loss_of = [&](const MlpParams& p) {
        return kshot_loss_and_grad(embed(p, input).values, candidates, 0, 0.2).loss;
    };
    ForwardCache cache;
    const EmbeddingVector emb = forward(params, input, cache);
    const LossOutput out = kshot_loss_and_grad(emb.values, candidates, 0, 0.2);
    const MlpGrads grads = backward(params, cache, out.grad_wrt_query);

    double max_rel = 0.0;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto check_block = [&](std::vector<double>& p, const std::vector<double>& g) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double keep = p[i];
                p[i] = keep + h;
                const double up = loss_of(params);
                p[i] = keep - h;
                const double down = loss_of(params);
                p[i] = keep;
                const double fd = (up - down) / (2.0 * h);
                max_rel = std::max(max_rel, std::abs(g[i] - fd) / std::max(1e-3, std::abs(fd)));
            }
        };
        check_block(params.layers[l].weight.data(), grads.layers[l].weight.data());
        check_block(params.layers[l].bias, grads.layers[l].bias);
    }
    chk.require(max_rel <= 1e-3, "end-to-end parameter gradient disagrees with finite differences");
}

// --------------------------------------------------------------------------
// Suite 5: oracle equivalences (least squares, brute-force Gram).
// --------------------------------------------------------------------------
void suite_oracles(Checker& chk, FaultInjection fault) {
    Rng rng(StreamKey(kSelfcheckSeed).with("oracle"));

    // project() against the normal-equations least-squares solution.
    for (int trial = 0; trial < 100 && chk.ok; ++trial) {
        const std::size_t d = 6;
        const std::size_t k = 3;
        const auto keys = random_keys(k, d, rng);
        const InstanceSubspace s = build_subspace(keys, {1.0, 1e-10}, trial);
        const Vec q = random_unit(d, rng);
        Vec p = project(s, q);
        if (fault == FaultInjection::FlipProjectionSign) p[0] = -p[0];

        // Solve (V^T V) c = V^T q by Gaussian elimination with partial pivots.
        Matrix a(k, k + 1);
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) a(i, j) = dot(keys[i].values, keys[j].values);
            a(i, k) = dot(keys[i].values, q);
        }
        for (std::size_t col = 0; col < k; ++col) {
            std::size_t pivot = col;
            for (std::size_t r = col + 1; r < k; ++r)
                if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
            for (std::size_t j = 0; j <= k; ++j) std::swap(a(col, j), a(pivot, j));
            for (std::size_t r = col + 1; r < k; ++r) {
                const double f = a(r, col) / a(col, col);
                for (std::size_t j = col; j <= k; ++j) a(r, j) -= f * a(col, j);
            }
        }
        Vec c(k);
        for (std::size_t i = k; i-- > 0;) {
            double sum = a(i, k);
            for (std::size_t j = i + 1; j < k; ++j) sum -= a(i, j) * c[j];
            c[i] = sum / a(i, i);
        }
        Vec ls(d, 0.0);
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t i = 0; i < d; ++i) ls[i] += c[j] * keys[j].values[i];

        double err = 0.0;
        for (std::size_t i = 0; i < d; ++i) err = std::max(err, std::abs(ls[i] - p[i]));
        chk.require(err <= 1e-8, "project() disagrees with least-squares oracle");
    }

    // gram() against brute-force triple-loop dot products.
    for (int trial = 0; trial < 50 && chk.ok; ++trial) {
        const std::size_t d = 2 + rng.below(8);
        const std::size_t k = 1 + rng.below(5);
        Matrix v(d, k);
        for (double& x : v.data()) x = rng.normal();
        const Matrix g = gram(v);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                double s = 0.0;
                for (std::size_t r = 0; r < d; ++r) s += v(r, i) * v(r, j);
                chk.require(std::abs(g(i, j) - s) <= 1e-12 * std::max(1.0, std::abs(s)),
                            "gram() disagrees with brute-force dot products");
            }
    }

    // K-shot probabilities reduce to the one-shot softmax on |cosine| scores.
    for (int trial = 0; trial < 50 && chk.ok; ++trial) {
        const std::size_t d = 8;
        const std::size_t n = 5;
        std::vector<InstanceSubspace> subs;
        Vec cosines(n);
        const Vec q = random_unit(d, rng);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec key = random_unit(d, rng);
            cosines[i] = std::abs(dot(key, q));
            subs.push_back(build_subspace(std::vector<EmbeddingVector>{EmbeddingVector{key}},
                                          {1.0, 1e-10}, i));
        }
        const LossOutput out = kshot_loss_and_grad(q, subs, 0, 0.2);
        const Vec expected = kshot_probabilities({0, cosines, 0.2});
        for (std::size_t i = 0; i < n; ++i)
            chk.require(std::abs(out.probabilities[i] - expected[i]) <= 1e-14,
                        "K=1 probabilities disagree with one-shot |cosine| softmax");
    }
}

SuiteResult run_suite(const std::string& name, const std::function<void(Checker&)>& body) {
    Checker chk;
    const auto t0 = std::chrono::steady_clock::now();
    body(chk);
    SuiteResult result;
    result.name = name;
    result.passed = chk.ok;
    result.message = chk.ok ? "ok" : chk.oss.str();
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

} // namespace

std::vector<SuiteResult> run_selfcheck(FaultInjection fault) {
    std::vector<SuiteResult> results;
    results.push_back(run_suite("eigensolver", [](Checker& c) { suite_eigensolver(c); }));
    results.push_back(
        run_suite("subspace-geometry", [fault](Checker& c) { suite_geometry(c, fault); }));
    results.push_back(run_suite("oneshot-reduction", [](Checker& c) { suite_oneshot(c); }));
    results.push_back(run_suite("gradients", [](Checker& c) { suite_gradients(c); }));
    results.push_back(run_suite("oracles", [fault](Checker& c) { suite_oracles(c, fault); }));
    return results;
}

} // namespace kscl
