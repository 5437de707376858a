#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kscl/error.hpp"
#include "kscl/queue.hpp"
#include "kscl/rng.hpp"

#include <deque>

using namespace kscl;

namespace {

std::shared_ptr<const InstanceSubspace> tagged(std::uint64_t tag, std::size_t dim = 4) {
    Vec v(dim, 0.0);
    v[0] = 1.0;
    auto s = std::make_shared<InstanceSubspace>(
        build_subspace(std::vector<EmbeddingVector>{EmbeddingVector{v}}, {1.0, 1e-10}, tag));
    return s;
}

} // namespace

TEST_CASE("FIFO eviction preserves order") {
    SubspaceQueue q(3);
    for (std::uint64_t i = 0; i < 4; ++i) q.enqueue(tagged(i));
    const auto snap = q.negatives_snapshot();
    REQUIRE(snap.size() == 3);
    CHECK(snap[0]->instance_tag == 1); // oldest entry evicted
    CHECK(snap[1]->instance_tag == 2);
    CHECK(snap[2]->instance_tag == 3);
}

TEST_CASE("batch larger than capacity keeps the newest entries") {
    SubspaceQueue q(2);
    std::vector<std::shared_ptr<const InstanceSubspace>> batch;
    for (std::uint64_t i = 0; i < 5; ++i) batch.push_back(tagged(i));
    q.enqueue_batch(batch);
    const auto snap = q.negatives_snapshot();
    REQUIRE(snap.size() == 2);
    CHECK(snap[0]->instance_tag == 3);
    CHECK(snap[1]->instance_tag == 4);
}

TEST_CASE("empty batch leaves the queue unchanged") {
    SubspaceQueue q(4);
    q.enqueue(tagged(7));
    q.enqueue_batch({});
    const auto snap = q.negatives_snapshot();
    REQUIRE(snap.size() == 1);
    CHECK(snap[0]->instance_tag == 7);
}

TEST_CASE("snapshots are isolated from later enqueues") {
    SubspaceQueue q(8);
    CHECK(q.negatives_snapshot().empty());
    q.enqueue(tagged(0));
    q.enqueue(tagged(1));
    const auto snap = q.negatives_snapshot();
    q.enqueue(tagged(2));
    CHECK(snap.size() == 2);
    CHECK(snap[0]->instance_tag == 0);
    CHECK(snap[1]->instance_tag == 1);
    CHECK(q.negatives_snapshot().size() == 3);
}

TEST_CASE("dimension mismatch is rejected") {
    SubspaceQueue q(4);
    q.enqueue(tagged(0, 4));
    CHECK_THROWS_WITH_AS(q.enqueue(tagged(1, 5)), doctest::Contains("DimensionMismatch"), Error);
}

TEST_CASE("random operation sequences keep length and order invariants") {
    Rng rng(StreamKey(61).with("queue-props"));
    SubspaceQueue q(5);
    std::deque<std::uint64_t> model; // reference FIFO
    std::uint64_t next_tag = 0;
    for (int op = 0; op < 200; ++op) {
        const std::size_t batch = rng.below(4);
        std::vector<std::shared_ptr<const InstanceSubspace>> subspaces;
        for (std::size_t i = 0; i < batch; ++i) {
            subspaces.push_back(tagged(next_tag));
            model.push_back(next_tag);
            ++next_tag;
        }
        q.enqueue_batch(subspaces);
        while (model.size() > 5) model.pop_front();

        const auto snap = q.negatives_snapshot();
        REQUIRE(snap.size() == model.size());
        REQUIRE(snap.size() <= q.capacity());
        for (std::size_t i = 0; i < snap.size(); ++i)
            REQUIRE(snap[i]->instance_tag == model[i]);
    }
}
