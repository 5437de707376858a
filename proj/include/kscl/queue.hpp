#pragma once

#include "kscl/subspace.hpp"

#include <deque>
#include <memory>
#include <span>
#include <vector>

namespace kscl {

// Fixed-capacity FIFO dictionary of instance subspaces: the negative set for
// the contrastive softmax. Entries are immutable once enqueued; snapshots
// share them and stay valid across later enqueues. Single writer (the
// training loop); snapshots are freely shareable with readers.
class SubspaceQueue {
public:
    explicit SubspaceQueue(std::size_t capacity) : capacity_(capacity) {}

    // Appends in order, evicting the oldest entries to honor capacity.
    // Throws DimensionMismatch when a subspace's ambient dim disagrees with
    // existing entries.
    void enqueue_batch(std::span<const std::shared_ptr<const InstanceSubspace>> subspaces);
    void enqueue(std::shared_ptr<const InstanceSubspace> subspace);

    // Stable snapshot, oldest first; unaffected by later enqueues.
    std::vector<std::shared_ptr<const InstanceSubspace>> negatives_snapshot() const;

    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    std::deque<std::shared_ptr<const InstanceSubspace>> entries_; // oldest first
};

} // namespace kscl
