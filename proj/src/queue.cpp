#include "kscl/queue.hpp"

#include "kscl/error.hpp"

namespace kscl {

void SubspaceQueue::enqueue(std::shared_ptr<const InstanceSubspace> subspace) {
    if (!entries_.empty() && subspace->dim() != entries_.front()->dim())
        fail(Errc::DimensionMismatch, "queue entries have ambient dim " +
                                          std::to_string(entries_.front()->dim()) + ", got " +
                                          std::to_string(subspace->dim()));
    entries_.push_back(std::move(subspace));
    while (entries_.size() > capacity_) entries_.pop_front();
}

void SubspaceQueue::enqueue_batch(
    std::span<const std::shared_ptr<const InstanceSubspace>> subspaces) {
    for (const auto& s : subspaces) enqueue(s);
}

std::vector<std::shared_ptr<const InstanceSubspace>> SubspaceQueue::negatives_snapshot() const {
    return {entries_.begin(), entries_.end()};
}

} // namespace kscl
