#include "headsplat/dataset.hpp"

#include <algorithm>

namespace headsplat {

BatchStream::BatchStream(DatasetManifest manifest, std::uint64_t seed,
                         std::vector<std::size_t> views)
    : manifest_(std::move(manifest)),
      views_(std::move(views)),
      rng_(seed),
      tracker_(std::make_shared<ResidencyTracker>()) {
    if (views_.empty()) views_ = manifest_.train_views;
    if (views_.empty()) throw Error("batch stream needs at least one view");
    if (manifest_.frames.empty()) throw Error("batch stream needs at least one frame");
    launch();
}

BatchStream::~BatchStream() {
    if (pending_.valid()) pending_.wait();
}

std::size_t BatchStream::batch_bytes() const {
    std::size_t total = 0;
    for (auto v : views_) {
        const auto& c = manifest_.cameras.at(v);
        total += std::size_t(c.width) * c.height * 3 * sizeof(float);
    }
    return total;
}

BatchStream::Plan BatchStream::plan_next() {
    Plan plan;
    std::uniform_int_distribution<std::size_t> pick(0, manifest_.frames.size() - 1);
    plan.frame = pick(rng_);
    plan.views = views_;
    std::shuffle(plan.views.begin(), plan.views.end(), rng_);
    return plan;
}

void BatchStream::launch() {
    // The schedule is drawn here, on the caller's thread, so the sequence of
    // frames and views depends only on the seed.
    Plan plan = plan_next();
    const auto bytes = batch_bytes();
    pending_ = std::async(std::launch::async, [this, plan = std::move(plan), bytes]() {
        FrameBatch batch;
        batch.frame_index = plan.frame;
        batch.residency = ResidentBytes(tracker_, bytes);
        auto loaded = load_frame_batch(manifest_, plan.frame, plan.views);
        batch.views = std::move(loaded.views);
        return batch;
    });
}

const FrameBatch& BatchStream::next() {
    FrameBatch ready = pending_.get();
    current_.reset();
    current_.emplace(std::move(ready));
    launch();
    return *current_;
}

} // namespace headsplat
