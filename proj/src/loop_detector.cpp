#include <chrono>

#include "iftd/error.hpp"
#include "iftd/evaluation.hpp"

namespace iftd {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point from, Clock::time_point to)
{
    return std::chrono::duration<double, std::milli>(to - from).count();
}

} // namespace

LoopDetector::LoopDetector(PipelineConfig config)
    : config_(std::move(config)),
      database_(config_.database.side_resolution, config_.database.neighbor_probing)
{
    config_.validate();
}

const KeyframeBundle* LoopDetector::keyframe(std::int64_t frame_id) const
{
    auto it = frames_.find(frame_id);
    return it == frames_.end() ? nullptr : &it->second;
}

KeyframeOutcome LoopDetector::process(const PointCloud& keyframe)
{
    if (!frames_.empty() && keyframe.frame_id <= frames_.rbegin()->first)
        throw ArgumentError("keyframe " + std::to_string(keyframe.frame_id) +
                            " is not newer than keyframe " + std::to_string(frames_.rbegin()->first));

    KeyframeOutcome outcome;
    outcome.frame_id = keyframe.frame_id;

    const auto start = Clock::now();
    KeyframeBundle bundle;
    bundle.image = project(keyframe, config_.bev);
    const auto keypoints = detect_keypoints(bundle.image, config_.keypoint);
    bundle.descriptors = build_descriptors(keypoints, config_.bev, keyframe.frame_id, config_.knn);
    bundle.ground = compute_ground_stats(keyframe, config_.bev);
    bundle.image_hash = difference_hash(bundle.image, config_.verify.hash_resolution);
    outcome.keypoints = keypoints.size();
    outcome.descriptors = bundle.descriptors.size();
    const auto extracted = Clock::now();

    const auto candidates = database_.query_candidates(
        bundle.descriptors, config_.database.exclusion_window, config_.database.top_k);
    outcome.candidates = candidates.size();
    for (const auto& cand : candidates) {
        // Dnum is bounded by the vote count.
        if (cand.votes <= config_.verify.min_triangle_matches)
            continue;
        const KeyframeBundle* stored = this->keyframe(cand.frame_id);
        if (!stored)
            continue;
        VerificationResult r = verify(bundle, cand, *stored, config_.verify);
        if (!r.geometry_passed)
            continue;
        // Highest similarity wins; ties go to the older frame.
        if (!outcome.best || r.similarity > outcome.best->verification.similarity ||
            (r.similarity == outcome.best->verification.similarity &&
             cand.frame_id < outcome.best->match_frame))
            outcome.best = LoopCandidate{cand.frame_id, r};
    }
    outcome.accepted = outcome.best && outcome.best->verification.accepted;
    const auto queried = Clock::now();

    database_.insert_frame(keyframe.frame_id, bundle.descriptors);
    bundle.descriptors.clear();
    bundle.descriptors.shrink_to_fit();
    frames_.emplace(keyframe.frame_id, std::move(bundle));
    const auto done = Clock::now();

    outcome.timings = {elapsed_ms(start, extracted), elapsed_ms(extracted, queried),
                       elapsed_ms(start, done)};
    return outcome;
}

} // namespace iftd
