#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "surgseg/prompts.hpp"

namespace surgseg {

struct SessionCapabilities {
    bool point_prompts = true;
    bool box_prompts = true;
    bool mask_prompts = true;
    bool per_object_memory = true;
};

/// Abstract promptable video-segmenter session. After add_prompts on frame t,
/// a mask for each prompted object is obtainable for every frame >= t until
/// reset_memory, which discards all propagation state but not the video
/// binding. A session is single-threaded; run distinct videos on distinct
/// sessions.
class SegmenterSession {
public:
    virtual ~SegmenterSession() = default;

    virtual SessionCapabilities capabilities() const = 0;

    /// Seeds (or re-seeds) the listed objects. All prompts must share one
    /// frame index. Throws CapabilityError for unsupported prompt kinds.
    virtual void add_prompts(std::span<const Prompt> prompts) = 0;

    /// Masks for every tracked object at the frame; an object with no
    /// presence yields an empty mask, never a missing entry.
    virtual std::map<ObjectId, BinaryMask> propagate(FrameIndex frame) = 0;

    virtual void reset_memory() = 0;

    virtual std::vector<ObjectId> tracked_objects() const = 0;

    /// Identity string recorded in provenance (e.g. "mock(drift=1,0)").
    virtual std::string identity() const = 0;
};

}  // namespace surgseg
