#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "surgseg/session.hpp"

namespace surgseg {

/// When the session is re-seeded from ground truth: every `interval` frames
/// (counted from the initial prompt frame), and/or whenever a new object
/// appears in the ground truth.
struct ReinitPolicy {
    std::optional<int> interval;
    bool new_object_trigger = false;

    /// "None", "Reinit 30", "Reinit 60", "Reinit 30+New", "New-Object".
    std::string label() const;
};

enum class ReinitCause { interval, new_object };

struct ReinitEvent {
    FrameIndex frame_index = 0;
    ReinitCause cause = ReinitCause::interval;
    std::vector<ObjectId> objects_seeded;

    bool operator==(const ReinitEvent&) const = default;
};

struct RunProvenance {
    std::string video_id;
    std::string strategy;
    std::string policy;
    std::string segmenter;
    std::uint64_t seed = 0;
    FrameIndex initial_prompt_frame = 0;
    std::vector<ReinitEvent> events;
    bool pseudo_ground_truth = false;
};

struct SegmentationResult {
    /// frame -> object -> mask; dense over frames >= the initial prompt
    /// frame, with empty masks for absent objects.
    std::map<FrameIndex, std::map<ObjectId, BinaryMask>> masks;
    RunProvenance provenance;
    std::optional<FrameIndex> failed_at;
    std::string failure_reason;
};

/// Annotated frames at which (frame - anchor) mod T == 0, the anchor being
/// the first annotated frame (itself excluded). A scheduled frame without
/// annotations resolves to the nearest later annotated frame; duplicates
/// collapse. Throws InvalidArgument on an empty frame list or T <= 0.
std::vector<FrameIndex> schedule_interval_reinits(std::span<const FrameIndex> annotated_frames,
                                                  int interval);

/// Ids present in the ground-truth frame but not yet tracked. Disappearance
/// is not a trigger.
std::vector<ObjectId> detect_new_objects(std::span<const InstanceAnnotation> gt_frame,
                                         const std::set<ObjectId>& tracked);

/// Clears session memory and re-seeds from the ground truth of the frame
/// (all objects present there). Prior prompts are not retained.
ReinitEvent reinitialize(SegmenterSession& session, const AnnotatedVideo& video,
                         FrameIndex frame_index, const PromptStrategy& strategy,
                         ReinitCause cause);

/// Seeds at the first annotated frame, propagates forward, and applies the
/// policy's reinit triggers at every annotated frame. A propagation failure
/// mid-video yields a partial result with a failure marker.
SegmentationResult run_sequence(const AnnotatedVideo& video, const PromptStrategy& strategy,
                                const ReinitPolicy& policy, SegmenterSession& session);

/// One JSON line per frame (object ids + mask digests) and per reinit event.
void write_run_log(const std::filesystem::path& path, const SegmentationResult& result);

/// Per-frame RLE mask records: frame, object, width, height, counts.
void write_result_masks(const std::filesystem::path& path, const SegmentationResult& result);
SegmentationResult read_result_masks(const std::filesystem::path& path);

}  // namespace surgseg
