#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "surgseg/mask.hpp"

namespace surgseg {

struct FrameRef {
    FrameIndex index = 0;
    std::string image_locator;
    int width = 0;
    int height = 0;

    bool operator==(const FrameRef&) const = default;
};

/// Ordered frames of one video. Frame indices are dense from 0 and every
/// frame shares one resolution.
struct VideoSequence {
    std::string video_id;
    std::vector<FrameRef> frames;
    double source_fps = 1.0;
    double sampled_fps = 1.0;

    bool operator==(const VideoSequence&) const = default;
};

/// One object instance on one frame. The bbox is always the tight bounds of
/// the mask foreground.
struct InstanceAnnotation {
    FrameIndex frame_index = 0;
    ObjectId object_id = 0;
    ClassId class_id = 0;
    BinaryMask mask;
    PixelBox bbox;

    /// Builds an annotation with the bbox recomputed from the mask.
    /// Throws InvalidArgument when the mask is empty.
    static InstanceAnnotation from_mask(FrameIndex frame, ObjectId object, ClassId cls,
                                        BinaryMask mask);

    bool operator==(const InstanceAnnotation&) const = default;
};

struct AnnotatedVideo {
    VideoSequence sequence;
    std::map<FrameIndex, std::vector<InstanceAnnotation>> annotations;
    std::map<ClassId, std::string> class_names;
    /// True when the annotations came from automatic mask generation rather
    /// than real ground truth. Propagated into every downstream report.
    bool pseudo_ground_truth = false;

    std::vector<FrameIndex> annotated_frames() const;
    bool has_annotations(FrameIndex frame) const;
    /// Union of the object's instances at the frame; nullopt when absent.
    std::optional<BinaryMask> object_mask(FrameIndex frame, ObjectId object) const;
    std::map<ObjectId, ClassId> object_classes() const;
    std::pair<int, int> frame_size() const;

    bool operator==(const AnnotatedVideo&) const = default;
};

struct SplitSpec {
    enum class Unit { video, frame };

    double train_fraction = 0.7;
    std::uint64_t seed = 0;
    Unit unit = Unit::video;
};

/// Keeps every ceil(source_fps/target_fps)-th frame starting at index 0 and
/// reindexes densely. Throws InvalidArgument when target_fps > source_fps.
VideoSequence sample_frames(const VideoSequence& sequence, double target_fps);

/// sample_frames plus annotation remapping: annotations on dropped frames are
/// discarded, kept ones are re-indexed.
AnnotatedVideo sample_video(const AnnotatedVideo& video, double target_fps);

/// The minimal frame index with a non-empty annotation list (the initial
/// prompt frame). Throws IntegrityError when the video has none.
FrameIndex first_valid_prompt_frame(const AnnotatedVideo& video);

/// Deterministic seeded partition; both sides non-empty.
std::pair<std::vector<AnnotatedVideo>, std::vector<AnnotatedVideo>>
split_train_test(const std::vector<AnnotatedVideo>& videos, const SplitSpec& spec);

/// Rewrites object ids so they are stable across frames: frame order ids on
/// the first annotated frame, then class + maximal-overlap matching, with a
/// fresh id whenever the best overlap IoU falls below min_match_iou.
void link_objects_across_frames(std::vector<std::vector<InstanceAnnotation>>& per_frame,
                                double min_match_iou = 0.1);

/// One JSON record per frame: video_id, frame_index, image_locator,
/// annotation digest.
void write_dataset_manifest(std::span<const AnnotatedVideo> videos,
                            const std::filesystem::path& path);

}  // namespace surgseg
