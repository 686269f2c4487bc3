#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "surgseg/dataset.hpp"
#include "surgseg/rng.hpp"

namespace surgseg {

enum class PointLabel : int { negative = 0, positive = 1 };

struct PointPrompt {
    int x = 0;
    int y = 0;
    PointLabel label = PointLabel::positive;
    ObjectId object_id = 0;
    FrameIndex frame_index = 0;

    bool operator==(const PointPrompt&) const = default;
};

/// Two labeled corners; the top-left carries label 2, the bottom-right
/// label 3. Strict ordering on both axes.
struct BoxPrompt {
    static constexpr int kTopLeftLabel = 2;
    static constexpr int kBottomRightLabel = 3;

    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;
    ObjectId object_id = 0;
    FrameIndex frame_index = 0;

    bool operator==(const BoxPrompt&) const = default;
};

struct MaskPrompt {
    BinaryMask mask;  // frame resolution
    ObjectId object_id = 0;
    FrameIndex frame_index = 0;

    bool operator==(const MaskPrompt&) const = default;
};

using Prompt = std::variant<PointPrompt, BoxPrompt, MaskPrompt>;

ObjectId prompt_object(const Prompt& prompt);
FrameIndex prompt_frame(const Prompt& prompt);

struct PointSamplingConfig {
    int positives_per_region = 1;   // N
    int negatives_per_region = 1;   // M
    int fluctuation_radius = 3;     // beta, pixels
    std::uint64_t seed = 0;
};

enum class StrategyKind { center_point, random_points, box, mask };

struct PromptStrategy {
    StrategyKind kind = StrategyKind::mask;
    PointSamplingConfig point_config;

    static PromptStrategy center_point();
    static PromptStrategy random_points(int n, PointSamplingConfig config = {});
    static PromptStrategy box();
    static PromptStrategy mask();

    /// Report row label: "1Point-Center", "1Point-Random", "3Points-Random",
    /// "Bbox", "Mask".
    std::string label() const;
};

/// N points uniformly sampled (with replacement) from each 4-connected
/// foreground region, then fluctuated. Deterministic given the config seed.
std::vector<PointPrompt> sample_positive_points(const InstanceAnnotation& annotation,
                                                const PointSamplingConfig& config);

/// Up to M negative points per region of the target, drawn from the other
/// objects' positive samples on the same frame. Empty when no donors exist.
std::vector<PointPrompt> sample_negative_points(const InstanceAnnotation& target,
                                                std::span<const InstanceAnnotation> others,
                                                const PointSamplingConfig& config);

/// Each coordinate perturbed by an independent uniform integer offset in
/// [-beta, +beta], then clamped to the image bounds.
PointPrompt fluctuate_point(const PointPrompt& point, int beta, int width, int height, Rng& rng);

enum class CenterMode { box_center, mass_center };

/// Box midpoint (rounded toward zero) or integer-rounded mass centroid;
/// snapped to the nearest foreground pixel when it lands on background.
PointPrompt center_point(const InstanceAnnotation& annotation, CenterMode mode);

/// Tight bbox corners; single-pixel extents are widened by one pixel to keep
/// the strict corner ordering.
BoxPrompt box_from_annotation(const InstanceAnnotation& annotation);

/// One prompt group per object on the frame, per the strategy. Throws
/// IntegrityError on an unannotated frame (use first_valid_prompt_frame).
std::vector<Prompt> build_prompt_set(const AnnotatedVideo& video, FrameIndex frame_index,
                                     const PromptStrategy& strategy);

/// Line-oriented record format for audit and replay:
///   video_id <TAB> frame <TAB> object <TAB> kind <TAB> payload
void write_prompt_records(std::ostream& out, const std::string& video_id,
                          std::span<const Prompt> prompts);
std::vector<Prompt> read_prompt_records(std::istream& in);

}  // namespace surgseg
