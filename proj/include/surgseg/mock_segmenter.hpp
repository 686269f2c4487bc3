#pragma once

#include <map>
#include <optional>
#include <set>

#include "surgseg/bridge.hpp"
#include "surgseg/session.hpp"

namespace surgseg {

/// Parameterized degradation applied per frame since the last prompt:
/// translation, square-element erosion of the accumulated radius, and an
/// optional dropout horizon beyond which the object yields an empty mask.
struct DriftModel {
    double dx = 0.0;            // pixels per frame
    double dy = 0.0;            // pixels per frame
    double erosion_rate = 0.0;  // erosion radius accumulated per frame
    std::optional<int> dropout_after;

    std::string label() const;
};

/// Ground truth at target_frame translated by elapsed*(dx,dy), eroded by
/// floor(elapsed*erosion_rate), clipped to the frame; empty beyond the
/// dropout horizon or when the object has no ground truth there.
BinaryMask mock_propagate(const AnnotatedVideo& video, FrameIndex seeded_frame,
                          ObjectId object_id, FrameIndex target_frame, const DriftModel& drift);

/// Seed-frame fidelity per prompt kind: a mask prompt seeds exactly, a box
/// seeds the ground truth restricted to the box, a point set seeds the
/// 4-connected regions containing its positive points (possibly empty).
BinaryMask seed_mask_from_prompts(const AnnotatedVideo& video, ObjectId object_id,
                                  FrameIndex frame, std::span<const Prompt> prompts);

/// Deterministic SegmenterSession that degrades ground truth with the drift
/// model. Seed-frame output is the prompt-fidelity mask; later frames come
/// from mock_propagate relative to the object's last prompt frame.
class MockSegmenterSession : public SegmenterSession {
public:
    MockSegmenterSession(const AnnotatedVideo& video, DriftModel drift);

    SessionCapabilities capabilities() const override;
    void add_prompts(std::span<const Prompt> prompts) override;
    std::map<ObjectId, BinaryMask> propagate(FrameIndex frame) override;
    void reset_memory() override;
    std::vector<ObjectId> tracked_objects() const override;
    std::string identity() const override;

private:
    struct SeedState {
        FrameIndex frame = 0;
        BinaryMask mask;
    };

    const AnnotatedVideo& video_;
    DriftModel drift_;
    std::map<ObjectId, SeedState> seeds_;
};

/// Deterministic candidate-mask generator over the ground truth's connected
/// components: a points_per_side grid is laid over the frame, every
/// component hit by a grid point becomes a candidate (with the hitting
/// points), then area, pseudo-quality/stability and duplicate filters apply.
class MockAutoMaskGenerator : public AutoMaskGenerator {
public:
    explicit MockAutoMaskGenerator(const AnnotatedVideo& video);

    std::vector<AutoMaskCandidate> generate(const FrameRef& frame,
                                            const AutoSegConfig& config) override;

private:
    const AnnotatedVideo& video_;
};

/// Pseudo scores used by the mock generator, derived from mask geometry so
/// threshold knobs act monotonically: quality grows with relative area,
/// stability falls with boundary/area ratio.
double mock_mask_quality(const BinaryMask& mask);
double mock_mask_stability(const BinaryMask& mask);
/// Foreground pixels with a 4-neighbor outside the mask (or on the border).
std::uint64_t boundary_length(const BinaryMask& mask);

}  // namespace surgseg
