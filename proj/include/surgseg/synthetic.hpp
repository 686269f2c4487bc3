#pragma once

#include <array>

#include <nlohmann/json.hpp>

#include "surgseg/dataset.hpp"

namespace surgseg {

/// Rigid synthetic object: a rectangle or disk (optionally with extra
/// disjoint parts, modelling occlusion splits) moving at a constant velocity.
struct SyntheticObjectSpec {
    ObjectId object_id = 0;
    ClassId class_id = 1;
    enum class Shape { rectangle, disk } shape = Shape::rectangle;
    int x = 0;
    int y = 0;
    int w = 16;
    int h = 16;
    double vx = 0.0;
    double vy = 0.0;
    FrameIndex appears_at = 0;
    std::optional<FrameIndex> disappears_at;
    /// Extra parts as (dx, dy, w, h) offsets from the main shape.
    std::vector<std::array<int, 4>> extra_parts;
};

struct SyntheticVideoSpec {
    std::string video_id = "synthetic";
    int frames = 120;
    int width = 128;
    int height = 128;
    double fps = 1.0;
    /// Ground truth only on every k-th frame (1 = dense).
    int annotate_every = 1;
    std::vector<SyntheticObjectSpec> objects;
    std::map<ClassId, std::string> class_names;
};

AnnotatedVideo generate_synthetic_video(const SyntheticVideoSpec& spec);

SyntheticVideoSpec synthetic_spec_from_json(const nlohmann::json& j);
nlohmann::json synthetic_spec_to_json(const SyntheticVideoSpec& spec);

/// The standard desk-scale fixture: three objects (one split into two
/// parts), dense annotations, 128x128.
SyntheticVideoSpec default_synthetic_spec(int frames = 120);

}  // namespace surgseg
