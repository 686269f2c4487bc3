#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "surgseg/bridge.hpp"
#include "surgseg/dataset.hpp"

namespace surgseg {

/// One sweep cell: a config, its candidates, and the inspection statistics
/// that proxy mask completeness (coverage), boundary accuracy
/// (boundary/area ratio), and object separation (max pairwise IoU).
struct SweepCell {
    int config_id = 0;
    AutoSegConfig config;
    bool failed = false;
    std::string failure_reason;
    std::vector<AutoMaskCandidate> candidates;
    std::size_t candidate_count = 0;
    double coverage_fraction = 0.0;
    double boundary_area_ratio = 0.0;
    double max_pairwise_iou = 0.0;
};

struct SweepReport {
    FrameRef frame;
    std::vector<SweepCell> cells;
};

/// Runs every config against the frame; a generator failure marks that cell
/// failed and the sweep continues. Throws InvalidArgument on an empty grid.
SweepReport sweep(const FrameRef& frame, const std::vector<AutoSegConfig>& grid,
                  AutoMaskGenerator& generator);

/// Renders one overlay image per cell plus an index document with the cell
/// statistics, for expert visual inspection.
void write_sweep_gallery(const SweepReport& report, const std::filesystem::path& directory,
                         const std::filesystem::path& base_image = {});

/// Turns the chosen cell's masks into frame-0 annotations (object ids by
/// descending area), flagged as pseudo ground truth. Throws on a failed or
/// empty cell.
std::vector<InstanceAnnotation> select_pseudo_ground_truth(const SweepReport& report,
                                                           int chosen_config_id,
                                                           ClassId class_id = 1);

/// Wraps pseudo annotations into a video ready for the experiment matrix;
/// pseudo_ground_truth is set so every downstream report carries the taint.
AnnotatedVideo video_with_pseudo_ground_truth(const VideoSequence& sequence,
                                              std::vector<InstanceAnnotation> annotations,
                                              ClassId class_id = 1);

}  // namespace surgseg
