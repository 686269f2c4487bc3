#include "surgseg/autoseg.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "surgseg/errors.hpp"
#include "surgseg/image_io.hpp"
#include "surgseg/mock_segmenter.hpp"

namespace surgseg {

SweepReport sweep(const FrameRef& frame, const std::vector<AutoSegConfig>& grid,
                  AutoMaskGenerator& generator) {
    if (grid.empty()) throw InvalidArgument("sweep: empty hyperparameter grid");

    SweepReport report;
    report.frame = frame;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        SweepCell cell;
        cell.config_id = static_cast<int>(i);
        cell.config = grid[i];
        try {
            cell.candidates = generator.generate(frame, grid[i]);
        } catch (const std::exception& e) {
            cell.failed = true;
            cell.failure_reason = e.what();
            report.cells.push_back(std::move(cell));
            continue;
        }
        cell.candidate_count = cell.candidates.size();

        BinaryMask covered(frame.width, frame.height);
        std::uint64_t boundary_total = 0;
        std::uint64_t area_total = 0;
        for (const auto& candidate : cell.candidates) {
            covered = covered.unite(candidate.mask);
            boundary_total += boundary_length(candidate.mask);
            area_total += candidate.mask.foreground_count();
        }
        cell.coverage_fraction = covered.pixel_count() == 0
                                     ? 0.0
                                     : static_cast<double>(covered.foreground_count()) /
                                           static_cast<double>(covered.pixel_count());
        cell.boundary_area_ratio =
            area_total == 0 ? 0.0
                            : static_cast<double>(boundary_total) / static_cast<double>(area_total);
        for (std::size_t a = 0; a < cell.candidates.size(); ++a) {
            for (std::size_t b = a + 1; b < cell.candidates.size(); ++b) {
                const auto inter =
                    cell.candidates[a].mask.intersect(cell.candidates[b].mask).foreground_count();
                const auto uni =
                    cell.candidates[a].mask.unite(cell.candidates[b].mask).foreground_count();
                if (uni > 0) {
                    cell.max_pairwise_iou =
                        std::max(cell.max_pairwise_iou,
                                 static_cast<double>(inter) / static_cast<double>(uni));
                }
            }
        }
        report.cells.push_back(std::move(cell));
    }
    return report;
}

void write_sweep_gallery(const SweepReport& report, const std::filesystem::path& directory,
                         const std::filesystem::path& base_image) {
    std::filesystem::create_directories(directory);
    nlohmann::json index;
    index["frame"] = {{"index", report.frame.index},
                      {"locator", report.frame.image_locator},
                      {"width", report.frame.width},
                      {"height", report.frame.height}};
    index["cells"] = nlohmann::json::array();
    for (const auto& cell : report.cells) {
        nlohmann::json entry = {
            {"config_id", cell.config_id},
            {"config", cell.config.to_json()},
            {"failed", cell.failed},
        };
        if (cell.failed) {
            entry["failure_reason"] = cell.failure_reason;
        } else {
            const std::string image_name = "cell_" + std::to_string(cell.config_id) + ".png";
            std::vector<BinaryMask> masks;
            masks.reserve(cell.candidates.size());
            for (const auto& c : cell.candidates) masks.push_back(c.mask);
            write_mask_overlay(directory / image_name, base_image, report.frame.width,
                               report.frame.height, masks);
            entry["image"] = image_name;
            entry["candidate_count"] = cell.candidate_count;
            entry["coverage_fraction"] = cell.coverage_fraction;
            entry["boundary_area_ratio"] = cell.boundary_area_ratio;
            entry["max_pairwise_iou"] = cell.max_pairwise_iou;
        }
        index["cells"].push_back(std::move(entry));
    }
    std::ofstream out(directory / "index.json");
    if (!out) throw IoError("cannot write gallery index in " + directory.string());
    out << index.dump(2) << '\n';
}

std::vector<InstanceAnnotation> select_pseudo_ground_truth(const SweepReport& report,
                                                           int chosen_config_id,
                                                           ClassId class_id) {
    const auto it = std::find_if(report.cells.begin(), report.cells.end(),
                                 [&](const SweepCell& c) { return c.config_id == chosen_config_id; });
    if (it == report.cells.end()) {
        throw InvalidArgument("select_pseudo_ground_truth: unknown config id " +
                              std::to_string(chosen_config_id));
    }
    if (it->failed) {
        throw InvalidArgument("select_pseudo_ground_truth: cell " +
                              std::to_string(chosen_config_id) + " failed: " + it->failure_reason);
    }
    if (it->candidates.empty()) {
        throw IntegrityError("select_pseudo_ground_truth: cell " +
                             std::to_string(chosen_config_id) +
                             " has no candidates; video is unevaluable");
    }
    std::vector<const AutoMaskCandidate*> ordered;
    for (const auto& c : it->candidates) ordered.push_back(&c);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const AutoMaskCandidate* a, const AutoMaskCandidate* b) {
                         return a->mask.foreground_count() > b->mask.foreground_count();
                     });
    std::vector<InstanceAnnotation> annotations;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        annotations.push_back(InstanceAnnotation::from_mask(
            0, static_cast<ObjectId>(i), class_id, ordered[i]->mask));
    }
    return annotations;
}

AnnotatedVideo video_with_pseudo_ground_truth(const VideoSequence& sequence,
                                              std::vector<InstanceAnnotation> annotations,
                                              ClassId class_id) {
    AnnotatedVideo video;
    video.sequence = sequence;
    video.pseudo_ground_truth = true;
    video.class_names[class_id] = "pseudo";
    if (!annotations.empty()) video.annotations[0] = std::move(annotations);
    return video;
}

}  // namespace surgseg
