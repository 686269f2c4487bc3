#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surgseg/dataset.hpp"

namespace surgseg {

/// Loads a COCO-style annotation document into one AnnotatedVideo per video
/// grouping. Images must carry an explicit "video_id" field; annotations may
/// carry "object_id"/"track_id" (all or none per video). RLE (uncompressed
/// counts or compressed string) and polygon segmentations are both decoded;
/// bboxes are recomputed from masks.
std::vector<AnnotatedVideo> load_coco_annotations(const nlohmann::json& document,
                                                  const std::string& image_root);
std::vector<AnnotatedVideo> load_coco_annotations(const std::filesystem::path& json_path,
                                                  const std::string& image_root);

nlohmann::json coco_document(std::span<const AnnotatedVideo> videos);
void save_coco_annotations(std::span<const AnnotatedVideo> videos,
                           const std::filesystem::path& json_path);

/// Even-odd scanline fill over pixel centers.
BinaryMask rasterize_polygon(int width, int height,
                             const std::vector<std::vector<double>>& polygons);

/// COCO compressed RLE string ("counts" as chars) to run counts.
std::vector<std::uint64_t> decode_rle_string(const std::string& encoded);

}  // namespace surgseg
