#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "surgseg/dataset.hpp"

namespace surgseg {

/// Per-pixel raw label values, row-major. Grayscale sources store the gray
/// value; color sources store 0xRRGGBB.
struct LabelImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> values;

    std::uint32_t at(int x, int y) const {
        return values[static_cast<std::size_t>(y) * width + x];
    }
};

/// Maps raw pixel values to class ids. Values not mapped and not designated
/// background are a mapping error. Value 0 defaults to background unless
/// mapped explicitly.
struct Palette {
    std::map<std::uint32_t, ClassId> to_class;
    std::set<std::uint32_t> background{0};
    std::map<ClassId, std::string> class_names;

    /// Line format: "<value> <class_id> [name]" or "<value> background",
    /// where <value> is an integer or "r,g,b". '#' starts a comment.
    static Palette parse(const std::string& text);
    static Palette load(const std::filesystem::path& path);
};

/// One InstanceAnnotation per (class, 4-connected component); object ids by
/// row-major scan order of the component's first pixel. Throws IntegrityError
/// when a pixel value is neither mapped nor background.
std::vector<InstanceAnnotation> pixel_masks_to_instances(const LabelImage& label_image,
                                                         const Palette& palette);

/// Builds a video from per-frame label images: per-frame instances plus
/// cross-frame identity linking by class and maximal overlap.
AnnotatedVideo video_from_label_frames(const std::string& video_id,
                                       const std::vector<LabelImage>& frames,
                                       const Palette& palette, double source_fps = 1.0);

}  // namespace surgseg
