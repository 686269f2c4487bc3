#pragma once

#include <filesystem>
#include <vector>

#include "surgseg/mask.hpp"
#include "surgseg/pixel_masks.hpp"

namespace surgseg {

/// Reads a label image (jpg/png/jpeg, grayscale or color). Grayscale pixels
/// become their gray value, color pixels 0xRRGGBB.
LabelImage load_label_image(const std::filesystem::path& path);

/// Renders masks as translucent color overlays and writes a PNG. When the
/// base frame cannot be read the overlay is drawn on a neutral canvas.
void write_mask_overlay(const std::filesystem::path& out_path,
                        const std::filesystem::path& base_image,  // may be empty/missing
                        int width, int height,
                        const std::vector<BinaryMask>& masks);

}  // namespace surgseg
