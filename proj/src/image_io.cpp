#include "surgseg/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "surgseg/errors.hpp"

namespace surgseg {

LabelImage load_label_image(const std::filesystem::path& path) {
    cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (img.empty()) throw IoError("cannot read image: " + path.string());

    LabelImage label;
    label.width = img.cols;
    label.height = img.rows;
    label.values.resize(static_cast<std::size_t>(img.cols) * img.rows);
    if (img.channels() == 1) {
        cv::Mat gray;
        img.convertTo(gray, CV_32S);
        for (int y = 0; y < img.rows; ++y) {
            for (int x = 0; x < img.cols; ++x) {
                label.values[static_cast<std::size_t>(y) * img.cols + x] =
                    static_cast<std::uint32_t>(gray.at<std::int32_t>(y, x));
            }
        }
        return label;
    }
    cv::Mat bgr;
    if (img.channels() == 4) {
        cv::Mat channels[4];
        cv::split(img, channels);
        cv::merge(channels, 3, bgr);
    } else {
        bgr = img;
    }
    for (int y = 0; y < bgr.rows; ++y) {
        for (int x = 0; x < bgr.cols; ++x) {
            const auto& px = bgr.at<cv::Vec3b>(y, x);
            label.values[static_cast<std::size_t>(y) * bgr.cols + x] =
                (static_cast<std::uint32_t>(px[2]) << 16) |
                (static_cast<std::uint32_t>(px[1]) << 8) | px[0];
        }
    }
    return label;
}

void write_mask_overlay(const std::filesystem::path& out_path,
                        const std::filesystem::path& base_image, int width, int height,
                        const std::vector<BinaryMask>& masks) {
    cv::Mat canvas;
    if (!base_image.empty() && std::filesystem::exists(base_image)) {
        canvas = cv::imread(base_image.string(), cv::IMREAD_COLOR);
    }
    if (canvas.empty()) {
        canvas = cv::Mat(height, width, CV_8UC3, cv::Scalar(64, 64, 64));
    }

    static const cv::Vec3b kColors[] = {
        {60, 76, 231}, {18, 156, 243}, {113, 204, 46},  {219, 152, 52},
        {182, 89, 155}, {15, 196, 241}, {133, 160, 22},  {80, 62, 44},
    };
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const auto& mask = masks[i];
        const cv::Vec3b color = kColors[i % std::size(kColors)];
        const int w = std::min(mask.width(), canvas.cols);
        const int h = std::min(mask.height(), canvas.rows);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!mask.at(x, y)) continue;
                auto& px = canvas.at<cv::Vec3b>(y, x);
                for (int c = 0; c < 3; ++c) {
                    px[c] = static_cast<std::uint8_t>((px[c] + 2 * color[c]) / 3);
                }
            }
        }
    }
    if (!cv::imwrite(out_path.string(), canvas)) {
        throw IoError("cannot write overlay image: " + out_path.string());
    }
}

}  // namespace surgseg
