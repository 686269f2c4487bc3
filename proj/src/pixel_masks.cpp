#include "surgseg/pixel_masks.hpp"

#include <fstream>
#include <sstream>

#include "surgseg/errors.hpp"

namespace surgseg {

namespace {

std::uint32_t parse_value_key(const std::string& token) {
    if (token.find(',') == std::string::npos) {
        return static_cast<std::uint32_t>(std::stoul(token));
    }
    std::stringstream ss(token);
    std::string part;
    std::uint32_t rgb[3];
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(ss, part, ',')) {
            throw ParseError("palette color key needs r,g,b: '" + token + "'");
        }
        rgb[i] = static_cast<std::uint32_t>(std::stoul(part));
        if (rgb[i] > 255) throw ParseError("palette color component out of range: '" + token + "'");
    }
    return (rgb[0] << 16) | (rgb[1] << 8) | rgb[2];
}

}  // namespace

Palette Palette::parse(const std::string& text) {
    Palette palette;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream fields(line);
        std::string key, target;
        if (!(fields >> key)) continue;
        if (!(fields >> target)) {
            throw ParseError("palette line " + std::to_string(line_no) + " lacks a class id");
        }
        std::uint32_t value;
        try {
            value = parse_value_key(key);
        } catch (const std::exception&) {
            throw ParseError("bad palette value on line " + std::to_string(line_no) + ": '" +
                             key + "'");
        }
        if (target == "background") {
            palette.background.insert(value);
            continue;
        }
        ClassId cls;
        try {
            cls = std::stoi(target);
        } catch (const std::exception&) {
            throw ParseError("bad class id on palette line " + std::to_string(line_no) + ": '" +
                             target + "'");
        }
        palette.to_class[value] = cls;
        std::string name;
        if (fields >> name) palette.class_names[cls] = name;
    }
    return palette;
}

Palette Palette::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open palette file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

std::vector<InstanceAnnotation> pixel_masks_to_instances(const LabelImage& label_image,
                                                         const Palette& palette) {
    const int w = label_image.width;
    const int h = label_image.height;

    // Resolve classes first so unknown values error before any flood fill.
    std::vector<ClassId> class_of(static_cast<std::size_t>(w) * h, -1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::uint32_t value = label_image.at(x, y);
            const auto it = palette.to_class.find(value);
            if (it != palette.to_class.end()) {
                class_of[static_cast<std::size_t>(y) * w + x] = it->second;
            } else if (!palette.background.count(value)) {
                throw IntegrityError("pixel value " + std::to_string(value) +
                                     " at (" + std::to_string(x) + "," + std::to_string(y) +
                                     ") is neither mapped nor background");
            }
        }
    }

    std::vector<InstanceAnnotation> instances;
    std::vector<bool> visited(static_cast<std::size_t>(w) * h, false);
    std::vector<std::pair<int, int>> stack;
    ObjectId next_id = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (visited[i] || class_of[i] < 0) continue;
            const ClassId cls = class_of[i];
            BinaryMask mask(w, h);
            stack.clear();
            stack.emplace_back(x, y);
            visited[i] = true;
            while (!stack.empty()) {
                auto [cx, cy] = stack.back();
                stack.pop_back();
                mask.set(cx, cy, true);
                static constexpr int kDx[4] = {1, -1, 0, 0};
                static constexpr int kDy[4] = {0, 0, 1, -1};
                for (int d = 0; d < 4; ++d) {
                    const int nx = cx + kDx[d];
                    const int ny = cy + kDy[d];
                    if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                    const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                    if (!visited[ni] && class_of[ni] == cls) {
                        visited[ni] = true;
                        stack.emplace_back(nx, ny);
                    }
                }
            }
            instances.push_back(InstanceAnnotation::from_mask(0, next_id++, cls, std::move(mask)));
        }
    }
    return instances;
}

AnnotatedVideo video_from_label_frames(const std::string& video_id,
                                       const std::vector<LabelImage>& frames,
                                       const Palette& palette, double source_fps) {
    AnnotatedVideo video;
    video.sequence.video_id = video_id;
    video.sequence.source_fps = source_fps;
    video.sequence.sampled_fps = source_fps;
    video.class_names = palette.class_names;

    std::vector<std::vector<InstanceAnnotation>> per_frame;
    per_frame.reserve(frames.size());
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const auto& img = frames[f];
        if (f > 0 && (img.width != frames[0].width || img.height != frames[0].height)) {
            throw IntegrityError("video '" + video_id + "' mixes label image resolutions");
        }
        FrameRef ref;
        ref.index = static_cast<FrameIndex>(f);
        ref.width = img.width;
        ref.height = img.height;
        video.sequence.frames.push_back(ref);
        auto instances = pixel_masks_to_instances(img, palette);
        for (auto& inst : instances) inst.frame_index = static_cast<FrameIndex>(f);
        per_frame.push_back(std::move(instances));
    }
    link_objects_across_frames(per_frame);
    for (std::size_t f = 0; f < per_frame.size(); ++f) {
        if (!per_frame[f].empty()) {
            video.annotations[static_cast<FrameIndex>(f)] = std::move(per_frame[f]);
        }
    }
    return video;
}

}  // namespace surgseg
