#include "surgseg/synthetic.hpp"

#include <cmath>

#include "surgseg/errors.hpp"

namespace surgseg {

namespace {

void stamp_rect(BinaryMask& mask, int x0, int y0, int w, int h) {
    for (int y = std::max(0, y0); y < std::min(mask.height(), y0 + h); ++y) {
        for (int x = std::max(0, x0); x < std::min(mask.width(), x0 + w); ++x) {
            mask.set(x, y, true);
        }
    }
}

void stamp_disk(BinaryMask& mask, int x0, int y0, int w, int h) {
    const double cx = x0 + (w - 1) / 2.0;
    const double cy = y0 + (h - 1) / 2.0;
    const double rx = w / 2.0;
    const double ry = h / 2.0;
    for (int y = std::max(0, y0); y < std::min(mask.height(), y0 + h); ++y) {
        for (int x = std::max(0, x0); x < std::min(mask.width(), x0 + w); ++x) {
            const double nx = (x - cx) / rx;
            const double ny = (y - cy) / ry;
            if (nx * nx + ny * ny <= 1.0) mask.set(x, y, true);
        }
    }
}

BinaryMask object_mask_at(const SyntheticObjectSpec& obj, int width, int height,
                          FrameIndex frame) {
    BinaryMask mask(width, height);
    const int ox = obj.x + static_cast<int>(std::llround(frame * obj.vx));
    const int oy = obj.y + static_cast<int>(std::llround(frame * obj.vy));
    const auto stamp = obj.shape == SyntheticObjectSpec::Shape::disk ? stamp_disk : stamp_rect;
    stamp(mask, ox, oy, obj.w, obj.h);
    for (const auto& [dx, dy, pw, ph] : obj.extra_parts) {
        stamp(mask, ox + dx, oy + dy, pw, ph);
    }
    return mask;
}

}  // namespace

AnnotatedVideo generate_synthetic_video(const SyntheticVideoSpec& spec) {
    if (spec.frames <= 0 || spec.width <= 0 || spec.height <= 0) {
        throw InvalidArgument("synthetic video spec: non-positive dimensions");
    }
    if (spec.annotate_every <= 0) {
        throw InvalidArgument("synthetic video spec: annotate_every must be >= 1");
    }
    AnnotatedVideo video;
    video.sequence.video_id = spec.video_id;
    video.sequence.source_fps = spec.fps;
    video.sequence.sampled_fps = spec.fps;
    video.class_names = spec.class_names;
    for (const auto& obj : spec.objects) {
        if (!video.class_names.count(obj.class_id)) {
            video.class_names[obj.class_id] = "class_" + std::to_string(obj.class_id);
        }
    }

    for (FrameIndex f = 0; f < spec.frames; ++f) {
        FrameRef ref;
        ref.index = f;
        ref.width = spec.width;
        ref.height = spec.height;
        video.sequence.frames.push_back(ref);
        if (f % spec.annotate_every != 0) continue;
        std::vector<InstanceAnnotation> anns;
        for (const auto& obj : spec.objects) {
            if (f < obj.appears_at) continue;
            if (obj.disappears_at && f >= *obj.disappears_at) continue;
            BinaryMask mask = object_mask_at(obj, spec.width, spec.height, f);
            if (mask.empty()) continue;  // fully left the frame
            anns.push_back(
                InstanceAnnotation::from_mask(f, obj.object_id, obj.class_id, std::move(mask)));
        }
        if (!anns.empty()) video.annotations[f] = std::move(anns);
    }
    return video;
}

SyntheticVideoSpec synthetic_spec_from_json(const nlohmann::json& j) {
    SyntheticVideoSpec spec;
    spec.video_id = j.value("video_id", spec.video_id);
    spec.frames = j.value("frames", spec.frames);
    spec.width = j.value("width", spec.width);
    spec.height = j.value("height", spec.height);
    spec.fps = j.value("fps", spec.fps);
    spec.annotate_every = j.value("annotate_every", spec.annotate_every);
    if (j.contains("class_names")) {
        for (const auto& [key, value] : j["class_names"].items()) {
            spec.class_names[std::stoi(key)] = value.get<std::string>();
        }
    }
    if (j.contains("objects")) {
        for (const auto& o : j["objects"]) {
            SyntheticObjectSpec obj;
            obj.object_id = o.value("object_id", static_cast<ObjectId>(spec.objects.size()));
            obj.class_id = o.value("class_id", 1);
            obj.shape = o.value("shape", std::string("rectangle")) == "disk"
                            ? SyntheticObjectSpec::Shape::disk
                            : SyntheticObjectSpec::Shape::rectangle;
            obj.x = o.value("x", 0);
            obj.y = o.value("y", 0);
            obj.w = o.value("w", 16);
            obj.h = o.value("h", 16);
            obj.vx = o.value("vx", 0.0);
            obj.vy = o.value("vy", 0.0);
            obj.appears_at = o.value("appears_at", 0);
            if (o.contains("disappears_at") && !o["disappears_at"].is_null()) {
                obj.disappears_at = o["disappears_at"].get<FrameIndex>();
            }
            if (o.contains("extra_parts")) {
                for (const auto& part : o["extra_parts"]) {
                    obj.extra_parts.push_back(
                        {part.at(0).get<int>(), part.at(1).get<int>(), part.at(2).get<int>(),
                         part.at(3).get<int>()});
                }
            }
            spec.objects.push_back(std::move(obj));
        }
    }
    return spec;
}

nlohmann::json synthetic_spec_to_json(const SyntheticVideoSpec& spec) {
    nlohmann::json j;
    j["video_id"] = spec.video_id;
    j["frames"] = spec.frames;
    j["width"] = spec.width;
    j["height"] = spec.height;
    j["fps"] = spec.fps;
    j["annotate_every"] = spec.annotate_every;
    nlohmann::json names = nlohmann::json::object();
    for (const auto& [cls, name] : spec.class_names) names[std::to_string(cls)] = name;
    j["class_names"] = names;
    j["objects"] = nlohmann::json::array();
    for (const auto& obj : spec.objects) {
        nlohmann::json o = {
            {"object_id", obj.object_id},
            {"class_id", obj.class_id},
            {"shape", obj.shape == SyntheticObjectSpec::Shape::disk ? "disk" : "rectangle"},
            {"x", obj.x},
            {"y", obj.y},
            {"w", obj.w},
            {"h", obj.h},
            {"vx", obj.vx},
            {"vy", obj.vy},
            {"appears_at", obj.appears_at},
        };
        if (obj.disappears_at) o["disappears_at"] = *obj.disappears_at;
        if (!obj.extra_parts.empty()) {
            o["extra_parts"] = nlohmann::json::array();
            for (const auto& part : obj.extra_parts) {
                o["extra_parts"].push_back({part[0], part[1], part[2], part[3]});
            }
        }
        j["objects"].push_back(std::move(o));
    }
    return j;
}

SyntheticVideoSpec default_synthetic_spec(int frames) {
    SyntheticVideoSpec spec;
    spec.frames = frames;
    spec.width = 128;
    spec.height = 128;
    spec.class_names = {{1, "tool"}, {2, "organ"}, {3, "tissue"}};

    SyntheticObjectSpec tool;
    tool.object_id = 0;
    tool.class_id = 1;
    tool.shape = SyntheticObjectSpec::Shape::rectangle;
    tool.x = 12;
    tool.y = 12;
    tool.w = 32;
    tool.h = 32;
    spec.objects.push_back(tool);

    SyntheticObjectSpec organ;
    organ.object_id = 1;
    organ.class_id = 2;
    organ.shape = SyntheticObjectSpec::Shape::disk;
    organ.x = 72;
    organ.y = 16;
    organ.w = 36;
    organ.h = 36;
    spec.objects.push_back(organ);

    // Occlusion-split object: two disjoint parts, exercises per-region
    // point sampling and partial point seeding.
    SyntheticObjectSpec tissue;
    tissue.object_id = 2;
    tissue.class_id = 3;
    tissue.shape = SyntheticObjectSpec::Shape::rectangle;
    tissue.x = 20;
    tissue.y = 80;
    tissue.w = 24;
    tissue.h = 24;
    tissue.extra_parts.push_back({56, 0, 24, 24});
    spec.objects.push_back(tissue);

    return spec;
}

}  // namespace surgseg
