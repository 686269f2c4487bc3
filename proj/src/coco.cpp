#include "surgseg/coco.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "surgseg/errors.hpp"

namespace surgseg {

namespace {

std::string video_id_of(const nlohmann::json& image) {
    const auto it = image.find("video_id");
    if (it == image.end()) {
        throw IntegrityError("image id " + image.value("id", nlohmann::json()).dump() +
                             " lacks a video grouping field (video_id)");
    }
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    throw ParseError("image video_id must be a string or integer, got " + it->dump());
}

struct ImageRecord {
    long long id = 0;
    std::string video_id;
    std::string file_name;
    int width = 0;
    int height = 0;
    std::optional<FrameIndex> frame_index;
};

BinaryMask decode_segmentation(const nlohmann::json& ann, int width, int height) {
    const auto seg_it = ann.find("segmentation");
    if (seg_it == ann.end()) {
        throw ParseError("annotation id " + ann.value("id", nlohmann::json()).dump() +
                         " has no segmentation");
    }
    const auto& seg = *seg_it;
    if (seg.is_object()) {
        const auto size_it = seg.find("size");
        if (size_it == seg.end() || !size_it->is_array() || size_it->size() != 2) {
            throw ParseError("RLE segmentation without [h,w] size in annotation id " +
                             ann.value("id", nlohmann::json()).dump());
        }
        const int h = (*size_it)[0].get<int>();
        const int w = (*size_it)[1].get<int>();
        if (w != width || h != height) {
            throw IntegrityError("RLE size " + std::to_string(w) + "x" + std::to_string(h) +
                                 " does not match image size " + std::to_string(width) + "x" +
                                 std::to_string(height) + " in annotation id " +
                                 ann.value("id", nlohmann::json()).dump());
        }
        const auto& counts = seg.at("counts");
        std::vector<std::uint64_t> runs;
        if (counts.is_array()) {
            for (const auto& c : counts) runs.push_back(c.get<std::uint64_t>());
        } else if (counts.is_string()) {
            runs = decode_rle_string(counts.get<std::string>());
        } else {
            throw ParseError("RLE counts must be an array or string in annotation id " +
                             ann.value("id", nlohmann::json()).dump());
        }
        return BinaryMask::from_rle(width, height, runs);
    }
    if (seg.is_array()) {
        std::vector<std::vector<double>> polygons;
        for (const auto& poly : seg) {
            if (!poly.is_array() || poly.size() < 6 || poly.size() % 2 != 0) {
                throw ParseError("polygon with fewer than 3 points in annotation id " +
                                 ann.value("id", nlohmann::json()).dump());
            }
            polygons.push_back(poly.get<std::vector<double>>());
        }
        return rasterize_polygon(width, height, polygons);
    }
    throw ParseError("unsupported segmentation payload in annotation id " +
                     ann.value("id", nlohmann::json()).dump());
}

}  // namespace

std::vector<std::uint64_t> decode_rle_string(const std::string& encoded) {
    // COCO's char encoding: 5-bit groups, LSB first, continuation in bit 5,
    // offset by 48; counts from the third onward are deltas against the
    // count two positions back.
    std::vector<std::uint64_t> runs;
    std::vector<long long> counts;
    std::size_t pos = 0;
    while (pos < encoded.size()) {
        long long value = 0;
        int shift = 0;
        bool more = true;
        while (more) {
            if (pos >= encoded.size()) throw ParseError("truncated RLE count string");
            const long long c = static_cast<long long>(encoded[pos]) - 48;
            if (c < 0 || c > 63) throw ParseError("invalid character in RLE count string");
            value |= (c & 0x1f) << shift;
            more = (c & 0x20) != 0;
            ++pos;
            if (!more && (c & 0x10)) value |= ~((1LL << (shift + 5)) - 1);
            shift += 5;
        }
        if (counts.size() > 2) value += counts[counts.size() - 2];
        counts.push_back(value);
    }
    runs.reserve(counts.size());
    for (long long c : counts) {
        if (c < 0) throw ParseError("negative run in RLE count string");
        runs.push_back(static_cast<std::uint64_t>(c));
    }
    return runs;
}

BinaryMask rasterize_polygon(int width, int height,
                             const std::vector<std::vector<double>>& polygons) {
    BinaryMask mask(width, height);
    for (const auto& flat : polygons) {
        const std::size_t n = flat.size() / 2;
        for (int y = 0; y < height; ++y) {
            const double cy = y + 0.5;
            std::vector<double> crossings;
            for (std::size_t i = 0; i < n; ++i) {
                const double x0 = flat[2 * i];
                const double y0 = flat[2 * i + 1];
                const double x1 = flat[2 * ((i + 1) % n)];
                const double y1 = flat[2 * ((i + 1) % n) + 1];
                if ((y0 <= cy && y1 > cy) || (y1 <= cy && y0 > cy)) {
                    crossings.push_back(x0 + (cy - y0) / (y1 - y0) * (x1 - x0));
                }
            }
            std::sort(crossings.begin(), crossings.end());
            for (std::size_t i = 0; i + 1 < crossings.size(); i += 2) {
                const int x_start = std::max(0, static_cast<int>(std::ceil(crossings[i] - 0.5)));
                const int x_end = std::min(width - 1, static_cast<int>(std::floor(crossings[i + 1] - 0.5 - 1e-9)));
                for (int x = x_start; x <= x_end; ++x) mask.set(x, y, true);
            }
        }
    }
    return mask;
}

std::vector<AnnotatedVideo> load_coco_annotations(const nlohmann::json& document,
                                                  const std::string& image_root) {
    for (const char* key : {"images", "annotations", "categories"}) {
        if (!document.contains(key) || !document[key].is_array()) {
            throw ParseError(std::string("COCO document lacks a '") + key + "' collection");
        }
    }

    std::map<ClassId, std::string> class_names;
    for (const auto& cat : document["categories"]) {
        if (!cat.contains("id")) throw ParseError("category without id: " + cat.dump());
        class_names[cat["id"].get<ClassId>()] = cat.value("name", std::string());
    }

    std::map<long long, ImageRecord> images;
    std::map<std::string, std::vector<long long>> video_images;
    for (const auto& img : document["images"]) {
        ImageRecord rec;
        try {
            rec.id = img.at("id").get<long long>();
            rec.file_name = img.value("file_name", std::string());
            rec.width = img.at("width").get<int>();
            rec.height = img.at("height").get<int>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("malformed image record " + img.dump() + ": " + e.what());
        }
        rec.video_id = video_id_of(img);
        if (img.contains("frame_index")) rec.frame_index = img["frame_index"].get<FrameIndex>();
        if (rec.width <= 0 || rec.height <= 0) {
            throw ParseError("image id " + std::to_string(rec.id) + " has non-positive size");
        }
        if (!images.emplace(rec.id, rec).second) {
            throw IntegrityError("duplicate image id " + std::to_string(rec.id));
        }
        video_images[rec.video_id].push_back(rec.id);
    }

    // Frame ordering within a video: explicit frame_index when given,
    // otherwise ascending image id.
    std::map<long long, FrameIndex> dense_index;
    std::map<std::string, VideoSequence> sequences;
    for (auto& [video_id, ids] : video_images) {
        std::sort(ids.begin(), ids.end(), [&](long long a, long long b) {
            const auto& ia = images[a];
            const auto& ib = images[b];
            if (ia.frame_index && ib.frame_index && *ia.frame_index != *ib.frame_index) {
                return *ia.frame_index < *ib.frame_index;
            }
            return a < b;
        });
        VideoSequence seq;
        seq.video_id = video_id;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto& rec = images[ids[i]];
            if (i > 0 && (rec.width != seq.frames.front().width ||
                          rec.height != seq.frames.front().height)) {
                throw IntegrityError("video '" + video_id + "' mixes frame resolutions");
            }
            FrameRef ref;
            ref.index = static_cast<FrameIndex>(i);
            ref.width = rec.width;
            ref.height = rec.height;
            ref.image_locator = image_root.empty()
                                    ? rec.file_name
                                    : (std::filesystem::path(image_root) / rec.file_name).string();
            seq.frames.push_back(std::move(ref));
            dense_index[ids[i]] = static_cast<FrameIndex>(i);
        }
        sequences[video_id] = std::move(seq);
    }

    struct Pending {
        FrameIndex frame;
        std::optional<ObjectId> object_id;
        ClassId class_id;
        BinaryMask mask;
        long long ann_id;
    };
    std::map<std::string, std::vector<Pending>> per_video;
    for (const auto& ann : document["annotations"]) {
        long long ann_id = ann.value("id", -1LL);
        long long image_id;
        ClassId category;
        try {
            image_id = ann.at("image_id").get<long long>();
            category = ann.at("category_id").get<ClassId>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("malformed annotation record " + ann.dump() + ": " + e.what());
        }
        const auto img_it = images.find(image_id);
        if (img_it == images.end()) {
            throw IntegrityError("annotation id " + std::to_string(ann_id) +
                                 " references unknown image " + std::to_string(image_id));
        }
        if (!class_names.count(category)) {
            throw IntegrityError("annotation id " + std::to_string(ann_id) +
                                 " references unknown category " + std::to_string(category));
        }
        Pending p;
        p.ann_id = ann_id;
        p.frame = dense_index.at(image_id);
        p.class_id = category;
        if (ann.contains("object_id")) {
            p.object_id = ann["object_id"].get<ObjectId>();
        } else if (ann.contains("track_id")) {
            p.object_id = ann["track_id"].get<ObjectId>();
        }
        p.mask = decode_segmentation(ann, img_it->second.width, img_it->second.height);
        if (p.mask.empty()) {
            warn("dropping annotation id " + std::to_string(ann_id) +
                 ": segmentation decodes to an empty mask");
            continue;
        }
        per_video[img_it->second.video_id].push_back(std::move(p));
    }

    std::vector<AnnotatedVideo> videos;
    for (auto& [video_id, seq] : sequences) {
        AnnotatedVideo video;
        video.sequence = std::move(seq);
        video.class_names = class_names;

        auto pend_it = per_video.find(video_id);
        if (pend_it != per_video.end()) {
            auto& pendings = pend_it->second;
            const bool all_have_ids =
                std::all_of(pendings.begin(), pendings.end(),
                            [](const Pending& p) { return p.object_id.has_value(); });
            const bool none_have_ids =
                std::none_of(pendings.begin(), pendings.end(),
                             [](const Pending& p) { return p.object_id.has_value(); });
            if (!all_have_ids && !none_have_ids) {
                throw IntegrityError("video '" + video_id +
                                     "' mixes annotations with and without object ids");
            }
            if (all_have_ids) {
                for (auto& p : pendings) {
                    video.annotations[p.frame].push_back(InstanceAnnotation::from_mask(
                        p.frame, *p.object_id, p.class_id, std::move(p.mask)));
                }
                // Object id <-> class association must be constant per video.
                std::map<ObjectId, ClassId> seen;
                for (const auto& [frame, anns] : video.annotations) {
                    for (const auto& a : anns) {
                        auto [it, inserted] = seen.emplace(a.object_id, a.class_id);
                        if (!inserted && it->second != a.class_id) {
                            throw IntegrityError("video '" + video_id + "' object " +
                                                 std::to_string(a.object_id) +
                                                 " changes class across frames");
                        }
                    }
                }
            } else {
                const FrameIndex n_frames =
                    static_cast<FrameIndex>(video.sequence.frames.size());
                std::vector<std::vector<InstanceAnnotation>> per_frame(n_frames);
                for (auto& p : pendings) {
                    per_frame[p.frame].push_back(InstanceAnnotation::from_mask(
                        p.frame, 0, p.class_id, std::move(p.mask)));
                }
                link_objects_across_frames(per_frame);
                for (FrameIndex f = 0; f < n_frames; ++f) {
                    if (!per_frame[f].empty()) video.annotations[f] = std::move(per_frame[f]);
                }
            }
        }
        videos.push_back(std::move(video));
    }
    return videos;
}

std::vector<AnnotatedVideo> load_coco_annotations(const std::filesystem::path& json_path,
                                                  const std::string& image_root) {
    std::ifstream in(json_path);
    if (!in) throw IoError("cannot open annotation file: " + json_path.string());
    nlohmann::json document;
    try {
        in >> document;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("invalid JSON in " + json_path.string() + ": " + e.what());
    }
    return load_coco_annotations(document, image_root);
}

nlohmann::json coco_document(std::span<const AnnotatedVideo> videos) {
    nlohmann::json doc;
    doc["images"] = nlohmann::json::array();
    doc["annotations"] = nlohmann::json::array();
    doc["categories"] = nlohmann::json::array();

    std::map<ClassId, std::string> class_names;
    for (const auto& v : videos) {
        class_names.insert(v.class_names.begin(), v.class_names.end());
    }
    for (const auto& [id, name] : class_names) {
        doc["categories"].push_back({{"id", id}, {"name", name}});
    }

    long long image_id = 1;
    long long ann_id = 1;
    for (const auto& video : videos) {
        std::map<FrameIndex, long long> frame_to_image;
        for (const auto& frame : video.sequence.frames) {
            doc["images"].push_back({
                {"id", image_id},
                {"video_id", video.sequence.video_id},
                {"frame_index", frame.index},
                {"file_name", frame.image_locator},
                {"width", frame.width},
                {"height", frame.height},
            });
            frame_to_image[frame.index] = image_id++;
        }
        for (const auto& [frame, anns] : video.annotations) {
            for (const auto& ann : anns) {
                nlohmann::json record = {
                    {"id", ann_id++},
                    {"image_id", frame_to_image.at(frame)},
                    {"category_id", ann.class_id},
                    {"object_id", ann.object_id},
                    {"iscrowd", 0},
                    {"area", ann.mask.foreground_count()},
                    {"bbox",
                     {ann.bbox.x_min, ann.bbox.y_min, ann.bbox.x_max - ann.bbox.x_min + 1,
                      ann.bbox.y_max - ann.bbox.y_min + 1}},
                    {"segmentation",
                     {{"size", {ann.mask.height(), ann.mask.width()}},
                      {"counts", ann.mask.to_rle()}}},
                };
                doc["annotations"].push_back(std::move(record));
            }
        }
    }
    return doc;
}

void save_coco_annotations(std::span<const AnnotatedVideo> videos,
                           const std::filesystem::path& json_path) {
    std::ofstream out(json_path);
    if (!out) throw IoError("cannot open annotation file for writing: " + json_path.string());
    out << coco_document(videos).dump(2) << '\n';
}

}  // namespace surgseg
