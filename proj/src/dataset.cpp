#include "surgseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "surgseg/errors.hpp"
#include "surgseg/rng.hpp"

namespace surgseg {

InstanceAnnotation InstanceAnnotation::from_mask(FrameIndex frame, ObjectId object,
                                                 ClassId cls, BinaryMask mask) {
    auto box = mask.tight_bbox();
    if (!box) {
        throw InvalidArgument("InstanceAnnotation: empty mask for object " +
                              std::to_string(object) + " on frame " + std::to_string(frame));
    }
    InstanceAnnotation ann;
    ann.frame_index = frame;
    ann.object_id = object;
    ann.class_id = cls;
    ann.mask = std::move(mask);
    ann.bbox = *box;
    return ann;
}

std::vector<FrameIndex> AnnotatedVideo::annotated_frames() const {
    std::vector<FrameIndex> frames;
    frames.reserve(annotations.size());
    for (const auto& [frame, anns] : annotations) {
        if (!anns.empty()) frames.push_back(frame);
    }
    return frames;
}

bool AnnotatedVideo::has_annotations(FrameIndex frame) const {
    auto it = annotations.find(frame);
    return it != annotations.end() && !it->second.empty();
}

std::optional<BinaryMask> AnnotatedVideo::object_mask(FrameIndex frame, ObjectId object) const {
    auto it = annotations.find(frame);
    if (it == annotations.end()) return std::nullopt;
    std::optional<BinaryMask> result;
    for (const auto& ann : it->second) {
        if (ann.object_id != object) continue;
        result = result ? result->unite(ann.mask) : ann.mask;
    }
    return result;
}

std::map<ObjectId, ClassId> AnnotatedVideo::object_classes() const {
    std::map<ObjectId, ClassId> classes;
    for (const auto& [frame, anns] : annotations) {
        for (const auto& ann : anns) classes[ann.object_id] = ann.class_id;
    }
    return classes;
}

std::pair<int, int> AnnotatedVideo::frame_size() const {
    if (sequence.frames.empty()) return {0, 0};
    return {sequence.frames.front().width, sequence.frames.front().height};
}

VideoSequence sample_frames(const VideoSequence& sequence, double target_fps) {
    if (target_fps <= 0) {
        throw InvalidArgument("sample_frames: target_fps must be positive");
    }
    if (target_fps > sequence.source_fps) {
        throw InvalidArgument("sample_frames: target_fps " + std::to_string(target_fps) +
                              " exceeds source_fps " + std::to_string(sequence.source_fps) +
                              " (upsampling unsupported)");
    }
    const int stride =
        std::max(1, static_cast<int>(std::ceil(sequence.source_fps / target_fps - 1e-9)));
    VideoSequence out;
    out.video_id = sequence.video_id;
    out.source_fps = sequence.source_fps;
    out.sampled_fps = sequence.source_fps / stride;
    for (std::size_t i = 0; i < sequence.frames.size(); i += stride) {
        FrameRef ref = sequence.frames[i];
        ref.index = static_cast<FrameIndex>(out.frames.size());
        out.frames.push_back(std::move(ref));
    }
    return out;
}

AnnotatedVideo sample_video(const AnnotatedVideo& video, double target_fps) {
    if (target_fps <= 0) {
        throw InvalidArgument("sample_video: target_fps must be positive");
    }
    if (target_fps > video.sequence.source_fps) {
        throw InvalidArgument("sample_video: target_fps exceeds source_fps");
    }
    const int stride = std::max(
        1, static_cast<int>(std::ceil(video.sequence.source_fps / target_fps - 1e-9)));
    AnnotatedVideo out;
    out.sequence = sample_frames(video.sequence, target_fps);
    out.class_names = video.class_names;
    out.pseudo_ground_truth = video.pseudo_ground_truth;
    for (const auto& [frame, anns] : video.annotations) {
        if (frame % stride != 0) continue;
        const FrameIndex new_index = frame / stride;
        if (new_index >= static_cast<FrameIndex>(out.sequence.frames.size())) continue;
        auto& dest = out.annotations[new_index];
        for (InstanceAnnotation ann : anns) {
            ann.frame_index = new_index;
            dest.push_back(std::move(ann));
        }
    }
    return out;
}

FrameIndex first_valid_prompt_frame(const AnnotatedVideo& video) {
    for (const auto& [frame, anns] : video.annotations) {
        if (!anns.empty()) return frame;
    }
    throw IntegrityError("video '" + video.sequence.video_id +
                         "' has no annotated frames and cannot seed prompted evaluation");
}

namespace {

template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

std::size_t train_count(std::size_t total, double fraction) {
    auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
    n = std::min(n, total - 1);
    n = std::max<std::size_t>(n, 1);
    return n;
}

}  // namespace

std::pair<std::vector<AnnotatedVideo>, std::vector<AnnotatedVideo>>
split_train_test(const std::vector<AnnotatedVideo>& videos, const SplitSpec& spec) {
    if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0) {
        throw InvalidArgument("split_train_test: train_fraction must lie in (0,1)");
    }

    if (spec.unit == SplitSpec::Unit::video) {
        if (videos.size() < 2) {
            throw InvalidArgument("split_train_test: need at least 2 videos for a non-empty test set");
        }
        std::vector<std::size_t> order(videos.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return videos[a].sequence.video_id < videos[b].sequence.video_id;
        });
        deterministic_shuffle(order, spec.seed);
        const std::size_t n_train = train_count(order.size(), spec.train_fraction);
        std::vector<AnnotatedVideo> train, test;
        for (std::size_t i = 0; i < order.size(); ++i) {
            (i < n_train ? train : test).push_back(videos[order[i]]);
        }
        return {std::move(train), std::move(test)};
    }

    // Frame unit: partition annotated frames; each side keeps the full frame
    // sequence but only its partition's annotations.
    std::vector<std::pair<std::size_t, FrameIndex>> units;
    for (std::size_t v = 0; v < videos.size(); ++v) {
        for (FrameIndex f : videos[v].annotated_frames()) units.emplace_back(v, f);
    }
    if (units.size() < 2) {
        throw InvalidArgument("split_train_test: need at least 2 annotated frames for a frame-level split");
    }
    std::sort(units.begin(), units.end(), [&](const auto& a, const auto& b) {
        const auto& ida = videos[a.first].sequence.video_id;
        const auto& idb = videos[b.first].sequence.video_id;
        return std::tie(ida, a.second) < std::tie(idb, b.second);
    });
    deterministic_shuffle(units, spec.seed);
    const std::size_t n_train = train_count(units.size(), spec.train_fraction);

    auto strip_annotations = [](const AnnotatedVideo& v) {
        AnnotatedVideo copy = v;
        copy.annotations.clear();
        return copy;
    };
    std::vector<AnnotatedVideo> train, test;
    std::map<std::size_t, std::size_t> train_slot, test_slot;
    for (std::size_t i = 0; i < units.size(); ++i) {
        const bool to_train = i < n_train;
        auto& side = to_train ? train : test;
        auto& slots = to_train ? train_slot : test_slot;
        auto [v, frame] = units[i];
        auto it = slots.find(v);
        if (it == slots.end()) {
            it = slots.emplace(v, side.size()).first;
            side.push_back(strip_annotations(videos[v]));
        }
        side[it->second].annotations[frame] = videos[v].annotations.at(frame);
    }
    return {std::move(train), std::move(test)};
}

namespace {

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
    const auto inter = a.intersect(b).foreground_count();
    const auto uni = a.unite(b).foreground_count();
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

void link_objects_across_frames(std::vector<std::vector<InstanceAnnotation>>& per_frame,
                                double min_match_iou) {
    ObjectId next_id = 0;
    const std::vector<InstanceAnnotation>* previous = nullptr;
    for (auto& frame : per_frame) {
        if (frame.empty()) continue;
        if (previous == nullptr) {
            for (auto& ann : frame) ann.object_id = next_id++;
            previous = &frame;
            continue;
        }
        // All same-class candidate pairs ranked by IoU, matched greedily.
        struct Candidate {
            double iou;
            std::size_t current;
            std::size_t prev;
        };
        std::vector<Candidate> candidates;
        for (std::size_t c = 0; c < frame.size(); ++c) {
            for (std::size_t p = 0; p < previous->size(); ++p) {
                if (frame[c].class_id != (*previous)[p].class_id) continue;
                const double iou = mask_iou(frame[c].mask, (*previous)[p].mask);
                if (iou >= min_match_iou) candidates.push_back({iou, c, p});
            }
        }
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
            return std::tie(b.iou, b.current, b.prev) < std::tie(a.iou, a.current, a.prev);
        });
        std::vector<bool> current_done(frame.size(), false);
        std::vector<bool> prev_done(previous->size(), false);
        for (const auto& cand : candidates) {
            if (current_done[cand.current] || prev_done[cand.prev]) continue;
            frame[cand.current].object_id = (*previous)[cand.prev].object_id;
            current_done[cand.current] = true;
            prev_done[cand.prev] = true;
        }
        for (std::size_t c = 0; c < frame.size(); ++c) {
            if (!current_done[c]) frame[c].object_id = next_id++;
        }
        previous = &frame;
        next_id = std::max(next_id, 1 + std::accumulate(frame.begin(), frame.end(), -1,
                                                        [](ObjectId acc, const InstanceAnnotation& a) {
                                                            return std::max(acc, a.object_id);
                                                        }));
    }
}

void write_dataset_manifest(std::span<const AnnotatedVideo> videos,
                            const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open manifest for writing: " + path.string());
    for (const auto& video : videos) {
        for (const auto& frame : video.sequence.frames) {
            std::uint64_t digest = fnv1a(nullptr, 0);
            auto it = video.annotations.find(frame.index);
            if (it != video.annotations.end()) {
                for (const auto& ann : it->second) {
                    const std::uint64_t d = mask_digest(ann.mask);
                    digest = fnv1a(&d, sizeof(d), digest);
                    const std::int64_t ids[2] = {ann.object_id, ann.class_id};
                    digest = fnv1a(ids, sizeof(ids), digest);
                }
            }
            nlohmann::json record = {
                {"video_id", video.sequence.video_id},
                {"frame_index", frame.index},
                {"image_locator", frame.image_locator},
                {"annotation_digest", digest_hex(digest)},
            };
            out << record.dump() << '\n';
        }
    }
}

}  // namespace surgseg
