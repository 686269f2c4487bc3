#include "surgseg/mock_segmenter.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "surgseg/errors.hpp"

namespace surgseg {

std::string DriftModel::label() const {
    std::ostringstream out;
    out << "drift(" << dx << ',' << dy << ";er=" << erosion_rate;
    if (dropout_after) out << ";drop=" << *dropout_after;
    out << ')';
    return out.str();
}

BinaryMask mock_propagate(const AnnotatedVideo& video, FrameIndex seeded_frame,
                          ObjectId object_id, FrameIndex target_frame, const DriftModel& drift) {
    if (seeded_frame > target_frame) {
        throw InvalidArgument("mock_propagate: seeded_frame must not exceed target_frame");
    }
    const auto [w, h] = video.frame_size();
    const int elapsed = target_frame - seeded_frame;
    if (drift.dropout_after && elapsed > *drift.dropout_after) return BinaryMask(w, h);

    const auto gt = video.object_mask(target_frame, object_id);
    if (!gt) return BinaryMask(w, h);

    const int shift_x = static_cast<int>(std::llround(elapsed * drift.dx));
    const int shift_y = static_cast<int>(std::llround(elapsed * drift.dy));
    const int radius = static_cast<int>(std::floor(elapsed * drift.erosion_rate + 1e-9));
    BinaryMask out = gt->translated(shift_x, shift_y);
    if (radius > 0) out = out.eroded(radius);
    return out;
}

BinaryMask seed_mask_from_prompts(const AnnotatedVideo& video, ObjectId object_id,
                                  FrameIndex frame, std::span<const Prompt> prompts) {
    const auto [w, h] = video.frame_size();
    const auto gt = video.object_mask(frame, object_id);
    if (!gt) return BinaryMask(w, h);

    BinaryMask seeded(w, h);
    bool any_prompt = false;
    std::vector<BinaryMask> regions;  // lazily computed for point prompts
    for (const auto& prompt : prompts) {
        if (prompt_object(prompt) != object_id) continue;
        any_prompt = true;
        if (const auto* m = std::get_if<MaskPrompt>(&prompt)) {
            seeded = seeded.unite(m->mask);
        } else if (const auto* b = std::get_if<BoxPrompt>(&prompt)) {
            seeded = seeded.unite(
                gt->cropped_to({b->x_min, b->y_min, b->x_max, b->y_max}));
        } else if (const auto* p = std::get_if<PointPrompt>(&prompt)) {
            if (p->label != PointLabel::positive) continue;
            if (regions.empty()) regions = connected_components(*gt);
            for (const auto& region : regions) {
                if (region.in_bounds(p->x, p->y) && region.at(p->x, p->y)) {
                    seeded = seeded.unite(region);
                }
            }
        }
    }
    return any_prompt ? seeded : BinaryMask(w, h);
}

MockSegmenterSession::MockSegmenterSession(const AnnotatedVideo& video, DriftModel drift)
    : video_(video), drift_(drift) {}

SessionCapabilities MockSegmenterSession::capabilities() const { return {}; }

void MockSegmenterSession::add_prompts(std::span<const Prompt> prompts) {
    if (prompts.empty()) return;
    const FrameIndex frame = prompt_frame(prompts.front());
    std::set<ObjectId> objects;
    for (const auto& p : prompts) {
        if (prompt_frame(p) != frame) {
            throw InvalidArgument("add_prompts: prompts must share one frame index");
        }
        objects.insert(prompt_object(p));
    }
    for (ObjectId id : objects) {
        seeds_[id] = SeedState{frame, seed_mask_from_prompts(video_, id, frame, prompts)};
    }
}

std::map<ObjectId, BinaryMask> MockSegmenterSession::propagate(FrameIndex frame) {
    const auto [w, h] = video_.frame_size();
    std::map<ObjectId, BinaryMask> masks;
    for (const auto& [id, seed] : seeds_) {
        if (frame < seed.frame) {
            masks[id] = BinaryMask(w, h);
        } else if (frame == seed.frame) {
            masks[id] = seed.mask;
        } else {
            masks[id] = mock_propagate(video_, seed.frame, id, frame, drift_);
        }
    }
    return masks;
}

void MockSegmenterSession::reset_memory() { seeds_.clear(); }

std::vector<ObjectId> MockSegmenterSession::tracked_objects() const {
    std::vector<ObjectId> ids;
    ids.reserve(seeds_.size());
    for (const auto& [id, seed] : seeds_) ids.push_back(id);
    return ids;
}

std::string MockSegmenterSession::identity() const { return "mock:" + drift_.label(); }

std::uint64_t boundary_length(const BinaryMask& mask) {
    std::uint64_t length = 0;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask.at(x, y)) continue;
            const bool edge = x == 0 || y == 0 || x == mask.width() - 1 ||
                              y == mask.height() - 1 || !mask.at(x - 1, y) ||
                              !mask.at(x + 1, y) || !mask.at(x, y - 1) || !mask.at(x, y + 1);
            if (edge) ++length;
        }
    }
    return length;
}

double mock_mask_quality(const BinaryMask& mask) {
    const auto area = mask.foreground_count();
    if (area == 0) return 0.0;
    const double fraction = static_cast<double>(area) / static_cast<double>(mask.pixel_count());
    return std::min(1.0, 8.0 * fraction);
}

double mock_mask_stability(const BinaryMask& mask) {
    const auto area = mask.foreground_count();
    if (area == 0) return 0.0;
    const double ratio = static_cast<double>(boundary_length(mask)) / static_cast<double>(area);
    return std::max(0.0, 1.0 - ratio);
}

MockAutoMaskGenerator::MockAutoMaskGenerator(const AnnotatedVideo& video) : video_(video) {}

std::vector<AutoMaskCandidate> MockAutoMaskGenerator::generate(const FrameRef& frame,
                                                               const AutoSegConfig& config) {
    config.validate();
    const auto it = video_.annotations.find(frame.index);
    if (it == video_.annotations.end()) return {};

    BinaryMask all(frame.width, frame.height);
    for (const auto& ann : it->second) all = all.unite(ann.mask);

    std::vector<BinaryMask> components = connected_components(all);
    std::vector<AutoMaskCandidate> candidates(components.size());
    for (std::size_t i = 0; i < components.size(); ++i) {
        candidates[i].mask = components[i];
    }

    // Grid points at cell centers; a component is found when hit.
    const int n = config.points_per_side;
    std::vector<bool> hit(components.size(), false);
    for (int gy = 0; gy < n; ++gy) {
        for (int gx = 0; gx < n; ++gx) {
            const int x = static_cast<int>((gx + 0.5) * frame.width / n);
            const int y = static_cast<int>((gy + 0.5) * frame.height / n);
            for (std::size_t i = 0; i < components.size(); ++i) {
                if (components[i].in_bounds(x, y) && components[i].at(x, y)) {
                    hit[i] = true;
                    candidates[i].points.emplace_back(x, y);
                }
            }
        }
    }

    std::vector<AutoMaskCandidate> kept;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto& candidate = candidates[i];
        if (!hit[i]) continue;
        if (candidate.mask.foreground_count() < config.min_mask_region_area) continue;
        if (mock_mask_quality(candidate.mask) < config.mask_quality_threshold) continue;
        if (mock_mask_stability(candidate.mask) + config.stability_score_offset <
            config.stability_score_threshold) {
            continue;
        }
        // Duplicate suppression against already kept candidates.
        bool duplicate = false;
        for (const auto& other : kept) {
            const auto inter = candidate.mask.intersect(other.mask).foreground_count();
            const auto uni = candidate.mask.unite(other.mask).foreground_count();
            if (uni > 0 &&
                static_cast<double>(inter) / static_cast<double>(uni) >= config.nms_threshold) {
                duplicate = true;
                break;
            }
        }
        if (duplicate) continue;
        kept.push_back(std::move(candidate));
    }
    return kept;
}

}  // namespace surgseg
