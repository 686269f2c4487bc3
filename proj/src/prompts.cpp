#include "surgseg/prompts.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "surgseg/errors.hpp"

namespace surgseg {

ObjectId prompt_object(const Prompt& prompt) {
    return std::visit([](const auto& p) { return p.object_id; }, prompt);
}

FrameIndex prompt_frame(const Prompt& prompt) {
    return std::visit([](const auto& p) { return p.frame_index; }, prompt);
}

PromptStrategy PromptStrategy::center_point() {
    return {StrategyKind::center_point, {}};
}

PromptStrategy PromptStrategy::random_points(int n, PointSamplingConfig config) {
    config.positives_per_region = n;
    return {StrategyKind::random_points, config};
}

PromptStrategy PromptStrategy::box() { return {StrategyKind::box, {}}; }

PromptStrategy PromptStrategy::mask() { return {StrategyKind::mask, {}}; }

std::string PromptStrategy::label() const {
    switch (kind) {
        case StrategyKind::center_point:
            return "1Point-Center";
        case StrategyKind::random_points: {
            const int n = point_config.positives_per_region;
            if (n == 1) return "1Point-Random";
            return std::to_string(n) + "Points-Random";
        }
        case StrategyKind::box:
            return "Bbox";
        case StrategyKind::mask:
            return "Mask";
    }
    return "?";
}

namespace {

/// Per-annotation RNG stream so sampling is independent of call order.
Rng annotation_rng(const PointSamplingConfig& config, const InstanceAnnotation& ann) {
    std::uint64_t s = mix_seed(config.seed, static_cast<std::uint64_t>(ann.frame_index) + 1);
    s = mix_seed(s, static_cast<std::uint64_t>(ann.object_id) + 0x51ed270b);
    return Rng(s);
}

std::vector<std::pair<int, int>> region_pixels(const BinaryMask& region) {
    std::vector<std::pair<int, int>> pixels;
    for (int y = 0; y < region.height(); ++y) {
        for (int x = 0; x < region.width(); ++x) {
            if (region.at(x, y)) pixels.emplace_back(x, y);
        }
    }
    return pixels;
}

}  // namespace

PointPrompt fluctuate_point(const PointPrompt& point, int beta, int width, int height, Rng& rng) {
    // Always draw both offsets so RNG streams stay aligned across beta values.
    const int dx = rng.uniform_int(-beta, beta);
    const int dy = rng.uniform_int(-beta, beta);
    PointPrompt out = point;
    out.x = std::clamp(point.x + dx, 0, width - 1);
    out.y = std::clamp(point.y + dy, 0, height - 1);
    return out;
}

std::vector<PointPrompt> sample_positive_points(const InstanceAnnotation& annotation,
                                                const PointSamplingConfig& config) {
    if (annotation.mask.empty()) {
        throw InvalidArgument("sample_positive_points: annotation mask is empty");
    }
    const int w = annotation.mask.width();
    const int h = annotation.mask.height();
    Rng rng = annotation_rng(config, annotation);

    std::vector<PointPrompt> points;
    for (const auto& region : connected_components(annotation.mask)) {
        const auto pixels = region_pixels(region);
        for (int i = 0; i < config.positives_per_region; ++i) {
            const auto& [x, y] = pixels[rng.below(pixels.size())];
            PointPrompt p{x, y, PointLabel::positive, annotation.object_id,
                          annotation.frame_index};
            points.push_back(fluctuate_point(p, config.fluctuation_radius, w, h, rng));
        }
    }
    return points;
}

std::vector<PointPrompt> sample_negative_points(const InstanceAnnotation& target,
                                                std::span<const InstanceAnnotation> others,
                                                const PointSamplingConfig& config) {
    std::vector<PointPrompt> donors;
    for (const auto& other : others) {
        if (other.object_id == target.object_id) continue;
        for (const auto& p : sample_positive_points(other, config)) donors.push_back(p);
    }
    if (donors.empty() || config.negatives_per_region <= 0) return {};

    Rng rng = annotation_rng(config, target);
    rng.next();  // decouple from the positive-point stream of the target

    std::vector<PointPrompt> negatives;
    const std::size_t region_count = connected_components(target.mask).size();
    for (std::size_t r = 0; r < region_count; ++r) {
        std::vector<std::size_t> pool(donors.size());
        for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
        const std::size_t take =
            std::min<std::size_t>(config.negatives_per_region, donors.size());
        for (std::size_t i = 0; i < take; ++i) {
            const std::size_t j = i + rng.below(pool.size() - i);
            std::swap(pool[i], pool[j]);
            PointPrompt p = donors[pool[i]];
            p.label = PointLabel::negative;
            p.object_id = target.object_id;
            p.frame_index = target.frame_index;
            negatives.push_back(p);
        }
    }
    return negatives;
}

PointPrompt center_point(const InstanceAnnotation& annotation, CenterMode mode) {
    if (annotation.mask.empty()) {
        throw InvalidArgument("center_point: annotation mask is empty");
    }
    int cx = 0;
    int cy = 0;
    if (mode == CenterMode::box_center) {
        cx = static_cast<int>((static_cast<long long>(annotation.bbox.x_min) +
                               annotation.bbox.x_max) / 2);
        cy = static_cast<int>((static_cast<long long>(annotation.bbox.y_min) +
                               annotation.bbox.y_max) / 2);
    } else {
        double sx = 0;
        double sy = 0;
        std::uint64_t n = 0;
        for (int y = 0; y < annotation.mask.height(); ++y) {
            for (int x = 0; x < annotation.mask.width(); ++x) {
                if (!annotation.mask.at(x, y)) continue;
                sx += x;
                sy += y;
                ++n;
            }
        }
        cx = static_cast<int>(std::lround(sx / static_cast<double>(n)));
        cy = static_cast<int>(std::lround(sy / static_cast<double>(n)));
    }

    if (!annotation.mask.at(cx, cy)) {
        // Snap to the nearest foreground pixel; ties resolved by scan order.
        long long best = std::numeric_limits<long long>::max();
        int bx = cx;
        int by = cy;
        for (int y = 0; y < annotation.mask.height(); ++y) {
            for (int x = 0; x < annotation.mask.width(); ++x) {
                if (!annotation.mask.at(x, y)) continue;
                const long long dx = x - cx;
                const long long dy = y - cy;
                const long long d2 = dx * dx + dy * dy;
                if (d2 < best) {
                    best = d2;
                    bx = x;
                    by = y;
                }
            }
        }
        cx = bx;
        cy = by;
    }
    return {cx, cy, PointLabel::positive, annotation.object_id, annotation.frame_index};
}

BoxPrompt box_from_annotation(const InstanceAnnotation& annotation) {
    const auto box = annotation.mask.tight_bbox();
    if (!box) throw InvalidArgument("box_from_annotation: annotation mask is empty");

    BoxPrompt prompt;
    prompt.x_min = box->x_min;
    prompt.y_min = box->y_min;
    prompt.x_max = box->x_max;
    prompt.y_max = box->y_max;
    prompt.object_id = annotation.object_id;
    prompt.frame_index = annotation.frame_index;

    const int w = annotation.mask.width();
    const int h = annotation.mask.height();
    if (prompt.x_min == prompt.x_max) {
        if (prompt.x_max + 1 < w) {
            ++prompt.x_max;
        } else if (prompt.x_min > 0) {
            --prompt.x_min;
        } else {
            throw InvalidArgument("box_from_annotation: frame too narrow for a strict box");
        }
    }
    if (prompt.y_min == prompt.y_max) {
        if (prompt.y_max + 1 < h) {
            ++prompt.y_max;
        } else if (prompt.y_min > 0) {
            --prompt.y_min;
        } else {
            throw InvalidArgument("box_from_annotation: frame too short for a strict box");
        }
    }
    return prompt;
}

std::vector<Prompt> build_prompt_set(const AnnotatedVideo& video, FrameIndex frame_index,
                                     const PromptStrategy& strategy) {
    const auto it = video.annotations.find(frame_index);
    if (it == video.annotations.end() || it->second.empty()) {
        throw IntegrityError("frame " + std::to_string(frame_index) +
                             " has no annotations; seed from first_valid_prompt_frame");
    }
    const auto& annotations = it->second;

    std::vector<Prompt> prompts;
    for (const auto& ann : annotations) {
        switch (strategy.kind) {
            case StrategyKind::center_point:
                prompts.emplace_back(center_point(ann, CenterMode::mass_center));
                break;
            case StrategyKind::random_points: {
                for (auto& p : sample_positive_points(ann, strategy.point_config)) {
                    prompts.emplace_back(std::move(p));
                }
                for (auto& p :
                     sample_negative_points(ann, annotations, strategy.point_config)) {
                    prompts.emplace_back(std::move(p));
                }
                break;
            }
            case StrategyKind::box:
                prompts.emplace_back(box_from_annotation(ann));
                break;
            case StrategyKind::mask:
                prompts.emplace_back(MaskPrompt{ann.mask, ann.object_id, ann.frame_index});
                break;
        }
    }
    return prompts;
}

void write_prompt_records(std::ostream& out, const std::string& video_id,
                          std::span<const Prompt> prompts) {
    for (const auto& prompt : prompts) {
        out << video_id << '\t' << prompt_frame(prompt) << '\t' << prompt_object(prompt) << '\t';
        if (const auto* p = std::get_if<PointPrompt>(&prompt)) {
            out << "point\t" << p->x << ' ' << p->y << ' ' << static_cast<int>(p->label);
        } else if (const auto* b = std::get_if<BoxPrompt>(&prompt)) {
            out << "box\t" << b->x_min << ' ' << b->y_min << ' ' << b->x_max << ' ' << b->y_max;
        } else if (const auto* m = std::get_if<MaskPrompt>(&prompt)) {
            out << "mask\t" << m->mask.width() << ' ' << m->mask.height() << ' ';
            const auto runs = m->mask.to_rle();
            for (std::size_t i = 0; i < runs.size(); ++i) {
                if (i) out << ',';
                out << runs[i];
            }
        }
        out << '\n';
    }
}

std::vector<Prompt> read_prompt_records(std::istream& in) {
    std::vector<Prompt> prompts;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string video, kind, payload;
        FrameIndex frame;
        ObjectId object;
        if (!std::getline(fields, video, '\t')) {
            throw ParseError("prompt record line " + std::to_string(line_no) + ": missing video");
        }
        std::string tmp;
        if (!std::getline(fields, tmp, '\t')) {
            throw ParseError("prompt record line " + std::to_string(line_no) + ": missing frame");
        }
        frame = std::stoi(tmp);
        if (!std::getline(fields, tmp, '\t')) {
            throw ParseError("prompt record line " + std::to_string(line_no) + ": missing object");
        }
        object = std::stoi(tmp);
        if (!std::getline(fields, kind, '\t')) {
            throw ParseError("prompt record line " + std::to_string(line_no) + ": missing kind");
        }
        std::getline(fields, payload);
        std::istringstream body(payload);
        if (kind == "point") {
            PointPrompt p;
            int label;
            body >> p.x >> p.y >> label;
            p.label = label == 0 ? PointLabel::negative : PointLabel::positive;
            p.object_id = object;
            p.frame_index = frame;
            prompts.emplace_back(p);
        } else if (kind == "box") {
            BoxPrompt b;
            body >> b.x_min >> b.y_min >> b.x_max >> b.y_max;
            b.object_id = object;
            b.frame_index = frame;
            prompts.emplace_back(b);
        } else if (kind == "mask") {
            int w, h;
            std::string counts;
            body >> w >> h >> counts;
            std::vector<std::uint64_t> runs;
            std::stringstream cs(counts);
            std::string c;
            while (std::getline(cs, c, ',')) runs.push_back(std::stoull(c));
            MaskPrompt m{BinaryMask::from_rle(w, h, runs), object, frame};
            prompts.emplace_back(std::move(m));
        } else {
            throw ParseError("prompt record line " + std::to_string(line_no) +
                             ": unknown kind '" + kind + "'");
        }
    }
    return prompts;
}

}  // namespace surgseg
