#include "surgseg/propagation.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "surgseg/errors.hpp"

namespace surgseg {

std::string ReinitPolicy::label() const {
    std::string name;
    if (interval) name = "Reinit " + std::to_string(*interval);
    if (new_object_trigger) name += name.empty() ? "New-Object" : "+New";
    return name.empty() ? "None" : name;
}

std::vector<FrameIndex> schedule_interval_reinits(std::span<const FrameIndex> annotated_frames,
                                                  int interval) {
    if (interval <= 0) throw InvalidArgument("schedule_interval_reinits: interval must be > 0");
    if (annotated_frames.empty()) {
        throw InvalidArgument("schedule_interval_reinits: no annotated frames");
    }
    const FrameIndex anchor = annotated_frames.front();
    const FrameIndex last = annotated_frames.back();
    std::vector<FrameIndex> scheduled;
    for (FrameIndex target = anchor + interval; target <= last; target += interval) {
        // Nearest later annotated frame (the frame itself when annotated).
        const auto it = std::lower_bound(annotated_frames.begin(), annotated_frames.end(), target);
        if (it == annotated_frames.end()) break;
        if (scheduled.empty() || scheduled.back() != *it) scheduled.push_back(*it);
    }
    return scheduled;
}

std::vector<ObjectId> detect_new_objects(std::span<const InstanceAnnotation> gt_frame,
                                         const std::set<ObjectId>& tracked) {
    std::set<ObjectId> fresh;
    for (const auto& ann : gt_frame) {
        if (!tracked.count(ann.object_id)) fresh.insert(ann.object_id);
    }
    return {fresh.begin(), fresh.end()};
}

ReinitEvent reinitialize(SegmenterSession& session, const AnnotatedVideo& video,
                         FrameIndex frame_index, const PromptStrategy& strategy,
                         ReinitCause cause) {
    session.reset_memory();
    const auto prompts = build_prompt_set(video, frame_index, strategy);
    session.add_prompts(prompts);

    ReinitEvent event;
    event.frame_index = frame_index;
    event.cause = cause;
    std::set<ObjectId> seeded;
    for (const auto& p : prompts) seeded.insert(prompt_object(p));
    event.objects_seeded.assign(seeded.begin(), seeded.end());
    return event;
}

SegmentationResult run_sequence(const AnnotatedVideo& video, const PromptStrategy& strategy,
                                const ReinitPolicy& policy, SegmenterSession& session) {
    SegmentationResult result;
    result.provenance.video_id = video.sequence.video_id;
    result.provenance.strategy = strategy.label();
    result.provenance.policy = policy.label();
    result.provenance.segmenter = session.identity();
    result.provenance.seed = strategy.point_config.seed;
    result.provenance.pseudo_ground_truth = video.pseudo_ground_truth;

    const FrameIndex seed_frame = first_valid_prompt_frame(video);
    result.provenance.initial_prompt_frame = seed_frame;

    const auto annotated = video.annotated_frames();
    std::vector<FrameIndex> interval_frames;
    if (policy.interval) {
        interval_frames = schedule_interval_reinits(annotated, *policy.interval);
    }

    session.reset_memory();
    std::set<ObjectId> tracked;
    std::set<ObjectId> ever_tracked;
    try {
        const auto prompts = build_prompt_set(video, seed_frame, strategy);
        session.add_prompts(prompts);
        for (const auto& p : prompts) tracked.insert(prompt_object(p));
        ever_tracked = tracked;
    } catch (const std::exception& e) {
        result.failed_at = seed_frame;
        result.failure_reason = std::string("initial seeding failed: ") + e.what();
        return result;
    }

    const FrameIndex end =
        static_cast<FrameIndex>(video.sequence.frames.size());
    for (FrameIndex frame = seed_frame; frame < end; ++frame) {
        try {
            if (frame > seed_frame && video.has_annotations(frame)) {
                const bool interval_due =
                    std::binary_search(interval_frames.begin(), interval_frames.end(), frame);
                std::optional<ReinitCause> cause;
                if (interval_due) {
                    cause = ReinitCause::interval;
                } else if (policy.new_object_trigger &&
                           !detect_new_objects(video.annotations.at(frame), tracked).empty()) {
                    cause = ReinitCause::new_object;
                }
                if (cause) {
                    const auto event = reinitialize(session, video, frame, strategy, *cause);
                    // Objects absent from GT at a reinit frame are dropped.
                    tracked.clear();
                    tracked.insert(event.objects_seeded.begin(), event.objects_seeded.end());
                    ever_tracked.insert(tracked.begin(), tracked.end());
                    result.provenance.events.push_back(event);
                }
            }
            auto masks = session.propagate(frame);
            auto& slot = result.masks[frame];
            const auto [w, h] = video.frame_size();
            for (ObjectId id : ever_tracked) {
                auto it = masks.find(id);
                if (it != masks.end()) {
                    slot[id] = std::move(it->second);
                } else {
                    slot[id] = BinaryMask(w, h);
                }
            }
        } catch (const std::exception& e) {
            result.failed_at = frame;
            result.failure_reason = e.what();
            break;
        }
    }
    return result;
}

void write_run_log(const std::filesystem::path& path, const SegmentationResult& result) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open run log for writing: " + path.string());
    auto event_it = result.provenance.events.begin();
    for (const auto& [frame, objects] : result.masks) {
        while (event_it != result.provenance.events.end() && event_it->frame_index <= frame) {
            nlohmann::json record = {
                {"type", "reinit"},
                {"frame", event_it->frame_index},
                {"cause", event_it->cause == ReinitCause::interval ? "interval" : "new_object"},
                {"objects_seeded", event_it->objects_seeded},
            };
            out << record.dump() << '\n';
            ++event_it;
        }
        nlohmann::json objs = nlohmann::json::array();
        for (const auto& [id, mask] : objects) {
            objs.push_back({{"id", id}, {"digest", digest_hex(mask_digest(mask))}});
        }
        out << nlohmann::json{{"type", "frame"}, {"frame", frame}, {"objects", objs}}.dump()
            << '\n';
    }
    if (result.failed_at) {
        out << nlohmann::json{{"type", "failure"},
                              {"frame", *result.failed_at},
                              {"reason", result.failure_reason}}
                   .dump()
            << '\n';
    }
}

void write_result_masks(const std::filesystem::path& path, const SegmentationResult& result) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open mask file for writing: " + path.string());
    for (const auto& [frame, objects] : result.masks) {
        for (const auto& [id, mask] : objects) {
            out << frame << '\t' << id << '\t' << mask.width() << '\t' << mask.height() << '\t';
            const auto runs = mask.to_rle();
            for (std::size_t i = 0; i < runs.size(); ++i) {
                if (i) out << ',';
                out << runs[i];
            }
            out << '\n';
        }
    }
}

SegmentationResult read_result_masks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mask file: " + path.string());
    SegmentationResult result;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream fields(line);
        FrameIndex frame;
        ObjectId object;
        int w, h;
        std::string counts;
        if (!(fields >> frame >> object >> w >> h >> counts)) {
            // Frames with zero tracked objects legitimately emit no line, so
            // any present line must parse.
            throw ParseError("bad mask record on line " + std::to_string(line_no) + " of " +
                             path.string());
        }
        std::vector<std::uint64_t> runs;
        std::stringstream cs(counts);
        std::string c;
        while (std::getline(cs, c, ',')) runs.push_back(std::stoull(c));
        result.masks[frame][object] = BinaryMask::from_rle(w, h, runs);
    }
    return result;
}

}  // namespace surgseg
