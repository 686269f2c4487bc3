// Desk-scale runtime server speaking the surgseg bridge wire protocol on
// stdin/stdout. Backs the session with the deterministic mock segmenter so
// the subprocess bridge path can run end-to-end without a model runtime.
//
// The open record's options select the ground truth:
//   {"annotations": "<coco.json>"}   load a COCO file and pick the video
//   {"synthetic": {...}}             generate a synthetic video
// plus optional {"drift": {"dx":..,"dy":..,"erosion_rate":..,"dropout_after":..}}.

#include <unistd.h>

#include <memory>
#include <optional>

#include "surgseg/bridge.hpp"
#include "surgseg/coco.hpp"
#include "surgseg/errors.hpp"
#include "surgseg/mock_segmenter.hpp"
#include "surgseg/synthetic.hpp"

using namespace surgseg;

namespace {

struct ServerState {
    std::optional<AnnotatedVideo> video;
    std::unique_ptr<MockSegmenterSession> session;
    std::unique_ptr<MockAutoMaskGenerator> generator;
};

nlohmann::json handle_open(ServerState& state, const nlohmann::json& record) {
    const auto options = record.value("options", nlohmann::json::object());
    DriftModel drift;
    if (options.contains("drift")) {
        const auto& d = options["drift"];
        drift.dx = d.value("dx", 0.0);
        drift.dy = d.value("dy", 0.0);
        drift.erosion_rate = d.value("erosion_rate", 0.0);
        if (d.contains("dropout_after") && !d["dropout_after"].is_null()) {
            drift.dropout_after = d["dropout_after"].get<int>();
        }
    }

    if (options.contains("annotations")) {
        const std::string video_id = record.value("video_id", std::string());
        auto videos = load_coco_annotations(
            std::filesystem::path(options["annotations"].get<std::string>()), "");
        for (auto& v : videos) {
            if (v.sequence.video_id == video_id || video_id.empty()) {
                state.video = std::move(v);
                break;
            }
        }
        if (!state.video) {
            throw IntegrityError("no video '" + video_id + "' in the annotation file");
        }
    } else if (options.contains("synthetic")) {
        state.video = generate_synthetic_video(synthetic_spec_from_json(options["synthetic"]));
    } else {
        throw InvalidArgument(
            "mock server needs options.annotations or options.synthetic for ground truth");
    }
    state.session = std::make_unique<MockSegmenterSession>(*state.video, drift);
    state.generator = std::make_unique<MockAutoMaskGenerator>(*state.video);
    return {{"ok", true}, {"identity", state.session->identity()}};
}

nlohmann::json handle_record(ServerState& state, const nlohmann::json& record) {
    const std::string op = record.value("op", std::string());
    if (op == "open") return handle_open(state, record);
    if (!state.session) throw InvalidArgument("session not opened");

    if (op == "add_prompts") {
        std::vector<Prompt> prompts;
        for (const auto& p : record.at("prompts")) prompts.push_back(prompt_from_wire(p));
        state.session->add_prompts(prompts);
        return {{"ok", true}};
    }
    if (op == "propagate") {
        const auto masks = state.session->propagate(record.at("frame").get<FrameIndex>());
        nlohmann::json out = nlohmann::json::array();
        for (const auto& [object, mask] : masks) {
            nlohmann::json m = mask_to_wire(mask);
            m["object"] = object;
            out.push_back(std::move(m));
        }
        return {{"ok", true}, {"masks", out}};
    }
    if (op == "reset") {
        state.session->reset_memory();
        return {{"ok", true}};
    }
    if (op == "auto_masks") {
        const FrameIndex frame_index = record.value("frame", 0);
        const auto& frames = state.video->sequence.frames;
        if (frame_index < 0 || frame_index >= static_cast<FrameIndex>(frames.size())) {
            throw InvalidArgument("auto_masks frame out of range");
        }
        const auto config = AutoSegConfig::from_json(record.value("config", nlohmann::json::object()));
        const auto candidates = state.generator->generate(frames[frame_index], config);
        nlohmann::json out = nlohmann::json::array();
        for (const auto& candidate : candidates) {
            nlohmann::json points = nlohmann::json::array();
            for (const auto& [x, y] : candidate.points) points.push_back({x, y});
            out.push_back({{"mask", mask_to_wire(candidate.mask)}, {"points", points}});
        }
        return {{"ok", true}, {"candidates", out}};
    }
    throw InvalidArgument("unknown op '" + op + "'");
}

}  // namespace

int main() {
    ServerState state;
    while (true) {
        nlohmann::json record;
        try {
            record = read_wire_record(STDIN_FILENO);
        } catch (const IoError&) {
            return 0;  // client closed the pipe
        }
        if (record.value("op", std::string()) == "close") return 0;
        nlohmann::json reply;
        try {
            reply = handle_record(state, record);
        } catch (const CapabilityError& e) {
            reply = {{"ok", false}, {"kind", "capability"}, {"error", e.what()}};
        } catch (const std::exception& e) {
            reply = {{"ok", false}, {"error", e.what()}};
        }
        write_wire_record(STDOUT_FILENO, reply);
    }
}
