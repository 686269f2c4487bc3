#include "surgseg/bridge.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <set>

#include "surgseg/errors.hpp"

namespace surgseg {

void AutoSegConfig::validate() const {
    if (points_per_side < 1) throw InvalidArgument("autoseg: points_per_side must be >= 1");
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(mask_quality_threshold)) {
        throw InvalidArgument("autoseg: mask_quality_threshold outside [0,1]");
    }
    if (!in_unit(stability_score_threshold)) {
        throw InvalidArgument("autoseg: stability_score_threshold outside [0,1]");
    }
    if (!in_unit(nms_threshold)) throw InvalidArgument("autoseg: nms_threshold outside [0,1]");
    if (crop_layers < 0) throw InvalidArgument("autoseg: crop_layers must be >= 0");
}

nlohmann::json AutoSegConfig::to_json() const {
    return {
        {"points_per_side", points_per_side},
        {"mask_quality_threshold", mask_quality_threshold},
        {"stability_score_threshold", stability_score_threshold},
        {"stability_score_offset", stability_score_offset},
        {"nms_threshold", nms_threshold},
        {"min_mask_region_area", min_mask_region_area},
        {"crop_layers", crop_layers},
        {"mask_refinement", mask_refinement},
    };
}

AutoSegConfig AutoSegConfig::from_json(const nlohmann::json& j) {
    AutoSegConfig config;
    config.points_per_side = j.value("points_per_side", config.points_per_side);
    config.mask_quality_threshold =
        j.value("mask_quality_threshold", config.mask_quality_threshold);
    config.stability_score_threshold =
        j.value("stability_score_threshold", config.stability_score_threshold);
    config.stability_score_offset =
        j.value("stability_score_offset", config.stability_score_offset);
    config.nms_threshold = j.value("nms_threshold", config.nms_threshold);
    config.min_mask_region_area = j.value("min_mask_region_area", config.min_mask_region_area);
    config.crop_layers = j.value("crop_layers", config.crop_layers);
    config.mask_refinement = j.value("mask_refinement", config.mask_refinement);
    config.validate();
    return config;
}

namespace {

void write_all(int fd, const void* data, std::size_t size) {
    const char* p = static_cast<const char*>(data);
    while (size > 0) {
        const ssize_t n = ::write(fd, p, size);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError(std::string("wire write failed: ") + std::strerror(errno));
        }
        p += n;
        size -= static_cast<std::size_t>(n);
    }
}

void read_all(int fd, void* data, std::size_t size) {
    char* p = static_cast<char*>(data);
    while (size > 0) {
        const ssize_t n = ::read(fd, p, size);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError(std::string("wire read failed: ") + std::strerror(errno));
        }
        if (n == 0) throw IoError("wire closed mid-record (runtime exited?)");
        p += n;
        size -= static_cast<std::size_t>(n);
    }
}

}  // namespace

void write_wire_record(int fd, const nlohmann::json& record) {
    const std::string payload = record.dump();
    const std::uint32_t length = static_cast<std::uint32_t>(payload.size());
    unsigned char header[4] = {
        static_cast<unsigned char>(length >> 24), static_cast<unsigned char>(length >> 16),
        static_cast<unsigned char>(length >> 8), static_cast<unsigned char>(length)};
    write_all(fd, header, 4);
    write_all(fd, payload.data(), payload.size());
}

nlohmann::json read_wire_record(int fd) {
    unsigned char header[4];
    read_all(fd, header, 4);
    const std::uint32_t length = (static_cast<std::uint32_t>(header[0]) << 24) |
                                 (static_cast<std::uint32_t>(header[1]) << 16) |
                                 (static_cast<std::uint32_t>(header[2]) << 8) |
                                 static_cast<std::uint32_t>(header[3]);
    if (length > (64u << 20)) throw IoError("wire record exceeds 64 MiB");
    std::string payload(length, '\0');
    read_all(fd, payload.data(), length);
    try {
        return nlohmann::json::parse(payload);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("wire record is not valid JSON: ") + e.what());
    }
}

nlohmann::json mask_to_wire(const BinaryMask& mask) {
    return {{"width", mask.width()}, {"height", mask.height()}, {"counts", mask.to_rle()}};
}

BinaryMask mask_from_wire(const nlohmann::json& j) {
    const auto counts = j.at("counts").get<std::vector<std::uint64_t>>();
    return BinaryMask::from_rle(j.at("width").get<int>(), j.at("height").get<int>(), counts);
}

nlohmann::json prompt_to_wire(const Prompt& prompt) {
    nlohmann::json j;
    j["object"] = prompt_object(prompt);
    j["frame"] = prompt_frame(prompt);
    if (const auto* p = std::get_if<PointPrompt>(&prompt)) {
        j["kind"] = "point";
        j["x"] = p->x;
        j["y"] = p->y;
        j["label"] = static_cast<int>(p->label);
    } else if (const auto* b = std::get_if<BoxPrompt>(&prompt)) {
        j["kind"] = "box";
        // Encoded as two labeled corner points (labels 2 and 3).
        j["points"] = {{{"x", b->x_min}, {"y", b->y_min}, {"label", BoxPrompt::kTopLeftLabel}},
                       {{"x", b->x_max}, {"y", b->y_max}, {"label", BoxPrompt::kBottomRightLabel}}};
    } else if (const auto* m = std::get_if<MaskPrompt>(&prompt)) {
        j["kind"] = "mask";
        j["mask"] = mask_to_wire(m->mask);
    }
    return j;
}

Prompt prompt_from_wire(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const ObjectId object = j.at("object").get<ObjectId>();
    const FrameIndex frame = j.at("frame").get<FrameIndex>();
    if (kind == "point") {
        PointPrompt p;
        p.x = j.at("x").get<int>();
        p.y = j.at("y").get<int>();
        p.label = j.at("label").get<int>() == 0 ? PointLabel::negative : PointLabel::positive;
        p.object_id = object;
        p.frame_index = frame;
        return p;
    }
    if (kind == "box") {
        const auto& pts = j.at("points");
        BoxPrompt b;
        for (const auto& pt : pts) {
            const int label = pt.at("label").get<int>();
            if (label == BoxPrompt::kTopLeftLabel) {
                b.x_min = pt.at("x").get<int>();
                b.y_min = pt.at("y").get<int>();
            } else if (label == BoxPrompt::kBottomRightLabel) {
                b.x_max = pt.at("x").get<int>();
                b.y_max = pt.at("y").get<int>();
            } else {
                throw ParseError("box prompt corner with label " + std::to_string(label));
            }
        }
        b.object_id = object;
        b.frame_index = frame;
        return b;
    }
    if (kind == "mask") {
        return MaskPrompt{mask_from_wire(j.at("mask")), object, frame};
    }
    throw ParseError("unknown prompt kind on wire: '" + kind + "'");
}

std::unique_ptr<BridgeSession> open_session(const VideoSequence& video,
                                            const BridgeConfig& config) {
    if (config.server_command.empty()) {
        throw InvalidArgument("bridge: server_command is empty");
    }
    if (!config.checkpoint_locator.empty() &&
        !std::filesystem::exists(config.checkpoint_locator)) {
        throw IoError("bridge: checkpoint not found: " + config.checkpoint_locator);
    }

    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) {
        throw IoError(std::string("bridge: pipe failed: ") + std::strerror(errno));
    }
    const pid_t pid = fork();
    if (pid < 0) throw IoError(std::string("bridge: fork failed: ") + std::strerror(errno));
    if (pid == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        std::vector<char*> argv;
        for (const auto& arg : config.server_command) {
            argv.push_back(const_cast<char*>(arg.c_str()));
        }
        argv.push_back(nullptr);
        execvp(argv[0], argv.data());
        _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);

    auto session = std::unique_ptr<BridgeSession>(new BridgeSession());
    session->child_pid_ = pid;
    session->to_child_ = to_child[1];
    session->from_child_ = from_child[0];
    session->variant_ = config.model_variant;

    nlohmann::json frames = nlohmann::json::array();
    for (const auto& frame : video.frames) {
        frames.push_back({{"index", frame.index},
                          {"locator", frame.image_locator},
                          {"width", frame.width},
                          {"height", frame.height}});
    }
    nlohmann::json open_record = {
        {"op", "open"},
        {"video_id", video.video_id},
        {"frames", frames},
        {"checkpoint", config.checkpoint_locator},
        {"variant", config.model_variant},
        {"device", config.device},
        {"resolution", config.processing_resolution.original
                           ? nlohmann::json{{"mode", "original"}}
                           : nlohmann::json{{"mode", "fixed"},
                                            {"width", config.processing_resolution.width},
                                            {"height", config.processing_resolution.height}}},
        {"options", config.runtime_options},
    };
    const auto reply = session->request(open_record);
    (void)reply;
    return session;
}

BridgeSession::~BridgeSession() {
    if (to_child_ >= 0) {
        try {
            write_wire_record(to_child_, {{"op", "close"}});
        } catch (...) {
            // child already gone
        }
        close(to_child_);
    }
    if (from_child_ >= 0) close(from_child_);
    if (child_pid_ > 0) {
        int status = 0;
        if (waitpid(child_pid_, &status, WNOHANG) == 0) {
            kill(child_pid_, SIGTERM);
            waitpid(child_pid_, &status, 0);
        }
    }
}

nlohmann::json BridgeSession::request(const nlohmann::json& record) {
    write_wire_record(to_child_, record);
    nlohmann::json reply = read_wire_record(from_child_);
    if (!reply.value("ok", false)) {
        const std::string message = reply.value("error", std::string("unknown runtime error"));
        if (reply.value("kind", std::string()) == "capability") throw CapabilityError(message);
        throw IoError("runtime error: " + message);
    }
    return reply;
}

SessionCapabilities BridgeSession::capabilities() const { return {}; }

void BridgeSession::add_prompts(std::span<const Prompt> prompts) {
    if (prompts.empty()) return;
    nlohmann::json wire = nlohmann::json::array();
    std::set<ObjectId> objects(tracked_.begin(), tracked_.end());
    for (const auto& p : prompts) {
        wire.push_back(prompt_to_wire(p));
        objects.insert(prompt_object(p));
    }
    request({{"op", "add_prompts"}, {"frame", prompt_frame(prompts.front())}, {"prompts", wire}});
    tracked_.assign(objects.begin(), objects.end());
}

std::map<ObjectId, BinaryMask> BridgeSession::propagate(FrameIndex frame) {
    const auto reply = request({{"op", "propagate"}, {"frame", frame}});
    std::map<ObjectId, BinaryMask> masks;
    for (const auto& m : reply.at("masks")) {
        masks[m.at("object").get<ObjectId>()] = mask_from_wire(m);
    }
    return masks;
}

void BridgeSession::reset_memory() {
    request({{"op", "reset"}});
    tracked_.clear();
}

std::vector<ObjectId> BridgeSession::tracked_objects() const { return tracked_; }

std::string BridgeSession::identity() const { return "bridge:" + variant_; }

std::vector<AutoMaskCandidate> BridgeSession::generate(const FrameRef& frame,
                                                       const AutoSegConfig& config) {
    config.validate();
    const auto reply = request({{"op", "auto_masks"},
                                {"frame", frame.index},
                                {"locator", frame.image_locator},
                                {"config", config.to_json()}});
    std::vector<AutoMaskCandidate> candidates;
    for (const auto& c : reply.at("candidates")) {
        AutoMaskCandidate candidate;
        candidate.mask = mask_from_wire(c.at("mask"));
        for (const auto& pt : c.at("points")) {
            candidate.points.emplace_back(pt.at(0).get<int>(), pt.at(1).get<int>());
        }
        candidates.push_back(std::move(candidate));
    }
    return candidates;
}

}  // namespace surgseg
