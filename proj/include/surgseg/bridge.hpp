#pragma once

#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "surgseg/session.hpp"

namespace surgseg {

/// Automatic first-frame mask generation knobs.
struct AutoSegConfig {
    int points_per_side = 16;
    double mask_quality_threshold = 0.0;
    double stability_score_threshold = 0.0;
    double stability_score_offset = 0.0;
    double nms_threshold = 0.9;
    std::uint64_t min_mask_region_area = 0;
    int crop_layers = 0;
    bool mask_refinement = false;

    void validate() const;  // throws InvalidArgument on out-of-range values
    nlohmann::json to_json() const;
    static AutoSegConfig from_json(const nlohmann::json& j);
};

struct AutoMaskCandidate {
    BinaryMask mask;
    std::vector<std::pair<int, int>> points;  // the generating sample points
};

/// Abstract candidate-mask generator (in-process mock or remote runtime).
class AutoMaskGenerator {
public:
    virtual ~AutoMaskGenerator() = default;
    virtual std::vector<AutoMaskCandidate> generate(const FrameRef& frame,
                                                    const AutoSegConfig& config) = 0;
};

/// Binding to an external promptable-segmenter runtime hosted in a
/// subprocess. The wire format is length-prefixed JSON records
/// (uint32 big-endian length + payload), request/response in lockstep.
struct BridgeConfig {
    /// Command line of the runtime server (argv[0] plus arguments).
    std::vector<std::string> server_command;
    std::string checkpoint_locator;
    std::string model_variant = "sam2_hiera_large";
    std::string device = "cpu";
    /// {"original"} or {"fixed", w, h}
    struct Resolution {
        bool original = true;
        int width = 0;
        int height = 0;
    } processing_resolution;
    /// Opaque options forwarded verbatim in the open record (e.g. the mock
    /// server's annotation path and drift parameters).
    nlohmann::json runtime_options = nlohmann::json::object();
};

class BridgeSession;

/// Spawns the runtime subprocess and opens a session for the video. Throws
/// IoError when the checkpoint is named but missing or the server fails to
/// start; the returned session honors the full SegmenterSession contract.
std::unique_ptr<BridgeSession> open_session(const VideoSequence& video,
                                            const BridgeConfig& config);

class BridgeSession : public SegmenterSession, public AutoMaskGenerator {
public:
    ~BridgeSession() override;

    SessionCapabilities capabilities() const override;
    void add_prompts(std::span<const Prompt> prompts) override;
    std::map<ObjectId, BinaryMask> propagate(FrameIndex frame) override;
    void reset_memory() override;
    std::vector<ObjectId> tracked_objects() const override;
    std::string identity() const override;

    std::vector<AutoMaskCandidate> generate(const FrameRef& frame,
                                            const AutoSegConfig& config) override;

private:
    friend std::unique_ptr<BridgeSession> open_session(const VideoSequence&,
                                                       const BridgeConfig&);
    BridgeSession() = default;

    nlohmann::json request(const nlohmann::json& record);

    int child_pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string variant_;
    std::vector<ObjectId> tracked_;
};

/// Record framing shared by client and servers.
void write_wire_record(int fd, const nlohmann::json& record);
nlohmann::json read_wire_record(int fd);  // throws IoError on EOF/short read

nlohmann::json prompt_to_wire(const Prompt& prompt);
Prompt prompt_from_wire(const nlohmann::json& j);
nlohmann::json mask_to_wire(const BinaryMask& mask);
BinaryMask mask_from_wire(const nlohmann::json& j);

}  // namespace surgseg
