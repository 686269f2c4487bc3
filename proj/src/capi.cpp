#include "surgseg/surgseg.h"

#include <cstring>
#include <string>

#include "surgseg/coco.hpp"
#include "surgseg/errors.hpp"
#include "surgseg/experiment.hpp"

namespace {

thread_local std::string g_last_error;

surgseg_status fail(surgseg_status status, const std::string& message) {
    g_last_error = message;
    return status;
}

template <typename Fn>
surgseg_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return SURGSEG_OK;
    } catch (const surgseg::ParseError& e) {
        return fail(SURGSEG_ERROR_PARSE, e.what());
    } catch (const surgseg::IntegrityError& e) {
        return fail(SURGSEG_ERROR_INTEGRITY, e.what());
    } catch (const surgseg::CapabilityError& e) {
        return fail(SURGSEG_ERROR_CAPABILITY, e.what());
    } catch (const surgseg::IoError& e) {
        return fail(SURGSEG_ERROR_IO, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(SURGSEG_ERROR_INVALID_ARGUMENT, e.what());
    } catch (const std::exception& e) {
        return fail(SURGSEG_ERROR_RUNTIME, e.what());
    } catch (...) {
        return fail(SURGSEG_ERROR_RUNTIME, "unknown error");
    }
}

surgseg::BinaryMask mask_from_bitmap(const uint8_t* bitmap, uint32_t width, uint32_t height) {
    std::vector<std::uint8_t> bits(bitmap, bitmap + static_cast<std::size_t>(width) * height);
    return surgseg::BinaryMask::from_bitmap(static_cast<int>(width), static_cast<int>(height),
                                            std::move(bits));
}

}  // namespace

struct surgseg_dataset {
    std::vector<surgseg::AnnotatedVideo> videos;
};

struct surgseg_session {
    const surgseg_dataset* dataset = nullptr;
    const surgseg::AnnotatedVideo* video = nullptr;
    std::unique_ptr<surgseg::SegmenterSession> impl;
    std::vector<surgseg::Prompt> staged;
    std::vector<std::pair<surgseg::ObjectId, surgseg::BinaryMask>> last_masks;
};

struct surgseg_experiment {
    surgseg::ExperimentConfig config;
};

extern "C" {

const char* surgseg_version(void) { return surgseg::kCodeVersion; }

const char* surgseg_last_error(void) { return g_last_error.c_str(); }

surgseg_status surgseg_rle_decode(const uint64_t* counts, size_t count_len, uint32_t width,
                                  uint32_t height, uint8_t* bitmap_out) {
    if (!counts || !bitmap_out) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        const auto mask = surgseg::BinaryMask::from_rle(
            static_cast<int>(width), static_cast<int>(height),
            std::span<const std::uint64_t>(counts, count_len));
        std::memcpy(bitmap_out, mask.bitmap().data(), mask.bitmap().size());
    });
}

surgseg_status surgseg_rle_encode(const uint8_t* bitmap, uint32_t width, uint32_t height,
                                  uint64_t* counts_out, size_t* count_len) {
    if (!bitmap || !counts_out || !count_len) {
        return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null argument");
    }
    return guarded([&] {
        const auto runs = mask_from_bitmap(bitmap, width, height).to_rle();
        if (runs.size() > *count_len) {
            *count_len = runs.size();
            throw surgseg::InvalidArgument("rle buffer too small: need " +
                                           std::to_string(runs.size()) + " slots");
        }
        std::memcpy(counts_out, runs.data(), runs.size() * sizeof(uint64_t));
        *count_len = runs.size();
    });
}

surgseg_status surgseg_mask_metrics(const uint8_t* pred, const uint8_t* gt, uint32_t width,
                                    uint32_t height, double* iou_out, double* dice_out,
                                    double* mae_out) {
    if (!pred || !gt) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        const auto p = mask_from_bitmap(pred, width, height);
        const auto g = mask_from_bitmap(gt, width, height);
        const auto counts = surgseg::confusion_counts(p, g);
        if (iou_out) *iou_out = surgseg::iou(counts);
        if (dice_out) *dice_out = surgseg::dice(counts);
        if (mae_out) *mae_out = surgseg::mae(p, g);
    });
}

surgseg_status surgseg_dataset_load_coco(const char* json_path, const char* image_root,
                                         surgseg_dataset** out) {
    if (!json_path || !out) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        auto dataset = std::make_unique<surgseg_dataset>();
        dataset->videos =
            surgseg::load_coco_annotations(std::filesystem::path(json_path),
                                           image_root ? image_root : "");
        *out = dataset.release();
    });
}

surgseg_status surgseg_dataset_synthetic(const char* spec_json, surgseg_dataset** out) {
    if (!spec_json || !out) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        const auto spec =
            surgseg::synthetic_spec_from_json(nlohmann::json::parse(spec_json));
        auto dataset = std::make_unique<surgseg_dataset>();
        dataset->videos.push_back(surgseg::generate_synthetic_video(spec));
        *out = dataset.release();
    });
}

surgseg_status surgseg_dataset_video_count(const surgseg_dataset* dataset, size_t* out) {
    if (!dataset || !out) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null argument");
    *out = dataset->videos.size();
    return SURGSEG_OK;
}

surgseg_status surgseg_dataset_video_id(const surgseg_dataset* dataset, size_t index,
                                        const char** out) {
    if (!dataset || !out) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null argument");
    if (index >= dataset->videos.size()) {
        return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "video index out of range");
    }
    *out = dataset->videos[index].sequence.video_id.c_str();
    return SURGSEG_OK;
}

void surgseg_dataset_free(surgseg_dataset* dataset) { delete dataset; }

surgseg_status surgseg_mock_session_open(const surgseg_dataset* dataset, const char* video_id,
                                         const surgseg_drift_params* drift,
                                         surgseg_session** out) {
    if (!dataset || !video_id || !out) {
        return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null argument");
    }
    return guarded([&] {
        const surgseg::AnnotatedVideo* video = nullptr;
        for (const auto& v : dataset->videos) {
            if (v.sequence.video_id == video_id) video = &v;
        }
        if (!video) {
            throw surgseg::InvalidArgument(std::string("unknown video id '") + video_id + "'");
        }
        surgseg::DriftModel model;
        if (drift) {
            model.dx = drift->dx;
            model.dy = drift->dy;
            model.erosion_rate = drift->erosion_rate;
            if (drift->dropout_after > 0) model.dropout_after = drift->dropout_after;
        }
        auto session = std::make_unique<surgseg_session>();
        session->dataset = dataset;
        session->video = video;
        session->impl = std::make_unique<surgseg::MockSegmenterSession>(*video, model);
        *out = session.release();
    });
}

surgseg_status surgseg_session_stage_point(surgseg_session* session, int32_t frame,
                                           int32_t object_id, int32_t x, int32_t y,
                                           int32_t label) {
    if (!session) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null session");
    surgseg::PointPrompt p;
    p.x = x;
    p.y = y;
    p.label = label == 0 ? surgseg::PointLabel::negative : surgseg::PointLabel::positive;
    p.object_id = object_id;
    p.frame_index = frame;
    session->staged.emplace_back(p);
    return SURGSEG_OK;
}

surgseg_status surgseg_session_stage_box(surgseg_session* session, int32_t frame,
                                         int32_t object_id, int32_t x_min, int32_t y_min,
                                         int32_t x_max, int32_t y_max) {
    if (!session) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null session");
    if (x_min >= x_max || y_min >= y_max) {
        return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "box corners must be strictly ordered");
    }
    surgseg::BoxPrompt b;
    b.x_min = x_min;
    b.y_min = y_min;
    b.x_max = x_max;
    b.y_max = y_max;
    b.object_id = object_id;
    b.frame_index = frame;
    session->staged.emplace_back(b);
    return SURGSEG_OK;
}

surgseg_status surgseg_session_stage_mask(surgseg_session* session, int32_t frame,
                                          int32_t object_id, const uint64_t* counts,
                                          size_t count_len, uint32_t width, uint32_t height) {
    if (!session || !counts) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        surgseg::MaskPrompt m{
            surgseg::BinaryMask::from_rle(static_cast<int>(width), static_cast<int>(height),
                                          std::span<const std::uint64_t>(counts, count_len)),
            object_id, frame};
        session->staged.emplace_back(std::move(m));
    });
}

surgseg_status surgseg_session_commit_prompts(surgseg_session* session) {
    if (!session) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null session");
    return guarded([&] {
        session->impl->add_prompts(session->staged);
        session->staged.clear();
    });
}

surgseg_status surgseg_session_seed_from_gt(surgseg_session* session, int32_t frame,
                                            const char* strategy, int32_t points,
                                            uint64_t seed) {
    if (!session || !strategy) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        surgseg::PromptStrategy s;
        const std::string kind = strategy;
        if (kind == "center_point") {
            s = surgseg::PromptStrategy::center_point();
        } else if (kind == "random_points") {
            s = surgseg::PromptStrategy::random_points(points > 0 ? points : 1);
        } else if (kind == "box") {
            s = surgseg::PromptStrategy::box();
        } else if (kind == "mask") {
            s = surgseg::PromptStrategy::mask();
        } else {
            throw surgseg::InvalidArgument("unknown strategy '" + kind + "'");
        }
        s.point_config.seed = seed;
        const auto prompts = surgseg::build_prompt_set(*session->video, frame, s);
        session->impl->add_prompts(prompts);
    });
}

surgseg_status surgseg_session_propagate(surgseg_session* session, int32_t frame,
                                         size_t* object_count) {
    if (!session || !object_count) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        auto masks = session->impl->propagate(frame);
        session->last_masks.assign(std::make_move_iterator(masks.begin()),
                                   std::make_move_iterator(masks.end()));
        *object_count = session->last_masks.size();
    });
}

surgseg_status surgseg_session_mask_at(surgseg_session* session, size_t index,
                                       int32_t* object_id, uint8_t* bitmap_out,
                                       size_t bitmap_len) {
    if (!session || !object_id || !bitmap_out) {
        return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null argument");
    }
    if (index >= session->last_masks.size()) {
        return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "mask index out of range");
    }
    const auto& [id, mask] = session->last_masks[index];
    if (bitmap_len < mask.bitmap().size()) {
        return fail(SURGSEG_ERROR_INVALID_ARGUMENT,
                    "bitmap buffer too small: need " + std::to_string(mask.bitmap().size()));
    }
    *object_id = id;
    std::memcpy(bitmap_out, mask.bitmap().data(), mask.bitmap().size());
    return SURGSEG_OK;
}

surgseg_status surgseg_session_reset(surgseg_session* session) {
    if (!session) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null session");
    return guarded([&] {
        session->impl->reset_memory();
        session->staged.clear();
        session->last_masks.clear();
    });
}

void surgseg_session_free(surgseg_session* session) { delete session; }

surgseg_status surgseg_experiment_load(const char* config_path, surgseg_experiment** out) {
    if (!config_path || !out) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null argument");
    return guarded([&] {
        auto experiment = std::make_unique<surgseg_experiment>();
        experiment->config = surgseg::ExperimentConfig::load(config_path);
        *out = experiment.release();
    });
}

surgseg_status surgseg_experiment_validate(const surgseg_experiment* experiment) {
    if (!experiment) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null experiment");
    const auto errors = experiment->config.validate();
    if (errors.empty()) {
        g_last_error.clear();
        return SURGSEG_OK;
    }
    std::string joined;
    for (const auto& e : errors) {
        if (!joined.empty()) joined += '\n';
        joined += e;
    }
    return fail(SURGSEG_ERROR_INVALID_ARGUMENT, joined);
}

surgseg_status surgseg_experiment_cell_count(const surgseg_experiment* experiment, size_t* out) {
    if (!experiment || !out) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null argument");
    return guarded([&] { *out = surgseg::expand_matrix(experiment->config).size(); });
}

surgseg_status surgseg_experiment_run(const surgseg_experiment* experiment,
                                      const char* bundle_dir, const char* filter,
                                      int has_seed_override, uint64_t seed_override,
                                      size_t* failed_out) {
    if (!experiment) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null experiment");
    return guarded([&] {
        surgseg::ExperimentConfig config = experiment->config;
        if (has_seed_override) config.seeds = {seed_override};
        const auto descriptors = surgseg::expand_matrix(config);
        const std::filesystem::path dir =
            bundle_dir && bundle_dir[0] ? std::filesystem::path(bundle_dir) : config.output_dir;
        const auto bundle =
            surgseg::run_all(config, descriptors, dir, filter ? filter : "");
        if (failed_out) *failed_out = bundle.failed_count();
    });
}

surgseg_status surgseg_experiment_report(const char* bundle_dir, const char* format) {
    if (!bundle_dir) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null bundle_dir");
    return guarded([&] {
        surgseg::emit_report(bundle_dir, format && format[0] ? format : "markdown");
    });
}

surgseg_status surgseg_experiment_finetune(const surgseg_experiment* experiment,
                                           const char* out_dir) {
    if (!experiment) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null experiment");
    return guarded([&] {
        const std::filesystem::path dir = out_dir && out_dir[0]
                                              ? std::filesystem::path(out_dir)
                                              : experiment->config.output_dir;
        surgseg::run_finetune(experiment->config, dir);
    });
}

surgseg_status surgseg_experiment_sweep(const surgseg_experiment* experiment,
                                        const char* out_dir) {
    if (!experiment) return fail(SURGSEG_ERROR_INVALID_ARGUMENT, "null experiment");
    return guarded([&] {
        const std::filesystem::path dir = out_dir && out_dir[0]
                                              ? std::filesystem::path(out_dir)
                                              : experiment->config.output_dir;
        surgseg::run_sweep(experiment->config, dir);
    });
}

void surgseg_experiment_free(surgseg_experiment* experiment) { delete experiment; }

}  // extern "C"
