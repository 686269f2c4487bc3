/* surgseg C API: opaque handles + status codes over the C++ core.
 *
 * Every function returns SURGSEG_OK on success; on failure the return code
 * classifies the error and surgseg_last_error() (thread-local) carries the
 * message. Handles are created/destroyed in matched pairs and are not
 * thread-safe individually.
 */
#ifndef SURGSEG_H
#define SURGSEG_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SURGSEG_API __declspec(dllexport)
#else
#define SURGSEG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum surgseg_status {
    SURGSEG_OK = 0,
    SURGSEG_ERROR_INVALID_ARGUMENT = 1,
    SURGSEG_ERROR_PARSE = 2,
    SURGSEG_ERROR_INTEGRITY = 3,
    SURGSEG_ERROR_IO = 4,
    SURGSEG_ERROR_CAPABILITY = 5,
    SURGSEG_ERROR_RUNTIME = 6
} surgseg_status;

SURGSEG_API const char* surgseg_version(void);
/* Message of the last failure on this thread; empty string when none. */
SURGSEG_API const char* surgseg_last_error(void);

/* ---- mask utilities ------------------------------------------------- */

/* Column-major RLE (alternating counts, background first) to a row-major
 * 0/1 bitmap of width*height bytes. */
SURGSEG_API surgseg_status surgseg_rle_decode(const uint64_t* counts, size_t count_len,
                                              uint32_t width, uint32_t height,
                                              uint8_t* bitmap_out);
/* Inverse of surgseg_rle_decode. *count_len is in/out: capacity in, number
 * of runs out. Fails with INVALID_ARGUMENT when the capacity is too small
 * (required length is still written to *count_len). */
SURGSEG_API surgseg_status surgseg_rle_encode(const uint8_t* bitmap, uint32_t width,
                                              uint32_t height, uint64_t* counts_out,
                                              size_t* count_len);

/* iou / dice / mae between two bitmaps; any out pointer may be NULL. */
SURGSEG_API surgseg_status surgseg_mask_metrics(const uint8_t* pred, const uint8_t* gt,
                                                uint32_t width, uint32_t height, double* iou_out,
                                                double* dice_out, double* mae_out);

/* ---- datasets -------------------------------------------------------- */

typedef struct surgseg_dataset surgseg_dataset;

SURGSEG_API surgseg_status surgseg_dataset_load_coco(const char* json_path,
                                                     const char* image_root,
                                                     surgseg_dataset** out);
/* Deterministic synthetic dataset from a JSON spec (see docs). */
SURGSEG_API surgseg_status surgseg_dataset_synthetic(const char* spec_json,
                                                     surgseg_dataset** out);
SURGSEG_API surgseg_status surgseg_dataset_video_count(const surgseg_dataset* dataset,
                                                       size_t* out);
SURGSEG_API surgseg_status surgseg_dataset_video_id(const surgseg_dataset* dataset, size_t index,
                                                    const char** out);
SURGSEG_API void surgseg_dataset_free(surgseg_dataset* dataset);

/* ---- mock segmenter sessions ----------------------------------------- */

typedef struct surgseg_session surgseg_session;

typedef struct surgseg_drift_params {
    double dx;
    double dy;
    double erosion_rate;
    int dropout_after; /* <= 0 means none */
} surgseg_drift_params;

SURGSEG_API surgseg_status surgseg_mock_session_open(const surgseg_dataset* dataset,
                                                     const char* video_id,
                                                     const surgseg_drift_params* drift,
                                                     surgseg_session** out);
/* Prompts stage into the session and seed together on commit. */
SURGSEG_API surgseg_status surgseg_session_stage_point(surgseg_session* session, int32_t frame,
                                                       int32_t object_id, int32_t x, int32_t y,
                                                       int32_t label);
SURGSEG_API surgseg_status surgseg_session_stage_box(surgseg_session* session, int32_t frame,
                                                     int32_t object_id, int32_t x_min,
                                                     int32_t y_min, int32_t x_max, int32_t y_max);
SURGSEG_API surgseg_status surgseg_session_stage_mask(surgseg_session* session, int32_t frame,
                                                      int32_t object_id, const uint64_t* counts,
                                                      size_t count_len, uint32_t width,
                                                      uint32_t height);
SURGSEG_API surgseg_status surgseg_session_commit_prompts(surgseg_session* session);
/* Ground-truth prompts for every object on the frame, per strategy
 * ("center_point", "random_points", "box", "mask"), staged + committed. */
SURGSEG_API surgseg_status surgseg_session_seed_from_gt(surgseg_session* session, int32_t frame,
                                                        const char* strategy, int32_t points,
                                                        uint64_t seed);
SURGSEG_API surgseg_status surgseg_session_propagate(surgseg_session* session, int32_t frame,
                                                     size_t* object_count);
/* After propagate: masks for the frame, indexed 0..object_count-1. The
 * bitmap buffer must hold width*height bytes (frame resolution). */
SURGSEG_API surgseg_status surgseg_session_mask_at(surgseg_session* session, size_t index,
                                                   int32_t* object_id, uint8_t* bitmap_out,
                                                   size_t bitmap_len);
SURGSEG_API surgseg_status surgseg_session_reset(surgseg_session* session);
SURGSEG_API void surgseg_session_free(surgseg_session* session);

/* ---- experiment verbs (the CLI surface) ------------------------------ */

typedef struct surgseg_experiment surgseg_experiment;

SURGSEG_API surgseg_status surgseg_experiment_load(const char* config_path,
                                                   surgseg_experiment** out);
/* OK when valid; INVALID_ARGUMENT with the newline-joined problem list in
 * surgseg_last_error() otherwise. */
SURGSEG_API surgseg_status surgseg_experiment_validate(const surgseg_experiment* experiment);
SURGSEG_API surgseg_status surgseg_experiment_cell_count(const surgseg_experiment* experiment,
                                                         size_t* out);
/* Runs the matrix into bundle_dir (empty = config output_dir). filter is a
 * substring over cell keys; seed_override replaces the config seeds when
 * nonzero has_override. failed_out receives the failed-cell count. */
SURGSEG_API surgseg_status surgseg_experiment_run(const surgseg_experiment* experiment,
                                                  const char* bundle_dir, const char* filter,
                                                  int has_seed_override, uint64_t seed_override,
                                                  size_t* failed_out);
SURGSEG_API surgseg_status surgseg_experiment_report(const char* bundle_dir, const char* format);
SURGSEG_API surgseg_status surgseg_experiment_finetune(const surgseg_experiment* experiment,
                                                       const char* out_dir);
SURGSEG_API surgseg_status surgseg_experiment_sweep(const surgseg_experiment* experiment,
                                                    const char* out_dir);
SURGSEG_API void surgseg_experiment_free(surgseg_experiment* experiment);

#ifdef __cplusplus
}
#endif

#endif /* SURGSEG_H */
