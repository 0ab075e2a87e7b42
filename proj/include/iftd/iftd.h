/*
 * C interface to the IFTD loop-detection library.
 *
 * Every function returns an iftd_status; on failure a thread-local message
 * is available from iftd_last_error() until the next call on that thread.
 * Objects are opaque handles released with the matching *_destroy call.
 */
#ifndef IFTD_IFTD_H
#define IFTD_IFTD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(IFTD_BUILDING_LIBRARY)
#    define IFTD_API __declspec(dllexport)
#  else
#    define IFTD_API __declspec(dllimport)
#  endif
#else
#  define IFTD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum iftd_status {
    IFTD_OK = 0,
    IFTD_ERROR_ARGUMENT = 1,
    IFTD_ERROR_IO = 2,
    IFTD_ERROR_FORMAT = 3,
    IFTD_ERROR_VALIDATION = 4,
    IFTD_ERROR_CONFIG = 5,
    IFTD_ERROR_DEGENERATE = 6,
    IFTD_ERROR_BUFFER_TOO_SMALL = 7,
    IFTD_ERROR_INTERNAL = 8
} iftd_status;

IFTD_API const char* iftd_version(void);
IFTD_API const char* iftd_status_string(iftd_status status);
IFTD_API const char* iftd_last_error(void);

/* ---- configuration --------------------------------------------------- */

typedef struct iftd_config iftd_config;

/* Defaults for every key. */
IFTD_API iftd_status iftd_config_create(iftd_config** out);
/* Flat "key = value" file; relative paths resolve against its directory. */
IFTD_API iftd_status iftd_config_load(const char* path, iftd_config** out);
IFTD_API iftd_status iftd_config_set(iftd_config* config, const char* key, const char* value);
/* Copies the value as text, NUL-terminated. *required (if non-null) receives
 * the buffer size needed including the terminator. */
IFTD_API iftd_status iftd_config_get(const iftd_config* config, const char* key, char* buffer,
                                     size_t capacity, size_t* required);
IFTD_API iftd_status iftd_config_validate(const iftd_config* config);
IFTD_API void iftd_config_destroy(iftd_config* config);

/* ---- batch evaluation ------------------------------------------------ */

typedef struct iftd_run_summary {
    size_t keyframes;
    size_t opportunities;
    size_t detections;
    size_t loops;
    size_t true_positives;
    double precision; /* NaN when no loops were reported */
    double recall;    /* NaN when there are no loop opportunities */
    double best_f1;
    double best_f1_threshold;
    double mean_extraction_ms;
    double mean_query_ms;
    double mean_total_ms;
    double max_total_ms;
} iftd_run_summary;

/* Runs the whole sequence described by the config and writes loops.csv,
 * detections.csv, pr_curve.csv, timing.csv and summary.txt into out_dir.
 * summary may be null. */
IFTD_API iftd_status iftd_run_sequence(const iftd_config* config, const char* out_dir,
                                       iftd_run_summary* summary);

typedef struct iftd_pr_point {
    double threshold;
    double precision; /* NaN when undefined */
    double recall;    /* NaN when undefined */
    double f1;
} iftd_pr_point;

typedef struct iftd_pr_options {
    const char* pose_format; /* "kitti_12col" or "tum_8col"; null = kitti_12col */
    int keyframe_stride;
    int exclusion_window;
    double gt_distance_threshold;
    const double* thresholds; /* null = default sweep */
    size_t threshold_count;
    size_t keyframe_count; /* 0 = derive from the pose file */
} iftd_pr_options;

IFTD_API void iftd_pr_options_default(iftd_pr_options* options);

/* Recomputes a PR curve from a loops/detections CSV. Writes out_csv when
 * non-null and fills points (up to capacity); *count receives the number of
 * thresholds. */
IFTD_API iftd_status iftd_recompute_pr(const char* loops_csv, const char* pose_file,
                                       const iftd_pr_options* options, const char* out_csv,
                                       iftd_pr_point* points, size_t capacity, size_t* count);

/* Projects one scan with the config's BEV settings (defaults when config is
 * null) and writes a binary PGM. */
IFTD_API iftd_status iftd_dump_bev(const char* scan_path, const char* scan_format,
                                   const iftd_config* config, const char* pgm_path);

/* ---- online detection ------------------------------------------------ */

typedef struct iftd_detector iftd_detector;

typedef struct iftd_loop {
    int found;    /* a candidate cleared the geometric gate */
    int accepted; /* and its similarity exceeded the threshold */
    int64_t query_frame;
    int64_t match_frame;
    double similarity;
    double yaw;
    double tx;
    double ty;
    double tz;
    size_t dnum;
    size_t vnum;
    double extraction_ms;
    double query_ms;
    double total_ms;
} iftd_loop;

IFTD_API iftd_status iftd_detector_create(const iftd_config* config, iftd_detector** out);
/* xyz holds point_count interleaved x,y,z floats in the keyframe's frame.
 * frame_id must increase from call to call. out may be null. */
IFTD_API iftd_status iftd_detector_add_keyframe(iftd_detector* detector, int64_t frame_id,
                                                const float* xyz, size_t point_count, iftd_loop* out);
IFTD_API size_t iftd_detector_keyframe_count(const iftd_detector* detector);
IFTD_API iftd_status iftd_detector_save_database(const iftd_detector* detector, const char* path);
IFTD_API void iftd_detector_destroy(iftd_detector* detector);

#ifdef __cplusplus
}
#endif

#endif /* IFTD_IFTD_H */
