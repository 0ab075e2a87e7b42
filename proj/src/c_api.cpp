#include "iftd/iftd.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <new>
#include <string>

#include "iftd/error.hpp"
#include "iftd/evaluation.hpp"

struct iftd_config
{
    iftd::EvalConfig config;
};

struct iftd_detector
{
    explicit iftd_detector(const iftd::PipelineConfig& c) : detector(c) {}
    iftd::LoopDetector detector;
};

namespace {

thread_local std::string g_last_error;

iftd_status to_status(iftd::ErrorCode code)
{
    switch (code) {
    case iftd::ErrorCode::Argument:
        return IFTD_ERROR_ARGUMENT;
    case iftd::ErrorCode::Io:
        return IFTD_ERROR_IO;
    case iftd::ErrorCode::Format:
        return IFTD_ERROR_FORMAT;
    case iftd::ErrorCode::Validation:
        return IFTD_ERROR_VALIDATION;
    case iftd::ErrorCode::Config:
        return IFTD_ERROR_CONFIG;
    case iftd::ErrorCode::DegenerateGeometry:
        return IFTD_ERROR_DEGENERATE;
    }
    return IFTD_ERROR_INTERNAL;
}

template <typename Body>
iftd_status guarded(Body&& body)
{
    g_last_error.clear();
    try {
        body();
        return IFTD_OK;
    } catch (const iftd::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
    } catch (const std::exception& e) {
        g_last_error = e.what();
    } catch (...) {
        g_last_error = "unknown error";
    }
    return IFTD_ERROR_INTERNAL;
}

void require(bool ok, const char* what)
{
    if (!ok)
        throw iftd::ArgumentError(what);
}

double or_nan(const std::optional<double>& v)
{
    return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

} // namespace

extern "C" {

const char* iftd_version(void)
{
    return "1.0.0";
}

const char* iftd_status_string(iftd_status status)
{
    switch (status) {
    case IFTD_OK:
        return "ok";
    case IFTD_ERROR_ARGUMENT:
        return "invalid argument";
    case IFTD_ERROR_IO:
        return "I/O error";
    case IFTD_ERROR_FORMAT:
        return "format error";
    case IFTD_ERROR_VALIDATION:
        return "validation error";
    case IFTD_ERROR_CONFIG:
        return "configuration error";
    case IFTD_ERROR_DEGENERATE:
        return "degenerate geometry";
    case IFTD_ERROR_BUFFER_TOO_SMALL:
        return "buffer too small";
    case IFTD_ERROR_INTERNAL:
        return "internal error";
    }
    return "unknown status";
}

const char* iftd_last_error(void)
{
    return g_last_error.c_str();
}

iftd_status iftd_config_create(iftd_config** out)
{
    return guarded([&] {
        require(out != nullptr, "out is null");
        *out = new iftd_config{};
    });
}

iftd_status iftd_config_load(const char* path, iftd_config** out)
{
    return guarded([&] {
        require(path != nullptr && out != nullptr, "path and out must be non-null");
        auto cfg = std::make_unique<iftd_config>();
        cfg->config = iftd::load_eval_config(path);
        *out = cfg.release();
    });
}

iftd_status iftd_config_set(iftd_config* config, const char* key, const char* value)
{
    return guarded([&] {
        require(config && key && value, "config, key and value must be non-null");
        iftd::apply_setting(config->config, key, value);
    });
}

iftd_status iftd_config_get(const iftd_config* config, const char* key, char* buffer,
                            size_t capacity, size_t* required)
{
    std::string value;
    iftd_status st = guarded([&] {
        require(config && key, "config and key must be non-null");
        value = iftd::get_setting(config->config, key);
    });
    if (st != IFTD_OK)
        return st;
    if (required)
        *required = value.size() + 1;
    if (!buffer || capacity < value.size() + 1) {
        g_last_error = "buffer too small for '" + std::string(key) + "'";
        return IFTD_ERROR_BUFFER_TOO_SMALL;
    }
    std::memcpy(buffer, value.c_str(), value.size() + 1);
    return IFTD_OK;
}

iftd_status iftd_config_validate(const iftd_config* config)
{
    return guarded([&] {
        require(config != nullptr, "config is null");
        config->config.validate();
    });
}

void iftd_config_destroy(iftd_config* config)
{
    delete config;
}

iftd_status iftd_run_sequence(const iftd_config* config, const char* out_dir, iftd_run_summary* summary)
{
    return guarded([&] {
        require(config && out_dir, "config and out_dir must be non-null");
        const auto& cfg = config->config;
        auto result = iftd::run_sequence(cfg);
        iftd::emit_reports(result, cfg, out_dir);
        if (!summary)
            return;
        iftd_run_summary s{};
        s.keyframes = result.keyframes.size();
        s.opportunities = result.opportunities;
        s.detections = result.detections.size();
        s.loops = result.loops.size();
        for (const auto& d : result.detections)
            if (d.true_positive && d.loop.similarity > cfg.pipeline.verify.sim_threshold)
                ++s.true_positives;
        s.precision = s.loops ? static_cast<double>(s.true_positives) / static_cast<double>(s.loops)
                              : std::numeric_limits<double>::quiet_NaN();
        s.recall = s.opportunities
                       ? static_cast<double>(s.true_positives) / static_cast<double>(s.opportunities)
                       : std::numeric_limits<double>::quiet_NaN();
        s.best_f1 = 0.0;
        s.best_f1_threshold = result.pr_curve.empty() ? 0.0 : result.pr_curve.front().threshold;
        for (const auto& p : result.pr_curve)
            if (p.f1 > s.best_f1) {
                s.best_f1 = p.f1;
                s.best_f1_threshold = p.threshold;
            }
        s.mean_extraction_ms = result.timing.mean_extraction_ms;
        s.mean_query_ms = result.timing.mean_query_ms;
        s.mean_total_ms = result.timing.mean_total_ms;
        s.max_total_ms = result.timing.max_total_ms;
        *summary = s;
    });
}

void iftd_pr_options_default(iftd_pr_options* options)
{
    if (!options)
        return;
    iftd::PrRecomputeOptions d;
    *options = iftd_pr_options{};
    options->pose_format = "kitti_12col";
    options->keyframe_stride = d.keyframe_stride;
    options->exclusion_window = d.exclusion_window;
    options->gt_distance_threshold = d.gt_distance_threshold;
    options->thresholds = nullptr;
    options->threshold_count = 0;
    options->keyframe_count = 0;
}

iftd_status iftd_recompute_pr(const char* loops_csv, const char* pose_file,
                              const iftd_pr_options* options, const char* out_csv,
                              iftd_pr_point* points, size_t capacity, size_t* count)
{
    std::vector<iftd::PrPoint> curve;
    iftd_status st = guarded([&] {
        require(loops_csv && pose_file, "loops_csv and pose_file must be non-null");
        iftd::PrRecomputeOptions opts;
        if (options) {
            if (options->pose_format)
                opts.pose_format = iftd::parse_pose_format(options->pose_format);
            opts.keyframe_stride = options->keyframe_stride;
            opts.exclusion_window = options->exclusion_window;
            opts.gt_distance_threshold = options->gt_distance_threshold;
            if (options->thresholds && options->threshold_count > 0)
                opts.thresholds.assign(options->thresholds, options->thresholds + options->threshold_count);
            opts.keyframe_count = options->keyframe_count;
        }
        curve = iftd::recompute_pr(loops_csv, pose_file, opts);
        if (out_csv)
            iftd::write_pr_csv(out_csv, curve);
    });
    if (st != IFTD_OK)
        return st;
    if (count)
        *count = curve.size();
    if (points) {
        for (size_t i = 0; i < curve.size() && i < capacity; ++i)
            points[i] = {curve[i].threshold, or_nan(curve[i].precision), or_nan(curve[i].recall), curve[i].f1};
        if (capacity < curve.size()) {
            g_last_error = "point buffer holds " + std::to_string(capacity) + " of " +
                           std::to_string(curve.size()) + " thresholds";
            return IFTD_ERROR_BUFFER_TOO_SMALL;
        }
    }
    return IFTD_OK;
}

iftd_status iftd_dump_bev(const char* scan_path, const char* scan_format, const iftd_config* config,
                          const char* pgm_path)
{
    return guarded([&] {
        require(scan_path && pgm_path, "scan_path and pgm_path must be non-null");
        const auto format = iftd::parse_scan_format(scan_format ? scan_format : "kitti_bin");
        const iftd::BevConfig bev = config ? config->config.pipeline.bev : iftd::BevConfig{};
        const auto cloud = iftd::load_scan(scan_path, format);
        iftd::write_pgm(pgm_path, iftd::project(cloud, bev));
    });
}

iftd_status iftd_detector_create(const iftd_config* config, iftd_detector** out)
{
    return guarded([&] {
        require(out != nullptr, "out is null");
        const iftd::PipelineConfig pipeline = config ? config->config.pipeline : iftd::PipelineConfig{};
        *out = new iftd_detector(pipeline);
    });
}

iftd_status iftd_detector_add_keyframe(iftd_detector* detector, int64_t frame_id, const float* xyz,
                                       size_t point_count, iftd_loop* out)
{
    return guarded([&] {
        require(detector != nullptr, "detector is null");
        require(xyz != nullptr || point_count == 0, "xyz is null");
        iftd::PointCloud cloud;
        cloud.frame_id = frame_id;
        cloud.points.reserve(point_count);
        for (size_t i = 0; i < point_count; ++i) {
            iftd::Point3 p(xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]);
            if (p.allFinite())
                cloud.points.push_back(p);
        }
        auto outcome = detector->detector.process(cloud);
        if (!out)
            return;
        iftd_loop l{};
        l.query_frame = outcome.frame_id;
        l.extraction_ms = outcome.timings.extraction_ms;
        l.query_ms = outcome.timings.query_ms;
        l.total_ms = outcome.timings.total_ms;
        if (outcome.best) {
            const auto& v = outcome.best->verification;
            l.found = 1;
            l.accepted = outcome.accepted ? 1 : 0;
            l.match_frame = outcome.best->match_frame;
            l.similarity = v.similarity;
            l.yaw = v.transform.yaw;
            l.tx = v.transform.tx;
            l.ty = v.transform.ty;
            l.tz = v.transform.tz;
            l.dnum = v.dnum_max;
            l.vnum = v.vnum_max;
        }
        *out = l;
    });
}

size_t iftd_detector_keyframe_count(const iftd_detector* detector)
{
    return detector ? detector->detector.keyframe_count() : 0;
}

iftd_status iftd_detector_save_database(const iftd_detector* detector, const char* path)
{
    return guarded([&] {
        require(detector && path, "detector and path must be non-null");
        detector->detector.database().save(path);
    });
}

void iftd_detector_destroy(iftd_detector* detector)
{
    delete detector;
}

} // extern "C"
