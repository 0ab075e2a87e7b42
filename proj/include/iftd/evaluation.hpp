#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iftd/bev_projection.hpp"
#include "iftd/descriptor_database.hpp"
#include "iftd/keypoint_detection.hpp"
#include "iftd/loop_verification.hpp"
#include "iftd/pointcloud_io.hpp"

namespace iftd {

// Per-keyframe settings shared by the online detector and the evaluator.
struct PipelineConfig
{
    BevConfig bev;
    ShiTomasiConfig keypoint;
    int knn = kDefaultNeighbors;
    DatabaseConfig database;
    VerificationConfig verify;

    void validate() const;
};

struct EvalConfig
{
    std::filesystem::path dataset_root;
    ScanFormat scan_format = ScanFormat::KittiBin;
    std::filesystem::path pose_file;
    PoseFormat pose_format = PoseFormat::Kitti12Col;
    int keyframe_stride = 5;
    double gt_distance_threshold = 15.0;
    std::vector<double> sweep = default_sweep();
    // 0 processes every keyframe.
    std::size_t max_keyframes = 0;
    // Writes the timing columns of loops.csv / detections.csv as zero so
    // repeated runs are byte-identical. timing.csv always has real values.
    bool deterministic_output = false;
    PipelineConfig pipeline;

    static std::vector<double> default_sweep();
    void validate() const;
};

// Flat "key = value" text, '#' comments. Relative paths resolve against the
// file's directory. Unknown keys and bad values throw ConfigError.
EvalConfig load_eval_config(const std::filesystem::path& path);
void apply_setting(EvalConfig& config, const std::string& key, const std::string& value,
                   const std::filesystem::path& base_dir = {});
std::string get_setting(const EvalConfig& config, const std::string& key);
std::vector<std::string> setting_keys();

struct StageTimings
{
    double extraction_ms = 0.0;
    double query_ms = 0.0;
    double total_ms = 0.0;
};

// Best candidate of one query keyframe that cleared the Dnum/Vnum gate.
struct LoopCandidate
{
    std::int64_t match_frame = 0;
    VerificationResult verification;
};

struct KeyframeOutcome
{
    std::int64_t frame_id = 0;
    std::size_t keypoints = 0;
    std::size_t descriptors = 0;
    std::size_t candidates = 0;
    std::optional<LoopCandidate> best;
    bool accepted = false;
    StageTimings timings;
};

// Online loop detector: feed keyframes in increasing frame order.
// Not thread-safe; one writer drives it.
class LoopDetector
{
public:
    explicit LoopDetector(PipelineConfig config);

    KeyframeOutcome process(const PointCloud& keyframe);

    const PipelineConfig& config() const { return config_; }
    const DescriptorDatabase& database() const { return database_; }
    std::size_t keyframe_count() const { return frames_.size(); }
    const KeyframeBundle* keyframe(std::int64_t frame_id) const;

private:
    PipelineConfig config_;
    DescriptorDatabase database_;
    std::map<std::int64_t, KeyframeBundle> frames_;
};

struct LoopResult
{
    std::int64_t query_frame = 0;
    std::int64_t match_frame = 0;
    PoseTransform transform;
    double similarity = 0.0;
    StageTimings timings;
};

struct Detection
{
    LoopResult loop;
    bool true_positive = false;
};

struct PrPoint
{
    double threshold = 0.0;
    std::optional<double> precision; // nullopt when nothing is detected
    std::optional<double> recall;    // nullopt when there are no opportunities
    double f1 = 0.0;
};

struct ScoredDetection
{
    double similarity = 0.0;
    bool true_positive = false;
};

// precision = TP(F >= t) / Det(F >= t), recall = TP(F >= t) / opportunities.
std::vector<PrPoint> compute_pr(std::span<const ScoredDetection> detections, std::size_t opportunities,
                                std::span<const double> thresholds);

// Query keyframes with at least one eligible (frame <= q - exclusion_window)
// earlier keyframe within distance_threshold.
std::size_t count_loop_opportunities(std::span<const Eigen::Vector3d> positions, int exclusion_window,
                                     double distance_threshold);

struct TimingSummary
{
    std::size_t keyframes = 0;
    double mean_extraction_ms = 0.0;
    double mean_query_ms = 0.0;
    double mean_total_ms = 0.0;
    double max_total_ms = 0.0;
};

struct SequenceResult
{
    std::vector<KeyframeOutcome> keyframes;
    std::vector<Detection> detections; // best gated candidate per query, any F
    std::vector<LoopResult> loops;     // detections with F > sim_threshold
    std::vector<PrPoint> pr_curve;
    std::size_t opportunities = 0;
    TimingSummary timing;
};

// Loads scans and poses, accumulates keyframes and runs the detector over the
// whole sequence. Throws ArgumentError on an empty sequence and
// ValidationError when poses are missing.
SequenceResult run_sequence(const EvalConfig& config);

// Ground-truth scoring of raw outcomes against keyframe positions.
SequenceResult score_sequence(std::vector<KeyframeOutcome> outcomes,
                              std::span<const Eigen::Vector3d> positions, const EvalConfig& config);

// loops.csv, detections.csv, pr_curve.csv, timing.csv and summary.txt.
void emit_reports(const SequenceResult& result, const EvalConfig& config,
                  const std::filesystem::path& out_dir);

void write_loops_csv(const std::filesystem::path& path, std::span<const LoopResult> loops,
                     bool zero_timings);
std::vector<LoopResult> read_loops_csv(const std::filesystem::path& path);
void write_pr_csv(const std::filesystem::path& path, std::span<const PrPoint> points);

struct PrRecomputeOptions
{
    PoseFormat pose_format = PoseFormat::Kitti12Col;
    int keyframe_stride = 5;
    int exclusion_window = 30;
    double gt_distance_threshold = 15.0;
    std::vector<double> thresholds = EvalConfig::default_sweep();
    // 0 derives the keyframe count from the pose file.
    std::size_t keyframe_count = 0;
};

// PR curve from a previously written loops/detections CSV and a pose file.
std::vector<PrPoint> recompute_pr(const std::filesystem::path& loops_csv,
                                  const std::filesystem::path& pose_file,
                                  const PrRecomputeOptions& options);

} // namespace iftd
