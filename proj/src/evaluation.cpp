#include "iftd/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "iftd/error.hpp"

namespace iftd {

namespace {

std::string fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string optional_fixed(const std::optional<double>& v)
{
    return v ? fixed(*v, 6) : std::string("n/a");
}

std::vector<std::filesystem::path> list_scans(const std::filesystem::path& root, ScanFormat format)
{
    std::error_code ec;
    if (!std::filesystem::is_directory(root, ec))
        throw IoError("dataset_root '" + root.string() + "' is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (!entry.is_regular_file())
            continue;
        const auto ext = entry.path().extension().string();
        bool match = format == ScanFormat::KittiBin ? ext == ".bin" : (ext == ".xyz" || ext == ".txt");
        if (match)
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::ofstream open_output(const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write '" + path.string() + "'");
    return out;
}

void check_written(const std::ofstream& out, const std::filesystem::path& path)
{
    if (!out)
        throw IoError("write failed on '" + path.string() + "'");
}

const char* kLoopsHeader = "query_kf,match_kf,F,yaw_rad,tx,ty,tz,extraction_ms,query_ms,total_ms";

} // namespace

std::vector<PrPoint> compute_pr(std::span<const ScoredDetection> detections, std::size_t opportunities,
                                std::span<const double> thresholds)
{
    std::vector<PrPoint> out;
    out.reserve(thresholds.size());
    for (double t : thresholds) {
        std::size_t detected = 0, tp = 0;
        for (const auto& d : detections) {
            if (d.similarity >= t) {
                ++detected;
                if (d.true_positive)
                    ++tp;
            }
        }
        PrPoint p;
        p.threshold = t;
        if (detected > 0)
            p.precision = static_cast<double>(tp) / static_cast<double>(detected);
        if (opportunities > 0)
            p.recall = static_cast<double>(tp) / static_cast<double>(opportunities);
        double pr = p.precision.value_or(0.0), rc = p.recall.value_or(0.0);
        p.f1 = pr + rc > 0.0 ? 2.0 * pr * rc / (pr + rc) : 0.0;
        out.push_back(p);
    }
    return out;
}

std::size_t count_loop_opportunities(std::span<const Eigen::Vector3d> positions, int exclusion_window,
                                     double distance_threshold)
{
    std::size_t count = 0;
    const double limit = distance_threshold * distance_threshold;
    for (std::size_t q = 0; q < positions.size(); ++q) {
        const auto newest = static_cast<std::ptrdiff_t>(q) - exclusion_window;
        for (std::ptrdiff_t p = 0; p <= newest; ++p) {
            if ((positions[q] - positions[static_cast<std::size_t>(p)]).squaredNorm() <= limit) {
                ++count;
                break;
            }
        }
    }
    return count;
}

SequenceResult score_sequence(std::vector<KeyframeOutcome> outcomes,
                              std::span<const Eigen::Vector3d> positions, const EvalConfig& config)
{
    SequenceResult result;
    result.keyframes = std::move(outcomes);
    const double th_sim = config.pipeline.verify.sim_threshold;

    auto position = [&](std::int64_t id) -> const Eigen::Vector3d& {
        if (id < 0 || static_cast<std::size_t>(id) >= positions.size())
            throw ValidationError("no pose for keyframe " + std::to_string(id));
        return positions[static_cast<std::size_t>(id)];
    };

    std::vector<ScoredDetection> scored;
    for (const auto& kf : result.keyframes) {
        if (!kf.best)
            continue;
        Detection d;
        d.loop.query_frame = kf.frame_id;
        d.loop.match_frame = kf.best->match_frame;
        d.loop.transform = kf.best->verification.transform;
        d.loop.similarity = kf.best->verification.similarity;
        d.loop.timings = kf.timings;
        d.true_positive = (position(d.loop.query_frame) - position(d.loop.match_frame)).norm() <=
                          config.gt_distance_threshold;
        if (d.loop.similarity > th_sim)
            result.loops.push_back(d.loop);
        scored.push_back({d.loop.similarity, d.true_positive});
        result.detections.push_back(d);
    }

    result.opportunities = count_loop_opportunities(
        positions.first(std::min(positions.size(), result.keyframes.size())),
        config.pipeline.database.exclusion_window, config.gt_distance_threshold);
    result.pr_curve = compute_pr(scored, result.opportunities, config.sweep);

    auto& t = result.timing;
    t.keyframes = result.keyframes.size();
    for (const auto& kf : result.keyframes) {
        t.mean_extraction_ms += kf.timings.extraction_ms;
        t.mean_query_ms += kf.timings.query_ms;
        t.mean_total_ms += kf.timings.total_ms;
        t.max_total_ms = std::max(t.max_total_ms, kf.timings.total_ms);
    }
    if (t.keyframes > 0) {
        t.mean_extraction_ms /= static_cast<double>(t.keyframes);
        t.mean_query_ms /= static_cast<double>(t.keyframes);
        t.mean_total_ms /= static_cast<double>(t.keyframes);
    }
    return result;
}

SequenceResult run_sequence(const EvalConfig& config)
{
    config.validate();
    const auto scans = list_scans(config.dataset_root, config.scan_format);
    if (scans.empty())
        throw ArgumentError("no scans found under '" + config.dataset_root.string() + "'");
    const auto poses = load_poses(config.pose_file, config.pose_format);
    if (poses.size() < scans.size())
        throw ValidationError("'" + config.pose_file.string() + "' has " + std::to_string(poses.size()) +
                              " poses for " + std::to_string(scans.size()) + " scans");

    const std::size_t stride = static_cast<std::size_t>(config.keyframe_stride);
    std::size_t keyframe_total = (scans.size() + stride - 1) / stride;
    if (config.max_keyframes > 0)
        keyframe_total = std::min(keyframe_total, config.max_keyframes);

    LoopDetector detector(config.pipeline);
    std::vector<KeyframeOutcome> outcomes;
    std::vector<Eigen::Vector3d> positions;
    outcomes.reserve(keyframe_total);
    for (std::size_t k = 0; k < keyframe_total; ++k) {
        const std::size_t first = k * stride;
        const std::size_t last = std::min(first + stride, scans.size());
        std::vector<PointCloud> group;
        for (std::size_t s = first; s < last; ++s) {
            group.push_back(load_scan(scans[s], config.scan_format));
            group.back().frame_id = static_cast<std::int64_t>(s);
        }
        const std::span<const PoseRecord> group_poses(poses.data() + first, last - first);
        PointCloud keyframe = accumulate_keyframe(group, group_poses, config.keyframe_stride);
        positions.push_back(poses[first].translation);
        outcomes.push_back(detector.process(keyframe));
    }
    return score_sequence(std::move(outcomes), positions, config);
}

void write_loops_csv(const std::filesystem::path& path, std::span<const LoopResult> loops,
                     bool zero_timings)
{
    auto out = open_output(path);
    out << kLoopsHeader << '\n';
    for (const auto& l : loops) {
        StageTimings t = zero_timings ? StageTimings{} : l.timings;
        out << l.query_frame << ',' << l.match_frame << ',' << fixed(l.similarity, 6) << ','
            << fixed(l.transform.yaw, 6) << ',' << fixed(l.transform.tx, 6) << ','
            << fixed(l.transform.ty, 6) << ',' << fixed(l.transform.tz, 6) << ','
            << fixed(t.extraction_ms, 3) << ',' << fixed(t.query_ms, 3) << ',' << fixed(t.total_ms, 3)
            << '\n';
    }
    check_written(out, path);
}

std::vector<LoopResult> read_loops_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || line.rfind("query_kf,match_kf,F", 0) != 0)
        throw FormatError("'" + path.string() + "' does not start with the loops.csv header");

    std::vector<LoopResult> loops;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() != 10)
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 10 columns");
        try {
            LoopResult l;
            l.query_frame = std::stoll(cells[0]);
            l.match_frame = std::stoll(cells[1]);
            l.similarity = std::stod(cells[2]);
            l.transform.yaw = std::stod(cells[3]);
            l.transform.tx = std::stod(cells[4]);
            l.transform.ty = std::stod(cells[5]);
            l.transform.tz = std::stod(cells[6]);
            l.timings = {std::stod(cells[7]), std::stod(cells[8]), std::stod(cells[9])};
            loops.push_back(l);
        } catch (const std::exception&) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
        }
    }
    return loops;
}

void write_pr_csv(const std::filesystem::path& path, std::span<const PrPoint> points)
{
    auto out = open_output(path);
    out << "threshold,precision,recall,f1\n";
    for (const auto& p : points)
        out << fixed(p.threshold, 6) << ',' << optional_fixed(p.precision) << ','
            << optional_fixed(p.recall) << ',' << fixed(p.f1, 6) << '\n';
    check_written(out, path);
}

void emit_reports(const SequenceResult& result, const EvalConfig& config,
                  const std::filesystem::path& out_dir)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

    write_loops_csv(out_dir / "loops.csv", result.loops, config.deterministic_output);
    std::vector<LoopResult> detections;
    for (const auto& d : result.detections)
        detections.push_back(d.loop);
    write_loops_csv(out_dir / "detections.csv", detections, config.deterministic_output);
    write_pr_csv(out_dir / "pr_curve.csv", result.pr_curve);

    {
        const auto path = out_dir / "timing.csv";
        auto out = open_output(path);
        out << "keyframe,keypoints,descriptors,candidates,extraction_ms,query_ms,total_ms\n";
        for (const auto& kf : result.keyframes)
            out << kf.frame_id << ',' << kf.keypoints << ',' << kf.descriptors << ',' << kf.candidates
                << ',' << fixed(kf.timings.extraction_ms, 3) << ',' << fixed(kf.timings.query_ms, 3)
                << ',' << fixed(kf.timings.total_ms, 3) << '\n';
        check_written(out, path);
    }

    {
        std::size_t tp = 0;
        for (const auto& d : result.detections)
            if (d.true_positive && d.loop.similarity > config.pipeline.verify.sim_threshold)
                ++tp;
        std::optional<double> precision, recall;
        if (!result.loops.empty())
            precision = static_cast<double>(tp) / static_cast<double>(result.loops.size());
        if (result.opportunities > 0)
            recall = static_cast<double>(tp) / static_cast<double>(result.opportunities);
        const PrPoint* best = nullptr;
        for (const auto& p : result.pr_curve)
            if (!best || p.f1 > best->f1)
                best = &p;

        const auto path = out_dir / "summary.txt";
        auto out = open_output(path);
        out << "keyframes: " << result.keyframes.size() << '\n'
            << "loop_opportunities: " << result.opportunities << '\n'
            << "detections: " << result.detections.size() << '\n'
            << "loops (F > " << fixed(config.pipeline.verify.sim_threshold, 3) << "): " << result.loops.size() << '\n'
            << "true_positives: " << tp << '\n'
            << "precision: " << optional_fixed(precision) << '\n'
            << "recall: " << optional_fixed(recall) << '\n';
        if (best)
            out << "best_f1: " << fixed(best->f1, 6) << " at threshold " << fixed(best->threshold, 6) << '\n';
        out << "mean_extraction_ms: " << fixed(result.timing.mean_extraction_ms, 3) << '\n'
            << "mean_query_ms: " << fixed(result.timing.mean_query_ms, 3) << '\n'
            << "mean_total_ms: " << fixed(result.timing.mean_total_ms, 3) << '\n'
            << "max_total_ms: " << fixed(result.timing.max_total_ms, 3) << '\n';
        check_written(out, path);
    }
}

std::vector<PrPoint> recompute_pr(const std::filesystem::path& loops_csv,
                                  const std::filesystem::path& pose_file,
                                  const PrRecomputeOptions& options)
{
    if (options.keyframe_stride < 1)
        throw ConfigError("keyframe_stride must be >= 1");
    if (!(options.gt_distance_threshold > 0.0))
        throw ConfigError("gt_distance_threshold must be > 0");
    const auto loops = read_loops_csv(loops_csv);
    const auto poses = load_poses(pose_file, options.pose_format);
    const auto stride = static_cast<std::size_t>(options.keyframe_stride);

    std::size_t keyframes = options.keyframe_count;
    if (keyframes == 0)
        keyframes = (poses.size() + stride - 1) / stride;
    std::vector<Eigen::Vector3d> positions;
    for (std::size_t k = 0; k < keyframes; ++k) {
        if (k * stride >= poses.size())
            throw ValidationError("pose file has no pose for keyframe " + std::to_string(k));
        positions.push_back(poses[k * stride].translation);
    }

    std::vector<ScoredDetection> scored;
    for (const auto& l : loops) {
        for (auto id : {l.query_frame, l.match_frame})
            if (id < 0 || static_cast<std::size_t>(id) >= positions.size())
                throw ValidationError("no pose for keyframe " + std::to_string(id));
        double d = (positions[static_cast<std::size_t>(l.query_frame)] -
                    positions[static_cast<std::size_t>(l.match_frame)]).norm();
        scored.push_back({l.similarity, d <= options.gt_distance_threshold});
    }
    const auto opportunities =
        count_loop_opportunities(positions, options.exclusion_window, options.gt_distance_threshold);
    return compute_pr(scored, opportunities, options.thresholds);
}

} // namespace iftd
