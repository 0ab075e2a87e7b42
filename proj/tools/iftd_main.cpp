// iftd command-line driver. Talks to the library only through iftd.h.

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iftd/iftd.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

int exit_code(iftd_status st)
{
    switch (st) {
    case IFTD_OK:
        return kExitOk;
    case IFTD_ERROR_CONFIG:
        return kExitConfig;
    case IFTD_ERROR_ARGUMENT:
    case IFTD_ERROR_IO:
    case IFTD_ERROR_FORMAT:
    case IFTD_ERROR_VALIDATION:
        return kExitData;
    default:
        return kExitFailure;
    }
}

int report(iftd_status st)
{
    if (st != IFTD_OK)
        std::fprintf(stderr, "iftd: %s: %s\n", iftd_status_string(st), iftd_last_error());
    return exit_code(st);
}

struct ConfigHandle
{
    iftd_config* ptr = nullptr;
    ~ConfigHandle() { iftd_config_destroy(ptr); }
};

std::string format_optional(double v)
{
    if (std::isnan(v))
        return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::optional<std::string> config_value(const iftd_config* cfg, const char* key)
{
    char buf[4096];
    if (iftd_config_get(cfg, key, buf, sizeof(buf), nullptr) != IFTD_OK)
        return std::nullopt;
    return std::string(buf);
}

std::vector<double> parse_sweep(const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(std::stod(item));
    return out;
}

int run_command(const std::string& config_path, const std::string& out_dir,
                const std::vector<std::string>& overrides, bool deterministic)
{
    ConfigHandle cfg;
    if (auto st = iftd_config_load(config_path.c_str(), &cfg.ptr); st != IFTD_OK)
        return report(st);
    for (const auto& kv : overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "iftd: --set expects key=value, got '%s'\n", kv.c_str());
            return kExitConfig;
        }
        if (auto st = iftd_config_set(cfg.ptr, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()); st != IFTD_OK)
            return report(st);
    }
    if (deterministic)
        iftd_config_set(cfg.ptr, "deterministic_output", "true");
    if (auto st = iftd_config_validate(cfg.ptr); st != IFTD_OK)
        return report(st);

    iftd_run_summary s{};
    if (auto st = iftd_run_sequence(cfg.ptr, out_dir.c_str(), &s); st != IFTD_OK)
        return report(st);

    std::printf("keyframes          %zu\n", s.keyframes);
    std::printf("loop opportunities %zu\n", s.opportunities);
    std::printf("loops reported     %zu (true positives %zu)\n", s.loops, s.true_positives);
    std::printf("precision          %s\n", format_optional(s.precision).c_str());
    std::printf("recall             %s\n", format_optional(s.recall).c_str());
    std::printf("best F1            %.4f at threshold %.3f\n", s.best_f1, s.best_f1_threshold);
    std::printf("mean ms/keyframe   extraction %.2f  query %.2f  total %.2f (max %.2f)\n",
                s.mean_extraction_ms, s.mean_query_ms, s.mean_total_ms, s.max_total_ms);
    std::printf("reports written to %s\n", out_dir.c_str());
    return kExitOk;
}

struct PrArgs
{
    std::string loops;
    std::string poses;
    std::string config;
    std::string out;
    std::optional<std::string> pose_format;
    std::optional<int> stride;
    std::optional<int> exclusion_window;
    std::optional<double> gt_distance;
    std::optional<std::string> sweep;
    std::size_t keyframes = 0;
};

int pr_command(const PrArgs& args)
{
    iftd_pr_options opts;
    iftd_pr_options_default(&opts);
    std::string pose_format = "kitti_12col";
    std::vector<double> thresholds;

    if (!args.config.empty()) {
        ConfigHandle cfg;
        if (auto st = iftd_config_load(args.config.c_str(), &cfg.ptr); st != IFTD_OK)
            return report(st);
        pose_format = config_value(cfg.ptr, "pose_format").value_or(pose_format);
        opts.keyframe_stride = std::stoi(config_value(cfg.ptr, "keyframe_stride").value());
        opts.exclusion_window = std::stoi(config_value(cfg.ptr, "database.exclusion_window").value());
        opts.gt_distance_threshold = std::stod(config_value(cfg.ptr, "gt_distance_threshold").value());
        thresholds = parse_sweep(config_value(cfg.ptr, "sweep").value());
    }
    if (args.pose_format)
        pose_format = *args.pose_format;
    if (args.stride)
        opts.keyframe_stride = *args.stride;
    if (args.exclusion_window)
        opts.exclusion_window = *args.exclusion_window;
    if (args.gt_distance)
        opts.gt_distance_threshold = *args.gt_distance;
    if (args.sweep) {
        try {
            thresholds = parse_sweep(*args.sweep);
        } catch (const std::exception&) {
            std::fprintf(stderr, "iftd: --sweep expects comma-separated numbers\n");
            return kExitConfig;
        }
    }
    opts.pose_format = pose_format.c_str();
    opts.thresholds = thresholds.empty() ? nullptr : thresholds.data();
    opts.threshold_count = thresholds.size();
    opts.keyframe_count = args.keyframes;

    std::size_t count = 0;
    if (auto st = iftd_recompute_pr(args.loops.c_str(), args.poses.c_str(), &opts, nullptr, nullptr, 0, &count);
        st != IFTD_OK)
        return report(st);
    std::vector<iftd_pr_point> points(count);
    if (auto st = iftd_recompute_pr(args.loops.c_str(), args.poses.c_str(), &opts,
                                    args.out.empty() ? nullptr : args.out.c_str(), points.data(),
                                    points.size(), &count);
        st != IFTD_OK)
        return report(st);

    std::printf("threshold,precision,recall,f1\n");
    for (const auto& p : points)
        std::printf("%.6f,%s,%s,%.6f\n", p.threshold, format_optional(p.precision).c_str(),
                    format_optional(p.recall).c_str(), p.f1);
    return kExitOk;
}

int dump_bev_command(const std::string& scan, const std::string& format, const std::string& config,
                     const std::string& out)
{
    ConfigHandle cfg;
    if (!config.empty())
        if (auto st = iftd_config_load(config.c_str(), &cfg.ptr); st != IFTD_OK)
            return report(st);
    return report(iftd_dump_bev(scan.c_str(), format.c_str(), cfg.ptr, out.c_str()));
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"IFTD loop detection: batch evaluation and tooling"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(iftd_version()));

    std::string config_path, out_dir;
    std::vector<std::string> overrides;
    bool deterministic = false;
    auto* run = app.add_subcommand("run", "Run loop detection over a sequence and write reports");
    run->add_option("--config", config_path, "key=value config file")->required();
    run->add_option("--out", out_dir, "Output directory")->required();
    run->add_option("--set", overrides, "Override a config key (key=value), repeatable");
    run->add_flag("--deterministic", deterministic, "Zero the timing columns of loops.csv");

    PrArgs pr_args;
    auto* pr = app.add_subcommand("pr", "Recompute precision/recall from a loops CSV");
    pr->add_option("--loops", pr_args.loops, "loops.csv or detections.csv")->required();
    pr->add_option("--poses", pr_args.poses, "Ground-truth pose file")->required();
    pr->add_option("--config", pr_args.config, "Take stride, window, threshold and sweep from a config");
    pr->add_option("--pose-format", pr_args.pose_format, "kitti_12col or tum_8col");
    pr->add_option("--stride", pr_args.stride, "Scans per keyframe");
    pr->add_option("--exclusion-window", pr_args.exclusion_window, "Keyframes excluded before a query");
    pr->add_option("--gt-distance", pr_args.gt_distance, "True-positive distance in meters");
    pr->add_option("--sweep", pr_args.sweep, "Comma-separated similarity thresholds");
    pr->add_option("--keyframes", pr_args.keyframes, "Number of keyframes (default: from poses)");
    pr->add_option("--out", pr_args.out, "Write the curve to this CSV");

    std::string scan, scan_format = "kitti_bin", bev_config, pgm;
    auto* dump = app.add_subcommand("dump-bev", "Write the BEV image of one scan as PGM");
    dump->add_option("--scan", scan, "Scan file")->required();
    dump->add_option("--out", pgm, "Output .pgm")->required();
    dump->add_option("--format", scan_format, "kitti_bin or xyz_text");
    dump->add_option("--config", bev_config, "Config file with bev.* keys");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (*run)
        return run_command(config_path, out_dir, overrides, deterministic);
    if (*pr)
        return pr_command(pr_args);
    return dump_bev_command(scan, scan_format, bev_config, pgm);
}
