#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "iftd/error.hpp"
#include "iftd/evaluation.hpp"

namespace iftd {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& value)
{
    double v = 0.0;
    auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size())
        throw ConfigError("'" + key + "': expected a number, got '" + value + "'");
    return v;
}

long long parse_int(const std::string& key, const std::string& value)
{
    long long v = 0;
    auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size())
        throw ConfigError("'" + key + "': expected an integer, got '" + value + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1" || value == "yes" || value == "on")
        return true;
    if (value == "false" || value == "0" || value == "no" || value == "off")
        return false;
    throw ConfigError("'" + key + "': expected true/false, got '" + value + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& value)
{
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(parse_double(key, trim(item)));
    return out;
}

std::string format_list(const std::vector<double>& values)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i)
        out += (i ? "," : "") + format_double(values[i]);
    return out;
}

std::filesystem::path resolve(const std::string& value, const std::filesystem::path& base)
{
    std::filesystem::path p(value);
    if (p.is_relative() && !base.empty())
        p = base / p;
    return p;
}

struct Setting
{
    std::function<void(EvalConfig&, const std::string&, const std::string&, const std::filesystem::path&)> set;
    std::function<std::string(const EvalConfig&)> get;
};

template <typename Member>
Setting number(Member member)
{
    return {[member](EvalConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
                auto& field = std::invoke(member, c);
                using T = std::remove_reference_t<decltype(field)>;
                if constexpr (std::is_floating_point_v<T>)
                    field = parse_double(k, v);
                else if constexpr (std::is_same_v<T, bool>)
                    field = parse_bool(k, v);
                else {
                    long long x = parse_int(k, v);
                    if constexpr (std::is_unsigned_v<T>)
                        if (x < 0)
                            throw ConfigError("'" + k + "' must be non-negative");
                    field = static_cast<T>(x);
                }
            },
            [member](const EvalConfig& c) {
                const auto& field = std::invoke(member, const_cast<EvalConfig&>(c));
                using T = std::remove_cvref_t<decltype(field)>;
                if constexpr (std::is_floating_point_v<T>)
                    return format_double(field);
                else if constexpr (std::is_same_v<T, bool>)
                    return std::string(field ? "true" : "false");
                else
                    return std::to_string(field);
            }};
}

const std::map<std::string, Setting>& settings()
{
    static const std::map<std::string, Setting> table = [] {
        std::map<std::string, Setting> t;
        t["dataset_root"] = {[](EvalConfig& c, const std::string&, const std::string& v,
                                const std::filesystem::path& base) { c.dataset_root = resolve(v, base); },
                             [](const EvalConfig& c) { return c.dataset_root.string(); }};
        t["pose_file"] = {[](EvalConfig& c, const std::string&, const std::string& v,
                             const std::filesystem::path& base) { c.pose_file = resolve(v, base); },
                          [](const EvalConfig& c) { return c.pose_file.string(); }};
        t["scan_format"] = {[](EvalConfig& c, const std::string&, const std::string& v,
                               const std::filesystem::path&) { c.scan_format = parse_scan_format(v); },
                            [](const EvalConfig& c) {
                                return std::string(c.scan_format == ScanFormat::KittiBin ? "kitti_bin" : "xyz_text");
                            }};
        t["pose_format"] = {[](EvalConfig& c, const std::string&, const std::string& v,
                               const std::filesystem::path&) { c.pose_format = parse_pose_format(v); },
                            [](const EvalConfig& c) {
                                return std::string(c.pose_format == PoseFormat::Kitti12Col ? "kitti_12col" : "tum_8col");
                            }};
        t["sweep"] = {[](EvalConfig& c, const std::string& k, const std::string& v,
                         const std::filesystem::path&) { c.sweep = parse_list(k, v); },
                      [](const EvalConfig& c) { return format_list(c.sweep); }};
        t["keyframe_stride"] = number([](EvalConfig& c) -> auto& { return c.keyframe_stride; });
        t["gt_distance_threshold"] = number([](EvalConfig& c) -> auto& { return c.gt_distance_threshold; });
        t["max_keyframes"] = number([](EvalConfig& c) -> auto& { return c.max_keyframes; });
        t["deterministic_output"] = number([](EvalConfig& c) -> auto& { return c.deterministic_output; });

        t["bev.sensing_size"] = number([](EvalConfig& c) -> auto& { return c.pipeline.bev.sensing_size; });
        t["bev.resolution"] = number([](EvalConfig& c) -> auto& { return c.pipeline.bev.resolution; });
        t["bev.layer_height"] = number([](EvalConfig& c) -> auto& { return c.pipeline.bev.layer_height; });
        t["bev.z_min"] = number([](EvalConfig& c) -> auto& { return c.pipeline.bev.z_min; });
        t["bev.z_max"] = number([](EvalConfig& c) -> auto& { return c.pipeline.bev.z_max; });

        t["keypoint.max_corners"] = number([](EvalConfig& c) -> auto& { return c.pipeline.keypoint.max_corners; });
        t["keypoint.quality_level"] = number([](EvalConfig& c) -> auto& { return c.pipeline.keypoint.quality_level; });
        t["keypoint.min_distance"] = number([](EvalConfig& c) -> auto& { return c.pipeline.keypoint.min_distance; });
        t["keypoint.block_size"] = number([](EvalConfig& c) -> auto& { return c.pipeline.keypoint.block_size; });

        t["descriptor.knn"] = number([](EvalConfig& c) -> auto& { return c.pipeline.knn; });

        t["database.side_resolution"] = number([](EvalConfig& c) -> auto& { return c.pipeline.database.side_resolution; });
        t["database.neighbor_probing"] = number([](EvalConfig& c) -> auto& { return c.pipeline.database.neighbor_probing; });
        t["database.exclusion_window"] = number([](EvalConfig& c) -> auto& { return c.pipeline.database.exclusion_window; });
        t["database.top_k"] = number([](EvalConfig& c) -> auto& { return c.pipeline.database.top_k; });

        t["verify.dist_threshold"] = number([](EvalConfig& c) -> auto& { return c.pipeline.verify.dist_threshold; });
        t["verify.min_triangle_matches"] = number([](EvalConfig& c) -> auto& { return c.pipeline.verify.min_triangle_matches; });
        t["verify.min_vertex_count"] = number([](EvalConfig& c) -> auto& { return c.pipeline.verify.min_vertex_count; });
        t["verify.sim_threshold"] = number([](EvalConfig& c) -> auto& { return c.pipeline.verify.sim_threshold; });
        t["verify.hash_resolution"] = number([](EvalConfig& c) -> auto& { return c.pipeline.verify.hash_resolution; });
        t["verify.max_hypotheses"] = number([](EvalConfig& c) -> auto& { return c.pipeline.verify.max_hypotheses; });
        return t;
    }();
    return table;
}

} // namespace

std::vector<double> EvalConfig::default_sweep()
{
    std::vector<double> s;
    for (int k = 0; k < 20; ++k)
        s.push_back(k / 20.0);
    return s;
}

void PipelineConfig::validate() const
{
    bev.validate();
    keypoint.validate();
    if (knn < 2)
        throw ConfigError("descriptor: knn must be >= 2");
    database.validate();
    verify.validate(bev.resolution);
}

void EvalConfig::validate() const
{
    if (keyframe_stride < 1)
        throw ConfigError("keyframe_stride must be >= 1");
    if (!(gt_distance_threshold > 0.0))
        throw ConfigError("gt_distance_threshold must be > 0");
    if (sweep.empty())
        throw ConfigError("sweep must not be empty");
    if (!std::is_sorted(sweep.begin(), sweep.end()))
        throw ConfigError("sweep must be sorted ascending");
    pipeline.validate();
}

void apply_setting(EvalConfig& config, const std::string& key, const std::string& value,
                   const std::filesystem::path& base_dir)
{
    const auto& table = settings();
    auto it = table.find(key);
    if (it == table.end())
        throw ConfigError("unknown config key '" + key + "'");
    it->second.set(config, key, value, base_dir);
}

std::string get_setting(const EvalConfig& config, const std::string& key)
{
    const auto& table = settings();
    auto it = table.find(key);
    if (it == table.end())
        throw ConfigError("unknown config key '" + key + "'");
    return it->second.get(config);
}

std::vector<std::string> setting_keys()
{
    std::vector<std::string> keys;
    for (const auto& [k, v] : settings())
        keys.push_back(k);
    return keys;
}

EvalConfig load_eval_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config '" + path.string() + "'");
    EvalConfig config;
    const auto base = path.parent_path();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
        try {
            apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), base);
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    config.validate();
    return config;
}

} // namespace iftd
