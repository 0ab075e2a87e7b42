#include "iftd/bev_projection.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <string>

#include "iftd/error.hpp"

namespace iftd {

int BevConfig::layer_count() const
{
    return static_cast<int>(std::ceil((z_max - z_min) / layer_height));
}

void BevConfig::validate() const
{
    if (!(sensing_size > 0.0))
        throw ConfigError("bev: sensing_size must be > 0");
    if (resolution < 32)
        throw ConfigError("bev: resolution must be >= 32");
    if (!(z_min < z_max))
        throw ConfigError("bev: z_min must be < z_max");
    if (!(layer_height > 0.0))
        throw ConfigError("bev: layer_height must be > 0");
    if (layer_count() > 64)
        throw ConfigError("bev: more than 64 height layers (" + std::to_string(layer_count()) + ")");
}

std::optional<std::pair<int, int>> metric_to_bin(double x, double y, const BevConfig& config)
{
    const double half = config.sensing_size / 2.0;
    const double cell = config.bin_size();
    double fj = std::floor((x + half) / cell);
    double fi = std::floor((y + half) / cell);
    if (!(fj >= 0.0 && fj < config.resolution && fi >= 0.0 && fi < config.resolution))
        return std::nullopt;
    return std::make_pair(static_cast<int>(fi), static_cast<int>(fj));
}

std::pair<double, double> bin_to_metric(int i, int j, const BevConfig& config)
{
    if (i < 0 || j < 0 || i >= config.resolution || j >= config.resolution)
        throw ArgumentError("bin (" + std::to_string(i) + ", " + std::to_string(j) +
                            ") outside a " + std::to_string(config.resolution) + " grid");
    const double half = config.sensing_size / 2.0;
    const double cell = config.bin_size();
    return {-half + (j + 0.5) * cell, -half + (i + 0.5) * cell};
}

BevImage project(const PointCloud& cloud, const BevConfig& config)
{
    config.validate();
    const int n = config.resolution;
    const int layers = config.layer_count();
    std::vector<std::uint64_t> occupancy(static_cast<std::size_t>(n) * n, 0);

    for (const auto& p : cloud.points) {
        if (!(p.z() >= config.z_min && p.z() < config.z_max))
            continue;
        auto bin = metric_to_bin(p.x(), p.y(), config);
        if (!bin)
            continue;
        int layer = static_cast<int>(std::floor((p.z() - config.z_min) / config.layer_height));
        layer = std::clamp(layer, 0, layers - 1);
        occupancy[static_cast<std::size_t>(bin->first) * n + bin->second] |= std::uint64_t{1} << layer;
    }

    BevImage image;
    image.config = config;
    image.frame_id = cloud.frame_id;
    image.values.resize(occupancy.size());
    std::transform(occupancy.begin(), occupancy.end(), image.values.begin(),
                   [](std::uint64_t bits) { return static_cast<std::uint8_t>(bits ? std::popcount(bits) : 0); });
    return image;
}

void write_pgm(const std::filesystem::path& path, const BevImage& image)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write '" + path.string() + "'");
    const int n = image.size();
    out << "P5\n" << n << ' ' << n << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.values.data()),
              static_cast<std::streamsize>(image.values.size()));
    if (!out)
        throw IoError("write failed on '" + path.string() + "'");
}

} // namespace iftd
