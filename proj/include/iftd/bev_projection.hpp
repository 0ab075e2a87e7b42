#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "iftd/pointcloud_io.hpp"

namespace iftd {

// Square sensing area of side sensing_size (meters) centred on the sensor,
// split into resolution x resolution bins, each split vertically into layers
// of layer_height between z_min and z_max.
struct BevConfig
{
    double sensing_size = 80.0;
    int resolution = 400;
    double layer_height = 0.5;
    double z_min = -2.0;
    double z_max = 14.0;

    int layer_count() const;
    double bin_size() const { return sensing_size / resolution; }

    // Throws ConfigError.
    void validate() const;
};

// Row-major grid. Row i spans y, column j spans x; row 0 is the minimum y.
// Each value is the number of occupied height layers in that bin.
struct BevImage
{
    BevConfig config;
    std::int64_t frame_id = 0;
    std::vector<std::uint8_t> values;

    int size() const { return config.resolution; }
    std::uint8_t at(int i, int j) const { return values[static_cast<std::size_t>(i) * size() + j]; }
    std::uint8_t& at(int i, int j) { return values[static_cast<std::size_t>(i) * size() + j]; }
};

BevImage project(const PointCloud& cloud, const BevConfig& config);

// Bin centre in meters; throws ArgumentError for an index outside the grid.
std::pair<double, double> bin_to_metric(int i, int j, const BevConfig& config);

// (row, col) of the bin containing (x, y), or nullopt outside the sensing area.
std::optional<std::pair<int, int>> metric_to_bin(double x, double y, const BevConfig& config);

// Binary PGM (P5), one byte per bin, values clamped to 255, row 0 first.
void write_pgm(const std::filesystem::path& path, const BevImage& image);

} // namespace iftd
