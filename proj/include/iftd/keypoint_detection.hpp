#pragma once

#include <vector>

#include "iftd/bev_projection.hpp"

namespace iftd {

// Dense single-channel image used by the corner detector.
struct GrayImage
{
    int rows = 0;
    int cols = 0;
    std::vector<double> pixels;

    GrayImage() = default;
    GrayImage(int r, int c, double fill = 0.0)
        : rows(r), cols(c), pixels(static_cast<std::size_t>(r) * c, fill) {}

    double at(int i, int j) const { return pixels[static_cast<std::size_t>(i) * cols + j]; }
    double& at(int i, int j) { return pixels[static_cast<std::size_t>(i) * cols + j]; }

    static GrayImage from_bev(const BevImage& bev);
};

struct Keypoint
{
    int i = 0; // row
    int j = 0; // column
    double value = 0.0;
    double score = 0.0;
};

struct ShiTomasiConfig
{
    int max_corners = 500;
    double quality_level = 0.01;
    int min_distance = 10;
    int block_size = 3;

    // Throws ConfigError.
    void validate() const;
};

// Minimum eigenvalue of the Sobel structure tensor summed over a
// block_size window. Pixels whose window leaves the image score 0.
GrayImage corner_response(const GrayImage& image, int block_size);

// Shi-Tomasi corners sorted by descending score (ties by row, then column),
// thinned so no two are closer than min_distance in Chebyshev distance.
std::vector<Keypoint> detect_keypoints(const GrayImage& image, const ShiTomasiConfig& config);
std::vector<Keypoint> detect_keypoints(const BevImage& image, const ShiTomasiConfig& config);

} // namespace iftd
