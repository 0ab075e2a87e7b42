#include "iftd/keypoint_detection.hpp"

#include <algorithm>
#include <cmath>

#include "iftd/error.hpp"

namespace iftd {

GrayImage GrayImage::from_bev(const BevImage& bev)
{
    GrayImage img(bev.size(), bev.size());
    std::transform(bev.values.begin(), bev.values.end(), img.pixels.begin(),
                   [](std::uint8_t v) { return static_cast<double>(v); });
    return img;
}

void ShiTomasiConfig::validate() const
{
    if (max_corners < 3)
        throw ConfigError("keypoint: max_corners must be >= 3");
    if (!(quality_level > 0.0 && quality_level < 1.0))
        throw ConfigError("keypoint: quality_level must be in (0, 1)");
    if (min_distance < 1)
        throw ConfigError("keypoint: min_distance must be >= 1");
    if (block_size < 3 || block_size % 2 == 0)
        throw ConfigError("keypoint: block_size must be odd and >= 3");
}

GrayImage corner_response(const GrayImage& image, int block_size)
{
    const int rows = image.rows;
    const int cols = image.cols;
    GrayImage response(rows, cols);
    if (rows < 3 || cols < 3)
        return response;

    // Per-pixel products of Sobel gradients, interleaved (xx, xy, yy); zero on
    // the one-pixel border.
    const std::size_t w = static_cast<std::size_t>(cols);
    std::vector<double> prod(static_cast<std::size_t>(rows) * w * 3, 0.0);
    const double* px = image.pixels.data();
    for (int i = 1; i < rows - 1; ++i) {
        const double* up = px + (i - 1) * w;
        const double* mid = px + i * w;
        const double* down = px + (i + 1) * w;
        double* out = prod.data() + i * w * 3;
        for (int j = 1; j < cols - 1; ++j) {
            double gx = (up[j + 1] + 2.0 * mid[j + 1] + down[j + 1]) - (up[j - 1] + 2.0 * mid[j - 1] + down[j - 1]);
            double gy = (down[j - 1] + 2.0 * down[j] + down[j + 1]) - (up[j - 1] + 2.0 * up[j] + up[j + 1]);
            out[3 * j] = gx * gx;
            out[3 * j + 1] = gx * gy;
            out[3 * j + 2] = gy * gy;
        }
    }

    // Window sums: vertical pass into one row buffer, then horizontal.
    const int r = block_size / 2;
    const int margin = 1 + r;
    std::vector<double> column(w * 3);
    for (int i = margin; i < rows - margin; ++i) {
        std::fill(column.begin(), column.end(), 0.0);
        for (int di = -r; di <= r; ++di) {
            const double* src = prod.data() + (i + di) * w * 3;
            for (std::size_t k = 0; k < w * 3; ++k)
                column[k] += src[k];
        }
        double* dst = response.pixels.data() + i * w;
        for (int j = margin; j < cols - margin; ++j) {
            double a = 0.0, b = 0.0, c = 0.0;
            for (int dj = -r; dj <= r; ++dj) {
                const double* v = column.data() + 3 * (j + dj);
                a += v[0];
                b += v[1];
                c += v[2];
            }
            double half_diff = (a - c) / 2.0;
            dst[j] = (a + c) / 2.0 - std::sqrt(half_diff * half_diff + b * b);
        }
    }
    return response;
}

std::vector<Keypoint> detect_keypoints(const GrayImage& image, const ShiTomasiConfig& config)
{
    config.validate();
    GrayImage response = corner_response(image, config.block_size);

    double max_score = 0.0;
    for (double s : response.pixels)
        max_score = std::max(max_score, s);
    if (!(max_score > 0.0))
        return {};
    const double threshold = config.quality_level * max_score;

    std::vector<Keypoint> candidates;
    for (int i = 0; i < response.rows; ++i)
        for (int j = 0; j < response.cols; ++j)
            if (double s = response.at(i, j); s > 0.0 && s >= threshold)
                candidates.push_back({i, j, image.at(i, j), s});

    std::sort(candidates.begin(), candidates.end(), [](const Keypoint& a, const Keypoint& b) {
        if (a.score != b.score)
            return a.score > b.score;
        if (a.i != b.i)
            return a.i < b.i;
        return a.j < b.j;
    });

    std::vector<Keypoint> kept;
    std::vector<std::uint8_t> taken(response.pixels.size(), 0);
    const int reach = config.min_distance - 1;
    for (const auto& kp : candidates) {
        if (static_cast<int>(kept.size()) >= config.max_corners)
            break;
        bool blocked = false;
        for (int i = std::max(0, kp.i - reach); i <= std::min(response.rows - 1, kp.i + reach) && !blocked; ++i)
            for (int j = std::max(0, kp.j - reach); j <= std::min(response.cols - 1, kp.j + reach); ++j)
                if (taken[static_cast<std::size_t>(i) * response.cols + j]) {
                    blocked = true;
                    break;
                }
        if (blocked)
            continue;
        taken[static_cast<std::size_t>(kp.i) * response.cols + kp.j] = 1;
        kept.push_back(kp);
    }
    return kept;
}

std::vector<Keypoint> detect_keypoints(const BevImage& image, const ShiTomasiConfig& config)
{
    return detect_keypoints(GrayImage::from_bev(image), config);
}

} // namespace iftd
