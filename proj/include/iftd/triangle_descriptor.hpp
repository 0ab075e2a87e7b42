#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "iftd/bev_projection.hpp"
#include "iftd/keypoint_detection.hpp"

namespace iftd {

// A triangle corner: metric position in the keyframe plus the BEV bin value.
struct Vertex
{
    double x = 0.0;
    double y = 0.0;
    double value = 0.0;

    friend bool operator==(const Vertex&, const Vertex&) = default;
};

// Triangle over three keypoints. vertex_a is opposite the shortest side and
// vertex_c opposite the longest; side_lengths ascend.
struct TriangleDescriptor
{
    Vertex vertex_a;
    Vertex vertex_b;
    Vertex vertex_c;
    std::array<double, 3> side_lengths{};
    std::int64_t frame_id = 0;

    std::array<Vertex, 3> vertices() const { return {vertex_a, vertex_b, vertex_c}; }

    friend bool operator==(const TriangleDescriptor&, const TriangleDescriptor&) = default;
};

inline constexpr int kDefaultNeighbors = 15;
inline constexpr double kMinTriangleAngleDeg = 5.0;
inline constexpr double kMaxTriangleAngleDeg = 175.0;

// Keypoints mapped to bin-centre metric positions.
std::vector<Vertex> keypoint_vertices(std::span<const Keypoint> keypoints, const BevConfig& config);

// Up to knn nearest other vertices of vertices[query_index], nearest first,
// distance ties broken by ascending index.
std::vector<std::size_t> knn_query(std::span<const Vertex> vertices, std::size_t query_index,
                                   std::size_t knn);
std::vector<std::size_t> knn_query(std::span<const Keypoint> keypoints, std::size_t query_index,
                                   std::size_t knn, const BevConfig& config);

// Canonically ordered descriptor, or nullopt when an interior angle falls
// outside [5, 175] degrees.
std::optional<TriangleDescriptor> make_descriptor(const Vertex& p, const Vertex& q, const Vertex& r,
                                                  std::int64_t frame_id);

// Every triangle formed by a vertex and a pair of its knn neighbours, once per
// unordered vertex triple, angle filtered, sorted by side lengths.
std::vector<TriangleDescriptor> build_descriptors(std::span<const Vertex> vertices,
                                                  std::int64_t frame_id, int knn = kDefaultNeighbors);
std::vector<TriangleDescriptor> build_descriptors(std::span<const Keypoint> keypoints,
                                                  const BevConfig& config, std::int64_t frame_id,
                                                  int knn = kDefaultNeighbors);

// CSV: frame_id, ax, ay, av, bx, by, bv, cx, cy, cv, s0, s1, s2.
void write_descriptors_csv(const std::filesystem::path& path,
                           std::span<const TriangleDescriptor> descriptors);

} // namespace iftd
