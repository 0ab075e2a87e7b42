#include "iftd/triangle_descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <tuple>
#include <unordered_set>

#include "iftd/error.hpp"
#include "iftd/kd_tree.hpp"

namespace iftd {

namespace {

constexpr double kAngleSlackDeg = 1e-9;

double distance(const Vertex& a, const Vertex& b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

double angle_deg(const Vertex& at, const Vertex& u, const Vertex& v)
{
    double ux = u.x - at.x, uy = u.y - at.y;
    double vx = v.x - at.x, vy = v.y - at.y;
    double cross = ux * vy - uy * vx;
    double dot = ux * vx + uy * vy;
    return std::atan2(std::abs(cross), dot) * 180.0 / std::numbers::pi;
}

bool angle_ok(double deg)
{
    return deg >= kMinTriangleAngleDeg - kAngleSlackDeg && deg <= kMaxTriangleAngleDeg + kAngleSlackDeg;
}

std::vector<Eigen::Vector2d> positions(std::span<const Vertex> vertices)
{
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(vertices.size());
    for (const auto& v : vertices)
        pts.emplace_back(v.x, v.y);
    return pts;
}

auto descriptor_order_key(const TriangleDescriptor& d)
{
    return std::tie(d.side_lengths[0], d.side_lengths[1], d.side_lengths[2],
                    d.vertex_a.x, d.vertex_a.y, d.vertex_b.x, d.vertex_b.y,
                    d.vertex_c.x, d.vertex_c.y);
}

} // namespace

std::vector<Vertex> keypoint_vertices(std::span<const Keypoint> keypoints, const BevConfig& config)
{
    std::vector<Vertex> out;
    out.reserve(keypoints.size());
    for (const auto& kp : keypoints) {
        auto [x, y] = bin_to_metric(kp.i, kp.j, config);
        out.push_back({x, y, kp.value});
    }
    return out;
}

std::vector<std::size_t> knn_query(std::span<const Vertex> vertices, std::size_t query_index,
                                   std::size_t knn)
{
    if (query_index >= vertices.size())
        throw ArgumentError("knn_query: index out of range");
    auto pts = positions(vertices);
    KdTree2 tree(pts);
    return tree.nearest(pts[query_index], knn, static_cast<std::ptrdiff_t>(query_index));
}

std::vector<std::size_t> knn_query(std::span<const Keypoint> keypoints, std::size_t query_index,
                                   std::size_t knn, const BevConfig& config)
{
    auto vertices = keypoint_vertices(keypoints, config);
    return knn_query(vertices, query_index, knn);
}

std::optional<TriangleDescriptor> make_descriptor(const Vertex& p, const Vertex& q, const Vertex& r,
                                                  std::int64_t frame_id)
{
    if (!angle_ok(angle_deg(p, q, r)) || !angle_ok(angle_deg(q, r, p)) || !angle_ok(angle_deg(r, p, q)))
        return std::nullopt;
    TriangleDescriptor out;

    struct Corner
    {
        Vertex v;
        double opposite;
    };
    std::array<Corner, 3> corners{{{p, distance(q, r)}, {q, distance(r, p)}, {r, distance(p, q)}}};
    std::sort(corners.begin(), corners.end(), [](const Corner& a, const Corner& b) {
        return std::tie(a.opposite, a.v.x, a.v.y) < std::tie(b.opposite, b.v.x, b.v.y);
    });
    out.vertex_a = corners[0].v;
    out.vertex_b = corners[1].v;
    out.vertex_c = corners[2].v;
    out.side_lengths = {corners[0].opposite, corners[1].opposite, corners[2].opposite};
    out.frame_id = frame_id;
    return out;
}

std::vector<TriangleDescriptor> build_descriptors(std::span<const Vertex> input,
                                                  std::int64_t frame_id, int knn)
{
    if (knn < 2)
        throw ArgumentError("build_descriptors: knn must be >= 2");

    // Merge vertices sharing a position; the first occurrence wins.
    std::vector<Vertex> vertices;
    vertices.reserve(input.size());
    {
        std::vector<std::size_t> order(input.size());
        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return std::tie(input[a].x, input[a].y) < std::tie(input[b].x, input[b].y);
        });
        std::vector<bool> keep(input.size(), false);
        for (std::size_t k = 0; k < order.size(); ++k)
            if (k == 0 || input[order[k]].x != input[order[k - 1]].x ||
                input[order[k]].y != input[order[k - 1]].y)
                keep[order[k]] = true;
        for (std::size_t i = 0; i < input.size(); ++i)
            if (keep[i])
                vertices.push_back(input[i]);
    }

    std::vector<TriangleDescriptor> out;
    if (vertices.size() < 3)
        return out;

    auto pts = positions(vertices);
    KdTree2 tree(pts);
    std::unordered_set<std::uint64_t> seen;
    auto pack = [](std::size_t a, std::size_t b, std::size_t c) {
        std::array<std::size_t, 3> t{a, b, c};
        std::sort(t.begin(), t.end());
        return (static_cast<std::uint64_t>(t[0]) << 42) | (static_cast<std::uint64_t>(t[1]) << 21) |
               static_cast<std::uint64_t>(t[2]);
    };

    for (std::size_t center = 0; center < vertices.size(); ++center) {
        auto nn = tree.nearest(pts[center], static_cast<std::size_t>(knn),
                               static_cast<std::ptrdiff_t>(center));
        for (std::size_t a = 0; a < nn.size(); ++a) {
            for (std::size_t b = a + 1; b < nn.size(); ++b) {
                if (!seen.insert(pack(center, nn[a], nn[b])).second)
                    continue;
                if (auto d = make_descriptor(vertices[center], vertices[nn[a]], vertices[nn[b]], frame_id))
                    out.push_back(*d);
            }
        }
    }

    std::sort(out.begin(), out.end(), [](const TriangleDescriptor& a, const TriangleDescriptor& b) {
        return descriptor_order_key(a) < descriptor_order_key(b);
    });
    return out;
}

std::vector<TriangleDescriptor> build_descriptors(std::span<const Keypoint> keypoints,
                                                  const BevConfig& config, std::int64_t frame_id,
                                                  int knn)
{
    auto vertices = keypoint_vertices(keypoints, config);
    return build_descriptors(vertices, frame_id, knn);
}

void write_descriptors_csv(const std::filesystem::path& path,
                           std::span<const TriangleDescriptor> descriptors)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write '" + path.string() + "'");
    out << "frame_id,ax,ay,av,bx,by,bv,cx,cy,cv,s0,s1,s2\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& d : descriptors) {
        out << d.frame_id;
        for (const auto& v : d.vertices())
            out << ',' << v.x << ',' << v.y << ',' << v.value;
        for (double s : d.side_lengths)
            out << ',' << s;
        out << '\n';
    }
    if (!out)
        throw IoError("write failed on '" + path.string() + "'");
}

} // namespace iftd
