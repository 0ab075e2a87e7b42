#include "iftd/kd_tree.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <utility>

namespace iftd {

namespace {

using Entry = std::pair<double, std::size_t>; // (squared distance, index)

double squared_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b)
{
    double dx = a.x() - b.x();
    double dy = a.y() - b.y();
    return dx * dx + dy * dy;
}

} // namespace

KdTree2::KdTree2(std::span<const Eigen::Vector2d> points)
    : points_(points.begin(), points.end())
{
    std::vector<std::size_t> order(points_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    nodes_.reserve(points_.size());
    root_ = build(order, 0, order.size(), 0);
}

int KdTree2::build(std::vector<std::size_t>& order, std::size_t begin, std::size_t end, int depth)
{
    if (begin >= end)
        return -1;
    const int axis = depth % 2;
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](std::size_t a, std::size_t b) {
                         if (points_[a][axis] != points_[b][axis])
                             return points_[a][axis] < points_[b][axis];
                         return a < b;
                     });
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({order[mid], axis});
    int left = build(order, begin, mid, depth + 1);
    int right = build(order, mid + 1, end, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

std::vector<std::size_t> KdTree2::nearest(const Eigen::Vector2d& query, std::size_t k,
                                          std::ptrdiff_t exclude) const
{
    std::vector<std::size_t> result;
    if (k == 0 || root_ < 0)
        return result;

    // Max-heap on (distance, index): the top is the worst of the current best k.
    std::priority_queue<Entry> best;
    auto offer = [&](const Entry& e) {
        if (best.size() < k)
            best.push(e);
        else if (e < best.top()) {
            best.pop();
            best.push(e);
        }
    };

    auto visit = [&](auto&& self, int id) -> void {
        if (id < 0)
            return;
        const Node& node = nodes_[id];
        const auto& p = points_[node.point];
        if (static_cast<std::ptrdiff_t>(node.point) != exclude)
            offer({squared_distance(p, query), node.point});
        double diff = query[node.axis] - p[node.axis];
        int near = diff < 0.0 ? node.left : node.right;
        int far = diff < 0.0 ? node.right : node.left;
        self(self, near);
        // <= keeps equal-distance points reachable so the index tie rule holds.
        if (best.size() < k || diff * diff <= best.top().first)
            self(self, far);
    };
    visit(visit, root_);

    result.resize(best.size());
    for (std::size_t i = result.size(); i-- > 0;) {
        result[i] = best.top().second;
        best.pop();
    }
    return result;
}

} // namespace iftd
