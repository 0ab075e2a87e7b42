#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace iftd {

// Static 2-D k-d tree. Queries return indices into the input span, ordered by
// ascending distance with ties broken by ascending index.
class KdTree2
{
public:
    explicit KdTree2(std::span<const Eigen::Vector2d> points);

    std::vector<std::size_t> nearest(const Eigen::Vector2d& query, std::size_t k,
                                     std::ptrdiff_t exclude = -1) const;

    std::size_t size() const { return points_.size(); }

private:
    struct Node
    {
        std::size_t point;
        int axis;
        int left = -1;
        int right = -1;
    };

    int build(std::vector<std::size_t>& order, std::size_t begin, std::size_t end, int depth);

    std::vector<Eigen::Vector2d> points_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

} // namespace iftd
