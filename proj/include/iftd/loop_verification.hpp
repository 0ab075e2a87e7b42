#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "iftd/bev_projection.hpp"
#include "iftd/descriptor_database.hpp"
#include "iftd/triangle_descriptor.hpp"

namespace iftd {

// 4-DOF transform taking candidate-keyframe coordinates into the query
// keyframe: planar rotation by yaw, then translation (tx, ty, tz).
struct PoseTransform
{
    double yaw = 0.0; // (-pi, pi]
    double tx = 0.0;
    double ty = 0.0;
    double tz = 0.0;

    Eigen::Vector2d apply(const Eigen::Vector2d& p) const;
    PoseTransform inverse() const;
};

double wrap_angle(double radians);

struct VerificationConfig
{
    double dist_threshold = 0.6;
    std::size_t min_triangle_matches = 5;
    std::size_t min_vertex_count = 8;
    double sim_threshold = 0.5;
    int hash_resolution = 20;
    // 0 scores every matched pair as a hypothesis; otherwise at most this
    // many, taken at a uniform stride through the pair list. Every hypothesis
    // is still scored against all pairs.
    std::size_t max_hypotheses = 50;

    // Throws ConfigError; bev_resolution must be a multiple of hash_resolution.
    void validate(int bev_resolution) const;
};

// Mean height of the points in the lowest occupied layer of the sensing area.
struct GroundStats
{
    bool valid = false;
    double mean_ground_z = 0.0;
};

GroundStats compute_ground_stats(const PointCloud& cloud, const BevConfig& config);

// tz = query ground height - candidate ground height; 0 (and flagged) when
// either side has no ground estimate.
struct ZEstimate
{
    double tz = 0.0;
    bool valid = false;
};
ZEstimate estimate_z(const GroundStats& query, const GroundStats& candidate);

// Everything verification needs to know about one keyframe.
struct KeyframeBundle
{
    BevImage image;
    std::vector<TriangleDescriptor> descriptors;
    GroundStats ground;
    // difference_hash(image) at the verification resolution; recomputed when empty
    std::vector<double> image_hash;
};

struct VerificationResult
{
    bool accepted = false;
    // Dnum and Vnum both cleared their thresholds and the similarity was computed.
    bool geometry_passed = false;
    bool z_estimated = false;
    PoseTransform transform;
    double similarity = 0.0;
    std::size_t dnum_max = 0;
    std::size_t vnum_max = 0;
};

using PointPair = std::pair<Eigen::Vector2d, Eigen::Vector2d>; // (query, candidate)

// Least-squares planar rigid transform mapping candidate points onto query
// points (Kabsch in 2-D, reflection corrected). Needs at least 3 pairs;
// throws DegenerateGeometryError when the points are collinear or coincident.
PoseTransform svd_transform(std::span<const PointPair> pairs);

// Transform from the three canonically ordered vertex correspondences of a match.
PoseTransform match_transform(const DescriptorMatch& match);

struct HypothesisScore
{
    std::size_t index = 0; // position of the generating pair in the match list
    std::size_t dnum = 0;
    std::size_t vnum = 0;
    PoseTransform transform;
};

// Scores one hypothesis: dnum counts pairs whose three transformed candidate
// vertices all land strictly within dist_threshold of their query
// counterparts; vnum counts distinct query vertex positions among them.
HypothesisScore score_hypothesis(std::span<const DescriptorMatch> pairs,
                                 const PoseTransform& transform, double dist_threshold);

// Best hypothesis by dnum, then vnum, then lowest index. dnum is 0 when every
// hypothesis is degenerate.
HypothesisScore select_hypothesis(std::span<const DescriptorMatch> pairs, double dist_threshold,
                                  std::size_t max_hypotheses = 0);

// Candidate image resampled into the query frame (nearest bin, zero outside).
BevImage align_image(const BevImage& candidate, const PoseTransform& transform);

// Block mean down to resolution x resolution, then signed right-neighbour
// differences (resolution x (resolution - 1)), flattened row-major.
std::vector<double> difference_hash(const BevImage& image, int resolution);

// Cosine similarity of the difference hashes of the query image and the
// aligned candidate image; 0 when either hash has zero norm.
double image_similarity(const BevImage& query, const BevImage& candidate,
                        const PoseTransform& transform, int hash_resolution = 20);

VerificationResult verify(const KeyframeBundle& query, const CandidateVote& candidate,
                          const KeyframeBundle& candidate_frame, const VerificationConfig& config);

} // namespace iftd
