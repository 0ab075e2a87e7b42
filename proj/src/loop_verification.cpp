#include "iftd/loop_verification.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cmath>
#include <numbers>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "iftd/error.hpp"

namespace iftd {

namespace {

constexpr double kRankTolerance = 1e-10;

Eigen::Vector2d xy(const Vertex& v)
{
    return {v.x, v.y};
}

} // namespace

double wrap_angle(double radians)
{
    double a = std::remainder(radians, 2.0 * std::numbers::pi);
    if (a <= -std::numbers::pi)
        a += 2.0 * std::numbers::pi;
    return a;
}

Eigen::Vector2d PoseTransform::apply(const Eigen::Vector2d& p) const
{
    const double c = std::cos(yaw), s = std::sin(yaw);
    return {c * p.x() - s * p.y() + tx, s * p.x() + c * p.y() + ty};
}

PoseTransform PoseTransform::inverse() const
{
    const double c = std::cos(yaw), s = std::sin(yaw);
    PoseTransform inv;
    inv.yaw = wrap_angle(-yaw);
    inv.tx = -(c * tx + s * ty);
    inv.ty = -(-s * tx + c * ty);
    inv.tz = -tz;
    return inv;
}

void VerificationConfig::validate(int bev_resolution) const
{
    if (!(dist_threshold > 0.0))
        throw ConfigError("verify: dist_threshold must be > 0");
    if (min_triangle_matches == 0 || min_vertex_count == 0)
        throw ConfigError("verify: count thresholds must be > 0");
    if (!(sim_threshold > 0.0 && sim_threshold <= 1.0))
        throw ConfigError("verify: sim_threshold must be in (0, 1]");
    if (hash_resolution < 2)
        throw ConfigError("verify: hash_resolution must be >= 2");
    if (bev_resolution % hash_resolution != 0)
        throw ConfigError("verify: bev resolution " + std::to_string(bev_resolution) +
                          " is not a multiple of hash_resolution " + std::to_string(hash_resolution));
}

GroundStats compute_ground_stats(const PointCloud& cloud, const BevConfig& config)
{
    const int layers = config.layer_count();
    std::vector<double> sum(static_cast<std::size_t>(layers), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(layers), 0);
    for (const auto& p : cloud.points) {
        if (!(p.z() >= config.z_min && p.z() < config.z_max) || !metric_to_bin(p.x(), p.y(), config))
            continue;
        int layer = std::clamp(static_cast<int>(std::floor((p.z() - config.z_min) / config.layer_height)),
                               0, layers - 1);
        sum[layer] += p.z();
        ++count[layer];
    }
    for (int l = 0; l < layers; ++l)
        if (count[l] > 0)
            return {true, sum[l] / static_cast<double>(count[l])};
    return {};
}

ZEstimate estimate_z(const GroundStats& query, const GroundStats& candidate)
{
    if (!query.valid || !candidate.valid)
        return {};
    return {query.mean_ground_z - candidate.mean_ground_z, true};
}

PoseTransform svd_transform(std::span<const PointPair> pairs)
{
    if (pairs.size() < 3)
        throw ArgumentError("svd_transform needs at least 3 point pairs");

    Eigen::Vector2d query_mean = Eigen::Vector2d::Zero();
    Eigen::Vector2d cand_mean = Eigen::Vector2d::Zero();
    for (const auto& [q, c] : pairs) {
        query_mean += q;
        cand_mean += c;
    }
    query_mean /= static_cast<double>(pairs.size());
    cand_mean /= static_cast<double>(pairs.size());

    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& [q, c] : pairs)
        cov += (c - cand_mean) * (q - query_mean).transpose();

    Eigen::JacobiSVD<Eigen::Matrix2d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (!(sv(0) > 0.0) || sv(1) <= kRankTolerance * sv(0))
        throw DegenerateGeometryError("svd_transform: collinear or coincident points");

    Eigen::Matrix2d v = svd.matrixV();
    const Eigen::Matrix2d& u = svd.matrixU();
    if ((v * u.transpose()).determinant() < 0.0)
        v.col(1) *= -1.0;
    const Eigen::Matrix2d rot = v * u.transpose();
    const Eigen::Vector2d t = query_mean - rot * cand_mean;

    PoseTransform out;
    out.yaw = wrap_angle(std::atan2(rot(1, 0), rot(0, 0)));
    out.tx = t.x();
    out.ty = t.y();
    return out;
}

PoseTransform match_transform(const DescriptorMatch& match)
{
    const auto qv = match.query->vertices();
    const auto cv = match.stored->vertices();
    const std::array<PointPair, 3> pairs{{{xy(qv[0]), xy(cv[0])},
                                          {xy(qv[1]), xy(cv[1])},
                                          {xy(qv[2]), xy(cv[2])}}};
    return svd_transform(pairs);
}

namespace {

// Pair vertices copied out of the descriptors into per-vertex arrays (query
// q*, candidate c*).
struct FlatPairs
{
    std::size_t size = 0;
    std::array<std::vector<double>, 3> qx, qy, cx, cy;
};

FlatPairs flatten(std::span<const DescriptorMatch> pairs)
{
    FlatPairs out;
    out.size = pairs.size();
    for (int k = 0; k < 3; ++k) {
        out.qx[k].resize(pairs.size());
        out.qy[k].resize(pairs.size());
        out.cx[k].resize(pairs.size());
        out.cy[k].resize(pairs.size());
    }
    for (std::size_t n = 0; n < pairs.size(); ++n) {
        const auto qv = pairs[n].query->vertices();
        const auto cv = pairs[n].stored->vertices();
        for (int k = 0; k < 3; ++k) {
            out.qx[k][n] = qv[k].x;
            out.qy[k][n] = qv[k].y;
            out.cx[k][n] = cv[k].x;
            out.cy[k][n] = cv[k].y;
        }
    }
    return out;
}

struct ScoringScratch
{
    std::vector<std::uint8_t> first;
    std::vector<std::uint32_t> consistent;
    std::vector<std::pair<double, double>> positions;
};

std::size_t count_consistent(const FlatPairs& flat, const PoseTransform& t, double limit,
                             ScoringScratch& scratch)
{
    const double c = std::cos(t.yaw), s = std::sin(t.yaw);
    const std::size_t n = flat.size;
    auto close = [&](int k, std::size_t m) {
        const double dx = c * flat.cx[k][m] - s * flat.cy[k][m] + t.tx - flat.qx[k][m];
        const double dy = s * flat.cx[k][m] + c * flat.cy[k][m] + t.ty - flat.qy[k][m];
        return dx * dx + dy * dy < limit;
    };
    // Branch-free pass over the first vertex; most pairs fail here.
    scratch.first.resize(n);
    {
        const double* cx = flat.cx[0].data();
        const double* cy = flat.cy[0].data();
        const double* qx = flat.qx[0].data();
        const double* qy = flat.qy[0].data();
        std::uint8_t* ok = scratch.first.data();
        for (std::size_t m = 0; m < n; ++m) {
            const double dx = c * cx[m] - s * cy[m] + t.tx - qx[m];
            const double dy = s * cx[m] + c * cy[m] + t.ty - qy[m];
            ok[m] = dx * dx + dy * dy < limit;
        }
    }
    scratch.consistent.clear();
    for (std::size_t m = 0; m < n; ++m)
        if (scratch.first[m] && close(1, m) && close(2, m))
            scratch.consistent.push_back(static_cast<std::uint32_t>(m));
    return scratch.consistent.size();
}

std::size_t distinct_query_vertices(const FlatPairs& flat, ScoringScratch& scratch)
{
    auto& pos = scratch.positions;
    pos.clear();
    for (auto m : scratch.consistent)
        for (int k = 0; k < 3; ++k)
            pos.emplace_back(flat.qx[k][m], flat.qy[k][m]);
    std::sort(pos.begin(), pos.end());
    return static_cast<std::size_t>(std::unique(pos.begin(), pos.end()) - pos.begin());
}

} // namespace

HypothesisScore score_hypothesis(std::span<const DescriptorMatch> pairs,
                                 const PoseTransform& transform, double dist_threshold)
{
    const auto flat = flatten(pairs);
    ScoringScratch scratch;
    HypothesisScore score;
    score.transform = transform;
    score.dnum = count_consistent(flat, transform, dist_threshold * dist_threshold, scratch);
    score.vnum = distinct_query_vertices(flat, scratch);
    return score;
}

HypothesisScore select_hypothesis(std::span<const DescriptorMatch> pairs, double dist_threshold,
                                  std::size_t max_hypotheses)
{
    HypothesisScore best;
    bool have = false;
    std::size_t step = 1;
    if (max_hypotheses > 0 && pairs.size() > max_hypotheses)
        step = (pairs.size() + max_hypotheses - 1) / max_hypotheses;

    const auto flat = flatten(pairs);
    const double limit = dist_threshold * dist_threshold;
    ScoringScratch scratch;
    std::vector<std::uint32_t> best_consistent;
    for (std::size_t i = 0; i < pairs.size(); i += step) {
        PoseTransform t;
        try {
            t = match_transform(pairs[i]);
        } catch (const DegenerateGeometryError&) {
            continue;
        }
        const std::size_t dnum = count_consistent(flat, t, limit, scratch);
        // vnum only matters when dnum can win or tie, and an identical
        // consistent set cannot beat the earlier hypothesis.
        if (have && (dnum < best.dnum || (dnum == best.dnum && scratch.consistent == best_consistent)))
            continue;
        const std::size_t vnum = distinct_query_vertices(flat, scratch);
        if (!have || dnum > best.dnum || vnum > best.vnum) {
            best = {i, dnum, vnum, t};
            best_consistent = scratch.consistent;
            have = true;
        }
    }
    return best;
}

BevImage align_image(const BevImage& candidate, const PoseTransform& transform)
{
    const BevConfig& cfg = candidate.config;
    const int n = cfg.resolution;
    const double half = cfg.sensing_size / 2.0;
    const double cell = cfg.bin_size();
    const PoseTransform inv = transform.inverse();
    const double c = std::cos(inv.yaw), s = std::sin(inv.yaw);

    BevImage out;
    out.config = cfg;
    out.frame_id = candidate.frame_id;
    out.values.assign(candidate.values.size(), 0);
    // Source bin coordinates are affine in the target column: u = u0 + c * (j + 0.5).
    for (int i = 0; i < n; ++i) {
        const double y = -half + (i + 0.5) * cell;
        const double u0 = (-c * half - s * y + inv.tx + half) / cell;
        const double v0 = (-s * half + c * y + inv.ty + half) / cell;
        std::uint8_t* row = out.values.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double u = u0 + c * (j + 0.5);
            const double v = v0 + s * (j + 0.5);
            // truncation is floor on the accepted range
            if (u >= 0.0 && u < n && v >= 0.0 && v < n)
                row[j] = candidate.values[static_cast<std::size_t>(v) * n + static_cast<std::size_t>(u)];
        }
    }
    return out;
}

std::vector<double> difference_hash(const BevImage& image, int resolution)
{
    const int n = image.size();
    if (resolution < 2 || n % resolution != 0)
        throw ArgumentError("difference_hash: image size " + std::to_string(n) +
                            " is not a multiple of " + std::to_string(resolution));
    const int block = n / resolution;
    std::vector<double> small(static_cast<std::size_t>(resolution) * resolution, 0.0);
    std::vector<unsigned> sums(static_cast<std::size_t>(resolution));
    for (int br = 0; br < resolution; ++br) {
        std::fill(sums.begin(), sums.end(), 0u);
        for (int i = br * block; i < (br + 1) * block; ++i) {
            const std::uint8_t* row = image.values.data() + static_cast<std::size_t>(i) * n;
            for (int bc = 0; bc < resolution; ++bc)
                for (int j = bc * block; j < (bc + 1) * block; ++j)
                    sums[bc] += row[j];
        }
        for (int bc = 0; bc < resolution; ++bc)
            small[static_cast<std::size_t>(br) * resolution + bc] =
                static_cast<double>(sums[bc]) / (static_cast<double>(block) * block);
    }

    std::vector<double> diff;
    diff.reserve(static_cast<std::size_t>(resolution) * (resolution - 1));
    for (int r = 0; r < resolution; ++r)
        for (int c = 0; c + 1 < resolution; ++c)
            diff.push_back(small[static_cast<std::size_t>(r) * resolution + c + 1] -
                           small[static_cast<std::size_t>(r) * resolution + c]);
    return diff;
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b)
{
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    if (na == 0.0 || nb == 0.0)
        return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

} // namespace

double image_similarity(const BevImage& query, const BevImage& candidate,
                        const PoseTransform& transform, int hash_resolution)
{
    if (query.size() != candidate.size())
        throw ArgumentError("image_similarity: images have different resolutions");
    return cosine(difference_hash(query, hash_resolution),
                  difference_hash(align_image(candidate, transform), hash_resolution));
}

VerificationResult verify(const KeyframeBundle& query, const CandidateVote& candidate,
                          const KeyframeBundle& candidate_frame, const VerificationConfig& config)
{
    VerificationResult result;
    HypothesisScore best = select_hypothesis(candidate.matched_pairs, config.dist_threshold,
                                             config.max_hypotheses);
    result.dnum_max = best.dnum;
    result.vnum_max = best.vnum;
    result.transform = best.transform;
    if (best.dnum <= config.min_triangle_matches || best.vnum <= config.min_vertex_count)
        return result;

    result.geometry_passed = true;
    auto z = estimate_z(query.ground, candidate_frame.ground);
    result.transform.tz = z.tz;
    result.z_estimated = z.valid;
    if (query.image.size() != candidate_frame.image.size())
        throw ArgumentError("verify: keyframe images have different resolutions");
    const bool cached = query.image_hash.size() ==
                        static_cast<std::size_t>(config.hash_resolution) * (config.hash_resolution - 1);
    result.similarity = cosine(cached ? query.image_hash : difference_hash(query.image, config.hash_resolution),
                               difference_hash(align_image(candidate_frame.image, result.transform),
                                               config.hash_resolution));
    result.accepted = result.similarity > config.sim_threshold;
    return result;
}

} // namespace iftd
