#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace iftd {

using Point3 = Eigen::Vector3d;

// One LiDAR scan or accumulated keyframe, in the sensor frame (meters).
struct PointCloud
{
    std::vector<Point3> points;
    std::int64_t frame_id = 0;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

// Sensor pose in the world frame: p_world = rotation * p_sensor + translation.
struct PoseRecord
{
    std::int64_t frame_id = 0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

enum class ScanFormat { KittiBin, XyzText };
enum class PoseFormat { Kitti12Col, Tum8Col };

// Tolerance on |R^T R - I| and |det R - 1| when loading poses.
inline constexpr double kRotationTolerance = 1e-6;

ScanFormat parse_scan_format(const std::string& name);
PoseFormat parse_pose_format(const std::string& name);

// Loads one scan. Non-finite points are dropped; the KITTI intensity channel
// is discarded. Throws IoError / FormatError.
PointCloud load_scan(const std::filesystem::path& path, ScanFormat format);

void write_scan(const std::filesystem::path& path, const PointCloud& cloud, ScanFormat format);

// KITTI poses get frame ids 0..n-1 in line order; TUM poses are sorted by
// timestamp first. Throws ValidationError (with line number) on a rotation
// that is not orthonormal with det +1.
std::vector<PoseRecord> load_poses(const std::filesystem::path& path, PoseFormat format);

void write_poses_kitti(const std::filesystem::path& path, std::span<const PoseRecord> poses);

// Expresses every scan in the frame of the first scan and concatenates them.
// The resulting frame id is scans[0].frame_id / stride.
PointCloud accumulate_keyframe(std::span<const PointCloud> scans,
                               std::span<const PoseRecord> poses,
                               int stride = 5);

} // namespace iftd
