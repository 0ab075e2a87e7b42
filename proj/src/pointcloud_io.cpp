#include "iftd/pointcloud_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include <Eigen/Geometry>

#include "iftd/error.hpp"

namespace iftd {

namespace {

static_assert(std::endian::native == std::endian::little,
              "kitti_bin decoding assumes a little-endian host");

bool finite(const Point3& p)
{
    return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

std::string strip_comment(const std::string& line)
{
    auto pos = line.find('#');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

std::vector<double> parse_numbers(const std::string& line, std::size_t line_no,
                                  const std::filesystem::path& path)
{
    std::vector<double> values;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(tok, &used));
            if (used != tok.size())
                throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) +
                              ": not a number: '" + tok + "'");
        }
    }
    return values;
}

void check_rotation(const Eigen::Matrix3d& r, std::size_t line_no,
                    const std::filesystem::path& path)
{
    double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    double det = r.determinant();
    if (!(ortho <= kRotationTolerance) || !(std::abs(det - 1.0) <= kRotationTolerance)) {
        std::ostringstream msg;
        msg << path.string() << ":" << line_no
            << ": rotation is not orthonormal (|R^T R - I| = " << ortho
            << ", det = " << det << ")";
        throw ValidationError(msg.str());
    }
}

std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode)
{
    std::ifstream in(path, mode);
    if (!in)
        throw IoError("cannot open '" + path.string() + "'");
    return in;
}

PointCloud load_kitti_bin(const std::filesystem::path& path)
{
    auto in = open_input(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad())
        throw IoError("read failed on '" + path.string() + "'");
    constexpr std::size_t kRecord = 4 * sizeof(float);
    if (bytes.size() % kRecord != 0)
        throw FormatError("'" + path.string() + "' has " + std::to_string(bytes.size()) +
                          " bytes, not a multiple of " + std::to_string(kRecord));

    PointCloud cloud;
    std::size_t n = bytes.size() / kRecord;
    cloud.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        float rec[4];
        std::memcpy(rec, bytes.data() + i * kRecord, kRecord);
        Point3 p(rec[0], rec[1], rec[2]);
        if (finite(p))
            cloud.points.push_back(p);
    }
    return cloud;
}

PointCloud load_xyz_text(const std::filesystem::path& path)
{
    auto in = open_input(path, std::ios::in);
    PointCloud cloud;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto values = parse_numbers(strip_comment(line), line_no, path);
        if (values.empty())
            continue;
        if (values.size() != 3)
            throw FormatError(path.string() + ":" + std::to_string(line_no) +
                              ": expected 3 values, got " + std::to_string(values.size()));
        Point3 p(values[0], values[1], values[2]);
        if (finite(p))
            cloud.points.push_back(p);
    }
    return cloud;
}

} // namespace

ScanFormat parse_scan_format(const std::string& name)
{
    if (name == "kitti_bin")
        return ScanFormat::KittiBin;
    if (name == "xyz_text")
        return ScanFormat::XyzText;
    throw ConfigError("unknown scan format '" + name + "' (expected kitti_bin or xyz_text)");
}

PoseFormat parse_pose_format(const std::string& name)
{
    if (name == "kitti_12col")
        return PoseFormat::Kitti12Col;
    if (name == "tum_8col")
        return PoseFormat::Tum8Col;
    throw ConfigError("unknown pose format '" + name + "' (expected kitti_12col or tum_8col)");
}

PointCloud load_scan(const std::filesystem::path& path, ScanFormat format)
{
    switch (format) {
    case ScanFormat::KittiBin:
        return load_kitti_bin(path);
    case ScanFormat::XyzText:
        return load_xyz_text(path);
    }
    throw ArgumentError("invalid scan format");
}

void write_scan(const std::filesystem::path& path, const PointCloud& cloud, ScanFormat format)
{
    if (format == ScanFormat::KittiBin) {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw IoError("cannot write '" + path.string() + "'");
        for (const auto& p : cloud.points) {
            float rec[4] = {static_cast<float>(p.x()), static_cast<float>(p.y()),
                            static_cast<float>(p.z()), 0.0f};
            out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
        }
        if (!out)
            throw IoError("write failed on '" + path.string() + "'");
        return;
    }
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write '" + path.string() + "'");
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& p : cloud.points)
        out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    if (!out)
        throw IoError("write failed on '" + path.string() + "'");
}

std::vector<PoseRecord> load_poses(const std::filesystem::path& path, PoseFormat format)
{
    auto in = open_input(path, std::ios::in);
    const std::size_t columns = format == PoseFormat::Kitti12Col ? 12 : 8;

    std::vector<std::pair<double, PoseRecord>> stamped;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto v = parse_numbers(strip_comment(line), line_no, path);
        if (v.empty())
            continue;
        if (v.size() != columns)
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(columns) + " columns, got " +
                              std::to_string(v.size()));
        PoseRecord pose;
        double stamp = static_cast<double>(stamped.size());
        if (format == PoseFormat::Kitti12Col) {
            pose.rotation << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
            pose.translation << v[3], v[7], v[11];
        } else {
            stamp = v[0];
            pose.translation << v[1], v[2], v[3];
            Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
            if (!(q.norm() > 0.0))
                throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                      ": zero-norm quaternion");
            pose.rotation = q.normalized().toRotationMatrix();
        }
        if (!pose.translation.allFinite())
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": non-finite translation");
        check_rotation(pose.rotation, line_no, path);
        stamped.emplace_back(stamp, pose);
    }

    if (format == PoseFormat::Tum8Col)
        std::stable_sort(stamped.begin(), stamped.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<PoseRecord> poses;
    poses.reserve(stamped.size());
    for (auto& [stamp, pose] : stamped) {
        pose.frame_id = static_cast<std::int64_t>(poses.size());
        poses.push_back(pose);
    }
    return poses;
}

void write_poses_kitti(const std::filesystem::path& path, std::span<const PoseRecord> poses)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write '" + path.string() + "'");
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& p : poses) {
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c)
                out << p.rotation(r, c) << ' ';
            out << p.translation(r) << (r == 2 ? '\n' : ' ');
        }
    }
    if (!out)
        throw IoError("write failed on '" + path.string() + "'");
}

PointCloud accumulate_keyframe(std::span<const PointCloud> scans,
                               std::span<const PoseRecord> poses, int stride)
{
    if (scans.size() != poses.size())
        throw ArgumentError("accumulate_keyframe: " + std::to_string(scans.size()) +
                            " scans but " + std::to_string(poses.size()) + " poses");
    if (stride < 1)
        throw ArgumentError("accumulate_keyframe: stride must be >= 1");

    PointCloud out;
    if (scans.empty())
        return out;
    out.frame_id = scans.front().frame_id / stride;

    std::size_t total = 0;
    for (const auto& s : scans)
        total += s.size();
    out.points.reserve(total);

    // p_first = R0^T (R_i p + t_i - t0)
    const Eigen::Matrix3d r0t = poses.front().rotation.transpose();
    const Eigen::Vector3d t0 = poses.front().translation;
    for (std::size_t i = 0; i < scans.size(); ++i) {
        const Eigen::Matrix3d r = r0t * poses[i].rotation;
        const Eigen::Vector3d t = r0t * (poses[i].translation - t0);
        for (const auto& p : scans[i].points) {
            Point3 q = r * p + t;
            if (finite(q))
                out.points.push_back(q);
        }
    }
    return out;
}

} // namespace iftd
