#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include "iftd/iftd.h"
#include "support/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

// Only the C interface is linked here, so files are written by hand.
void write_bin(const fs::path& path, const iftd::PointCloud& cloud)
{
    std::ofstream out(path, std::ios::binary);
    for (const auto& p : cloud.points) {
        float rec[4] = {float(p.x()), float(p.y()), float(p.z()), 0.0f};
        out.write(reinterpret_cast<const char*>(rec), sizeof(rec));
    }
}

void write_dataset(const fs::path& dir, const iftd::testing::Sequence& seq)
{
    fs::create_directories(dir / "scans");
    std::ofstream poses(dir / "poses.txt");
    poses.precision(17);
    for (std::size_t i = 0; i < seq.scans.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%06zu.bin", i);
        write_bin(dir / "scans" / name, seq.scans[i]);
        const auto& p = seq.poses[i];
        for (int r = 0; r < 3; ++r)
            poses << p.rotation(r, 0) << ' ' << p.rotation(r, 1) << ' ' << p.rotation(r, 2) << ' '
                  << p.translation(r) << (r == 2 ? '\n' : ' ');
    }
}

std::vector<float> flatten(const iftd::PointCloud& cloud)
{
    std::vector<float> xyz;
    for (const auto& p : cloud.points) {
        xyz.push_back(float(p.x()));
        xyz.push_back(float(p.y()));
        xyz.push_back(float(p.z()));
    }
    return xyz;
}

std::string get(const iftd_config* c, const char* key)
{
    char buf[256];
    REQUIRE(iftd_config_get(c, key, buf, sizeof(buf), nullptr) == IFTD_OK);
    return buf;
}

int run_cli(const std::string& args)
{
    std::string cmd = std::string(IFTD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Config
{
    iftd_config* ptr = nullptr;
    ~Config() { iftd_config_destroy(ptr); }
};

} // namespace

TEST_CASE("status strings and version")
{
    CHECK(std::string(iftd_version()).size() > 0);
    CHECK(std::string(iftd_status_string(IFTD_OK)).size() > 0);
    CHECK(std::string(iftd_status_string(IFTD_ERROR_CONFIG)) != iftd_status_string(IFTD_OK));
}

TEST_CASE("config get and set")
{
    Config c;
    REQUIRE(iftd_config_create(&c.ptr) == IFTD_OK);
    CHECK(get(c.ptr, "bev.resolution") == "400");
    CHECK(get(c.ptr, "keyframe_stride") == "5");
    CHECK(get(c.ptr, "descriptor.knn") == "15");
    CHECK(get(c.ptr, "database.top_k") == "50");
    CHECK(iftd_config_set(c.ptr, "verify.sim_threshold", "0.7") == IFTD_OK);
    CHECK(get(c.ptr, "verify.sim_threshold") == "0.7");
    CHECK(iftd_config_validate(c.ptr) == IFTD_OK);

    CHECK(iftd_config_set(c.ptr, "nope", "1") == IFTD_ERROR_CONFIG);
    CHECK(std::string(iftd_last_error()).find("nope") != std::string::npos);
    CHECK(iftd_config_set(c.ptr, "bev.resolution", "abc") == IFTD_ERROR_CONFIG);
    CHECK(iftd_config_set(c.ptr, "bev.resolution", "390") == IFTD_OK);
    CHECK(iftd_config_validate(c.ptr) == IFTD_ERROR_CONFIG);
    CHECK(iftd_config_set(nullptr, "bev.resolution", "400") == IFTD_ERROR_ARGUMENT);

    iftd_config* missing = nullptr;
    CHECK(iftd_config_load("/nonexistent/iftd.cfg", &missing) == IFTD_ERROR_CONFIG);
    CHECK(missing == nullptr);
}

TEST_CASE("config get reports the size it needs")
{
    Config c;
    REQUIRE(iftd_config_create(&c.ptr) == IFTD_OK);
    char small[2];
    size_t need = 0;
    CHECK(iftd_config_get(c.ptr, "bev.resolution", small, sizeof(small), &need) == IFTD_ERROR_BUFFER_TOO_SMALL);
    CHECK(need == 4);
    char exact[4];
    CHECK(iftd_config_get(c.ptr, "bev.resolution", exact, sizeof(exact), &need) == IFTD_OK);
    CHECK(std::string(exact) == "400");
}

TEST_CASE("dump_bev writes a pgm")
{
    auto dir = iftd::testing::scratch_dir("capi_dump");
    std::mt19937_64 rng(81);
    write_bin(dir / "s.bin", iftd::testing::random_scene(rng));
    REQUIRE(iftd_dump_bev((dir / "s.bin").c_str(), "kitti_bin", nullptr, (dir / "s.pgm").c_str()) == IFTD_OK);
    auto bytes = slurp(dir / "s.pgm");
    CHECK(bytes.rfind("P5\n400 400\n255\n", 0) == 0);
    CHECK(bytes.size() == 15 + 400 * 400);
    CHECK(iftd_dump_bev((dir / "none.bin").c_str(), "kitti_bin", nullptr, (dir / "x.pgm").c_str()) == IFTD_ERROR_IO);
    CHECK(iftd_dump_bev((dir / "s.bin").c_str(), "pcd", nullptr, (dir / "x.pgm").c_str()) == IFTD_ERROR_CONFIG);
}

TEST_CASE("online detector finds a replayed drive")
{
    auto seq = iftd::testing::replayed_drive(82, 40, 3.0);
    Config c;
    REQUIRE(iftd_config_create(&c.ptr) == IFTD_OK);
    iftd_detector* det = nullptr;
    REQUIRE(iftd_detector_create(c.ptr, &det) == IFTD_OK);
    int accepted = 0, correct = 0;
    for (std::size_t k = 0; k < seq.scans.size(); ++k) {
        auto xyz = flatten(seq.scans[k]);
        iftd_loop loop{};
        REQUIRE(iftd_detector_add_keyframe(det, static_cast<int64_t>(k), xyz.data(), seq.scans[k].size(), &loop) == IFTD_OK);
        CHECK(loop.query_frame == static_cast<int64_t>(k));
        if (loop.accepted) {
            ++accepted;
            CHECK(loop.found);
            CHECK(loop.match_frame <= static_cast<int64_t>(k) - 30);
            CHECK(loop.similarity > 0.5);
            double gap = std::abs(seq.poses[k].translation.x() - seq.poses[loop.match_frame].translation.x());
            correct += gap <= 15.0;
        }
    }
    CHECK(iftd_detector_keyframe_count(det) == seq.scans.size());
    CHECK(accepted >= 38);
    CHECK(correct == accepted);

    auto dir = iftd::testing::scratch_dir("capi_db");
    CHECK(iftd_detector_save_database(det, (dir / "db.bin").c_str()) == IFTD_OK);
    CHECK(fs::file_size(dir / "db.bin") > 0);

    // repeated frame id
    auto xyz = flatten(seq.scans[0]);
    CHECK(iftd_detector_add_keyframe(det, 5, xyz.data(), seq.scans[0].size(), nullptr) != IFTD_OK);
    CHECK(iftd_detector_add_keyframe(det, 100, nullptr, 3, nullptr) == IFTD_ERROR_ARGUMENT);
    iftd_detector_destroy(det);
}

TEST_CASE("batch run and pr recomputation")
{
    auto dir = iftd::testing::scratch_dir("capi_run");
    write_dataset(dir / "data", iftd::testing::replayed_drive(83, 40, 3.0));
    Config c;
    REQUIRE(iftd_config_create(&c.ptr) == IFTD_OK);
    REQUIRE(iftd_config_set(c.ptr, "dataset_root", (dir / "data" / "scans").c_str()) == IFTD_OK);
    REQUIRE(iftd_config_set(c.ptr, "pose_file", (dir / "data" / "poses.txt").c_str()) == IFTD_OK);
    REQUIRE(iftd_config_set(c.ptr, "keyframe_stride", "1") == IFTD_OK);
    iftd_run_summary s{};
    REQUIRE(iftd_run_sequence(c.ptr, (dir / "out").c_str(), &s) == IFTD_OK);
    CHECK(s.keyframes == 80);
    CHECK(s.opportunities > 0);
    CHECK(s.recall >= 0.95);
    CHECK(s.precision == 1.0);
    for (const char* f : {"loops.csv", "detections.csv", "pr_curve.csv", "timing.csv", "summary.txt"})
        CHECK(fs::exists(dir / "out" / f));

    iftd_pr_options o;
    iftd_pr_options_default(&o);
    CHECK(o.keyframe_stride == 5);
    CHECK(o.exclusion_window == 30);
    CHECK(o.gt_distance_threshold == 15.0);
    o.keyframe_stride = 1;
    iftd_pr_point pts[32];
    size_t count = 0;
    REQUIRE(iftd_recompute_pr((dir / "out" / "detections.csv").c_str(), (dir / "data" / "poses.txt").c_str(), &o,
                              (dir / "pr.csv").c_str(), pts, 32, &count) == IFTD_OK);
    CHECK(count == 20);
    CHECK(slurp(dir / "pr.csv") == slurp(dir / "out" / "pr_curve.csv"));
    CHECK(iftd_recompute_pr((dir / "out" / "detections.csv").c_str(), (dir / "data" / "poses.txt").c_str(), &o,
                            nullptr, pts, 4, &count) == IFTD_ERROR_BUFFER_TOO_SMALL);
    CHECK(count == 20);

    REQUIRE(iftd_config_set(c.ptr, "dataset_root", (dir / "missing").c_str()) == IFTD_OK);
    CHECK(iftd_run_sequence(c.ptr, (dir / "out2").c_str(), nullptr) == IFTD_ERROR_IO);
}

TEST_CASE("cli exit codes")
{
    auto dir = iftd::testing::scratch_dir("capi_cli");
    write_dataset(dir / "data", iftd::testing::replayed_drive(84, 8, 3.0));
    std::ofstream(dir / "ok.cfg") << "dataset_root = data/scans\npose_file = data/poses.txt\nkeyframe_stride = 1\n";
    std::ofstream(dir / "bad.cfg") << "dataset_root = data/scans\nbogus = 1\n";
    std::ofstream(dir / "nodata.cfg") << "dataset_root = nowhere\npose_file = data/poses.txt\n";

    const std::string d = dir.string();
    CHECK(run_cli("run --config " + d + "/ok.cfg --out " + d + "/out --deterministic") == 0);
    CHECK(fs::exists(dir / "out" / "loops.csv"));
    CHECK(run_cli("run --config " + d + "/bad.cfg --out " + d + "/out2") == 2);
    CHECK(run_cli("run --config " + d + "/ok.cfg --out " + d + "/out3 --set nope=1") == 2);
    CHECK(run_cli("run --config " + d + "/nodata.cfg --out " + d + "/out4") == 3);
    CHECK(run_cli("run --out " + d + "/out5") == 2);
    CHECK(run_cli("") == 2);
    CHECK(run_cli("pr --loops " + d + "/out/loops.csv --poses " + d + "/data/poses.txt --stride 1 --out " + d + "/pr.csv") == 0);
    CHECK(fs::exists(dir / "pr.csv"));
    CHECK(run_cli("pr --loops " + d + "/missing.csv --poses " + d + "/data/poses.txt") == 3);
    CHECK(run_cli("dump-bev --scan " + d + "/data/scans/000000.bin --out " + d + "/a.pgm") == 0);
    CHECK(fs::exists(dir / "a.pgm"));
    CHECK(run_cli("dump-bev --scan " + d + "/data/scans/000000.bin --out " + d + "/b.pgm --format pcd") == 2);
    CHECK(run_cli("--help") == 0);
}
