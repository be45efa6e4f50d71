#pragma once

#include "fracta/geometry.hpp"
#include "fracta/metrics.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fracta {

struct ScanParseError : std::runtime_error {
    ScanParseError(const std::string& msg, std::size_t byte_offset);
    std::size_t byte_offset = 0;
};

struct DepthScanRecord {
    std::vector<Vec3> points;                       // f32 precision on disk
    std::vector<std::array<std::uint8_t, 3>> colors;
    std::vector<Vec3> normals;
    Eigen::Matrix4d camera_frame = Eigen::Matrix4d::Identity();
    // alignment T (scan -> model) as stored on disk; source of truth for
    // bit-exact round trips
    Eigen::Matrix4d alignment_matrix = Eigen::Matrix4d::Identity();
    double turntable_distance = 0; // millimeters
    std::uint32_t flags = 0;
    std::string record_id;

    std::size_t size() const { return points.size(); }
    RigidTransform alignment() const; // decomposed scale/rotation/translation
    void set_alignment(const RigidTransform& T);
    std::vector<std::array<float, 3>> colors_float() const; // u8 -> [0,1]
};

// FXRG binary record IO. Parse errors carry byte offsets.
DepthScanRecord parse_scan(const std::string& path);
void write_scan(const DepthScanRecord& record, const std::string& path);

struct CameraIntrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    bool valid(int width, int height) const {
        return fx > 0 && fy > 0 && cx >= 0 && cx < width && cy >= 0 && cy < height;
    }
};

struct ScanPair {
    std::string image_path;
    std::string record_path;
};

struct ProjectDescriptor {
    CameraIntrinsics intrinsics;
    int width = 0, height = 0;
    std::vector<ScanPair> scans;
    std::vector<std::string> warnings; // duplicate-key notes
};

ProjectDescriptor parse_project(const std::string& path);

struct MaskProjection {
    BinaryMask mask;
    bool all_behind_camera = false; // warning flag
};

// Applies T^-1 to the mesh, projects through the pinhole model, rasterizes a
// silhouette (half-space edge functions, top-left rule). Z <= 0 culled.
MaskProjection project_mask(const TriangleMesh& mesh, const RigidTransform& T,
                            const CameraIntrinsics& K, int width, int height);

} // namespace fracta
