#pragma once

#include "fracta/fracture.hpp"
#include "fracta/metrics.hpp"
#include "fracta/scan.hpp"

#include <string>
#include <vector>

namespace fracta {

struct CameraModel {
    RigidTransform pose; // world -> camera; +z looks forward
    CameraIntrinsics intrinsics;
    int width = 224, height = 224;
    bool degenerate_fracture = false; // up-vector fallback warning

    Vec3 position() const;       // camera center in world space
    Vec3 forward() const;        // world-space view direction
    static CameraModel look_at(const Vec3& eye, const Vec3& target, const Vec3& up_hint,
                               int resolution, double vfov_deg);
};

// Camera facing the fracture region per the placement procedure: centroid of
// fracture-labeled vertices, total-least-squares plane normal (flipped away
// from the object body), offset so the bounding sphere fills <= 90% of the
// vertical FOV.
CameraModel fracture_camera(const ShapeTuple& tuple, int resolution = 224,
                            double vfov_deg = 50.0);

struct ObservationImage {
    int width = 0, height = 0;
    std::vector<float> shade; // row-major [0,1], background 0
    std::vector<float> depth; // camera-space z, 0 at background
    BinaryMask silhouette;
    bool all_behind_camera = false;

    float shade_at(int x, int y) const { return shade[std::size_t(y) * width + x]; }
    float depth_at(int x, int y) const { return depth[std::size_t(y) * width + x]; }
};

// Z-buffered Lambertian render: 0.3 ambient + 0.7 * max(0, n.l) headlight.
ObservationImage render_observation(const TriangleMesh& mesh, const CameraModel& camera);

void write_pgm(const std::vector<float>& gray, int width, int height, const std::string& path);
void write_ppm(const std::vector<float>& rgb, int width, int height, const std::string& path);
void write_depth(const std::vector<float>& depth, int width, int height,
                 const std::string& path); // FXDM raster
std::vector<float> read_depth(const std::string& path, int& width, int& height);

} // namespace fracta
