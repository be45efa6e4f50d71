#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fracta {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class FaceLabel : std::uint8_t { Exterior = 0, Fracture = 1 };

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::int32_t, 3>> triangles;
    std::vector<Vec3> vertex_normals;   // empty or size == vertices.size()
    std::vector<Vec3> vertex_colors;    // RGB in [0,1]
    std::vector<FaceLabel> face_labels; // empty or size == triangles.size()

    bool empty() const { return vertices.empty() || triangles.empty(); }
    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_triangles() const { return triangles.size(); }

    Vec3 face_normal(std::size_t f) const;
    double face_area(std::size_t f) const;
    double total_area() const;

    // axis-aligned bounds
    void bounds(Vec3& lo, Vec3& hi) const;

    // Drops zero-area triangles in place; returns how many were removed.
    std::size_t drop_degenerate_faces(double area_eps = 1e-14);

    // Throws std::invalid_argument if indices are out of range or normals
    // are present but not unit length.
    void validate() const;
};

// p' = scale * (R * p) + t
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double uniform_scale = 1.0;

    Vec3 apply(const Vec3& p) const { return uniform_scale * (rotation * p) + translation; }
    RigidTransform inverse() const;
    static RigidTransform identity() { return {}; }

    bool is_valid(double tol = 1e-9) const;
};

struct OccupancyGrid {
    int k = 0;            // resolution per axis
    Vec3 origin;          // min corner of the grid cube
    double cell_size = 0; // grid spans [origin, origin + k*cell_size]^3
    std::vector<double> values; // k^3, x-fastest

    double& at(int x, int y, int z) { return values[std::size_t(x) + std::size_t(k) * (std::size_t(y) + std::size_t(k) * z)]; }
    double at(int x, int y, int z) const { return values[std::size_t(x) + std::size_t(k) * (std::size_t(y) + std::size_t(k) * z)]; }
    Vec3 cell_center(int x, int y, int z) const {
        return origin + cell_size * Vec3(x + 0.5, y + 0.5, z + 0.5);
    }
    std::size_t size() const { return values.size(); }
    bool same_layout(const OccupancyGrid& o) const;

    // default evaluation cube: side 1.1 centered at the origin
    static OccupancyGrid make(int k, double side = 1.1, const Vec3& center = Vec3::Zero());
};

struct WatertightReport {
    bool watertight = false;
    std::size_t boundary_edges = 0;    // undirected edges with face count != 2
    std::size_t nonmanifold_edges = 0; // directed edges seen more than once
    std::string summary() const;
};

WatertightReport is_watertight(const TriangleMesh& mesh);

// Ray-parity occupancy oracle over a watertight mesh. Builds a BVH once;
// queries are deterministic (ray direction derived from the query point).
class MeshOccupancy {
public:
    explicit MeshOccupancy(const TriangleMesh& mesh); // throws if not watertight

    // 1 iff strictly inside; exactly-on-surface points resolve to 0.
    int occupancy(const Vec3& p) const;

    const TriangleMesh& mesh() const { return mesh_; }

private:
    struct Node {
        Vec3 lo, hi;
        std::int32_t left = -1, right = -1; // children, or
        std::int32_t first = 0, count = 0;  // leaf triangle range
    };
    struct Hit { double t; double min_bary; };

    void build();
    bool cast_ray(const Vec3& origin, const Vec3& dir, std::vector<Hit>& hits) const;

    TriangleMesh mesh_;
    std::vector<Node> nodes_;
    std::vector<std::int32_t> tri_order_;
};

// Returns (normalized mesh, transform mapping original->normalized).
// Bounding box centered at origin, longest side = 1.
std::pair<TriangleMesh, RigidTransform> normalize_to_unit_cube(const TriangleMesh& mesh);

// Convenience one-shot oracle (builds a MeshOccupancy internally).
int point_occupancy(const TriangleMesh& mesh, const Vec3& p);

// Occupancy sampled at cell centers of the 1.1-side cube at resolution k.
OccupancyGrid voxelize(const TriangleMesh& mesh, int k);

struct SurfaceSamples {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::vector<std::int32_t> face_ids;
};

// Area-uniform surface sampling; deterministic for a fixed seed.
SurfaceSamples surface_sample(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed);

} // namespace fracta
