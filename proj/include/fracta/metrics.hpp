#pragma once

#include "fracta/geometry.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fracta {

// Static nearest-neighbor index over a fixed point set.
class KdTree3 {
public:
    explicit KdTree3(std::vector<Vec3> points);

    // index of the nearest point (ties: lowest index); squared distance out
    std::size_t nearest(const Vec3& q, double& sq_dist) const;
    const std::vector<Vec3>& points() const { return points_; }

private:
    struct Node {
        int axis = -1; // -1 marks a leaf
        double split = 0;
        std::int32_t left = -1, right = -1;
        std::int32_t first = 0, count = 0;
    };
    std::int32_t build(std::int32_t first, std::int32_t count);
    void search(std::int32_t node, const Vec3& q, std::size_t& best, double& best_sq) const;

    std::vector<Vec3> points_;
    std::vector<std::int32_t> order_;
    std::vector<Node> nodes_;
};

// Two-sided mean of squared nearest-neighbor distances.
double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Symmetrized mean |cos| between sample normals and the normal at the nearest
// sample on the other mesh. npoints area-uniform samples per mesh.
double normal_consistency(const TriangleMesh& a, const TriangleMesh& b, std::size_t npoints,
                          std::uint64_t seed);

struct RotationSearchResult {
    double angle_deg = 0; // best rotation of pred about +y
    double cd = 0;
    std::vector<double> per_angle_cd; // in angle order, 360*i/x degrees
};

// CD over x rotations of pred by 360*i/x degrees about +y; ties break toward
// the smallest angle.
RotationSearchResult rotation_search_cd(const TriangleMesh& pred, const TriangleMesh& gt, int x,
                                        std::size_t npoints, std::uint64_t seed);

// 100 * generated / total over per-shape "nonzero" flags.
double nz_percent(const std::vector<bool>& generated);

struct BinaryMask {
    int width = 0, height = 0;
    std::vector<std::uint8_t> values; // row-major, 0/1

    std::uint8_t& at(int x, int y) { return values[std::size_t(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return values[std::size_t(y) * width + x]; }
    std::size_t count() const;
    static BinaryMask make(int width, int height);
};

// 2|A∩B| / (|A|+|B|); 1 when both masks are empty.
double dice(const BinaryMask& a, const BinaryMask& b);

// Keeps the largest connected true region (4-connected by default);
// ties break toward the smallest scanline index of the region's first pixel.
BinaryMask largest_component(const BinaryMask& mask, bool eight_connected = false);

struct MetricRow {
    std::string object_id;
    double cd = 0, nc = 0, angle = 0;
    bool nonzero = false;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    double mean_cd() const;  // over nonzero rows
    double mean_nc() const;  // over nonzero rows
    double nz() const;
    std::string to_csv() const; // object_id,cd,nc,angle,nonzero + summary line
};

} // namespace fracta
