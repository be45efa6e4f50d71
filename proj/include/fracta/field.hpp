#pragma once

#include "fracta/geometry.hpp"

#include <functional>
#include <memory>
#include <string>

namespace fracta {

enum class FieldKind { Analytic, GridInterpolated, Neural };

// Immutable occupancy field: point -> [0,1]. Evaluation must be pure.
class OccupancyField {
public:
    using Fn = std::function<double(const Vec3&)>;

    OccupancyField() = default;
    OccupancyField(Fn fn, FieldKind kind) : fn_(std::move(fn)), kind_(kind) {}

    double operator()(const Vec3& p) const { return fn_(p); }
    FieldKind kind() const { return kind_; }
    bool valid() const { return bool(fn_); }

    static OccupancyField constant(double v);
    static OccupancyField sphere(const Vec3& center, double radius);
    static OccupancyField box(const Vec3& center, const Vec3& half_extent);
    static OccupancyField ellipsoid(const Vec3& center, const Vec3& semi_axes);
    static OccupancyField from_mesh(std::shared_ptr<const MeshOccupancy> oracle);
    // trilinear interpolation of grid values, 0 outside the grid cube
    static OccupancyField from_grid(std::shared_ptr<const OccupancyGrid> grid);

private:
    Fn fn_;
    FieldKind kind_ = FieldKind::Analytic;
};

// Oriented implicit break surface: s(x) > 0 on the restoration side.
// Occupancy is 1 iff s(x) > 0 and x lies inside the unit cube clip.
struct BreakSurfaceField {
    std::function<double(const Vec3&)> signed_value;
    Vec3 clip_lo = Vec3::Constant(-0.5);
    Vec3 clip_hi = Vec3::Constant(0.5);

    int occupancy(const Vec3& p) const;
    OccupancyField as_field() const;
};

// Eq-1 product T-norm. Throws std::domain_error outside [0,1].
double tnorm_restoration(double oC, double oB);

// Pointwise product field: x -> tnorm(fC(x), fB(x)).
OccupancyField compose_restoration_field(const OccupancyField& fC, const OccupancyField& fB);

// Cellwise AND of thresholded (>= 0.5) grids; output values in {0,1}.
OccupancyGrid hard_intersection(const OccupancyGrid& gridC, const OccupancyGrid& gridB);

// FXOG serialization (binary little-endian).
void save_grid(const OccupancyGrid& grid, const std::string& path);
OccupancyGrid load_grid(const std::string& path);

// occupied iff value >= 0.5 (tie counts as occupied)
inline int threshold_occupied(double v) { return v >= 0.5 ? 1 : 0; }

} // namespace fracta
