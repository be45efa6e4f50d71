#pragma once

#include "fracta/field.hpp"
#include "fracta/geometry.hpp"

#include <cstdint>
#include <string>

namespace fracta {

enum class PrimitiveKind { Sphere, Box, Ellipsoid };

// Smooth value noise in [-1,1]: trilinearly interpolated random lattice,
// 3 octaves. Deterministic in (position, seed).
double value_noise(const Vec3& p, std::uint64_t seed);

// Fracturing primitive: an implicit solid (negative inside) with a pose and
// an additive roughness term s'(x) = s(x) + a * noise(f * x).
struct Primitive {
    PrimitiveKind kind = PrimitiveKind::Sphere;
    RigidTransform pose;       // local -> world
    Vec3 shape = Vec3::Ones(); // sphere: radius in x; box: half extents; ellipsoid: semi-axes
    double perturb_amplitude = 0.0;
    double perturb_frequency = 8.0;
    std::uint64_t noise_seed = 0;

    // perturbed signed value, negative inside the (rough) primitive
    double signed_value(const Vec3& world_point) const;
    std::string describe() const;
};

struct TupleMeta {
    std::uint64_t seed = 0;
    PrimitiveKind primitive_kind = PrimitiveKind::Sphere;
    Vec3 primitive_center = Vec3::Zero();
    Vec3 primitive_shape = Vec3::Ones();
    double perturb_amplitude = 0.0;
    double perturb_frequency = 8.0;
    std::uint64_t noise_seed = 0;
    int grid_k = 64;
    double restoration_fraction = 0.0; // occupied-cell fraction R / C
};

// Ground-truth training tuple. Field identities hold by construction:
//   R = C * B   and   F = C * (1 - B)
struct ShapeTuple {
    OccupancyField complete;
    OccupancyField fractured;
    OccupancyField restoration;
    BreakSurfaceField break_surface;

    TriangleMesh complete_mesh;
    TriangleMesh fractured_mesh; // carries face_labels (fracture region)
    TriangleMesh restoration_mesh;
    TriangleMesh break_mesh; // break-surface patch inside the unit cube

    TupleMeta meta;
};

struct FractureRejection : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Subtract the (perturbed) primitive from the complete shape in field space;
// meshes extracted by marching cubes at grid_k. Throws FractureRejection when
// the restoration is empty or its volume fraction leaves [1%, 50%] of C.
ShapeTuple generate_fracture(const OccupancyField& complete, const TriangleMesh& complete_mesh,
                             const Primitive& primitive, int grid_k);

struct TupleReport {
    std::size_t points = 0;
    std::size_t restoration_violations = 0; // R != C AND B
    std::size_t fractured_violations = 0;   // F != C AND NOT B
    std::size_t disjoint_violations = 0;    // F AND R both 1
    double restoration_fraction = 0.0;
    bool clean() const {
        return restoration_violations == 0 && fractured_violations == 0 && disjoint_violations == 0;
    }
};

TupleReport validate_tuple(const ShapeTuple& tuple, std::size_t npoints, std::uint64_t seed);

// Draws a random primitive placed on the complete shape's surface.
Primitive random_primitive(const TriangleMesh& complete_mesh, std::uint64_t seed);

// Tuple bundle on disk: complete.ply, fractured.ply, restoration.ply,
// break.ply, grids/{complete,break,restoration}.fxog, meta (key=value).
void save_tuple_bundle(const ShapeTuple& tuple, const std::string& dir);
ShapeTuple load_tuple_bundle(const std::string& dir);

const char* primitive_kind_name(PrimitiveKind k);
PrimitiveKind primitive_kind_from_name(const std::string& name);

} // namespace fracta
