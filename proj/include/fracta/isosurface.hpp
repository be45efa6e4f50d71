#pragma once

#include "fracta/field.hpp"
#include "fracta/geometry.hpp"

namespace fracta {

struct ExtractionResult {
    TriangleMesh mesh; // empty when nonzero == false
    bool nonzero = false;
    OccupancyGrid grid; // retained for diagnostics
};

// Field sampled at cell centers of the 1.1-side cube at resolution k.
OccupancyGrid query_grid(const OccupancyField& field, int k);

// Standard 256-case marching cubes of the `level` isosurface over the
// cell-center lattice. Vertices are welded across cells; orientation is
// outward (low values outside). An empty mesh is a valid result.
TriangleMesh marching_cubes(const OccupancyGrid& grid, double level = 0.5);

// query + extract + emptiness flag (nonzero iff any grid value >= 0.5)
ExtractionResult extract_isosurface(const OccupancyField& field, int k, double level = 0.5);
ExtractionResult extract_isosurface(OccupancyGrid grid, double level = 0.5);

} // namespace fracta
