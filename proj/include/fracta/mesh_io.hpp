#pragma once

#include "fracta/geometry.hpp"

#include <stdexcept>
#include <string>

namespace fracta {

struct MeshParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MeshLoadResult {
    TriangleMesh mesh;
    std::size_t degenerate_dropped = 0;
};

// Dispatches on extension: .off (ASCII) or .ply (binary little-endian,
// restricted layout: float x,y,z [nx,ny,nz] [uchar rgb]; uchar-count faces).
MeshLoadResult load_mesh(const std::string& path);

TriangleMesh load_off(const std::string& path, std::size_t* dropped = nullptr);
TriangleMesh load_ply(const std::string& path, std::size_t* dropped = nullptr);

void save_mesh(const TriangleMesh& mesh, const std::string& path);
void save_off(const TriangleMesh& mesh, const std::string& path);
void save_ply(const TriangleMesh& mesh, const std::string& path);

} // namespace fracta
