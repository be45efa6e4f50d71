#include "fracta/isosurface.hpp"

#include <cmath>
#include <unordered_map>

namespace fracta {

#include "mc_tables.inc"

namespace {

// corner offsets, Bourke ordering
const int kCorner[8][3] = {
    {0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1},
    {0, 1, 0}, {1, 1, 0}, {1, 1, 1}, {0, 1, 1},
};
const int kEdgeCorner[12][2] = {
    {0, 1}, {1, 2}, {2, 3}, {3, 0},
    {4, 5}, {5, 6}, {6, 7}, {7, 4},
    {0, 4}, {1, 5}, {2, 6}, {3, 7},
};

// canonical lattice-edge key: min endpoint corner plus axis
std::uint64_t edge_key(int x0, int y0, int z0, int x1, int y1, int z1) {
    int axis = (x1 != x0) ? 0 : (y1 != y0) ? 1 : 2;
    int mx = std::min(x0, x1), my = std::min(y0, y1), mz = std::min(z0, z1);
    return (std::uint64_t(mx) << 44) | (std::uint64_t(my) << 24) | (std::uint64_t(mz) << 4) | std::uint64_t(axis);
}

} // namespace

OccupancyGrid query_grid(const OccupancyField& field, int k) {
    OccupancyGrid g = OccupancyGrid::make(k);
    for (int z = 0; z < k; ++z)
        for (int y = 0; y < k; ++y)
            for (int x = 0; x < k; ++x)
                g.at(x, y, z) = field(g.cell_center(x, y, z));
    return g;
}

TriangleMesh marching_cubes(const OccupancyGrid& grid, double level) {
    TriangleMesh mesh;
    const int k = grid.k;
    std::unordered_map<std::uint64_t, std::int32_t> vert_of_edge;
    vert_of_edge.reserve(std::size_t(k) * k);

    double vals[8];
    int cx[8], cy[8], cz[8];
    std::int32_t edge_vert[12];

    for (int z = 0; z + 1 < k; ++z) {
        for (int y = 0; y + 1 < k; ++y) {
            for (int x = 0; x + 1 < k; ++x) {
                int cube_index = 0;
                for (int c = 0; c < 8; ++c) {
                    cx[c] = x + kCorner[c][0];
                    cy[c] = y + kCorner[c][1];
                    cz[c] = z + kCorner[c][2];
                    vals[c] = grid.at(cx[c], cy[c], cz[c]);
                    if (vals[c] < level) cube_index |= (1 << c);
                }
                int edges = kEdgeTable[cube_index];
                if (edges == 0) continue;
                for (int e = 0; e < 12; ++e) {
                    if (!(edges & (1 << e))) continue;
                    int a = kEdgeCorner[e][0], b = kEdgeCorner[e][1];
                    std::uint64_t key = edge_key(cx[a], cy[a], cz[a], cx[b], cy[b], cz[b]);
                    auto it = vert_of_edge.find(key);
                    if (it != vert_of_edge.end()) {
                        edge_vert[e] = it->second;
                        continue;
                    }
                    double va = vals[a], vb = vals[b];
                    double t = (va == vb) ? 0.5 : (level - va) / (vb - va);
                    t = std::clamp(t, 0.0, 1.0);
                    Vec3 pa = grid.cell_center(cx[a], cy[a], cz[a]);
                    Vec3 pb = grid.cell_center(cx[b], cy[b], cz[b]);
                    std::int32_t vi = std::int32_t(mesh.vertices.size());
                    mesh.vertices.push_back(pa + t * (pb - pa));
                    vert_of_edge.emplace(key, vi);
                    edge_vert[e] = vi;
                }
                for (const int* t = kTriTable[cube_index]; *t != -1; t += 3) {
                    std::int32_t a = edge_vert[t[0]], b = edge_vert[t[2]], c = edge_vert[t[1]];
                    if (a == b || b == c || a == c) continue; // welded shut by clamping
                    // winding order chosen so normals point toward low values (outside)
                    mesh.triangles.push_back({a, b, c});
                }
            }
        }
    }
    return mesh;
}

ExtractionResult extract_isosurface(OccupancyGrid grid, double level) {
    ExtractionResult res;
    res.nonzero = false;
    for (double v : grid.values) {
        if (v >= 0.5) { res.nonzero = true; break; }
    }
    if (res.nonzero) res.mesh = marching_cubes(grid, level);
    res.grid = std::move(grid);
    return res;
}

ExtractionResult extract_isosurface(const OccupancyField& field, int k, double level) {
    return extract_isosurface(query_grid(field, k), level);
}

} // namespace fracta
