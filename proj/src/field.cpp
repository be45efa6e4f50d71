#include "fracta/field.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fracta {

OccupancyField OccupancyField::constant(double v) {
    if (v < 0 || v > 1) throw std::domain_error("constant field value outside [0,1]");
    return OccupancyField([v](const Vec3&) { return v; }, FieldKind::Analytic);
}

OccupancyField OccupancyField::sphere(const Vec3& center, double radius) {
    return OccupancyField([=](const Vec3& p) { return (p - center).norm() < radius ? 1.0 : 0.0; },
                          FieldKind::Analytic);
}

OccupancyField OccupancyField::box(const Vec3& center, const Vec3& half_extent) {
    return OccupancyField(
        [=](const Vec3& p) {
            Vec3 d = (p - center).cwiseAbs() - half_extent;
            return d.maxCoeff() < 0 ? 1.0 : 0.0;
        },
        FieldKind::Analytic);
}

OccupancyField OccupancyField::ellipsoid(const Vec3& center, const Vec3& semi_axes) {
    return OccupancyField(
        [=](const Vec3& p) {
            Vec3 d = (p - center).cwiseQuotient(semi_axes);
            return d.squaredNorm() < 1.0 ? 1.0 : 0.0;
        },
        FieldKind::Analytic);
}

OccupancyField OccupancyField::from_mesh(std::shared_ptr<const MeshOccupancy> oracle) {
    return OccupancyField([oracle](const Vec3& p) { return double(oracle->occupancy(p)); },
                          FieldKind::Analytic);
}

OccupancyField OccupancyField::from_grid(std::shared_ptr<const OccupancyGrid> grid) {
    return OccupancyField(
        [grid](const Vec3& p) {
            const OccupancyGrid& g = *grid;
            // coordinates in units of cells, relative to the first cell center
            Vec3 q = (p - g.origin) / g.cell_size - Vec3::Constant(0.5);
            double lim = double(g.k - 1);
            for (int i = 0; i < 3; ++i)
                if (q[i] < -0.5 || q[i] > lim + 0.5) return 0.0;
            int ix = std::clamp(int(std::floor(q[0])), 0, g.k - 2);
            int iy = std::clamp(int(std::floor(q[1])), 0, g.k - 2);
            int iz = std::clamp(int(std::floor(q[2])), 0, g.k - 2);
            double fx = std::clamp(q[0] - ix, 0.0, 1.0);
            double fy = std::clamp(q[1] - iy, 0.0, 1.0);
            double fz = std::clamp(q[2] - iz, 0.0, 1.0);
            double c00 = g.at(ix, iy, iz) * (1 - fx) + g.at(ix + 1, iy, iz) * fx;
            double c10 = g.at(ix, iy + 1, iz) * (1 - fx) + g.at(ix + 1, iy + 1, iz) * fx;
            double c01 = g.at(ix, iy, iz + 1) * (1 - fx) + g.at(ix + 1, iy, iz + 1) * fx;
            double c11 = g.at(ix, iy + 1, iz + 1) * (1 - fx) + g.at(ix + 1, iy + 1, iz + 1) * fx;
            return (c00 * (1 - fy) + c10 * fy) * (1 - fz) + (c01 * (1 - fy) + c11 * fy) * fz;
        },
        FieldKind::GridInterpolated);
}

int BreakSurfaceField::occupancy(const Vec3& p) const {
    for (int i = 0; i < 3; ++i)
        if (p[i] <= clip_lo[i] || p[i] >= clip_hi[i]) return 0;
    return signed_value(p) > 0 ? 1 : 0;
}

OccupancyField BreakSurfaceField::as_field() const {
    BreakSurfaceField copy = *this;
    return OccupancyField([copy](const Vec3& p) { return double(copy.occupancy(p)); },
                          FieldKind::Analytic);
}

double tnorm_restoration(double oC, double oB) {
    if (!(oC >= 0 && oC <= 1) || !(oB >= 0 && oB <= 1))
        throw std::domain_error("tnorm_restoration: inputs must lie in [0,1]");
    return oC * oB;
}

OccupancyField compose_restoration_field(const OccupancyField& fC, const OccupancyField& fB) {
    return OccupancyField([fC, fB](const Vec3& p) { return tnorm_restoration(fC(p), fB(p)); },
                          FieldKind::Analytic);
}

OccupancyGrid hard_intersection(const OccupancyGrid& gridC, const OccupancyGrid& gridB) {
    if (!gridC.same_layout(gridB))
        throw std::invalid_argument("hard_intersection: mismatched grid layout");
    OccupancyGrid out = gridC;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = double(threshold_occupied(gridC.values[i]) & threshold_occupied(gridB.values[i]));
    return out;
}

namespace {
constexpr char kGridMagic[4] = {'F', 'X', 'O', 'G'};
}

void save_grid(const OccupancyGrid& grid, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out.write(kGridMagic, 4);
    std::uint32_t version = 1, k = std::uint32_t(grid.k);
    out.write(reinterpret_cast<char*>(&version), 4);
    out.write(reinterpret_cast<char*>(&k), 4);
    float o[3] = {float(grid.origin[0]), float(grid.origin[1]), float(grid.origin[2])};
    out.write(reinterpret_cast<char*>(o), sizeof o);
    float cs = float(grid.cell_size);
    out.write(reinterpret_cast<char*>(&cs), 4);
    std::vector<float> vals(grid.values.begin(), grid.values.end());
    out.write(reinterpret_cast<const char*>(vals.data()), std::streamsize(vals.size() * 4));
}

OccupancyGrid load_grid(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open file");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kGridMagic, 4) != 0)
        throw std::runtime_error(path + ": bad FXOG magic");
    std::uint32_t version = 0, k = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&k), 4);
    if (!in || version != 1) throw std::runtime_error(path + ": unsupported FXOG version");
    if (k < 2 || k > 4096) throw std::runtime_error(path + ": implausible grid resolution");
    float o[3], cs;
    in.read(reinterpret_cast<char*>(o), sizeof o);
    in.read(reinterpret_cast<char*>(&cs), 4);
    OccupancyGrid g;
    g.k = int(k);
    g.origin = Vec3(o[0], o[1], o[2]);
    g.cell_size = cs;
    std::size_t n = std::size_t(k) * k * k;
    std::vector<float> vals(n);
    if (!in.read(reinterpret_cast<char*>(vals.data()), std::streamsize(n * 4)))
        throw std::runtime_error(path + ": truncated FXOG payload");
    g.values.assign(vals.begin(), vals.end());
    for (double v : g.values)
        if (!(v >= 0.0 && v <= 1.0)) throw std::runtime_error(path + ": grid value outside [0,1]");
    return g;
}

} // namespace fracta
