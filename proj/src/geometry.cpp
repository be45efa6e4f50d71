#include "fracta/geometry.hpp"
#include "fracta/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace fracta {

Vec3 TriangleMesh::face_normal(std::size_t f) const {
    const auto& t = triangles[f];
    Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
    double len = n.norm();
    if (len <= 0.0) return Vec3::Zero();
    return n / len;
}

double TriangleMesh::face_area(std::size_t f) const {
    const auto& t = triangles[f];
    return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

double TriangleMesh::total_area() const {
    double a = 0;
    for (std::size_t f = 0; f < triangles.size(); ++f) a += face_area(f);
    return a;
}

void TriangleMesh::bounds(Vec3& lo, Vec3& hi) const {
    lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    hi = -lo;
    for (const auto& v : vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
}

std::size_t TriangleMesh::drop_degenerate_faces(double area_eps) {
    std::size_t removed = 0;
    std::vector<std::array<std::int32_t, 3>> keep;
    std::vector<FaceLabel> keep_labels;
    keep.reserve(triangles.size());
    for (std::size_t f = 0; f < triangles.size(); ++f) {
        if (face_area(f) > area_eps) {
            keep.push_back(triangles[f]);
            if (!face_labels.empty()) keep_labels.push_back(face_labels[f]);
        } else {
            ++removed;
        }
    }
    triangles.swap(keep);
    if (!face_labels.empty()) face_labels.swap(keep_labels);
    return removed;
}

void TriangleMesh::validate() const {
    const auto nv = std::int64_t(vertices.size());
    for (std::size_t f = 0; f < triangles.size(); ++f) {
        for (int i = 0; i < 3; ++i) {
            if (triangles[f][i] < 0 || triangles[f][i] >= nv)
                throw std::invalid_argument("triangle " + std::to_string(f) + " references vertex " +
                                            std::to_string(triangles[f][i]) + " of " + std::to_string(nv));
        }
    }
    if (!vertex_normals.empty()) {
        if (vertex_normals.size() != vertices.size())
            throw std::invalid_argument("vertex_normals size mismatch");
        for (const auto& n : vertex_normals) {
            if (std::abs(n.norm() - 1.0) > 1e-6)
                throw std::invalid_argument("non-unit vertex normal");
        }
    }
    if (!face_labels.empty() && face_labels.size() != triangles.size())
        throw std::invalid_argument("face_labels size mismatch");
}

RigidTransform RigidTransform::inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.uniform_scale = 1.0 / uniform_scale;
    inv.translation = -inv.uniform_scale * (inv.rotation * translation);
    return inv;
}

bool RigidTransform::is_valid(double tol) const {
    if (!(uniform_scale > 0)) return false;
    Mat3 e = rotation.transpose() * rotation - Mat3::Identity();
    return e.cwiseAbs().maxCoeff() <= tol;
}

bool OccupancyGrid::same_layout(const OccupancyGrid& o) const {
    return k == o.k && cell_size == o.cell_size && (origin - o.origin).cwiseAbs().maxCoeff() == 0.0;
}

OccupancyGrid OccupancyGrid::make(int k, double side, const Vec3& center) {
    if (k < 2) throw std::invalid_argument("grid resolution must be >= 2");
    OccupancyGrid g;
    g.k = k;
    g.cell_size = side / k;
    g.origin = center - Vec3::Constant(side / 2.0);
    g.values.assign(std::size_t(k) * k * k, 0.0);
    return g;
}

std::string WatertightReport::summary() const {
    std::ostringstream os;
    os << (watertight ? "watertight" : "not watertight") << " (" << boundary_edges
       << " boundary edges, " << nonmanifold_edges << " nonmanifold edges)";
    return os.str();
}

WatertightReport is_watertight(const TriangleMesh& mesh) {
    // Directed half-edge counting: consistent winding means every directed
    // edge appears exactly once and its opposite exactly once.
    std::unordered_map<std::uint64_t, int> directed;
    directed.reserve(mesh.triangles.size() * 3);
    auto key = [](std::int32_t a, std::int32_t b) {
        return (std::uint64_t(std::uint32_t(a)) << 32) | std::uint32_t(b);
    };
    for (const auto& t : mesh.triangles) {
        directed[key(t[0], t[1])]++;
        directed[key(t[1], t[2])]++;
        directed[key(t[2], t[0])]++;
    }
    WatertightReport rep;
    std::unordered_map<std::uint64_t, int> undirected;
    for (const auto& [k, c] : directed) {
        if (c > 1) rep.nonmanifold_edges++;
        std::int32_t a = std::int32_t(k >> 32), b = std::int32_t(k & 0xffffffffu);
        auto uk = a < b ? (std::uint64_t(std::uint32_t(a)) << 32 | std::uint32_t(b))
                        : (std::uint64_t(std::uint32_t(b)) << 32 | std::uint32_t(a));
        undirected[uk] += c;
    }
    for (const auto& [k, c] : undirected) {
        (void)k;
        if (c != 2) rep.boundary_edges++;
    }
    // consistent winding additionally requires each directed edge paired with
    // its reverse, which the two counts above imply together with c==2
    rep.watertight = !mesh.triangles.empty() && rep.boundary_edges == 0 && rep.nonmanifold_edges == 0;
    if (rep.watertight) {
        for (const auto& [k, c] : directed) {
            (void)c;
            std::int32_t a = std::int32_t(k >> 32), b = std::int32_t(k & 0xffffffffu);
            if (directed.find((std::uint64_t(std::uint32_t(b)) << 32) | std::uint32_t(a)) == directed.end()) {
                rep.watertight = false;
                rep.boundary_edges++;
            }
        }
    }
    return rep;
}

MeshOccupancy::MeshOccupancy(const TriangleMesh& mesh) : mesh_(mesh) {
    auto rep = is_watertight(mesh_);
    if (!rep.watertight)
        throw std::invalid_argument("occupancy oracle requires a watertight mesh: " + rep.summary());
    build();
}

void MeshOccupancy::build() {
    const std::size_t n = mesh_.num_triangles();
    tri_order_.resize(n);
    std::iota(tri_order_.begin(), tri_order_.end(), 0);
    std::vector<Vec3> centroids(n);
    for (std::size_t f = 0; f < n; ++f) {
        const auto& t = mesh_.triangles[f];
        centroids[f] = (mesh_.vertices[t[0]] + mesh_.vertices[t[1]] + mesh_.vertices[t[2]]) / 3.0;
    }
    nodes_.clear();
    nodes_.reserve(2 * n);

    struct Item { std::int32_t node; std::int32_t first, count; };
    nodes_.push_back({});
    std::vector<Item> stack{{0, 0, std::int32_t(n)}};
    while (!stack.empty()) {
        auto [ni, first, count] = stack.back();
        stack.pop_back();
        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
        for (std::int32_t i = first; i < first + count; ++i) {
            const auto& t = mesh_.triangles[tri_order_[i]];
            for (int v = 0; v < 3; ++v) {
                lo = lo.cwiseMin(mesh_.vertices[t[v]]);
                hi = hi.cwiseMax(mesh_.vertices[t[v]]);
            }
        }
        nodes_[ni].lo = lo;
        nodes_[ni].hi = hi;
        if (count <= 4) {
            nodes_[ni].first = first;
            nodes_[ni].count = count;
            continue;
        }
        int axis = 0;
        Vec3 ext = hi - lo;
        if (ext[1] > ext[0]) axis = 1;
        if (ext[2] > ext[axis]) axis = 2;
        auto mid = tri_order_.begin() + first + count / 2;
        std::nth_element(tri_order_.begin() + first, mid, tri_order_.begin() + first + count,
                         [&](std::int32_t a, std::int32_t b) { return centroids[a][axis] < centroids[b][axis]; });
        std::int32_t lcount = count / 2;
        nodes_[ni].left = std::int32_t(nodes_.size());
        nodes_.push_back({});
        nodes_[ni].right = std::int32_t(nodes_.size());
        nodes_.push_back({});
        stack.push_back({nodes_[ni].left, first, lcount});
        stack.push_back({nodes_[ni].right, first + lcount, count - lcount});
    }
}

namespace {

bool ray_aabb(const Vec3& o, const Vec3& inv_d, const Vec3& lo, const Vec3& hi) {
    double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        double t0 = (lo[i] - o[i]) * inv_d[i];
        double t1 = (hi[i] - o[i]) * inv_d[i];
        if (t0 > t1) std::swap(t0, t1);
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
        if (tmin > tmax) return false;
    }
    return true;
}

} // namespace

bool MeshOccupancy::cast_ray(const Vec3& origin, const Vec3& dir, std::vector<Hit>& hits) const {
    // Möller-Trumbore over BVH leaves. Returns false on a grazing hit
    // (near-parallel or near-edge) so the caller can retry another direction.
    Vec3 inv_d(1.0 / dir[0], 1.0 / dir[1], 1.0 / dir[2]);
    constexpr double kDetEps = 1e-14;
    constexpr double kBaryEps = 1e-10;
    std::int32_t stack[64];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const Node& n = nodes_[stack[--sp]];
        if (!ray_aabb(origin, inv_d, n.lo, n.hi)) continue;
        if (n.left < 0) {
            for (std::int32_t i = n.first; i < n.first + n.count; ++i) {
                const auto& t = mesh_.triangles[tri_order_[i]];
                const Vec3& a = mesh_.vertices[t[0]];
                Vec3 e1 = mesh_.vertices[t[1]] - a;
                Vec3 e2 = mesh_.vertices[t[2]] - a;
                Vec3 p = dir.cross(e2);
                double det = e1.dot(p);
                if (std::abs(det) < kDetEps) continue; // parallel: plane either missed or grazed
                double inv_det = 1.0 / det;
                Vec3 s = origin - a;
                double u = s.dot(p) * inv_det;
                if (u < -kBaryEps || u > 1 + kBaryEps) continue;
                Vec3 q = s.cross(e1);
                double v = dir.dot(q) * inv_det;
                if (v < -kBaryEps || u + v > 1 + kBaryEps) continue;
                double tt = e2.dot(q) * inv_det;
                double minb = std::min({u, v, 1.0 - u - v});
                if (tt > -1e-9) hits.push_back({tt, minb});
                if (minb < kBaryEps && tt > 1e-9) return false; // grazing an edge ahead of us
            }
        } else {
            stack[sp++] = n.left;
            stack[sp++] = n.right;
        }
    }
    return true;
}

int MeshOccupancy::occupancy(const Vec3& p) const {
    if (!p.allFinite()) throw std::invalid_argument("occupancy query point must be finite");
    std::uint64_t h = hash_bits(hash_bits(std::bit_cast<std::uint64_t>(p[0]), std::bit_cast<std::uint64_t>(p[1])),
                                std::bit_cast<std::uint64_t>(p[2]));
    std::vector<Hit> hits;
    for (int attempt = 0; attempt < 8; ++attempt) {
        Rng rng(hash_bits(h, std::uint64_t(attempt) + 1));
        // random unit direction
        double z = rng.uniform(-1.0, 1.0);
        double a = rng.uniform(0.0, 6.283185307179586);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        Vec3 dir(r * std::cos(a), r * std::sin(a), z);
        hits.clear();
        if (!cast_ray(p, dir, hits)) continue;
        int crossings = 0;
        bool on_surface = false;
        for (const auto& hit : hits) {
            if (std::abs(hit.t) <= 1e-9) { on_surface = true; break; }
            if (hit.t > 0) ++crossings;
        }
        if (on_surface) return 0; // open-set convention
        return crossings & 1;
    }
    // every direction grazed; fall back to last parity
    int crossings = 0;
    for (const auto& hit : hits)
        if (hit.t > 1e-9) ++crossings;
    return crossings & 1;
}

std::pair<TriangleMesh, RigidTransform> normalize_to_unit_cube(const TriangleMesh& mesh) {
    if (mesh.vertices.empty()) throw std::invalid_argument("cannot normalize an empty mesh");
    Vec3 lo, hi;
    mesh.bounds(lo, hi);
    Vec3 ext = hi - lo;
    double longest = ext.maxCoeff();
    if (longest <= 0) throw std::invalid_argument("cannot normalize a zero-extent mesh");
    RigidTransform xf;
    xf.uniform_scale = 1.0 / longest;
    Vec3 center = 0.5 * (lo + hi);
    xf.translation = -xf.uniform_scale * center;
    TriangleMesh out = mesh;
    for (auto& v : out.vertices) v = xf.apply(v);
    return {std::move(out), xf};
}

int point_occupancy(const TriangleMesh& mesh, const Vec3& p) {
    return MeshOccupancy(mesh).occupancy(p);
}

OccupancyGrid voxelize(const TriangleMesh& mesh, int k) {
    MeshOccupancy oracle(mesh);
    OccupancyGrid g = OccupancyGrid::make(k);
    for (int z = 0; z < k; ++z)
        for (int y = 0; y < k; ++y)
            for (int x = 0; x < k; ++x)
                g.at(x, y, z) = oracle.occupancy(g.cell_center(x, y, z));
    return g;
}

SurfaceSamples surface_sample(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
    if (mesh.empty()) throw std::invalid_argument("surface_sample: empty mesh");
    if (count == 0) throw std::invalid_argument("surface_sample: count must be positive");
    std::vector<double> cumulative(mesh.num_triangles());
    double acc = 0;
    for (std::size_t f = 0; f < mesh.num_triangles(); ++f) {
        acc += mesh.face_area(f);
        cumulative[f] = acc;
    }
    if (acc <= 0) throw std::invalid_argument("surface_sample: mesh has zero area");
    Rng rng(seed);
    SurfaceSamples out;
    out.points.reserve(count);
    out.normals.reserve(count);
    out.face_ids.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        double r = rng.uniform() * acc;
        auto it = std::lower_bound(cumulative.begin(), cumulative.end(), r);
        std::size_t f = std::min<std::size_t>(std::size_t(it - cumulative.begin()), mesh.num_triangles() - 1);
        const auto& t = mesh.triangles[f];
        double su = std::sqrt(rng.uniform());
        double v = rng.uniform();
        double b0 = 1.0 - su, b1 = su * (1.0 - v), b2 = su * v;
        out.points.push_back(b0 * mesh.vertices[t[0]] + b1 * mesh.vertices[t[1]] + b2 * mesh.vertices[t[2]]);
        out.normals.push_back(mesh.face_normal(f));
        out.face_ids.push_back(std::int32_t(f));
    }
    return out;
}

} // namespace fracta
