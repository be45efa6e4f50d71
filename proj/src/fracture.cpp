#include "fracta/fracture.hpp"

#include "fracta/isosurface.hpp"
#include "fracta/mesh_io.hpp"
#include "fracta/rng.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace fracta {

namespace fs = std::filesystem;

namespace {

double lattice_value(std::int64_t ix, std::int64_t iy, std::int64_t iz, std::uint64_t seed) {
    std::uint64_t h = seed;
    h ^= std::uint64_t(ix) * 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h ^= std::uint64_t(iy) * 0x94d049bb133111ebull;
    h = (h ^ (h >> 27)) * 0x2545f4914f6cdd1dull;
    h ^= std::uint64_t(iz) * 0xd6e8feb86659fd93ull;
    h ^= h >> 31;
    // map to [-1, 1]
    return double(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double noise_octave(const Vec3& p, std::uint64_t seed) {
    const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
    const auto ix = std::int64_t(fx), iy = std::int64_t(fy), iz = std::int64_t(fz);
    const double tx = smooth(p.x() - fx), ty = smooth(p.y() - fy), tz = smooth(p.z() - fz);
    double c[2][2][2];
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
                c[dx][dy][dz] = lattice_value(ix + dx, iy + dy, iz + dz, seed);
    auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
    const double x00 = lerp(c[0][0][0], c[1][0][0], tx);
    const double x10 = lerp(c[0][1][0], c[1][1][0], tx);
    const double x01 = lerp(c[0][0][1], c[1][0][1], tx);
    const double x11 = lerp(c[0][1][1], c[1][1][1], tx);
    const double y0 = lerp(x00, x10, ty);
    const double y1 = lerp(x01, x11, ty);
    return lerp(y0, y1, tz);
}

} // namespace

double value_noise(const Vec3& p, std::uint64_t seed) {
    // 3 octaves, amplitudes 1, 1/2, 1/4, normalized back into [-1, 1]
    double sum = 0.0, amp = 1.0, freq = 1.0, norm = 0.0;
    for (int o = 0; o < 3; ++o) {
        sum += amp * noise_octave(freq * p, seed + std::uint64_t(o) * 0x9e3779b97f4a7c15ull);
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    return sum / norm;
}

double Primitive::signed_value(const Vec3& world_point) const {
    const Vec3 local = pose.inverse().apply(world_point);
    double s = 0.0;
    switch (kind) {
    case PrimitiveKind::Sphere: s = local.norm() - shape.x(); break;
    case PrimitiveKind::Box: {
        const Vec3 d = local.cwiseAbs() - shape;
        s = d.cwiseMax(0.0).norm() + std::min(0.0, d.maxCoeff());
        break;
    }
    case PrimitiveKind::Ellipsoid: {
        // approximate signed distance; exact sign
        const Vec3 q = local.cwiseQuotient(shape);
        const double k1 = q.norm();
        if (k1 < 1e-12) {
            s = -shape.minCoeff();
        } else {
            const double k2 = local.cwiseQuotient(shape.cwiseProduct(shape)).norm();
            s = k1 * (k1 - 1.0) / k2;
        }
        break;
    }
    }
    if (perturb_amplitude != 0.0)
        s += perturb_amplitude * value_noise(perturb_frequency * world_point, noise_seed);
    return s;
}

std::string Primitive::describe() const {
    std::ostringstream os;
    os << primitive_kind_name(kind) << " center=(" << pose.translation.transpose() << ") shape=("
       << shape.transpose() << ") amp=" << perturb_amplitude << " freq=" << perturb_frequency;
    return os.str();
}

const char* primitive_kind_name(PrimitiveKind k) {
    switch (k) {
    case PrimitiveKind::Sphere: return "sphere";
    case PrimitiveKind::Box: return "box";
    case PrimitiveKind::Ellipsoid: return "ellipsoid";
    }
    return "sphere";
}

PrimitiveKind primitive_kind_from_name(const std::string& name) {
    if (name == "sphere") return PrimitiveKind::Sphere;
    if (name == "box") return PrimitiveKind::Box;
    if (name == "ellipsoid") return PrimitiveKind::Ellipsoid;
    throw std::invalid_argument("unknown primitive kind: " + name);
}

namespace {

// Labels fractured-mesh faces whose centroid lies near the break zero set.
// Distance estimated as |s| / |grad s| with central differences.
std::vector<FaceLabel> label_fracture_faces(const TriangleMesh& mesh, const BreakSurfaceField& bs,
                                            double band) {
    std::vector<FaceLabel> labels(mesh.num_triangles(), FaceLabel::Exterior);
    const double h = 1e-4;
    for (std::size_t f = 0; f < mesh.num_triangles(); ++f) {
        const auto& t = mesh.triangles[f];
        const Vec3 c = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
        const double s = bs.signed_value(c);
        Vec3 g;
        for (int a = 0; a < 3; ++a) {
            Vec3 e = Vec3::Zero();
            e[a] = h;
            g[a] = (bs.signed_value(c + e) - bs.signed_value(c - e)) / (2.0 * h);
        }
        const double gn = std::max(g.norm(), 1e-9);
        if (std::abs(s) / gn <= band) labels[f] = FaceLabel::Fracture;
    }
    return labels;
}

} // namespace

ShapeTuple generate_fracture(const OccupancyField& complete, const TriangleMesh& complete_mesh,
                             const Primitive& primitive, int grid_k) {
    if (grid_k < 2) throw std::invalid_argument("generate_fracture: grid_k must be >= 2");

    ShapeTuple tuple;
    tuple.complete = complete;
    tuple.complete_mesh = complete_mesh;

    // break surface: positive (restoration side) inside the primitive
    tuple.break_surface.signed_value = [primitive](const Vec3& p) {
        return -primitive.signed_value(p);
    };
    const OccupancyField fB = tuple.break_surface.as_field();

    tuple.restoration = compose_restoration_field(complete, fB);
    tuple.fractured = OccupancyField(
        [complete, fB](const Vec3& p) { return complete(p) * (1.0 - fB(p)); },
        FieldKind::Analytic);

    const OccupancyGrid gridC = query_grid(complete, grid_k);
    const OccupancyGrid gridR = query_grid(tuple.restoration, grid_k);
    std::size_t occC = 0, occR = 0;
    for (std::size_t i = 0; i < gridC.size(); ++i) {
        occC += threshold_occupied(gridC.values[i]);
        occR += threshold_occupied(gridR.values[i]);
    }
    if (occR == 0) throw FractureRejection("fracture rejected: empty restoration");
    if (occC == 0) throw FractureRejection("fracture rejected: empty complete shape");
    const double frac = double(occR) / double(occC);
    if (frac < 0.01 || frac > 0.50) {
        std::ostringstream os;
        os << "fracture rejected: restoration fraction " << frac << " outside [0.01, 0.50]";
        throw FractureRejection(os.str());
    }

    tuple.restoration_mesh = extract_isosurface(gridR).mesh;
    auto fractured_ex = extract_isosurface(tuple.fractured, grid_k);
    tuple.fractured_mesh = std::move(fractured_ex.mesh);
    tuple.break_mesh = extract_isosurface(fB, grid_k).mesh;

    const double band = 1.5 * gridC.cell_size;
    tuple.fractured_mesh.face_labels = label_fracture_faces(tuple.fractured_mesh,
                                                            tuple.break_surface, band);

    tuple.meta.primitive_kind = primitive.kind;
    tuple.meta.primitive_center = primitive.pose.translation;
    tuple.meta.primitive_shape = primitive.shape;
    tuple.meta.perturb_amplitude = primitive.perturb_amplitude;
    tuple.meta.perturb_frequency = primitive.perturb_frequency;
    tuple.meta.noise_seed = primitive.noise_seed;
    tuple.meta.grid_k = grid_k;
    tuple.meta.restoration_fraction = frac;
    return tuple;
}

TupleReport validate_tuple(const ShapeTuple& tuple, std::size_t npoints, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "validate_tuple"));
    TupleReport rep;
    rep.points = npoints;
    rep.restoration_fraction = tuple.meta.restoration_fraction;
    for (std::size_t i = 0; i < npoints; ++i) {
        Vec3 p(rng.uniform(-0.55, 0.55), rng.uniform(-0.55, 0.55), rng.uniform(-0.55, 0.55));
        const int oC = threshold_occupied(tuple.complete(p));
        const int oB = tuple.break_surface.occupancy(p);
        const int oR = threshold_occupied(tuple.restoration(p));
        const int oF = threshold_occupied(tuple.fractured(p));
        if (oR != (oC & oB)) ++rep.restoration_violations;
        if (oF != (oC & (1 - oB))) ++rep.fractured_violations;
        if (oF && oR) ++rep.disjoint_violations;
    }
    return rep;
}

Primitive random_primitive(const TriangleMesh& complete_mesh, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "random_primitive"));
    const auto anchor = surface_sample(complete_mesh, 1, rng.next_u64());

    Primitive prim;
    switch (rng.index(3)) {
    case 0: prim.kind = PrimitiveKind::Sphere; break;
    case 1: prim.kind = PrimitiveKind::Box; break;
    default: prim.kind = PrimitiveKind::Ellipsoid; break;
    }
    Vec3 lo, hi;
    complete_mesh.bounds(lo, hi);
    const double scale = (hi - lo).maxCoeff();
    const double base = scale * rng.uniform(0.15, 0.40);
    prim.shape = prim.kind == PrimitiveKind::Sphere
                     ? Vec3::Constant(base)
                     : Vec3(base * rng.uniform(0.6, 1.4), base * rng.uniform(0.6, 1.4),
                            base * rng.uniform(0.6, 1.4));
    // center slightly outside the surface point so the cut bites a corner
    const Vec3 n = anchor.normals[0];
    prim.pose.translation = anchor.points[0] + n * base * rng.uniform(0.2, 0.8);
    prim.perturb_amplitude = scale * rng.uniform(0.005, 0.03);
    prim.perturb_frequency = rng.uniform(4.0, 12.0);
    prim.noise_seed = rng.next_u64();
    return prim;
}

namespace {

std::string vec_str(const Vec3& v) {
    std::ostringstream os;
    os.precision(17);
    os << v.x() << " " << v.y() << " " << v.z();
    return os.str();
}

Vec3 vec_parse(const std::string& s) {
    std::istringstream is(s);
    Vec3 v;
    if (!(is >> v.x() >> v.y() >> v.z())) throw std::runtime_error("bad vector in meta: " + s);
    return v;
}

} // namespace

void save_tuple_bundle(const ShapeTuple& tuple, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "grids");
    save_mesh(tuple.complete_mesh, (fs::path(dir) / "complete.ply").string());
    save_mesh(tuple.fractured_mesh, (fs::path(dir) / "fractured.ply").string());
    save_mesh(tuple.restoration_mesh, (fs::path(dir) / "restoration.ply").string());
    save_mesh(tuple.break_mesh, (fs::path(dir) / "break.ply").string());

    const int k = tuple.meta.grid_k;
    save_grid(query_grid(tuple.complete, k), (fs::path(dir) / "grids/complete.fxog").string());
    save_grid(query_grid(tuple.break_surface.as_field(), k),
              (fs::path(dir) / "grids/break.fxog").string());
    save_grid(query_grid(tuple.restoration, k),
              (fs::path(dir) / "grids/restoration.fxog").string());

    std::ofstream meta((fs::path(dir) / "meta").string());
    meta.precision(17);
    meta << "seed=" << tuple.meta.seed << "\n";
    meta << "primitive=" << primitive_kind_name(tuple.meta.primitive_kind) << "\n";
    meta << "primitive_center=" << vec_str(tuple.meta.primitive_center) << "\n";
    meta << "primitive_shape=" << vec_str(tuple.meta.primitive_shape) << "\n";
    meta << "perturb_amplitude=" << tuple.meta.perturb_amplitude << "\n";
    meta << "perturb_frequency=" << tuple.meta.perturb_frequency << "\n";
    meta << "noise_seed=" << tuple.meta.noise_seed << "\n";
    meta << "grid_k=" << tuple.meta.grid_k << "\n";
    meta << "restoration_fraction=" << tuple.meta.restoration_fraction << "\n";
    if (!meta) throw std::runtime_error("failed to write " + dir + "/meta");
}

ShapeTuple load_tuple_bundle(const std::string& dir) {
    ShapeTuple tuple;
    tuple.complete_mesh = load_mesh((fs::path(dir) / "complete.ply").string()).mesh;
    tuple.fractured_mesh = load_mesh((fs::path(dir) / "fractured.ply").string()).mesh;
    tuple.restoration_mesh = load_mesh((fs::path(dir) / "restoration.ply").string()).mesh;
    tuple.break_mesh = load_mesh((fs::path(dir) / "break.ply").string()).mesh;

    std::map<std::string, std::string> kv;
    std::ifstream meta((fs::path(dir) / "meta").string());
    if (!meta) throw std::runtime_error("missing " + dir + "/meta");
    std::string line;
    while (std::getline(meta, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("bad meta line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    tuple.meta.seed = std::stoull(kv.at("seed"));
    tuple.meta.primitive_kind = primitive_kind_from_name(kv.at("primitive"));
    tuple.meta.primitive_center = vec_parse(kv.at("primitive_center"));
    tuple.meta.primitive_shape = vec_parse(kv.at("primitive_shape"));
    tuple.meta.perturb_amplitude = std::stod(kv.at("perturb_amplitude"));
    tuple.meta.perturb_frequency = std::stod(kv.at("perturb_frequency"));
    tuple.meta.noise_seed = std::stoull(kv.at("noise_seed"));
    tuple.meta.grid_k = std::stoi(kv.at("grid_k"));
    tuple.meta.restoration_fraction = std::stod(kv.at("restoration_fraction"));

    auto gC = std::make_shared<OccupancyGrid>(
        load_grid((fs::path(dir) / "grids/complete.fxog").string()));
    const OccupancyGrid gB = load_grid((fs::path(dir) / "grids/break.fxog").string());
    if (!gC->same_layout(gB)) throw std::runtime_error("bundle grids disagree on layout: " + dir);
    tuple.complete = OccupancyField::from_grid(gC);

    // Reconstruct the break surface analytically from the stored primitive so
    // the R = C AND B identity survives the round trip exactly.
    Primitive prim;
    prim.kind = tuple.meta.primitive_kind;
    prim.pose.translation = tuple.meta.primitive_center;
    prim.shape = tuple.meta.primitive_shape;
    prim.perturb_amplitude = tuple.meta.perturb_amplitude;
    prim.perturb_frequency = tuple.meta.perturb_frequency;
    prim.noise_seed = tuple.meta.noise_seed;
    tuple.break_surface.signed_value = [prim](const Vec3& p) { return -prim.signed_value(p); };
    tuple.fractured_mesh.face_labels = label_fracture_faces(
        tuple.fractured_mesh, tuple.break_surface, 1.5 * (1.1 / tuple.meta.grid_k));

    const OccupancyField fB = tuple.break_surface.as_field();
    tuple.restoration = compose_restoration_field(tuple.complete, fB);
    const OccupancyField fC = tuple.complete;
    tuple.fractured = OccupancyField(
        [fC, fB](const Vec3& p) { return fC(p) * (1.0 - fB(p)); }, FieldKind::GridInterpolated);
    return tuple;
}

} // namespace fracta
