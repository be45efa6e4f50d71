// End-to-end acceptance gate: 12 criteria, one PASS/FAIL line each.
// Exit code is the number of failed criteria.

#include "fracta/fracture.hpp"
#include "fracta/isosurface.hpp"
#include "fracta/mesh_io.hpp"
#include "fracta/metrics.hpp"
#include "fracta/neural.hpp"
#include "fracta/pipeline.hpp"
#include "fracta/render.hpp"
#include "fracta/rng.hpp"
#include "fracta/sampling.hpp"
#include "fracta/scan.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

using namespace fracta;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& msg) {
        if (!cond) {
            ok = false;
            if (!detail.empty()) detail += "; ";
            detail += msg;
        }
    }
    void note(const std::string& msg) {
        if (!detail.empty()) detail += "; ";
        detail += msg;
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

fs::path scratch_root() {
    const fs::path root = fs::temp_directory_path() / "fracta-acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    return root;
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path.string() + ": cannot open");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct BaseShape {
    OccupancyField field;
    TriangleMesh mesh;
};

BaseShape named_base(int which, int grid_k) {
    OccupancyField field = which % 3 == 0 ? OccupancyField::sphere(Vec3::Zero(), 0.35)
                           : which % 3 == 1
                               ? OccupancyField::box(Vec3::Zero(), Vec3(0.32, 0.26, 0.38))
                               : OccupancyField::ellipsoid(Vec3::Zero(), Vec3(0.38, 0.3, 0.22));
    TriangleMesh mesh = extract_isosurface(field, grid_k).mesh;
    return {std::move(field), std::move(mesh)};
}

ShapeTuple make_tuple(int which, std::uint64_t seed, int grid_k) {
    const BaseShape base = named_base(which, grid_k);
    for (std::uint64_t attempt = 0;; ++attempt) {
        try {
            return generate_fracture(base.field, base.mesh,
                                     random_primitive(base.mesh, derive_seed(seed, "prim", attempt)),
                                     grid_k);
        } catch (const FractureRejection&) {
            if (attempt >= 31) throw;
        }
    }
}

OccupancyGrid model_grid(const FieldModel& model, const std::vector<double>& z, int k) {
    OccupancyGrid grid = OccupancyGrid::make(k);
    std::vector<Vec3> centers;
    centers.reserve(grid.size());
    for (int zc = 0; zc < k; ++zc)
        for (int yc = 0; yc < k; ++yc)
            for (int xc = 0; xc < k; ++xc) centers.push_back(grid.cell_center(xc, yc, zc));
    for (std::size_t base = 0; base < centers.size(); base += 8192) {
        const std::size_t end = std::min(base + 8192, centers.size());
        const auto triples =
            model.eval_fields(z, std::vector<Vec3>(centers.begin() + base, centers.begin() + end));
        for (std::size_t i = 0; i < triples.size(); ++i) grid.values[base + i] = triples[i].oR;
    }
    return grid;
}

// --- criteria ---------------------------------------------------------------

Check criterion_algebra() {
    Check c;
    double worst = 0;
    for (int i = 0; i < 5; ++i) {
        const ShapeTuple tuple = make_tuple(i, 100 + std::uint64_t(i), 64);
        const OccupancyGrid gridC = query_grid(tuple.complete, 64);
        const OccupancyGrid gridB = query_grid(tuple.break_surface.as_field(), 64);
        const OccupancyGrid hard = hard_intersection(gridC, gridB);
        const OccupancyGrid direct = query_grid(tuple.restoration, 64);

        std::size_t disagree = 0, off_shell = 0;
        for (int z = 0; z < 64; ++z)
            for (int y = 0; y < 64; ++y)
                for (int x = 0; x < 64; ++x) {
                    const int a = threshold_occupied(hard.at(x, y, z));
                    const int b = threshold_occupied(direct.at(x, y, z));
                    if (a == b) continue;
                    ++disagree;
                    // a disagreement must sit on the one-cell surface shell of
                    // the direct voxelization
                    bool shell = false;
                    for (int dz = -1; dz <= 1 && !shell; ++dz)
                        for (int dy = -1; dy <= 1 && !shell; ++dy)
                            for (int dx = -1; dx <= 1 && !shell; ++dx) {
                                const int nx = x + dx, ny = y + dy, nz = z + dz;
                                if (nx < 0 || ny < 0 || nz < 0 || nx >= 64 || ny >= 64 || nz >= 64)
                                    continue;
                                if (threshold_occupied(direct.at(nx, ny, nz)) != b) shell = true;
                            }
                    if (!shell) ++off_shell;
                }
        const double frac = double(disagree) / double(64 * 64 * 64);
        worst = std::max(worst, frac);
        c.require(frac <= 0.005, "tuple " + std::to_string(i) + " disagreement " + fmt(frac));
        c.require(off_shell == 0,
                  "tuple " + std::to_string(i) + ": " + std::to_string(off_shell) +
                      " disagreements off the surface shell");
    }
    c.note("worst disagreement " + fmt(100 * worst) + "% over 5 tuples");
    return c;
}

Check criterion_eq1() {
    Check c;
    const FieldModel model(ModelConfig::micro(), 11);
    Rng rng(12);
    double worst = 0;
    for (int batch = 0; batch < 10; ++batch) {
        std::vector<double> z(std::size_t(model.config().dz));
        for (auto& v : z) v = rng.normal();
        std::vector<Vec3> pts(10000);
        for (auto& p : pts)
            p = Vec3(rng.uniform(-0.55, 0.55), rng.uniform(-0.55, 0.55), rng.uniform(-0.55, 0.55));
        for (const FieldTriple& t : model.eval_fields(z, pts))
            worst = std::max(worst, std::abs(t.oR - t.oC * t.oB));
    }
    c.require(worst <= 1e-12, "max |oR - oC*oB| = " + fmt(worst));
    c.note("max |oR - oC*oB| = " + fmt(worst) + " over 1e5 queries");
    return c;
}

Check criterion_gradients() {
    Check c;
    const double err = gradient_check(1e-5, 0);
    c.require(err < 1e-4, "max relative error " + fmt(err));
    c.note("max relative error " + fmt(err));
    return c;
}

Check criterion_overfit() {
    Check c;
    const fs::path root = scratch_root() / "overfit";
    PipelineConfig cfg;
    cfg.dataset_root = (root / "data").string();
    cfg.output_dir = (root / "out").string();
    cfg.fracture_count = 4;
    cfg.fracture_bases = {"sphere", "box", "ellipsoid", "sphere"};
    cfg.grid_k = 64;
    cfg.render_resolution = 64;
    cfg.sample_n = 50000;
    cfg.sample_sigma = 0.01;
    cfg.train.preset = "tiny";
    cfg.train.lr = 2e-5;
    cfg.train.lambda_b = 1.0;
    cfg.train.lambda_r = 1.0;
    cfg.train.m = 2048;
    cfg.train_steps = 2000;
    cfg.seed = 13;

    cmd_fracture(cfg);
    cmd_render(cfg);
    cmd_sample(cfg);
    cmd_train(cfg);

    // loss trace
    std::ifstream loss_in(fs::path(cfg.output_dir) / "loss.csv");
    std::string line, first_row, last_row;
    std::getline(loss_in, line); // header
    while (std::getline(loss_in, line)) {
        if (first_row.empty()) first_row = line;
        last_row = line;
    }
    auto loss_of = [](const std::string& row) {
        return std::stod(row.substr(row.rfind(',') + 1));
    };
    const double initial = loss_of(first_row), final_loss = loss_of(last_row);
    c.require(final_loss < 0.1 * initial,
              "loss " + fmt(final_loss) + " vs 10% of initial " + fmt(0.1 * initial));

    // inference IoU at k=64 against ground-truth restoration grids
    const FieldModel model = FieldModel::load((fs::path(cfg.output_dir) / "model.fxck").string());
    std::vector<bool> nonzero;
    double worst_iou = 1;
    for (int i = 0; i < 4; ++i) {
        char name[16];
        std::snprintf(name, sizeof name, "tuple_%03d", i);
        int w = 0, h = 0;
        const auto image =
            read_depth((fs::path(cfg.dataset_root) / "obs" / name / "shade.fxdm").string(), w, h);
        const OccupancyGrid pred = model_grid(model, model.encode(image), 64);
        const OccupancyGrid gt =
            load_grid((fs::path(cfg.dataset_root) / "tuples" / name / "grids/restoration.fxog")
                          .string());
        std::size_t inter = 0, uni = 0, occupied = 0;
        for (std::size_t j = 0; j < pred.size(); ++j) {
            const int p = threshold_occupied(pred.values[j]);
            const int g = threshold_occupied(gt.values[j]);
            inter += std::size_t(p & g);
            uni += std::size_t(p | g);
            occupied += std::size_t(p);
        }
        const double iou = uni ? double(inter) / double(uni) : 1.0;
        worst_iou = std::min(worst_iou, iou);
        nonzero.push_back(occupied > 0);
        c.require(iou >= 0.7, std::string(name) + " IoU " + fmt(iou));
    }
    c.require(nz_percent(nonzero) == 100.0, "NZ% " + fmt(nz_percent(nonzero)));
    c.note("loss " + fmt(initial) + " -> " + fmt(final_loss) + ", worst IoU " + fmt(worst_iou) +
           ", NZ% 100");
    return c;
}

Check criterion_sampling() {
    Check c;
    const ShapeTuple tuple = make_tuple(0, 500, 64);
    const SampleSet set = precompute_samples(tuple, 12500, 0.01, 501);
    std::size_t violations = 0;
    for (const LabeledSample& s : set.samples)
        if (s.oR != (s.oC & s.oB)) ++violations;
    c.require(violations == 0, std::to_string(violations) + " label violations");

    std::size_t quota_misses = 0;
    for (int draw = 0; draw < 1000; ++draw) {
        const Minibatch batch = draw_minibatch(set, 2048, derive_seed(502, "draw", draw));
        for (std::size_t count : batch.stratum_counts)
            if (count < 342) ++quota_misses;
    }
    c.require(quota_misses == 0, std::to_string(quota_misses) + " quota misses");
    c.note("50000 labels clean, 1000 draws x 6 quotas >= 342");
    return c;
}

Check criterion_marching_cubes() {
    Check c;
    const OccupancyField sphere = OccupancyField::sphere(Vec3::Zero(), 0.3);
    auto deviation = [&](int k, Check& out) {
        const ExtractionResult result = extract_isosurface(sphere, k);
        const WatertightReport report = is_watertight(result.mesh);
        out.require(report.watertight, "k=" + std::to_string(k) + " not watertight");
        std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
        for (const auto& t : result.mesh.triangles)
            for (int e = 0; e < 3; ++e)
                edges.insert({std::min(t[e], t[(e + 1) % 3]), std::max(t[e], t[(e + 1) % 3])});
        const long euler = long(result.mesh.vertices.size()) - long(edges.size()) +
                           long(result.mesh.triangles.size());
        out.require(euler == 2, "k=" + std::to_string(k) + " Euler " + std::to_string(euler));
        double dev = 0;
        for (const Vec3& v : result.mesh.vertices) dev = std::max(dev, std::abs(v.norm() - 0.3));
        return dev;
    };
    const double dev64 = deviation(64, c), dev128 = deviation(128, c);
    c.require(dev128 < 2.0 * (1.1 / 128), "k=128 deviation " + fmt(dev128));
    const double ratio = dev128 / dev64;
    c.require(ratio > 0.4 && ratio < 0.6, "halving ratio " + fmt(ratio));
    c.note("dev64 " + fmt(dev64) + ", dev128 " + fmt(dev128) + ", ratio " + fmt(ratio));
    return c;
}

Check criterion_metrics() {
    Check c;
    Rng rng(700);
    auto brute = [](const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
        auto directed = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
            double sum = 0;
            for (const Vec3& p : from) {
                double best = std::numeric_limits<double>::infinity();
                for (const Vec3& q : to) best = std::min(best, (p - q).squaredNorm());
                sum += best;
            }
            return sum / double(from.size());
        };
        return directed(a, b) + directed(b, a);
    };
    double worst = 0;
    for (int pair = 0; pair < 100; ++pair) {
        std::vector<Vec3> a(1 + rng.index(2000)), b(1 + rng.index(2000));
        for (auto& p : a) p = Vec3(rng.normal(), rng.normal(), rng.normal());
        for (auto& p : b) p = Vec3(rng.normal(), rng.normal(), rng.normal());
        worst = std::max(worst, std::abs(chamfer_distance(a, b) - brute(a, b)));
        if (pair == 0) c.require(chamfer_distance(a, a) == 0.0, "CD(X,X) != 0");
    }
    c.require(worst <= 1e-12, "CD vs brute force " + fmt(worst));

    const ShapeTuple tuple = make_tuple(1, 701, 48);
    const TriangleMesh& gt = tuple.fractured_mesh;
    c.require(std::abs(normal_consistency(gt, gt, 5000, 9) - 1.0) <= 1e-6, "NC(identical) != 1");

    // plant a 40-degree up-axis rotation; the search must undo it at 320
    TriangleMesh pred = gt;
    const Eigen::Matrix3d rot =
        Eigen::AngleAxisd(40.0 * std::numbers::pi / 180.0, Eigen::Vector3d::UnitY())
            .toRotationMatrix();
    for (auto& v : pred.vertices) v = rot * v;
    const RotationSearchResult search = rotation_search_cd(pred, gt, 36, 5000, 10);
    c.require(search.angle_deg == 320.0, "best angle " + fmt(search.angle_deg));
    const double self_noise =
        chamfer_distance(surface_sample(gt, 5000, 21).points, surface_sample(gt, 5000, 22).points);
    c.require(search.cd <= 2.0 * self_noise,
              "cd " + fmt(search.cd) + " vs self-noise " + fmt(self_noise));
    c.note("CD oracle max diff " + fmt(worst) + ", planted rotation recovered at " +
           fmt(search.angle_deg) + " deg");
    return c;
}

Check criterion_masks() {
    Check c;
    BinaryMask a = BinaryMask::make(4, 1), b = BinaryMask::make(4, 1);
    a.at(0, 0) = a.at(1, 0) = 1;
    b.at(0, 0) = b.at(1, 0) = 1;
    c.require(dice(a, b) == 1.0, "identical dice != 1");
    b.values = {0, 0, 1, 1};
    c.require(dice(a, b) == 0.0, "disjoint dice != 0");
    b.values = {0, 1, 1, 0};
    c.require(dice(a, b) == 0.5, "half-overlap dice != 0.5");

    // flood-fill oracle with the same tie rule (first pixel in scanline order)
    auto brute_largest = [](const BinaryMask& mask) {
        BinaryMask best = BinaryMask::make(mask.width, mask.height);
        std::vector<std::uint8_t> seen(mask.values.size(), 0);
        std::size_t best_count = 0;
        for (std::size_t start = 0; start < mask.values.size(); ++start) {
            if (!mask.values[start] || seen[start]) continue;
            BinaryMask comp = BinaryMask::make(mask.width, mask.height);
            std::deque<std::size_t> queue{start};
            seen[start] = 1;
            std::size_t count = 0;
            while (!queue.empty()) {
                const std::size_t i = queue.front();
                queue.pop_front();
                comp.values[i] = 1;
                ++count;
                const int x = int(i) % mask.width, y = int(i) / mask.width;
                const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
                for (const auto& n : nbr) {
                    if (n[0] < 0 || n[1] < 0 || n[0] >= mask.width || n[1] >= mask.height) continue;
                    const std::size_t j = std::size_t(n[1]) * mask.width + std::size_t(n[0]);
                    if (mask.values[j] && !seen[j]) {
                        seen[j] = 1;
                        queue.push_back(j);
                    }
                }
            }
            if (count > best_count) { // scanline order: first wins ties
                best_count = count;
                best = comp;
            }
        }
        return best;
    };
    Rng rng(800);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        BinaryMask mask = BinaryMask::make(64, 64);
        const double density = 0.2 + 0.6 * rng.uniform();
        for (auto& v : mask.values) v = rng.uniform() < density ? 1 : 0;
        const BinaryMask ours = largest_component(mask);
        if (ours.values != brute_largest(mask).values) ++mismatches;
        if (trial < 50 && largest_component(ours).values != ours.values) ++mismatches;
    }
    c.require(mismatches == 0, std::to_string(mismatches) + " mismatches vs flood fill");
    c.note("3 dice cases, 1000 masks vs flood fill, idempotent");
    return c;
}

Check criterion_scan() {
    Check c;
    const fs::path dir = scratch_root() / "scan";
    fs::create_directories(dir);
    Rng rng(900);
    std::size_t mismatches = 0;
    fs::path sample_path;
    for (int i = 0; i < 200; ++i) {
        DepthScanRecord record;
        const std::size_t n = 1 + rng.index(64);
        for (std::size_t j = 0; j < n; ++j) {
            record.points.emplace_back(rng.normal(), rng.normal(), rng.normal());
            record.colors.push_back({std::uint8_t(rng.index(256)), std::uint8_t(rng.index(256)),
                                     std::uint8_t(rng.index(256))});
            Vec3 normal(rng.normal(), rng.normal(), rng.normal());
            record.normals.push_back(normal.normalized());
        }
        RigidTransform T;
        T.rotation = Eigen::AngleAxisd(rng.uniform(0, 6.28), Vec3(rng.normal(), rng.normal(),
                                                                  rng.normal())
                                                                 .normalized())
                         .toRotationMatrix();
        T.translation = Vec3(rng.normal(), rng.normal(), rng.normal());
        T.uniform_scale = rng.uniform(0.5, 2.0);
        record.set_alignment(T);
        record.turntable_distance = rng.uniform(100, 900);
        record.flags = std::uint32_t(rng.index(16));
        record.record_id = "rec" + std::to_string(i);

        const fs::path path = dir / ("r" + std::to_string(i) + ".fxrg");
        write_scan(record, path.string());
        DepthScanRecord back = parse_scan(path.string());
        const fs::path path2 = dir / "rewrite.fxrg";
        write_scan(back, path2.string());
        if (read_bytes(path) != read_bytes(path2)) ++mismatches;
        if (i == 0) sample_path = path;
    }
    c.require(mismatches == 0, std::to_string(mismatches) + " round-trip mismatches");

    const std::string good = read_bytes(sample_path);
    auto expect_error = [&](std::string bytes, const std::string& needle) {
        const fs::path path = dir / "corrupt.fxrg";
        std::ofstream(path, std::ios::binary).write(bytes.data(), std::streamsize(bytes.size()));
        try {
            parse_scan(path.string());
            c.require(false, "no error for " + needle);
        } catch (const ScanParseError& e) {
            c.require(std::string(e.what()).find(needle) != std::string::npos,
                      "wrong error for " + needle + ": " + e.what());
        }
    };
    std::string bad = good;
    bad[0] = 'X';
    expect_error(bad, "magic");
    bad = good;
    bad[4] = 9;
    expect_error(bad, "version");
    expect_error(good.substr(0, 40), "truncated");
    expect_error(good.substr(0, good.size() - 3), "length mismatch");
    bad = good;
    float big = 5.0f;
    std::memcpy(bad.data() + 84, &big, 4); // scale one rotation entry
    expect_error(bad, "orthonormal");
    expect_error(good + "zz", "trailing");
    c.note("200 bit-exact round trips, 6 corruption classes");
    return c;
}

Check criterion_projection() {
    Check c;
    auto square_at = [](double z) {
        TriangleMesh mesh;
        mesh.vertices = {Vec3(-0.5, -0.5, z), Vec3(0.5, -0.5, z), Vec3(0.5, 0.5, z),
                         Vec3(-0.5, 0.5, z)};
        mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
        return mesh;
    };
    CameraIntrinsics K{100, 100, 64, 64};
    const MaskProjection near = project_mask(square_at(2.0), RigidTransform{}, K, 128, 128);
    int min_x = 128, max_x = -1, min_y = 128, max_y = -1;
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x)
            if (near.mask.at(x, y)) {
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
    const int w = max_x - min_x + 1, h = max_y - min_y + 1;
    c.require(std::abs(w - 50) <= 1 && std::abs(h - 50) <= 1,
              "block " + std::to_string(w) + "x" + std::to_string(h));
    c.require(near.mask.count() == std::size_t(w) * std::size_t(h), "block not solid");

    const MaskProjection far = project_mask(square_at(4.0), RigidTransform{}, K, 128, 128);
    const double ratio = double(near.mask.count()) / double(far.mask.count());
    c.require(std::abs(ratio - 4.0) <= 0.08, "area ratio " + fmt(ratio));
    c.note("block " + std::to_string(w) + "x" + std::to_string(h) + ", depth-doubling ratio " +
           fmt(ratio));
    return c;
}

Check criterion_camera() {
    Check c;
    // polar fracture: primitive centered on the sphere's north pole
    {
        const OccupancyField sphere = OccupancyField::sphere(Vec3::Zero(), 0.35);
        const TriangleMesh mesh = extract_isosurface(sphere, 64).mesh;
        Primitive prim;
        prim.kind = PrimitiveKind::Sphere;
        prim.pose.translation = Vec3(0, 0.35, 0);
        prim.shape = Vec3(0.12, 0.12, 0.12);
        const ShapeTuple tuple = generate_fracture(sphere, mesh, prim, 64);
        const CameraModel camera = fracture_camera(tuple, 64);
        const Vec3 n = -camera.forward().normalized();
        c.require(n.y() > 0.99, "polar fracture normal y " + fmt(n.y()));
        c.note("polar n*y " + fmt(n.y()));
    }
    // cube fixture: fracture on the top face; hand-computed flip sign says the
    // outward normal is +y, so the camera must sit above the cube
    {
        const OccupancyField box = OccupancyField::box(Vec3::Zero(), Vec3(0.3, 0.3, 0.3));
        const TriangleMesh mesh = extract_isosurface(box, 64).mesh;
        Primitive prim;
        prim.kind = PrimitiveKind::Sphere;
        prim.pose.translation = Vec3(0, 0.3, 0);
        prim.shape = Vec3(0.15, 0.15, 0.15);
        const ShapeTuple tuple = generate_fracture(box, mesh, prim, 64);
        // hand-computable flip statistic: fracture centroid sits near y = 0.25,
        // the cube body below it, so mean_y(v - c) < 0 and +y survives the flip
        Vec3 centroid = Vec3::Zero();
        std::size_t count = 0;
        for (std::size_t f = 0; f < tuple.fractured_mesh.num_triangles(); ++f) {
            if (tuple.fractured_mesh.face_labels[f] != FaceLabel::Fracture) continue;
            for (int e = 0; e < 3; ++e)
                centroid += tuple.fractured_mesh.vertices[tuple.fractured_mesh.triangles[f][e]];
            count += 3;
        }
        centroid /= double(count);
        double mean_side = 0;
        for (const Vec3& v : tuple.fractured_mesh.vertices) mean_side += (v - centroid).y();
        mean_side /= double(tuple.fractured_mesh.vertices.size());
        c.require(mean_side < 0, "cube fixture: expected mean side < 0, got " + fmt(mean_side));
        const CameraModel camera = fracture_camera(tuple, 64);
        c.require(camera.position().y() > 0.3,
                  "camera y " + fmt(camera.position().y()) + " not above the cube");
    }
    // silhouettes fully in frame over 50 generated tuples
    std::size_t bad_frames = 0;
    for (int i = 0; i < 50; ++i) {
        const ShapeTuple tuple = make_tuple(i, 1100 + std::uint64_t(i), 48);
        const CameraModel camera = fracture_camera(tuple, 64);
        const ObservationImage obs = render_observation(tuple.fractured_mesh, camera);
        bool on_border = false;
        for (int x = 0; x < obs.width; ++x)
            if (obs.silhouette.at(x, 0) || obs.silhouette.at(x, obs.height - 1)) on_border = true;
        for (int y = 0; y < obs.height; ++y)
            if (obs.silhouette.at(0, y) || obs.silhouette.at(obs.width - 1, y)) on_border = true;
        if (on_border || obs.silhouette.count() == 0 || obs.all_behind_camera) ++bad_frames;
    }
    c.require(bad_frames == 0, std::to_string(bad_frames) + " silhouettes clipped or empty");
    c.note("50 silhouettes fully in frame");
    return c;
}

Check criterion_determinism() {
    Check c;
    const fs::path root = scratch_root() / "determinism";
    auto run_chain = [&](const fs::path& dir) {
        PipelineConfig cfg;
        cfg.dataset_root = (dir / "data").string();
        cfg.output_dir = (dir / "out").string();
        cfg.fracture_count = 2;
        cfg.fracture_bases = {"sphere", "box"};
        cfg.grid_k = 32;
        cfg.render_resolution = 8;
        cfg.sample_n = 2000;
        cfg.train.preset = "micro";
        cfg.train.m = 120;
        cfg.train.lr = 1e-3;
        cfg.train_steps = 50;
        cfg.eval_points = 500;
        cfg.eval_rotations = 8;
        cfg.seed = 31;
        cmd_fracture(cfg);
        cmd_render(cfg);
        cmd_sample(cfg);
        cmd_train(cfg);
        cfg.eval_pred_dir = (dir / "meshes").string();
        cfg.eval_gt_dir = cfg.eval_pred_dir;
        fs::create_directories(cfg.eval_pred_dir);
        fs::copy_file(fs::path(cfg.dataset_root) / "tuples/tuple_000/restoration.ply",
                      fs::path(cfg.eval_pred_dir) / "a.ply");
        fs::copy_file(fs::path(cfg.dataset_root) / "tuples/tuple_001/fractured.ply",
                      fs::path(cfg.eval_pred_dir) / "b.ply");
        cmd_eval(cfg);
    };
    run_chain(root / "a");
    run_chain(root / "b");
    std::size_t diffs = 0;
    for (const char* rel :
         {"data/tuples/manifest.csv", "data/tuples/tuple_000/meta",
          "data/tuples/tuple_000/grids/complete.fxog", "data/tuples/tuple_000/restoration.ply",
          "data/tuples/tuple_001/grids/break.fxog", "data/obs/tuple_000/shade.fxdm",
          "data/samples/tuple_001.fxss", "out/model.fxck", "out/loss.csv", "out/metrics.csv"}) {
        if (read_bytes(root / "a" / rel) != read_bytes(root / "b" / rel)) {
            ++diffs;
            c.require(false, std::string(rel) + " differs between reruns");
        }
    }
    c.note("10 artifact classes bit-identical across fracture/render/sample/train/eval reruns");
    return c;
}

} // namespace

int main() {
    struct Entry {
        int id;
        const char* name;
        std::function<Check()> body;
    };
    const Entry entries[] = {
        {1, "algebra equivalence (hard intersection vs direct voxelization)", criterion_algebra},
        {2, "Eq. 1 construction (oR = oC*oB to 1e-12)", criterion_eq1},
        {3, "gradient correctness (reverse mode vs finite differences)", criterion_gradients},
        {4, "overfit end-to-end (loss, IoU, NZ%)", criterion_overfit},
        {5, "sampling contract (labels and stratified quotas)", criterion_sampling},
        {6, "marching cubes (watertight sphere, deviation halving)", criterion_marching_cubes},
        {7, "metric oracles (CD, NC, rotation search)", criterion_metrics},
        {8, "mask ops (dice, largest component)", criterion_masks},
        {9, "scan parsing (round trip, corruption classes)", criterion_scan},
        {10, "mask projection (pinhole block, depth doubling)", criterion_projection},
        {11, "camera placement (fracture normal, flip sign, framing)", criterion_camera},
        {12, "determinism (bit-identical rerun artifacts)", criterion_determinism},
    };

    int failures = 0;
    for (const Entry& entry : entries) {
        const auto t0 = std::chrono::steady_clock::now();
        Check result;
        try {
            result = entry.body();
        } catch (const std::exception& e) {
            result.ok = false;
            result.detail = std::string("exception: ") + e.what();
        }
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%2d] %s  %s — %s (%.1f s)\n", entry.id, result.ok ? "PASS" : "FAIL",
                    entry.name, result.detail.c_str(), dt);
        std::fflush(stdout);
        if (!result.ok) ++failures;
    }
    return failures;
}
