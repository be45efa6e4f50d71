#include "fracta/pipeline.hpp"

#include "fracta/isosurface.hpp"
#include "fracta/mesh_io.hpp"
#include "fracta/metrics.hpp"
#include "fracta/render.hpp"
#include "fracta/rng.hpp"
#include "fracta/sampling.hpp"
#include "fracta/scan.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <numbers>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fracta {

namespace fs = std::filesystem;

namespace {

std::string tuple_name(int index) {
    std::ostringstream os;
    os << "tuple_" << std::setw(3) << std::setfill('0') << index;
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary); // binary: bit-identical reruns
    out << text;
    if (!out) throw DataError(path.string() + ": write failure");
}

struct BaseShape {
    OccupancyField field;
    TriangleMesh mesh;
};

// "sphere" / "box" / "ellipsoid" or a mesh path
BaseShape make_base(const std::string& name, int grid_k) {
    if (name == "sphere") {
        BaseShape base{OccupancyField::sphere(Vec3::Zero(), 0.35), {}};
        base.mesh = extract_isosurface(base.field, grid_k).mesh;
        return base;
    }
    if (name == "box") {
        BaseShape base{OccupancyField::box(Vec3::Zero(), Vec3(0.32, 0.26, 0.38)), {}};
        base.mesh = extract_isosurface(base.field, grid_k).mesh;
        return base;
    }
    if (name == "ellipsoid") {
        BaseShape base{OccupancyField::ellipsoid(Vec3::Zero(), Vec3(0.38, 0.3, 0.22)), {}};
        base.mesh = extract_isosurface(base.field, grid_k).mesh;
        return base;
    }
    auto [mesh, xform] = normalize_to_unit_cube(load_mesh(name).mesh);
    auto oracle = std::make_shared<MeshOccupancy>(mesh);
    return {OccupancyField::from_mesh(oracle), oracle->mesh()};
}

std::vector<fs::path> list_bundles(const fs::path& root) {
    const fs::path dir = root / "tuples";
    if (!fs::is_directory(dir)) throw DataError(dir.string() + ": no tuple bundles found");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory() && fs::exists(entry.path() / "meta")) out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<float> load_image(const fs::path& path, int expect_size) {
    int w = 0, h = 0;
    std::vector<float> img;
    try {
        img = read_depth(path.string(), w, h);
    } catch (const std::exception& e) {
        throw DataError(std::string(e.what()));
    }
    if (w != expect_size || h != expect_size)
        throw DataError(path.string() + ": image is " + std::to_string(w) + "x" +
                        std::to_string(h) + ", model expects " + std::to_string(expect_size));
    return img;
}

OccupancyGrid query_model_grid(const FieldModel& model, const std::vector<double>& z, char which,
                               int k) {
    OccupancyGrid grid = OccupancyGrid::make(k);
    std::vector<Vec3> chunk;
    std::vector<std::size_t> offsets;
    const std::size_t chunk_size = 8192;
    std::size_t flat = 0;
    auto flush = [&]() {
        if (chunk.empty()) return;
        const auto triples = model.eval_fields(z, chunk);
        for (std::size_t i = 0; i < triples.size(); ++i) {
            const FieldTriple& t = triples[i];
            grid.values[offsets[i]] = which == 'C' ? t.oC : which == 'B' ? t.oB : t.oR;
        }
        chunk.clear();
        offsets.clear();
    };
    for (int zc = 0; zc < k; ++zc)
        for (int yc = 0; yc < k; ++yc)
            for (int xc = 0; xc < k; ++xc, ++flat) {
                chunk.push_back(grid.cell_center(xc, yc, zc));
                offsets.push_back(flat);
                if (chunk.size() == chunk_size) flush();
            }
    flush();
    return grid;
}

} // namespace

void cmd_fracture(const PipelineConfig& config) {
    config.validate();
    const fs::path tuples = fs::path(config.dataset_root) / "tuples";
    fs::create_directories(tuples);

    std::ostringstream manifest;
    manifest << "id,base,seed,status,restoration_fraction,detail\n";
    manifest.precision(17);
    for (int i = 0; i < config.fracture_count; ++i) {
        const std::string& base_name =
            config.fracture_bases[std::size_t(i) % config.fracture_bases.size()];
        const std::uint64_t item_seed = derive_seed(config.seed, "fracture", std::uint64_t(i));
        const std::string name = tuple_name(i);
        try {
            const BaseShape base = make_base(base_name, config.grid_k);
            std::string last_rejection = "no attempts";
            bool done = false;
            for (std::uint64_t attempt = 0; attempt < 16 && !done; ++attempt) {
                const Primitive prim =
                    random_primitive(base.mesh, derive_seed(item_seed, "primitive", attempt));
                try {
                    const ShapeTuple tuple =
                        generate_fracture(base.field, base.mesh, prim, config.grid_k);
                    save_tuple_bundle(tuple, (tuples / name).string());
                    manifest << name << "," << base_name << "," << item_seed << ",ok,"
                             << tuple.meta.restoration_fraction << ",\n";
                    done = true;
                } catch (const FractureRejection& e) {
                    last_rejection = e.what();
                }
            }
            if (!done)
                manifest << name << "," << base_name << "," << item_seed << ",rejected,0,"
                         << last_rejection << "\n";
        } catch (const std::exception& e) {
            // invalid base mesh and similar: per-item error entry, not fatal
            manifest << name << "," << base_name << "," << item_seed << ",error,0," << e.what()
                     << "\n";
        }
    }
    write_text(tuples / "manifest.csv", manifest.str());
}

void cmd_render(const PipelineConfig& config) {
    config.validate();
    for (const fs::path& bundle : list_bundles(config.dataset_root)) {
        ShapeTuple tuple;
        try {
            tuple = load_tuple_bundle(bundle.string());
        } catch (const std::exception& e) {
            throw DataError(std::string(e.what()));
        }
        const CameraModel camera =
            fracture_camera(tuple, config.render_resolution, config.render_vfov_deg);
        const ObservationImage obs = render_observation(tuple.fractured_mesh, camera);

        const fs::path dir = fs::path(config.dataset_root) / "obs" / bundle.filename();
        fs::create_directories(dir);
        write_pgm(obs.shade, obs.width, obs.height, (dir / "shade.pgm").string());
        write_depth(obs.shade, obs.width, obs.height, (dir / "shade.fxdm").string());
        write_depth(obs.depth, obs.width, obs.height, (dir / "depth.fxdm").string());

        std::ostringstream cam;
        cam.precision(17);
        cam << "eye=" << camera.position().transpose() << "\nforward="
            << camera.forward().transpose() << "\nfx=" << camera.intrinsics.fx
            << "\ndegenerate_fracture=" << (camera.degenerate_fracture ? 1 : 0)
            << "\nall_behind_camera=" << (obs.all_behind_camera ? 1 : 0) << "\n";
        write_text(dir / "camera.txt", cam.str());
    }
}

void cmd_sample(const PipelineConfig& config) {
    config.validate();
    const fs::path out_dir = fs::path(config.dataset_root) / "samples";
    fs::create_directories(out_dir);
    std::uint64_t item = 0;
    for (const fs::path& bundle : list_bundles(config.dataset_root)) {
        ShapeTuple tuple;
        try {
            tuple = load_tuple_bundle(bundle.string());
        } catch (const std::exception& e) {
            throw DataError(std::string(e.what()));
        }
        const SampleSet set = precompute_samples(tuple, config.sample_n, config.sample_sigma,
                                                 derive_seed(config.seed, "sample", item));
        save_samples(set, (out_dir / (bundle.filename().string() + ".fxss")).string());
        ++item;
    }
}

void cmd_train(const PipelineConfig& config) {
    config.validate();
    const ModelConfig mc = ModelConfig::from_preset(config.train.preset);
    const auto bundles = list_bundles(config.dataset_root);
    if (bundles.empty()) throw DataError("no tuples to train on");

    std::vector<std::vector<float>> images;
    std::vector<SampleSet> sets;
    for (const fs::path& bundle : bundles) {
        const fs::path obs = fs::path(config.dataset_root) / "obs" / bundle.filename();
        images.push_back(load_image(obs / "shade.fxdm", mc.image_size));
        const fs::path fxss =
            fs::path(config.dataset_root) / "samples" / (bundle.filename().string() + ".fxss");
        try {
            sets.push_back(load_samples(fxss.string()));
        } catch (const std::exception& e) {
            throw DataError(std::string(e.what()));
        }
    }

    FieldModel model(mc, derive_seed(config.seed, "model"));
    const int steps = config.train_steps > 0 ? config.train_steps
                                             : config.train.epochs * int(bundles.size());
    const fs::path ckpt = fs::path(config.output_dir) / "model.fxck";
    fs::create_directories(config.output_dir);

    // Each step draws from every tuple so batch-norm statistics stay
    // stationary: per-tuple chunks of ~m/ntuples points, one image per chunk.
    const std::size_t ntuples = bundles.size();
    std::vector<std::size_t> chunk(ntuples, std::size_t(config.train.m) / ntuples);
    for (std::size_t t = 0; t < std::size_t(config.train.m) % ntuples; ++t) ++chunk[t];

    std::ostringstream loss_csv;
    loss_csv << "step,tuple,loss\n";
    loss_csv.precision(17);
    for (int step = 0; step < steps; ++step) {
        std::vector<const std::vector<float>*> step_images;
        std::vector<std::size_t> counts;
        std::vector<Vec3> points;
        std::vector<std::array<std::uint8_t, 3>> labels;
        points.reserve(std::size_t(config.train.m));
        labels.reserve(std::size_t(config.train.m));
        for (std::size_t t = 0; t < ntuples; ++t) {
            if (chunk[t] == 0) continue;
            const Minibatch batch = draw_minibatch(
                sets[t], chunk[t],
                derive_seed(config.seed, "batch", std::uint64_t(step) * ntuples + t));
            step_images.push_back(&images[t]);
            counts.push_back(batch.indices.size());
            for (std::size_t idx : batch.indices) {
                const LabeledSample& s = sets[t].samples[idx];
                points.push_back(s.position);
                labels.push_back({s.oC, s.oB, s.oR});
            }
        }
        double loss = 0;
        try {
            loss = model.train_step(step_images, counts, points, labels, config.train.lambda_b,
                                    config.train.lambda_r, config.train.lr);
        } catch (const std::exception& e) {
            write_text(fs::path(config.output_dir) / "loss.csv", loss_csv.str());
            throw NumericError(std::string(e.what()) +
                               (fs::exists(ckpt) ? "; last good checkpoint: " + ckpt.string()
                                                 : "; no checkpoint written"));
        }
        loss_csv << step << ",all," << loss << "\n";
        if ((step + 1) % 200 == 0) model.save(ckpt.string());
    }
    model.save(ckpt.string());
    write_text(fs::path(config.output_dir) / "loss.csv", loss_csv.str());
}

void cmd_infer(const PipelineConfig& config) {
    config.validate();
    if (config.infer_checkpoint.empty() || config.infer_image.empty())
        throw ConfigError("infer requires infer.checkpoint and infer.image");
    std::unique_ptr<FieldModel> model;
    try {
        model = std::make_unique<FieldModel>(FieldModel::load(config.infer_checkpoint));
    } catch (const std::exception& e) {
        throw DataError(std::string(e.what()));
    }
    const std::vector<float> image =
        load_image(config.infer_image, model->config().image_size);
    const std::vector<double> z = model->encode(image);
    ExtractionResult result =
        extract_isosurface(query_model_grid(*model, z, 'R', config.infer_k));

    fs::create_directories(config.output_dir);
    save_mesh(result.mesh, (fs::path(config.output_dir) / "restoration.ply").string());
    write_text(fs::path(config.output_dir) / "report.txt",
               std::string("nonzero=") + (result.nonzero ? "1" : "0") + "\n");
}

void cmd_eval(const PipelineConfig& config) {
    config.validate();
    if (config.eval_pred_dir.empty() || config.eval_gt_dir.empty())
        throw ConfigError("eval requires eval.pred_dir and eval.gt_dir");
    if (!fs::is_directory(config.eval_pred_dir))
        throw DataError(config.eval_pred_dir + ": not a directory");

    std::vector<fs::path> preds;
    for (const auto& entry : fs::directory_iterator(config.eval_pred_dir))
        if (entry.path().extension() == ".ply") preds.push_back(entry.path());
    std::sort(preds.begin(), preds.end());

    MetricReport report;
    std::uint64_t item = 0;
    for (const fs::path& pred_path : preds) {
        const fs::path gt_path = fs::path(config.eval_gt_dir) / pred_path.filename();
        if (!fs::exists(gt_path)) throw DataError(gt_path.string() + ": missing ground truth");
        TriangleMesh pred, gt;
        try {
            pred = load_mesh(pred_path.string()).mesh;
            gt = load_mesh(gt_path.string()).mesh;
        } catch (const std::exception& e) {
            throw DataError(std::string(e.what()));
        }
        MetricRow row;
        row.object_id = pred_path.stem().string();
        row.nonzero = pred.num_triangles() > 0;
        if (row.nonzero) {
            const auto search =
                rotation_search_cd(pred, gt, config.eval_rotations, config.eval_points,
                                   derive_seed(config.seed, "eval-cd", item));
            row.cd = search.cd;
            row.angle = search.angle_deg;
            TriangleMesh rotated = pred;
            const Eigen::Matrix3d rot =
                Eigen::AngleAxisd(search.angle_deg * std::numbers::pi / 180.0,
                                  Eigen::Vector3d::UnitY())
                    .toRotationMatrix();
            for (auto& v : rotated.vertices) v = rot * v;
            row.nc = normal_consistency(rotated, gt, config.eval_points,
                                        derive_seed(config.seed, "eval-nc", item));
        }
        report.rows.push_back(row);
        ++item;
    }
    fs::create_directories(config.output_dir);
    write_text(fs::path(config.output_dir) / "metrics.csv", report.to_csv());
}

void cmd_ingest(const PipelineConfig& config) {
    config.validate();
    if (config.ingest_project.empty() || config.ingest_mesh.empty())
        throw ConfigError("ingest requires ingest.project and ingest.mesh");
    ProjectDescriptor project;
    TriangleMesh mesh;
    try {
        project = parse_project(config.ingest_project);
        mesh = load_mesh(config.ingest_mesh).mesh;
    } catch (const std::exception& e) {
        throw DataError(std::string(e.what()));
    }

    const fs::path masks = fs::path(config.output_dir) / "masks";
    fs::create_directories(masks);
    std::ostringstream log;
    for (const std::string& warning : project.warnings) log << "WARN ," << warning << "\n";
    const fs::path project_dir = fs::path(config.ingest_project).parent_path();
    for (const ScanPair& scan : project.scans) {
        try {
            const DepthScanRecord record = parse_scan((project_dir / scan.record_path).string());
            const MaskProjection projection = project_mask(mesh, record.alignment(),
                                                           project.intrinsics, project.width,
                                                           project.height);
            const BinaryMask cleaned = largest_component(projection.mask);
            std::vector<float> gray(cleaned.values.size());
            for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = float(cleaned.values[i]);
            const std::string stem = fs::path(scan.image_path).stem().string();
            write_pgm(gray, cleaned.width, cleaned.height, (masks / (stem + ".pgm")).string());
            log << "OK   ," << scan.record_path << "," << cleaned.count()
                << (projection.all_behind_camera ? ",all_behind_camera" : "") << "\n";
        } catch (const std::exception& e) {
            log << "ERROR," << scan.record_path << "," << e.what() << "\n";
        }
    }
    write_text(fs::path(config.output_dir) / "records.txt", log.str());
}

} // namespace fracta
