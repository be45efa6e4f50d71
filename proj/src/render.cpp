#include "fracta/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>

namespace fracta {

Vec3 CameraModel::position() const { return pose.inverse().translation; }

Vec3 CameraModel::forward() const { return pose.rotation.row(2).transpose(); }

CameraModel CameraModel::look_at(const Vec3& eye, const Vec3& target, const Vec3& up_hint,
                                 int resolution, double vfov_deg) {
    CameraModel cam;
    cam.width = cam.height = resolution;
    const double f = (resolution / 2.0) / std::tan(0.5 * vfov_deg * std::numbers::pi / 180.0);
    cam.intrinsics = {f, f, resolution / 2.0, resolution / 2.0};

    const Vec3 z = (target - eye).normalized();
    Vec3 up = up_hint - up_hint.dot(z) * z;
    if (up.norm() < 1e-9) {
        up = Vec3::UnitY() - Vec3::UnitY().dot(z) * z;
        if (up.norm() < 1e-9) up = Vec3::UnitX() - Vec3::UnitX().dot(z) * z;
    }
    up.normalize();
    const Vec3 y = -up; // pixel y grows downward
    const Vec3 x = y.cross(z);
    cam.pose.rotation.row(0) = x.transpose();
    cam.pose.rotation.row(1) = y.transpose();
    cam.pose.rotation.row(2) = z.transpose();
    cam.pose.translation = -(cam.pose.rotation * eye);
    return cam;
}

CameraModel fracture_camera(const ShapeTuple& tuple, int resolution, double vfov_deg) {
    const TriangleMesh& mesh = tuple.fractured_mesh;
    if (mesh.face_labels.size() != mesh.num_triangles())
        throw std::invalid_argument("fracture_camera: fractured mesh has no face labels");

    std::set<std::int32_t> frac_ids;
    for (std::size_t f = 0; f < mesh.num_triangles(); ++f)
        if (mesh.face_labels[f] == FaceLabel::Fracture)
            for (int k = 0; k < 3; ++k) frac_ids.insert(mesh.triangles[f][k]);
    if (frac_ids.size() < 3)
        throw std::invalid_argument("fracture_camera: fewer than 3 fracture vertices");

    Vec3 c = Vec3::Zero();
    for (std::int32_t i : frac_ids) c += mesh.vertices[i];
    c /= double(frac_ids.size());

    Mat3 cov = Mat3::Zero();
    for (std::int32_t i : frac_ids) {
        const Vec3 d = mesh.vertices[i] - c;
        cov += d * d.transpose();
    }
    cov /= double(frac_ids.size());
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Vec3 n = eig.eigenvectors().col(0); // smallest eigenvalue: plane normal
    const bool degenerate = eig.eigenvalues()[1] < 1e-10 * std::max(eig.eigenvalues()[2], 1e-300);

    // flip the normal away from the object body
    double mean_dot = 0;
    for (const Vec3& v : mesh.vertices) mean_dot += n.dot(v - c);
    mean_dot /= double(mesh.num_vertices());
    if (mean_dot > 0) n = -n;

    // bounding sphere of the fractured mesh
    Vec3 lo, hi;
    mesh.bounds(lo, hi);
    const Vec3 bc = 0.5 * (lo + hi);
    double rb = 0;
    for (const Vec3& v : mesh.vertices) rb = std::max(rb, (v - bc).norm());

    // push the camera back until the bounding sphere fits in the frame with a
    // 10% angular margin; the look-at target is the fracture centroid, not the
    // sphere center, so the off-axis angle counts against the field of view
    const double half_fov = 0.45 * vfov_deg * std::numbers::pi / 180.0;
    double d = std::max(rb, 1e-3);
    for (int it = 0; it < 256; ++it, d *= 1.1) {
        const Vec3 to_bc = bc - (c + d * n);
        const double dist = std::max(to_bc.norm(), 1e-12);
        const double alpha = std::asin(std::min(1.0, rb / dist));
        const double theta = std::acos(std::clamp(-n.dot(to_bc) / dist, -1.0, 1.0));
        if (theta + alpha <= half_fov) break;
    }

    CameraModel cam = CameraModel::look_at(c + d * n, c, Vec3::UnitY(), resolution, vfov_deg);
    cam.degenerate_fracture = degenerate;
    return cam;
}

ObservationImage render_observation(const TriangleMesh& mesh, const CameraModel& camera) {
    if (mesh.empty()) throw std::invalid_argument("render_observation: empty mesh");
    const int w = camera.width, h = camera.height;
    const CameraIntrinsics& K = camera.intrinsics;

    ObservationImage img;
    img.width = w;
    img.height = h;
    img.shade.assign(std::size_t(w) * h, 0.0f);
    img.depth.assign(std::size_t(w) * h, 0.0f);
    img.silhouette = BinaryMask::make(w, h);

    std::vector<Vec3> cam(mesh.num_vertices());
    bool any_in_front = false;
    for (std::size_t i = 0; i < cam.size(); ++i) {
        cam[i] = camera.pose.apply(mesh.vertices[i]);
        any_in_front |= cam[i].z() > 0;
    }
    if (!any_in_front) {
        img.all_behind_camera = true;
        return img;
    }

    std::vector<double> zbuf(std::size_t(w) * h, std::numeric_limits<double>::infinity());
    for (std::size_t f = 0; f < mesh.num_triangles(); ++f) {
        const auto& tri = mesh.triangles[f];
        const Vec3 &a = cam[tri[0]], &b = cam[tri[1]], &c = cam[tri[2]];
        if (a.z() <= 0 || b.z() <= 0 || c.z() <= 0) continue;

        const double ax = K.fx * a.x() / a.z() + K.cx, ay = K.fy * a.y() / a.z() + K.cy;
        const double bx = K.fx * b.x() / b.z() + K.cx, by = K.fy * b.y() / b.z() + K.cy;
        const double cx = K.fx * c.x() / c.z() + K.cx, cy = K.fy * c.y() / c.z() + K.cy;

        const int x0 = std::max(0, int(std::floor(std::min({ax, bx, cx}))));
        const int x1 = std::min(w - 1, int(std::ceil(std::max({ax, bx, cx}))));
        const int y0 = std::max(0, int(std::floor(std::min({ay, by, cy}))));
        const int y1 = std::min(h - 1, int(std::ceil(std::max({ay, by, cy}))));
        if (x0 > x1 || y0 > y1) continue;

        const double area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
        if (area == 0) continue;

        // headlight shading from the face normal in camera space
        const Vec3 nrm = (b - a).cross(c - a).normalized();

        const double iza = 1.0 / a.z(), izb = 1.0 / b.z(), izc = 1.0 / c.z();
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                const double w0 = ((bx - px) * (cy - py) - (by - py) * (cx - px)) / area;
                const double w1 = ((cx - px) * (ay - py) - (cy - py) * (ax - px)) / area;
                const double w2 = 1.0 - w0 - w1;
                // slightly inclusive: avoids hairline cracks along shared
                // edges from floating-point roundoff (z-buffer keeps the
                // first triangle on exact ties, so overlap stays harmless)
                if (w0 < -1e-9 || w1 < -1e-9 || w2 < -1e-9) continue;
                const double iz = w0 * iza + w1 * izb + w2 * izc;
                const double z = 1.0 / iz;
                const std::size_t idx = std::size_t(y) * w + x;
                if (z < zbuf[idx]) { // nearer wins; ties keep the lower index
                    zbuf[idx] = z;
                    img.depth[idx] = float(z);
                    // light direction from the surface point toward the camera
                    const Vec3 p(z * (px - K.cx) / K.fx, z * (py - K.cy) / K.fy, z);
                    const Vec3 l = -p.normalized();
                    img.shade[idx] =
                        float(std::clamp(0.3 + 0.7 * std::max(0.0, nrm.dot(l)), 0.0, 1.0));
                    img.silhouette.values[idx] = 1;
                }
            }
    }
    return img;
}

namespace {

void write_pnm(const std::vector<float>& data, int width, int height, int channels,
               const std::string& path) {
    if (int(data.size()) != width * height * channels)
        throw std::invalid_argument(path + ": image buffer size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << (channels == 1 ? "P5" : "P6") << "\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> bytes(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        bytes[i] = (unsigned char)(std::lround(std::clamp(data[i], 0.0f, 1.0f) * 255.0f));
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error(path + ": write failure");
}

constexpr char kDepthMagic[4] = {'F', 'X', 'D', 'M'};

} // namespace

void write_pgm(const std::vector<float>& gray, int width, int height, const std::string& path) {
    write_pnm(gray, width, height, 1, path);
}

void write_ppm(const std::vector<float>& rgb, int width, int height, const std::string& path) {
    write_pnm(rgb, width, height, 3, path);
}

void write_depth(const std::vector<float>& depth, int width, int height,
                 const std::string& path) {
    if (int(depth.size()) != width * height)
        throw std::invalid_argument(path + ": depth buffer size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out.write(kDepthMagic, 4);
    const std::uint32_t version = 1, wv = std::uint32_t(width), hv = std::uint32_t(height);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&wv), 4);
    out.write(reinterpret_cast<const char*>(&hv), 4);
    out.write(reinterpret_cast<const char*>(depth.data()), std::streamsize(depth.size() * 4));
    if (!out) throw std::runtime_error(path + ": write failure");
}

std::vector<float> read_depth(const std::string& path, int& width, int& height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open file");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kDepthMagic, 4) != 0)
        throw std::runtime_error(path + ": bad FXDM magic");
    std::uint32_t version = 0, wv = 0, hv = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&wv), 4);
    in.read(reinterpret_cast<char*>(&hv), 4);
    if (!in || version != 1) throw std::runtime_error(path + ": unsupported FXDM version");
    width = int(wv);
    height = int(hv);
    std::vector<float> depth(std::size_t(wv) * hv);
    if (!in.read(reinterpret_cast<char*>(depth.data()), std::streamsize(depth.size() * 4)))
        throw std::runtime_error(path + ": truncated FXDM payload");
    return depth;
}

} // namespace fracta
