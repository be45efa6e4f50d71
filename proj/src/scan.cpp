#include "fracta/scan.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace fracta {

namespace {

constexpr char kScanMagic[4] = {'F', 'X', 'R', 'G'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 4 + 4 + 64 + 64; // through T

std::size_t color_pad(std::size_t n) { return (4 - (3 * n) % 4) % 4; }

std::size_t expected_size(std::size_t n) {
    return kHeaderBytes + 12 * n + 3 * n + color_pad(n) + 12 * n;
}

std::string offset_msg(const std::string& path, const std::string& what, std::size_t off) {
    std::ostringstream os;
    os << path << ": " << what << " (byte offset " << off << ")";
    return os.str();
}

} // namespace

ScanParseError::ScanParseError(const std::string& msg, std::size_t off)
    : std::runtime_error(msg), byte_offset(off) {}

RigidTransform DepthScanRecord::alignment() const {
    const Mat3 rot = alignment_matrix.topLeftCorner<3, 3>();
    RigidTransform T;
    T.uniform_scale = std::cbrt(std::abs(rot.determinant()));
    T.rotation = rot / T.uniform_scale;
    T.translation = alignment_matrix.topRightCorner<3, 1>();
    return T;
}

void DepthScanRecord::set_alignment(const RigidTransform& T) {
    alignment_matrix.setIdentity();
    alignment_matrix.topLeftCorner<3, 3>() = T.uniform_scale * T.rotation;
    alignment_matrix.topRightCorner<3, 1>() = T.translation;
}

std::vector<std::array<float, 3>> DepthScanRecord::colors_float() const {
    std::vector<std::array<float, 3>> out(colors.size());
    for (std::size_t i = 0; i < colors.size(); ++i)
        out[i] = {colors[i][0] / 255.0f, colors[i][1] / 255.0f, colors[i][2] / 255.0f};
    return out;
}

void write_scan(const DepthScanRecord& record, const std::string& path) {
    const std::size_t n = record.size();
    if (record.colors.size() != n || record.normals.size() != n)
        throw std::invalid_argument("write_scan: array lengths disagree");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out.write(kScanMagic, 4);
    const std::uint32_t version = 1, count = std::uint32_t(n), flags = record.flags;
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&count), 4);
    out.write(reinterpret_cast<const char*>(&flags), 4);
    const float turntable = float(record.turntable_distance);
    out.write(reinterpret_cast<const char*>(&turntable), 4);

    float frame[16];
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) frame[4 * r + c] = float(record.camera_frame(r, c));
    out.write(reinterpret_cast<const char*>(frame), sizeof frame);

    float tmat[16];
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) tmat[4 * r + c] = float(record.alignment_matrix(r, c));
    out.write(reinterpret_cast<const char*>(tmat), sizeof tmat);

    for (const Vec3& p : record.points) {
        const float v[3] = {float(p[0]), float(p[1]), float(p[2])};
        out.write(reinterpret_cast<const char*>(v), sizeof v);
    }
    for (const auto& c : record.colors) out.write(reinterpret_cast<const char*>(c.data()), 3);
    const char zeros[4] = {0, 0, 0, 0};
    out.write(zeros, std::streamsize(color_pad(n)));
    for (const Vec3& nv : record.normals) {
        const float v[3] = {float(nv[0]), float(nv[1]), float(nv[2])};
        out.write(reinterpret_cast<const char*>(v), sizeof v);
    }
    if (!out) throw std::runtime_error(path + ": write failure");
}

DepthScanRecord parse_scan(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open file");
    std::string bytes((std::istreambuf_iterator<char>(in)), {});

    if (bytes.size() < 4 || std::memcmp(bytes.data(), kScanMagic, 4) != 0)
        throw ScanParseError(offset_msg(path, "bad FXRG magic", 0), 0);
    if (bytes.size() < kHeaderBytes)
        throw ScanParseError(offset_msg(path, "truncated FXRG header", bytes.size()),
                             bytes.size());

    auto rd_u32 = [&](std::size_t off) {
        std::uint32_t v;
        std::memcpy(&v, bytes.data() + off, 4);
        return v;
    };
    auto rd_f32 = [&](std::size_t off) {
        float v;
        std::memcpy(&v, bytes.data() + off, 4);
        return v;
    };

    const std::uint32_t version = rd_u32(4);
    if (version != 1)
        throw ScanParseError(offset_msg(path, "unsupported FXRG version " +
                                                  std::to_string(version), 4), 4);
    const std::uint32_t n = rd_u32(8);

    const std::size_t expect = expected_size(n);
    if (bytes.size() < expect) {
        std::ostringstream os;
        os << "FXRG length mismatch: " << n << " points need " << expect << " bytes, file has "
           << bytes.size();
        throw ScanParseError(offset_msg(path, os.str(), bytes.size()), bytes.size());
    }
    if (bytes.size() > expect)
        throw ScanParseError(offset_msg(path, "trailing bytes after FXRG payload", expect),
                             expect);

    DepthScanRecord rec;
    rec.flags = rd_u32(12);
    rec.turntable_distance = rd_f32(16);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) rec.camera_frame(r, c) = rd_f32(20 + 4 * (4 * r + c));

    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) rec.alignment_matrix(r, c) = rd_f32(84 + 4 * (4 * r + c));
    const Mat3 rot = rec.alignment_matrix.topLeftCorner<3, 3>();
    const double scale = std::cbrt(std::abs(rot.determinant()));
    if (scale < 1e-6 || ((rot / scale) * (rot / scale).transpose() - Mat3::Identity())
                                .cwiseAbs()
                                .maxCoeff() > 1e-4)
        throw ScanParseError(offset_msg(path, "alignment T rotation block not orthonormal", 84),
                             84);

    std::size_t off = kHeaderBytes;
    rec.points.resize(n);
    for (std::uint32_t i = 0; i < n; ++i, off += 12)
        rec.points[i] = Vec3(rd_f32(off), rd_f32(off + 4), rd_f32(off + 8));
    rec.colors.resize(n);
    for (std::uint32_t i = 0; i < n; ++i, off += 3)
        rec.colors[i] = {std::uint8_t(bytes[off]), std::uint8_t(bytes[off + 1]),
                         std::uint8_t(bytes[off + 2])};
    off += color_pad(n);
    rec.normals.resize(n);
    for (std::uint32_t i = 0; i < n; ++i, off += 12) {
        rec.normals[i] = Vec3(rd_f32(off), rd_f32(off + 4), rd_f32(off + 8));
        if (std::abs(rec.normals[i].norm() - 1.0) > 1e-3)
            throw ScanParseError(offset_msg(path, "non-unit normal in FXRG record", off), off);
    }
    rec.record_id = path;
    return rec;
}

ProjectDescriptor parse_project(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open file");

    ProjectDescriptor desc;
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected key=value");
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (kv.count(key))
            desc.warnings.push_back("duplicate key '" + key + "' at line " +
                                    std::to_string(lineno) + "; last value wins");
        kv[key] = value;
    }

    auto need = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw std::runtime_error(path + ": missing mandatory key '" + key + "'");
        return it->second;
    };
    desc.intrinsics.fx = std::stod(need("fx"));
    desc.intrinsics.fy = std::stod(need("fy"));
    desc.intrinsics.cx = std::stod(need("cx"));
    desc.intrinsics.cy = std::stod(need("cy"));
    desc.width = std::stoi(need("width"));
    desc.height = std::stoi(need("height"));
    if (desc.width <= 0 || desc.height <= 0)
        throw std::runtime_error(path + ": image dimensions must be positive");
    if (desc.intrinsics.fx <= 0 || desc.intrinsics.fy <= 0)
        throw std::runtime_error(path + ": focal lengths must be positive");
    if (!desc.intrinsics.valid(desc.width, desc.height))
        throw std::runtime_error(path + ": principal point outside image");

    for (int i = 0;; ++i) {
        const std::string img = "scan." + std::to_string(i) + ".image";
        const std::string rec = "scan." + std::to_string(i) + ".record";
        const bool has_img = kv.count(img), has_rec = kv.count(rec);
        if (!has_img && !has_rec) break;
        if (!has_img || !has_rec)
            throw std::runtime_error(path + ": scan." + std::to_string(i) +
                                     " needs both image and record");
        desc.scans.push_back({kv[img], kv[rec]});
    }
    return desc;
}

MaskProjection project_mask(const TriangleMesh& mesh, const RigidTransform& T,
                            const CameraIntrinsics& K, int width, int height) {
    if (mesh.empty()) throw std::invalid_argument("project_mask: empty mesh");
    if (!K.valid(width, height)) throw std::invalid_argument("project_mask: invalid intrinsics");

    const RigidTransform inv = T.inverse();
    std::vector<Vec3> cam(mesh.num_vertices());
    bool any_in_front = false;
    for (std::size_t i = 0; i < cam.size(); ++i) {
        cam[i] = inv.apply(mesh.vertices[i]);
        any_in_front |= cam[i].z() > 0;
    }

    MaskProjection out;
    out.mask = BinaryMask::make(width, height);
    if (!any_in_front) {
        out.all_behind_camera = true;
        return out;
    }

    for (const auto& tri : mesh.triangles) {
        const Vec3 &a = cam[tri[0]], &b = cam[tri[1]], &c = cam[tri[2]];
        if (a.z() <= 0 || b.z() <= 0 || c.z() <= 0) continue; // cull, no clipping
        const double ax = K.fx * a.x() / a.z() + K.cx, ay = K.fy * a.y() / a.z() + K.cy;
        const double bx = K.fx * b.x() / b.z() + K.cx, by = K.fy * b.y() / b.z() + K.cy;
        const double cx = K.fx * c.x() / c.z() + K.cx, cy = K.fy * c.y() / c.z() + K.cy;

        const int x0 = std::max(0, int(std::floor(std::min({ax, bx, cx}))));
        const int x1 = std::min(width - 1, int(std::ceil(std::max({ax, bx, cx}))));
        const int y0 = std::max(0, int(std::floor(std::min({ay, by, cy}))));
        const int y1 = std::min(height - 1, int(std::ceil(std::max({ay, by, cy}))));
        if (x0 > x1 || y0 > y1) continue;

        // edge function: positive on the left of a->b for CCW triangles
        auto edge = [](double px, double py, double qx, double qy, double rx, double ry) {
            return (qx - px) * (ry - py) - (qy - py) * (rx - px);
        };
        double area = edge(ax, ay, bx, by, cx, cy);
        double e0x0 = ax, e0y0 = ay, e0x1 = bx, e0y1 = by;
        double e1x0 = bx, e1y0 = by, e1x1 = cx, e1y1 = cy;
        double e2x0 = cx, e2y0 = cy, e2x1 = ax, e2y1 = ay;
        if (area < 0) { // normalize to CCW so the top-left rule is uniform
            std::swap(e0x0, e0x1);
            std::swap(e0y0, e0y1);
            std::swap(e1x0, e1x1);
            std::swap(e1y0, e1y1);
            std::swap(e2x0, e2x1);
            std::swap(e2y0, e2y1);
            area = -area;
        }
        if (area == 0) continue;

        auto top_left = [](double px, double py, double qx, double qy) {
            return (py == qy && qx < px) || qy > py; // in y-down pixel coords: top or left edge
        };
        const bool tl0 = top_left(e0x0, e0y0, e0x1, e0y1);
        const bool tl1 = top_left(e1x0, e1y0, e1x1, e1y1);
        const bool tl2 = top_left(e2x0, e2y0, e2x1, e2y1);

        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                const double w0 = edge(e0x0, e0y0, e0x1, e0y1, px, py);
                const double w1 = edge(e1x0, e1y0, e1x1, e1y1, px, py);
                const double w2 = edge(e2x0, e2y0, e2x1, e2y1, px, py);
                const bool in = (w0 > 0 || (w0 == 0 && tl0)) && (w1 > 0 || (w1 == 0 && tl1)) &&
                                (w2 > 0 || (w2 == 0 && tl2));
                if (in) out.mask.at(x, y) = 1;
            }
    }
    return out;
}

} // namespace fracta
