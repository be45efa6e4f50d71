#include "fracta/mesh_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace fracta {

namespace {

std::string lower_ext(const std::string& path) {
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string e = path.substr(dot + 1);
    for (auto& c : e) c = char(std::tolower(static_cast<unsigned char>(c)));
    return e;
}

[[noreturn]] void fail(const std::string& path, const std::string& what, std::size_t offset = std::size_t(-1)) {
    std::ostringstream os;
    os << path << ": " << what;
    if (offset != std::size_t(-1)) os << " (at byte " << offset << ")";
    throw MeshParseError(os.str());
}

void finish_load(TriangleMesh& mesh, const std::string& path, std::size_t* dropped) {
    const auto nv = std::int64_t(mesh.vertices.size());
    for (std::size_t f = 0; f < mesh.triangles.size(); ++f)
        for (int i = 0; i < 3; ++i)
            if (mesh.triangles[f][i] < 0 || mesh.triangles[f][i] >= nv)
                fail(path, "face " + std::to_string(f) + " index " + std::to_string(mesh.triangles[f][i]) +
                               " out of range [0," + std::to_string(nv) + ")");
    std::size_t n = mesh.drop_degenerate_faces();
    if (dropped) *dropped = n;
    mesh.validate();
}

} // namespace

TriangleMesh load_off(const std::string& path, std::size_t* dropped) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open file");
    std::string magic;
    in >> magic;
    if (magic != "OFF") fail(path, "malformed header: expected OFF, got '" + magic + "'");
    std::size_t nv = 0, nf = 0, ne = 0;
    if (!(in >> nv >> nf >> ne)) fail(path, "malformed counts line");
    TriangleMesh mesh;
    mesh.vertices.resize(nv);
    for (std::size_t i = 0; i < nv; ++i)
        if (!(in >> mesh.vertices[i][0] >> mesh.vertices[i][1] >> mesh.vertices[i][2]))
            fail(path, "malformed vertex " + std::to_string(i));
    mesh.triangles.resize(nf);
    for (std::size_t i = 0; i < nf; ++i) {
        int count;
        if (!(in >> count)) fail(path, "malformed face " + std::to_string(i));
        if (count != 3) fail(path, "face " + std::to_string(i) + " has " + std::to_string(count) + " vertices; only triangles supported");
        if (!(in >> mesh.triangles[i][0] >> mesh.triangles[i][1] >> mesh.triangles[i][2]))
            fail(path, "malformed face " + std::to_string(i));
    }
    finish_load(mesh, path, dropped);
    return mesh;
}

void save_off(const TriangleMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MeshParseError(path + ": cannot open for writing");
    out << "OFF\n" << mesh.vertices.size() << " " << mesh.triangles.size() << " 0\n";
    out.precision(17);
    for (const auto& v : mesh.vertices) out << v[0] << " " << v[1] << " " << v[2] << "\n";
    for (const auto& t : mesh.triangles) out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
}

namespace {

struct PlyLayout {
    std::size_t nv = 0, nf = 0;
    bool has_normals = false, has_colors = false;
};

PlyLayout parse_ply_header(std::istream& in, const std::string& path, std::size_t& header_bytes) {
    std::string line;
    std::vector<std::string> vprops;
    PlyLayout layout;
    bool in_vertex = false, in_face = false, face_list_ok = false, format_seen = false;
    header_bytes = 0;
    auto next = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        header_bytes += line.size() + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };
    if (!next() || line != "ply") fail(path, "malformed header: missing 'ply'");
    while (next()) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment") continue;
        if (tok == "format") {
            std::string fmt, ver;
            ls >> fmt >> ver;
            if (fmt != "binary_little_endian" || ver != "1.0")
                fail(path, "unsupported format '" + fmt + " " + ver + "'; only binary_little_endian 1.0");
            format_seen = true;
        } else if (tok == "element") {
            std::string name;
            std::size_t count;
            ls >> name >> count;
            in_vertex = in_face = false;
            if (name == "vertex") { layout.nv = count; in_vertex = true; }
            else if (name == "face") { layout.nf = count; in_face = true; }
            else fail(path, "unsupported element '" + name + "'");
        } else if (tok == "property") {
            if (in_vertex) {
                std::string type, name;
                ls >> type >> name;
                vprops.push_back(type + " " + name);
            } else if (in_face) {
                std::string list, ctype, itype, name;
                ls >> list >> ctype >> itype >> name;
                if (list != "list" || ctype != "uchar" || (itype != "int" && itype != "int32") ||
                    (name != "vertex_indices" && name != "vertex_index"))
                    fail(path, "unsupported face property '" + line + "'");
                face_list_ok = true;
            } else {
                fail(path, "property outside element");
            }
        } else if (tok == "end_header") {
            break;
        } else {
            fail(path, "unsupported header line '" + line + "'");
        }
    }
    if (!format_seen) fail(path, "missing format line");
    // accept exactly xyz [+ nxnynz] [+ rgb]
    static const std::vector<std::string> xyz = {"float x", "float y", "float z"};
    static const std::vector<std::string> nrm = {"float nx", "float ny", "float nz"};
    static const std::vector<std::string> rgb = {"uchar red", "uchar green", "uchar blue"};
    std::size_t i = 0;
    auto match = [&](const std::vector<std::string>& group) {
        if (i + 3 > vprops.size()) return false;
        for (int j = 0; j < 3; ++j)
            if (vprops[i + j] != group[j]) return false;
        i += 3;
        return true;
    };
    if (!match(xyz)) fail(path, "unsupported vertex layout (must start with float x,y,z)");
    layout.has_normals = match(nrm);
    layout.has_colors = match(rgb);
    if (i != vprops.size()) fail(path, "unsupported extra vertex properties");
    if (layout.nf > 0 && !face_list_ok) fail(path, "missing face vertex_indices property");
    return layout;
}

} // namespace

TriangleMesh load_ply(const std::string& path, std::size_t* dropped) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open file");
    std::size_t header_bytes = 0;
    PlyLayout layout = parse_ply_header(in, path, header_bytes);

    TriangleMesh mesh;
    mesh.vertices.resize(layout.nv);
    if (layout.has_normals) mesh.vertex_normals.resize(layout.nv);
    if (layout.has_colors) mesh.vertex_colors.resize(layout.nv);
    std::size_t offset = header_bytes;
    auto read_raw = [&](void* dst, std::size_t n, const char* what) {
        if (!in.read(static_cast<char*>(dst), std::streamsize(n)))
            fail(path, std::string("truncated file reading ") + what, offset);
        offset += n;
    };
    for (std::size_t i = 0; i < layout.nv; ++i) {
        float p[3];
        read_raw(p, sizeof p, "vertex");
        mesh.vertices[i] = Vec3(p[0], p[1], p[2]);
        if (layout.has_normals) {
            float n[3];
            read_raw(n, sizeof n, "normal");
            mesh.vertex_normals[i] = Vec3(n[0], n[1], n[2]);
        }
        if (layout.has_colors) {
            std::uint8_t c[3];
            read_raw(c, sizeof c, "color");
            mesh.vertex_colors[i] = Vec3(c[0], c[1], c[2]) / 255.0;
        }
    }
    mesh.triangles.resize(layout.nf);
    for (std::size_t i = 0; i < layout.nf; ++i) {
        std::uint8_t count;
        std::size_t rec_off = offset;
        read_raw(&count, 1, "face count");
        if (count != 3)
            fail(path, "face " + std::to_string(i) + " has " + std::to_string(int(count)) + " vertices; only triangles supported", rec_off);
        std::int32_t idx[3];
        read_raw(idx, sizeof idx, "face indices");
        for (int j = 0; j < 3; ++j) {
            if (idx[j] < 0 || std::size_t(idx[j]) >= layout.nv)
                fail(path, "face " + std::to_string(i) + " index " + std::to_string(idx[j]) + " out of range [0," +
                               std::to_string(layout.nv) + ")", rec_off);
            mesh.triangles[i][j] = idx[j];
        }
    }
    finish_load(mesh, path, dropped);
    return mesh;
}

void save_ply(const TriangleMesh& mesh, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MeshParseError(path + ": cannot open for writing");
    bool normals = !mesh.vertex_normals.empty();
    bool colors = !mesh.vertex_colors.empty();
    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    if (normals) out << "property float nx\nproperty float ny\nproperty float nz\n";
    if (colors) out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    out << "element face " << mesh.triangles.size() << "\n";
    out << "property list uchar int vertex_indices\n";
    out << "end_header\n";
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        float p[3] = {float(mesh.vertices[i][0]), float(mesh.vertices[i][1]), float(mesh.vertices[i][2])};
        out.write(reinterpret_cast<char*>(p), sizeof p);
        if (normals) {
            float n[3] = {float(mesh.vertex_normals[i][0]), float(mesh.vertex_normals[i][1]), float(mesh.vertex_normals[i][2])};
            out.write(reinterpret_cast<char*>(n), sizeof n);
        }
        if (colors) {
            auto q = [](double v) { return std::uint8_t(std::min(255.0, std::max(0.0, v * 255.0 + 0.5))); };
            std::uint8_t c[3] = {q(mesh.vertex_colors[i][0]), q(mesh.vertex_colors[i][1]), q(mesh.vertex_colors[i][2])};
            out.write(reinterpret_cast<char*>(c), sizeof c);
        }
    }
    for (const auto& t : mesh.triangles) {
        std::uint8_t count = 3;
        out.write(reinterpret_cast<char*>(&count), 1);
        std::int32_t idx[3] = {t[0], t[1], t[2]};
        out.write(reinterpret_cast<char*>(idx), sizeof idx);
    }
}

MeshLoadResult load_mesh(const std::string& path) {
    MeshLoadResult r;
    std::string ext = lower_ext(path);
    if (ext == "off") r.mesh = load_off(path, &r.degenerate_dropped);
    else if (ext == "ply") r.mesh = load_ply(path, &r.degenerate_dropped);
    else fail(path, "unsupported mesh format '." + ext + "' (expected .off or .ply)");
    return r;
}

void save_mesh(const TriangleMesh& mesh, const std::string& path) {
    std::string ext = lower_ext(path);
    if (ext == "off") save_off(mesh, path);
    else if (ext == "ply") save_ply(mesh, path);
    else throw MeshParseError(path + ": unsupported mesh format '." + ext + "'");
}

} // namespace fracta
