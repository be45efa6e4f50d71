#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fracta/mesh_io.hpp"
#include "test_support.hpp"

#include <fstream>

using namespace fracta;
using namespace fracta::testing;

namespace {

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// coordinates on a dyadic lattice (multiples of 2^-11), exactly
// representable in f32 so PLY round trips bit-exactly
TriangleMesh f32_mesh(std::size_t faces, std::uint64_t seed) {
    Rng rng(seed);
    TriangleMesh m;
    auto coord = [&] { return (double(rng.next_u64() % 2049) - 1024.0) / 2048.0; };
    for (std::size_t f = 0; f < faces; ++f) {
        std::int32_t base = std::int32_t(m.vertices.size());
        for (int i = 0; i < 3; ++i)
            m.vertices.push_back(Vec3(coord(), coord(), coord()));
        m.triangles.push_back({base, base + 1, base + 2});
    }
    return m;
}

} // namespace

TEST_CASE("OFF: minimal file loads") {
    TempDir dir("off_min");
    {
        std::ofstream out(dir.file("tri.off"));
        out << "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
    }
    auto r = load_mesh(dir.file("tri.off"));
    CHECK(r.mesh.num_vertices() == 3);
    CHECK(r.mesh.num_triangles() == 1);
    CHECK(r.degenerate_dropped == 0);
}

TEST_CASE("OFF: malformed header and bad index") {
    TempDir dir("off_bad");
    {
        std::ofstream out(dir.file("bad.off"));
        out << "OOF\n3 1 0\n";
    }
    CHECK_THROWS_AS(load_mesh(dir.file("bad.off")), MeshParseError);
    {
        std::ofstream out(dir.file("idx.off"));
        out << "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 9\n";
    }
    CHECK_THROWS_WITH_AS(load_mesh(dir.file("idx.off")), doctest::Contains("out of range"), MeshParseError);
}

TEST_CASE("OFF: degenerate faces dropped with count") {
    TempDir dir("off_degen");
    {
        std::ofstream out(dir.file("d.off"));
        out << "OFF\n4 2 0\n0 0 0\n1 0 0\n0 1 0\n2 0 0\n3 0 1 2\n3 0 1 3\n"; // second face is collinear
    }
    auto r = load_mesh(dir.file("d.off"));
    CHECK(r.mesh.num_triangles() == 1);
    CHECK(r.degenerate_dropped == 1);
}

TEST_CASE("PLY: round trip is bit-exact on a 1000-face mesh") {
    TempDir dir("ply_rt");
    TriangleMesh m = f32_mesh(1000, 11);
    save_mesh(m, dir.file("a.ply"));
    auto r = load_mesh(dir.file("a.ply"));
    REQUIRE(r.mesh.num_vertices() == m.num_vertices());
    REQUIRE(r.mesh.num_triangles() == m.num_triangles());
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
        CHECK((r.mesh.vertices[i].array() == m.vertices[i].array()).all());
    for (std::size_t i = 0; i < m.triangles.size(); ++i)
        CHECK(r.mesh.triangles[i] == m.triangles[i]);
    save_mesh(r.mesh, dir.file("b.ply"));
    CHECK(slurp(dir.file("a.ply")) == slurp(dir.file("b.ply")));
}

TEST_CASE("PLY: normals and colors round trip") {
    TempDir dir("ply_nc");
    TriangleMesh m = f32_mesh(10, 3);
    for (std::size_t i = 0; i < m.num_vertices(); ++i) {
        Vec3 n = Vec3(1, 2, 3).normalized();
        // snap to f32 and renormalize in f32 so the invariant survives the file
        n = Vec3(float(n[0]), float(n[1]), float(n[2]));
        m.vertex_normals.push_back(n / n.norm());
        m.vertex_colors.push_back(Vec3(double(i % 256) / 255.0, 0.5, 1.0));
    }
    for (auto& n : m.vertex_normals) n = Vec3(float(n[0]), float(n[1]), float(n[2]));
    save_mesh(m, dir.file("nc.ply"));
    auto r = load_mesh(dir.file("nc.ply"));
    CHECK(r.mesh.vertex_normals.size() == m.num_vertices());
    CHECK(r.mesh.vertex_colors.size() == m.num_vertices());
    save_mesh(r.mesh, dir.file("nc2.ply"));
    CHECK(slurp(dir.file("nc.ply")) == slurp(dir.file("nc2.ply")));
}

TEST_CASE("PLY: out-of-range face index reports offending record") {
    TempDir dir("ply_idx");
    TriangleMesh m = f32_mesh(4, 5); // 12 vertices... use small mesh, then corrupt an index
    save_mesh(m, dir.file("x.ply"));
    auto bytes = slurp(dir.file("x.ply"));
    // last face record: 13 bytes from the end (uchar + 3 int32); overwrite last index with 99
    std::int32_t bad = 99;
    std::memcpy(bytes.data() + bytes.size() - 4, &bad, 4);
    std::ofstream(dir.file("x.ply"), std::ios::binary).write(bytes.data(), std::streamsize(bytes.size()));
    CHECK_THROWS_WITH_AS(load_mesh(dir.file("x.ply")), doctest::Contains("out of range"), MeshParseError);
}

TEST_CASE("PLY: unsupported layouts rejected") {
    TempDir dir("ply_bad");
    {
        std::ofstream out(dir.file("big.ply"), std::ios::binary);
        out << "ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\nproperty float y\n"
               "property float z\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n";
    }
    CHECK_THROWS_WITH_AS(load_mesh(dir.file("big.ply")), doctest::Contains("unsupported"), MeshParseError);
    {
        std::ofstream out(dir.file("dbl.ply"), std::ios::binary);
        out << "ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty double x\nproperty double y\n"
               "property double z\nelement face 0\nproperty list uchar int vertex_indices\nend_header\n";
    }
    CHECK_THROWS_AS(load_mesh(dir.file("dbl.ply")), MeshParseError);
}

TEST_CASE("PLY: truncated payload names byte offset") {
    TempDir dir("ply_trunc");
    TriangleMesh m = f32_mesh(4, 9);
    save_mesh(m, dir.file("t.ply"));
    auto bytes = slurp(dir.file("t.ply"));
    bytes.resize(bytes.size() - 7);
    std::ofstream(dir.file("t.ply"), std::ios::binary).write(bytes.data(), std::streamsize(bytes.size()));
    CHECK_THROWS_WITH_AS(load_mesh(dir.file("t.ply")), doctest::Contains("truncated"), MeshParseError);
}

TEST_CASE("load_mesh: unknown extension") {
    CHECK_THROWS_AS(load_mesh("/nonexistent/mesh.stl"), MeshParseError);
}
