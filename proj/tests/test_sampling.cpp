#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fracta/sampling.hpp"
#include "fracta/rng.hpp"
#include "test_support.hpp"

#include <cmath>
#include <fstream>
#include <set>

using namespace fracta;
using namespace fracta::testing;

namespace {

ShapeTuple demo_tuple(int k = 48) {
    const OccupancyField complete = OccupancyField::sphere(Vec3::Zero(), 0.4);
    const TriangleMesh mesh = make_sphere(Vec3::Zero(), 0.4, 3);
    Primitive prim;
    prim.kind = PrimitiveKind::Sphere;
    prim.shape = Vec3::Constant(0.3);
    prim.pose.translation = Vec3(0.4, 0, 0);
    return generate_fracture(complete, mesh, prim, k);
}

} // namespace

TEST_CASE("precompute_samples: counts, labels, and determinism") {
    const ShapeTuple tuple = demo_tuple();
    const SampleSet set = precompute_samples(tuple, 2000, 0.01, 31);
    REQUIRE(set.size() == 8000);

    std::size_t per_source[4] = {0, 0, 0, 0};
    for (const LabeledSample& s : set.samples) {
        CHECK(s.oR == (s.oC & s.oB)); // label consistency, exhaustive
        ++per_source[int(s.source)];
        if (s.source == SampleSource::Uniform) {
            CHECK(s.position.cwiseAbs().maxCoeff() <= 0.55);
        }
        // labels are true occupancy at the stored position
        CHECK(s.oC == threshold_occupied(tuple.complete(s.position)));
        CHECK(s.oB == tuple.break_surface.occupancy(s.position));
    }
    for (int i = 0; i < 4; ++i) CHECK(per_source[i] == 2000);

    const SampleSet again = precompute_samples(tuple, 2000, 0.01, 31);
    REQUIRE(again.size() == set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        CHECK((set.samples[i].position.array() == again.samples[i].position.array()).all());
        CHECK(set.samples[i].oC == again.samples[i].oC);
    }

    const SampleSet other = precompute_samples(tuple, 2000, 0.01, 32);
    bool differs = false;
    for (std::size_t i = 0; i < set.size() && !differs; ++i)
        differs = (set.samples[i].position.array() != other.samples[i].position.array()).any();
    CHECK(differs);
}

TEST_CASE("sigma=0 surface points are boundary-exterior for their own shape") {
    const ShapeTuple tuple = demo_tuple();
    const SampleSet set = precompute_samples(tuple, 1000, 0.0, 7);
    // Points exactly on the complete sphere's surface resolve to 0 under the
    // open-set convention.
    for (const LabeledSample& s : set.samples)
        if (s.source == SampleSource::SurfaceC) {
            const double r = s.position.norm();
            if (std::abs(r - 0.4) < 1e-9) CHECK(s.oC == 0);
        }
}

TEST_CASE("uniform points pass a coarse per-octant uniformity check") {
    const ShapeTuple tuple = demo_tuple();
    const std::size_t n = 16000;
    const SampleSet set = precompute_samples(tuple, n, 0.01, 5);
    std::size_t octant[8] = {0};
    for (const LabeledSample& s : set.samples)
        if (s.source == SampleSource::Uniform)
            ++octant[(s.position.x() > 0) | ((s.position.y() > 0) << 1) |
                     ((s.position.z() > 0) << 2)];
    const double mean = double(n) / 8.0;
    const double sd = std::sqrt(double(n) * (1.0 / 8.0) * (7.0 / 8.0));
    for (int i = 0; i < 8; ++i) CHECK(std::abs(double(octant[i]) - mean) < 5.0 * sd);
}

TEST_CASE("draw_minibatch satisfies quotas across 1000 seeded draws") {
    const ShapeTuple tuple = demo_tuple();
    const SampleSet set = precompute_samples(tuple, 5000, 0.01, 11);
    const std::size_t m = 2048, quota = 342;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const Minibatch b = draw_minibatch(set, m, seed);
        CHECK(b.indices.size() == m);
        for (int s = 0; s < 6; ++s) CHECK(b.stratum_counts[s] >= quota);
        std::set<std::size_t> uniq(b.indices.begin(), b.indices.end());
        CHECK(uniq.size() == m); // without replacement
    }
}

TEST_CASE("draw_minibatch m=6 on a minimal covering set") {
    SampleSet set;
    auto add = [&](double x, int oC, int oB) {
        LabeledSample s;
        s.position = Vec3(x, 0, 0);
        s.oC = std::uint8_t(oC);
        s.oB = std::uint8_t(oB);
        s.oR = s.oC & s.oB;
        set.samples.push_back(s);
    };
    // covers all six strata: (1,1)->in C,B,R; (0,0)->out C,B,R; (1,0); (0,1)
    add(0.0, 1, 1);
    add(0.1, 0, 0);
    add(0.2, 1, 0);
    add(0.3, 0, 1);
    add(0.4, 1, 1);
    add(0.5, 0, 0);
    const Minibatch b = draw_minibatch(set, 6, 3);
    CHECK(b.indices.size() == 6);
    for (int s = 0; s < 6; ++s) CHECK(b.stratum_counts[s] >= 1);
}

TEST_CASE("draw_minibatch names deficient strata") {
    SampleSet set;
    for (int i = 0; i < 100; ++i) {
        LabeledSample s;
        s.position = Vec3(0.01 * i, 0, 0);
        s.oC = 1;
        s.oB = 0; // never inside B, hence never inside R
        s.oR = 0;
        set.samples.push_back(s);
    }
    try {
        draw_minibatch(set, 12, 1);
        FAIL("expected infeasibility error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("inside-B") != std::string::npos);
        CHECK(msg.find("inside-R") != std::string::npos);
        CHECK(msg.find("outside-C") != std::string::npos);
        CHECK(msg.find("inside-C") == std::string::npos);
    }
}

TEST_CASE("FXSS round trip and corruption") {
    const ShapeTuple tuple = demo_tuple();
    SampleSet set = precompute_samples(tuple, 500, 0.01, 17);
    TempDir tmp("fxss");
    const std::string path = tmp.file("set.fxss");
    save_samples(set, path);
    const SampleSet back = load_samples(path);
    REQUIRE(back.size() == set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        // positions stored as f32
        CHECK(float(set.samples[i].position.x()) == float(back.samples[i].position.x()));
        CHECK(set.samples[i].oC == back.samples[i].oC);
        CHECK(set.samples[i].oB == back.samples[i].oB);
        CHECK(set.samples[i].oR == back.samples[i].oR);
        CHECK(set.samples[i].source == back.samples[i].source);
    }

    // truncated payload
    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), {});
        std::ofstream out(tmp.file("trunc.fxss"), std::ios::binary);
        out.write(bytes.data(), std::streamsize(bytes.size() - 7));
    }
    CHECK_THROWS_WITH_AS(load_samples(tmp.file("trunc.fxss")),
                         doctest::Contains("truncated"), std::runtime_error);

    // bad magic
    {
        std::ofstream out(tmp.file("bad.fxss"), std::ios::binary);
        out.write("NOPE", 4);
    }
    CHECK_THROWS_WITH_AS(load_samples(tmp.file("bad.fxss")), doctest::Contains("magic"),
                         std::runtime_error);
}
