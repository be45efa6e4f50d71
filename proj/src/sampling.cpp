#include "fracta/sampling.hpp"

#include "fracta/rng.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fracta {

namespace {
constexpr char kSampleMagic[4] = {'F', 'X', 'S', 'S'};
}

const char* stratum_name(Stratum s) {
    switch (s) {
    case Stratum::InsideC: return "inside-C";
    case Stratum::OutsideC: return "outside-C";
    case Stratum::InsideB: return "inside-B";
    case Stratum::OutsideB: return "outside-B";
    case Stratum::InsideR: return "inside-R";
    case Stratum::OutsideR: return "outside-R";
    }
    return "?";
}

bool in_stratum(const LabeledSample& s, Stratum st) {
    switch (st) {
    case Stratum::InsideC: return s.oC == 1;
    case Stratum::OutsideC: return s.oC == 0;
    case Stratum::InsideB: return s.oB == 1;
    case Stratum::OutsideB: return s.oB == 0;
    case Stratum::InsideR: return s.oR == 1;
    case Stratum::OutsideR: return s.oR == 0;
    }
    return false;
}

namespace {

LabeledSample label_point(const ShapeTuple& tuple, const Vec3& p, SampleSource src) {
    LabeledSample s;
    s.position = p;
    s.oC = std::uint8_t(threshold_occupied(tuple.complete(p)));
    s.oB = std::uint8_t(tuple.break_surface.occupancy(p));
    s.oR = s.oC & s.oB; // label consistency by construction
    s.source = src;
    return s;
}

void surface_stratum(const ShapeTuple& tuple, const TriangleMesh& mesh, SampleSource src,
                     std::size_t n, double sigma, std::uint64_t seed,
                     std::vector<LabeledSample>& out) {
    if (mesh.empty()) throw std::invalid_argument("precompute_samples: shape mesh is empty");
    const SurfaceSamples surf = surface_sample(mesh, n, seed);
    Rng rng(derive_seed(seed, "offset"));
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 off(rng.normal() * sigma, rng.normal() * sigma, rng.normal() * sigma);
        out.push_back(label_point(tuple, surf.points[i] + off, src));
    }
}

} // namespace

SampleSet precompute_samples(const ShapeTuple& tuple, std::size_t n, double sigma,
                             std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("precompute_samples: n must be positive");
    if (sigma < 0) throw std::invalid_argument("precompute_samples: sigma must be >= 0");
    if (!tuple.complete.valid() || !tuple.break_surface.signed_value)
        throw std::invalid_argument("precompute_samples: tuple fields not set");

    SampleSet set;
    set.seed = seed;
    set.samples.reserve(4 * n);

    Rng rng(derive_seed(seed, "uniform"));
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 p(rng.uniform(-0.55, 0.55), rng.uniform(-0.55, 0.55),
                     rng.uniform(-0.55, 0.55));
        set.samples.push_back(label_point(tuple, p, SampleSource::Uniform));
    }
    surface_stratum(tuple, tuple.complete_mesh, SampleSource::SurfaceC, n, sigma,
                    derive_seed(seed, "surface-C"), set.samples);
    surface_stratum(tuple, tuple.break_mesh, SampleSource::SurfaceB, n, sigma,
                    derive_seed(seed, "surface-B"), set.samples);
    surface_stratum(tuple, tuple.restoration_mesh, SampleSource::SurfaceR, n, sigma,
                    derive_seed(seed, "surface-R"), set.samples);
    return set;
}

Minibatch draw_minibatch(const SampleSet& set, std::size_t m, std::uint64_t seed) {
    if (m == 0) throw std::invalid_argument("draw_minibatch: m must be positive");
    if (set.size() < m) throw std::runtime_error("draw_minibatch: sample set smaller than m");
    const std::size_t quota = (m + 5) / 6;

    constexpr Stratum kStrata[6] = {Stratum::InsideC, Stratum::OutsideC, Stratum::InsideB,
                                    Stratum::OutsideB, Stratum::InsideR, Stratum::OutsideR};
    std::vector<std::size_t> members[6];
    for (std::size_t i = 0; i < set.size(); ++i)
        for (int s = 0; s < 6; ++s)
            if (in_stratum(set.samples[i], kStrata[s])) members[s].push_back(i);

    std::string deficient;
    for (int s = 0; s < 6; ++s)
        if (members[s].size() < quota)
            deficient += std::string(deficient.empty() ? "" : ", ") + stratum_name(kStrata[s]);
    if (!deficient.empty())
        throw std::runtime_error("draw_minibatch: infeasible quotas for strata: " + deficient);

    Rng rng(derive_seed(seed, "minibatch"));
    Minibatch batch;
    std::vector<char> taken(set.size(), 0);

    // fill each quota without replacement; picks may satisfy several quotas
    for (int s = 0; s < 6; ++s) {
        std::size_t have = 0;
        for (std::size_t i : batch.indices)
            if (in_stratum(set.samples[i], kStrata[s])) ++have;
        auto& pool = members[s];
        while (have < quota && batch.indices.size() < m) {
            const std::size_t pick = pool[rng.index(pool.size())];
            if (taken[pick]) continue;
            taken[pick] = 1;
            batch.indices.push_back(pick);
            ++have;
        }
        if (have < quota)
            throw std::runtime_error(std::string("draw_minibatch: m too small to satisfy quota "
                                                 "for stratum ") +
                                     stratum_name(kStrata[s]));
    }

    while (batch.indices.size() < m) {
        const std::size_t pick = rng.index(set.size());
        if (taken[pick]) continue;
        taken[pick] = 1;
        batch.indices.push_back(pick);
    }

    for (std::size_t i : batch.indices)
        for (int s = 0; s < 6; ++s)
            if (in_stratum(set.samples[i], kStrata[s])) ++batch.stratum_counts[s];
    return batch;
}

void save_samples(const SampleSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out.write(kSampleMagic, 4);
    std::uint32_t version = 1;
    std::uint64_t count = set.size();
    out.write(reinterpret_cast<char*>(&version), 4);
    out.write(reinterpret_cast<char*>(&count), 8);
    for (const LabeledSample& s : set.samples) {
        float p[3] = {float(s.position[0]), float(s.position[1]), float(s.position[2])};
        out.write(reinterpret_cast<char*>(p), sizeof p);
        const std::uint8_t labels = std::uint8_t(s.oC | (s.oB << 1) | (s.oR << 2));
        const std::uint8_t src = std::uint8_t(s.source);
        out.write(reinterpret_cast<const char*>(&labels), 1);
        out.write(reinterpret_cast<const char*>(&src), 1);
    }
    if (!out) throw std::runtime_error(path + ": write failure");
}

SampleSet load_samples(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open file");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kSampleMagic, 4) != 0)
        throw std::runtime_error(path + ": bad FXSS magic");
    std::uint32_t version = 0;
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&count), 8);
    if (!in || version != 1) throw std::runtime_error(path + ": unsupported FXSS version");

    SampleSet set;
    set.samples.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        float p[3];
        std::uint8_t labels, src;
        if (!in.read(reinterpret_cast<char*>(p), sizeof p) ||
            !in.read(reinterpret_cast<char*>(&labels), 1) ||
            !in.read(reinterpret_cast<char*>(&src), 1)) {
            std::ostringstream os;
            os << path << ": truncated FXSS payload at record " << i;
            throw std::runtime_error(os.str());
        }
        LabeledSample& s = set.samples[i];
        s.position = Vec3(p[0], p[1], p[2]);
        s.oC = labels & 1;
        s.oB = (labels >> 1) & 1;
        s.oR = (labels >> 2) & 1;
        if (s.oR != (s.oC & s.oB))
            throw std::runtime_error(path + ": inconsistent label triple in FXSS record");
        if (src > 3) throw std::runtime_error(path + ": bad source tag in FXSS record");
        s.source = SampleSource(src);
    }
    return set;
}

} // namespace fracta
