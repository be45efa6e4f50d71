#pragma once

#include "fracta/fracture.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fracta {

enum class SampleSource : std::uint8_t { Uniform = 0, SurfaceC = 1, SurfaceB = 2, SurfaceR = 3 };

// One ground-truth training point: position plus hard labels for the three
// occupancy fields. oR == (oC AND oB) always holds.
struct LabeledSample {
    Vec3 position;
    std::uint8_t oC = 0, oB = 0, oR = 0;
    SampleSource source = SampleSource::Uniform;
};

struct SampleSet {
    std::vector<LabeledSample> samples;
    std::uint64_t seed = 0;

    std::size_t size() const { return samples.size(); }
};

// Strata are inside/outside of each shape; a point belongs to exactly one
// side per shape, so it counts toward three of the six strata.
enum class Stratum { InsideC, OutsideC, InsideB, OutsideB, InsideR, OutsideR };
const char* stratum_name(Stratum s);
bool in_stratum(const LabeledSample& s, Stratum st);

struct Minibatch {
    std::vector<std::size_t> indices; // into the SampleSet, size m
    std::size_t stratum_counts[6] = {0, 0, 0, 0, 0, 0};
};

// n uniform points in the 1.1 cube plus n Gaussian-offset surface points per
// shape (C, B, R); 4n total. Labels evaluate the tuple fields at the stored
// (offset) position.
SampleSet precompute_samples(const ShapeTuple& tuple, std::size_t n, double sigma,
                             std::uint64_t seed);

// Stratified draw: each of the six quotas (ceil(m/6)) filled without
// replacement, remaining slots uniform. Throws std::runtime_error naming the
// deficient strata when infeasible.
Minibatch draw_minibatch(const SampleSet& set, std::size_t m, std::uint64_t seed);

// FXSS serialization (binary little-endian).
void save_samples(const SampleSet& set, const std::string& path);
SampleSet load_samples(const std::string& path);

} // namespace fracta
