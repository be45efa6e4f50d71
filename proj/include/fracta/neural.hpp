#pragma once

#include "fracta/field.hpp"
#include "fracta/geometry.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace fracta {

struct ModelConfig {
    std::string preset = "tiny";
    int image_size = 64;
    std::vector<int> encoder_channels = {8, 16, 32, 64}; // stride-2 blocks
    int dz = 512;
    int decoder_width = 256;
    int decoder_blocks = 6;

    bool operator==(const ModelConfig&) const = default;

    static ModelConfig tiny();  // 64x64 input
    static ModelConfig small(); // 224x224 input
    static ModelConfig micro(); // all widths <= 16; for gradient checks
    static ModelConfig from_preset(const std::string& name);
};

struct TrainConfig {
    double lambda_b = 1.0, lambda_r = 1.0;
    double lr = 2e-5;
    int epochs = 10;
    int m = 2048;
    std::uint64_t seed = 0;
    std::string preset = "tiny";
};

struct FieldTriple {
    double oC = 0, oB = 0, oR = 0;
};

// clamped binary cross-entropy, eps = 1e-7
double bce(double pred, double label);

// Eq. 2-5 batch loss: sum of BCE(oC) + lambda_b BCE(oB) + lambda_r BCE(oR)
double loss_sum(const std::vector<FieldTriple>& preds,
                const std::vector<std::array<std::uint8_t, 3>>& labels, double lambda_b,
                double lambda_r);

// Image encoder + twin occupancy decoders, trained with Adam. Training
// arithmetic is f32 (single-threaded, bit-reproducible); checkpoints store
// f64. oR = oC * oB by construction for every forward pass.
class FieldModel {
public:
    FieldModel(const ModelConfig& config, std::uint64_t seed);
    FieldModel(FieldModel&&) noexcept;
    FieldModel& operator=(FieldModel&&) noexcept;
    ~FieldModel();

    const ModelConfig& config() const;
    std::size_t parameter_count() const;

    // inference-mode latent code for a grayscale image (row-major, [0,1])
    std::vector<double> encode(const std::vector<float>& image) const;

    std::vector<FieldTriple> eval_fields(const std::vector<double>& z,
                                         const std::vector<Vec3>& points) const;

    // One Adam update (beta1 0.9, beta2 0.999, eps 1e-8) on every parameter:
    // encoder in training mode, one image, its minibatch of points.
    // Returns the batch loss. Throws on non-finite loss.
    double train_step(const std::vector<float>& image, const std::vector<Vec3>& points,
                      const std::vector<std::array<std::uint8_t, 3>>& labels, double lambda_b,
                      double lambda_r, double lr);

    // Multi-shape variant: images[i] conditions the contiguous chunk of
    // counts[i] points. Keeping every shape in every batch makes the batch-norm
    // statistics stationary, so the running estimates used at inference match
    // the training-mode statistics.
    double train_step(const std::vector<const std::vector<float>*>& images,
                      const std::vector<std::size_t>& counts, const std::vector<Vec3>& points,
                      const std::vector<std::array<std::uint8_t, 3>>& labels, double lambda_b,
                      double lambda_r, double lr);

    // FXCK checkpoint round trip (parameters, Adam state, BN statistics).
    void save(const std::string& path) const;
    static FieldModel load(const std::string& path);
    static FieldModel load(const std::string& path, const ModelConfig& expect);

    // occupancy field view of one decoder head for a fixed latent code
    OccupancyField field(const std::vector<double>& z, char which /* 'C','B','R' */) const;

private:
    struct Impl;
    explicit FieldModel(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

// Reverse-mode vs central finite differences over every parameter of an f64
// micro-preset model with frozen batch norm; returns the max relative error.
double gradient_check(double epsilon = 1e-5, std::uint64_t seed = 0);

} // namespace fracta
