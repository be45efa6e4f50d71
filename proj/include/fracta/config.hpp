#pragma once

#include "fracta/neural.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracta {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One config drives every subcommand; unknown keys are rejected so typos
// fail before any work starts.
struct PipelineConfig {
    std::string dataset_root = "data";
    std::string output_dir = "out";

    // fracture
    int fracture_count = 8;
    std::vector<std::string> fracture_bases = {"sphere", "box"}; // names or mesh paths
    int grid_k = 64;

    // render
    int render_resolution = 64;
    double render_vfov_deg = 50.0;

    // sampling
    std::size_t sample_n = 50000;
    double sample_sigma = 0.01;

    TrainConfig train;
    int train_steps = 0; // 0: epochs * tuple count

    // eval
    int eval_k = 64;
    std::size_t eval_points = 30000;
    int eval_rotations = 36;
    std::string eval_pred_dir, eval_gt_dir;

    // infer
    std::string infer_checkpoint, infer_image;
    int infer_k = 64;

    // ingest
    std::string ingest_project, ingest_mesh;

    std::uint64_t seed = 0;
    int threads = 1;

    void set(const std::string& key, const std::string& value); // throws ConfigError
    void validate() const;                                      // throws ConfigError
    std::string to_text() const;                                // round-trippable dump
};

PipelineConfig load_config(const std::string& path);

// "key=value" CLI override
void apply_override(PipelineConfig& config, const std::string& assignment);

} // namespace fracta
