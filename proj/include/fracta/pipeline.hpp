#pragma once

#include "fracta/config.hpp"

#include <stdexcept>

namespace fracta {

// missing/corrupt inputs -> exit 2
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// non-finite training loss and friends -> exit 3
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Subcommand bodies. Each validates the config, reads/writes under
// config.dataset_root and config.output_dir, and throws ConfigError /
// DataError / NumericError for the corresponding exit codes.
void cmd_fracture(const PipelineConfig& config);
void cmd_render(const PipelineConfig& config);
void cmd_sample(const PipelineConfig& config);
void cmd_train(const PipelineConfig& config);
void cmd_infer(const PipelineConfig& config);
void cmd_eval(const PipelineConfig& config);
void cmd_ingest(const PipelineConfig& config);

} // namespace fracta
