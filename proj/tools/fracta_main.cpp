#include "fracta/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <functional>
#include <iostream>

namespace {

struct CliArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::int64_t seed = -1; // -1: keep config value
};

fracta::PipelineConfig resolve_config(const CliArgs& args) {
    fracta::PipelineConfig config;
    if (!args.config_path.empty()) config = fracta::load_config(args.config_path);
    for (const std::string& assignment : args.overrides)
        fracta::apply_override(config, assignment);
    if (args.seed >= 0) config.seed = std::uint64_t(args.seed);
    if (const char* env = std::getenv("FRACTA_THREADS")) {
        try {
            config.threads = std::stoi(env);
        } catch (const std::exception&) {
            throw fracta::ConfigError(std::string("FRACTA_THREADS: bad value '") + env + "'");
        }
    }
    config.validate();
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fractured-shape repair pipeline"};
    app.require_subcommand(1);

    CliArgs args;
    std::function<void(const fracta::PipelineConfig&)> body;
    const std::pair<const char*, void (*)(const fracta::PipelineConfig&)> commands[] = {
        {"fracture", fracta::cmd_fracture}, {"render", fracta::cmd_render},
        {"sample", fracta::cmd_sample},     {"train", fracta::cmd_train},
        {"infer", fracta::cmd_infer},       {"eval", fracta::cmd_eval},
        {"ingest", fracta::cmd_ingest},
    };
    for (const auto& [name, fn] : commands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", args.config_path, "key=value config file");
        sub->add_option("--set", args.overrides, "config override key=value")
            ->take_all();
        sub->add_option("--seed", args.seed, "root seed override");
        sub->callback([&body, fn] { body = fn; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        body(resolve_config(args));
    } catch (const fracta::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const fracta::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
