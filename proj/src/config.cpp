#include "fracta/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fracta {

namespace {

long long to_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + value + "'");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::istringstream is(value);
    std::string tok;
    while (std::getline(is, tok, ','))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

std::string join_list(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

} // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
    if (key == "paths.dataset_root") dataset_root = value;
    else if (key == "paths.output_dir") output_dir = value;
    else if (key == "fracture.count") fracture_count = int(to_int(key, value));
    else if (key == "fracture.bases") fracture_bases = split_list(value);
    else if (key == "fracture.grid_k") grid_k = int(to_int(key, value));
    else if (key == "render.resolution") render_resolution = int(to_int(key, value));
    else if (key == "render.vfov_deg") render_vfov_deg = to_double(key, value);
    else if (key == "sample.n") sample_n = std::size_t(to_int(key, value));
    else if (key == "sample.sigma") sample_sigma = to_double(key, value);
    else if (key == "train.preset") train.preset = value;
    else if (key == "train.epochs") train.epochs = int(to_int(key, value));
    else if (key == "train.steps") train_steps = int(to_int(key, value));
    else if (key == "train.lr") train.lr = to_double(key, value);
    else if (key == "train.lambda_b") train.lambda_b = to_double(key, value);
    else if (key == "train.lambda_r") train.lambda_r = to_double(key, value);
    else if (key == "train.m") train.m = int(to_int(key, value));
    else if (key == "eval.k") eval_k = int(to_int(key, value));
    else if (key == "eval.points") eval_points = std::size_t(to_int(key, value));
    else if (key == "eval.rotations") eval_rotations = int(to_int(key, value));
    else if (key == "eval.pred_dir") eval_pred_dir = value;
    else if (key == "eval.gt_dir") eval_gt_dir = value;
    else if (key == "infer.checkpoint") infer_checkpoint = value;
    else if (key == "infer.image") infer_image = value;
    else if (key == "infer.k") infer_k = int(to_int(key, value));
    else if (key == "ingest.project") ingest_project = value;
    else if (key == "ingest.mesh") ingest_mesh = value;
    else if (key == "seed") seed = std::uint64_t(to_int(key, value));
    else if (key == "threads") threads = int(to_int(key, value));
    else throw ConfigError("unknown config key: " + key);
}

void PipelineConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (fracture_count < 0) fail("fracture.count must be >= 0");
    if (fracture_bases.empty()) fail("fracture.bases must name at least one base shape");
    if (grid_k < 2 || grid_k > 512) fail("fracture.grid_k must be in [2, 512]");
    if (render_resolution < 8 || render_resolution > 2048)
        fail("render.resolution must be in [8, 2048]");
    if (render_vfov_deg <= 0 || render_vfov_deg >= 180)
        fail("render.vfov_deg must be in (0, 180)");
    if (sample_n == 0) fail("sample.n must be > 0");
    if (sample_sigma < 0) fail("sample.sigma must be >= 0");
    if (train.epochs < 0 || train_steps < 0) fail("train.epochs/train.steps must be >= 0");
    if (train.lr <= 0) fail("train.lr must be > 0");
    if (train.lambda_b < 0 || train.lambda_r < 0) fail("train lambdas must be >= 0");
    if (train.m <= 0) fail("train.m must be > 0");
    ModelConfig::from_preset(train.preset); // throws on unknown preset
    if (eval_k < 2 || eval_k > 512) fail("eval.k must be in [2, 512]");
    if (eval_points == 0) fail("eval.points must be > 0");
    if (eval_rotations < 1) fail("eval.rotations must be >= 1");
    if (infer_k < 2 || infer_k > 512) fail("infer.k must be in [2, 512]");
    if (threads < 1) fail("threads must be >= 1");
}

std::string PipelineConfig::to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "paths.dataset_root=" << dataset_root << "\n"
       << "paths.output_dir=" << output_dir << "\n"
       << "fracture.count=" << fracture_count << "\n"
       << "fracture.bases=" << join_list(fracture_bases) << "\n"
       << "fracture.grid_k=" << grid_k << "\n"
       << "render.resolution=" << render_resolution << "\n"
       << "render.vfov_deg=" << render_vfov_deg << "\n"
       << "sample.n=" << sample_n << "\n"
       << "sample.sigma=" << sample_sigma << "\n"
       << "train.preset=" << train.preset << "\n"
       << "train.epochs=" << train.epochs << "\n"
       << "train.steps=" << train_steps << "\n"
       << "train.lr=" << train.lr << "\n"
       << "train.lambda_b=" << train.lambda_b << "\n"
       << "train.lambda_r=" << train.lambda_r << "\n"
       << "train.m=" << train.m << "\n"
       << "eval.k=" << eval_k << "\n"
       << "eval.points=" << eval_points << "\n"
       << "eval.rotations=" << eval_rotations << "\n"
       << "eval.pred_dir=" << eval_pred_dir << "\n"
       << "eval.gt_dir=" << eval_gt_dir << "\n"
       << "infer.checkpoint=" << infer_checkpoint << "\n"
       << "infer.image=" << infer_image << "\n"
       << "infer.k=" << infer_k << "\n"
       << "ingest.project=" << ingest_project << "\n"
       << "ingest.mesh=" << ingest_mesh << "\n"
       << "seed=" << seed << "\n"
       << "threads=" << threads << "\n";
    return os.str();
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    PipelineConfig config;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        config.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return config;
}

void apply_override(PipelineConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set expects key=value, got '" + assignment + "'");
    config.set(assignment.substr(0, eq), assignment.substr(eq + 1));
}

} // namespace fracta
