// Command-line front end: dataset generation, single-pair inspection,
// edge-parameter training, and the multi-method benchmark.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "egm/egm.hpp"

namespace fs = std::filesystem;
using namespace egm;

namespace {

struct SceneFlags {
    // Defaults mirror the library's SceneConfig / NoiseModel / ChangeConfig.
    int objects = SceneConfig{}.object_count;
    int classes = SceneConfig{}.class_count;
    int descriptor_dim = SceneConfig{}.descriptor_dim;
    double depth_min = SceneConfig{}.depth_min, depth_max = SceneConfig{}.depth_max;
    double size_min = SceneConfig{}.size_min, size_max = SceneConfig{}.size_max;
    double class_spread = SceneConfig{}.class_spread;
    double sigma_view = NoiseModel{}.sigma_view, sigma_det = NoiseModel{}.sigma_det;
    double dropout = NoiseModel{}.dropout, spurious = NoiseModel{}.spurious;
    double change_rate = ChangeConfig{}.change_rate, delete_share = ChangeConfig{}.delete_share,
           appear_rate = ChangeConfig{}.appear_rate;

    GeneratorConfig to_config() const {
        GeneratorConfig cfg;
        cfg.scene.object_count = objects;
        cfg.scene.class_count = classes;
        cfg.scene.descriptor_dim = descriptor_dim;
        cfg.scene.depth_min = depth_min;
        cfg.scene.depth_max = depth_max;
        cfg.scene.size_min = size_min;
        cfg.scene.size_max = size_max;
        cfg.scene.class_spread = class_spread;
        cfg.noise.sigma_view = sigma_view;
        cfg.noise.sigma_det = sigma_det;
        cfg.noise.dropout = dropout;
        cfg.noise.spurious = spurious;
        cfg.change.change_rate = change_rate;
        cfg.change.delete_share = delete_share;
        cfg.change.appear_rate = appear_rate;
        return cfg;
    }

    void add_options(CLI::App* cmd) {
        cmd->add_option("--objects", objects, "objects per scene");
        cmd->add_option("--classes", classes, "object classes");
        cmd->add_option("--df", descriptor_dim, "descriptor dimension");
        cmd->add_option("--depth-min", depth_min, "nearest object depth [m]");
        cmd->add_option("--depth-max", depth_max, "farthest object depth [m]");
        cmd->add_option("--size-min", size_min, "smallest object extent [m]");
        cmd->add_option("--size-max", size_max, "largest object extent [m]");
        cmd->add_option("--class-spread", class_spread, "latent scatter within a class");
        cmd->add_option("--sigma-view", sigma_view, "descriptor noise per radian of yaw gap");
        cmd->add_option("--sigma-det", sigma_det, "viewpoint-independent descriptor noise");
        cmd->add_option("--dropout", dropout, "per-view detection dropout probability");
        cmd->add_option("--spurious", spurious, "per-object spurious detection probability");
        cmd->add_option("--change-rate", change_rate, "per-object change probability");
        cmd->add_option("--delete-share", delete_share, "fraction of changes that delete");
        cmd->add_option("--appear-rate", appear_rate, "appear-only object rate");
    }

    void echo(std::vector<std::pair<std::string, std::string>>& kv) const {
        auto num = [](double v) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%g", v);
            return std::string(buf);
        };
        kv.emplace_back("objects", std::to_string(objects));
        kv.emplace_back("classes", std::to_string(classes));
        kv.emplace_back("df", std::to_string(descriptor_dim));
        kv.emplace_back("depth_min", num(depth_min));
        kv.emplace_back("depth_max", num(depth_max));
        kv.emplace_back("size_min", num(size_min));
        kv.emplace_back("size_max", num(size_max));
        kv.emplace_back("class_spread", num(class_spread));
        kv.emplace_back("sigma_view", num(sigma_view));
        kv.emplace_back("sigma_det", num(sigma_det));
        kv.emplace_back("dropout", num(dropout));
        kv.emplace_back("spurious", num(spurious));
        kv.emplace_back("change_rate", num(change_rate));
        kv.emplace_back("delete_share", num(delete_share));
        kv.emplace_back("appear_rate", num(appear_rate));
    }
};

SigmaMode parse_sigma(const std::string& text) {
    if (text == "adaptive")
        return SigmaMode::adaptive_std();
    if (text.rfind("fixed:", 0) == 0) {
        const double v = std::stod(text.substr(6));
        if (v <= 0)
            throw ConfigError("sigma must be positive");
        return SigmaMode::fixed(v);
    }
    throw ConfigError("--sigma expects 'fixed:<value>' or 'adaptive', got '" + text + "'");
}

Topology parse_topology(const std::string& text) {
    if (text == "dt")
        return Topology::Delaunay;
    if (text == "fc")
        return Topology::FullyConnected;
    throw ConfigError("--topology expects 'dt' or 'fc', got '" + text + "'");
}

std::string echo_text(const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ostringstream out;
    for (const auto& [k, v] : kv)
        out << k << " = " << v << "\n";
    return out.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << content;
    if (!out)
        throw IoError("write failed: " + path.string());
}

std::string join_ints(const std::vector<int>& v) {
    std::ostringstream out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out << (i ? "," : "") << v[i];
    return out.str();
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos)
        return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

// Flat key=value config support: the file's entries are expanded into flags
// placed directly after the subcommand, so anything typed on the command
// line overrides them (options take the last occurrence).
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::string config_path;
    for (std::size_t i = 0; i + 1 < args.size(); ++i)
        if (args[i] == "--config")
            config_path = args[i + 1];
    for (const std::string& a : args)
        if (a.rfind("--config=", 0) == 0)
            config_path = a.substr(9);
    if (config_path.empty() || args.empty())
        return args;

    std::ifstream in(config_path);
    if (!in)
        throw ConfigError("cannot open config file " + config_path);
    std::vector<std::string> injected;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#')
            continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(config_path + ":" + std::to_string(line_no) +
                              ": expected key=value");
        injected.push_back("--" + trim(stripped.substr(0, eq)));
        injected.push_back(trim(stripped.substr(eq + 1)));
    }

    std::vector<std::string> out;
    out.push_back(args[0]);  // subcommand
    out.insert(out.end(), injected.begin(), injected.end());
    out.insert(out.end(), args.begin() + 1, args.end());
    return out;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
    SceneFlags scene;
    std::vector<int> sets{1, 2, 3, 4};
    int pairs = 0;
    std::uint64_t seed = 0;
    std::string out_dir;
};

int cmd_generate(const GenerateArgs& args) {
    if (args.pairs < 1)
        throw ConfigError("--pairs must be >= 1");
    if (args.sets.empty())
        throw ConfigError("--sets must not be empty");
    for (int s : args.sets)
        if (s < 1 || s > 4)
            throw ConfigError("sets must be within 1..4");

    const GeneratorConfig cfg = args.scene.to_config();
    cfg.scene.validate();

    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("command", "generate");
    kv.emplace_back("sets", join_ints(args.sets));
    kv.emplace_back("pairs", std::to_string(args.pairs));
    kv.emplace_back("seed", std::to_string(args.seed));
    args.scene.echo(kv);

    fs::create_directories(args.out_dir);
    nlohmann::json manifest;
    manifest["generator_version"] = kGeneratorVersion;
    manifest["seed"] = args.seed;
    manifest["config"] = echo_text(kv);
    manifest["sets"] = nlohmann::json::array();

    for (int set : args.sets) {
        const fs::path set_dir = fs::path(args.out_dir) / ("set" + std::to_string(set));
        fs::create_directories(set_dir);
        nlohmann::json set_entry;
        set_entry["set"] = set;
        set_entry["pairs"] = nlohmann::json::array();
        for (int index = 0; index < args.pairs; ++index) {
            const ScenePair pair = generate_pair(cfg, ViewpointProtocol::set(set), args.seed,
                                                 static_cast<std::uint64_t>(index));
            char name[32];
            std::snprintf(name, sizeof(name), "pair_%05d.json", index);
            const fs::path path = set_dir / name;
            save_scene_pair(pair, path.string());
            set_entry["pairs"].push_back({{"index", index},
                                          {"seed", pair.seed},
                                          {"path", ("set" + std::to_string(set) + "/") + name}});
        }
        manifest["sets"].push_back(std::move(set_entry));
    }
    write_file(fs::path(args.out_dir) / "manifest.json", manifest.dump(2) + "\n");
    write_file(fs::path(args.out_dir) / "config_echo.cfg", echo_text(kv));
    std::cout << "wrote " << args.sets.size() * static_cast<std::size_t>(args.pairs)
              << " pairs under " << args.out_dir << "\n";
    return 0;
}

// ------------------------------------------------------------------- match

struct MatchArgs {
    std::string pair_path;
    std::string method = "EGMNet-DT";
    double gamma = 0.5;
    double change_threshold = 0.05;
    std::string sigma = "fixed:2.0";
    std::string topology = "dt";
    std::string model_path;
    std::string dump_scores;
};

int cmd_match(const MatchArgs& args) {
    const ScenePair pair = load_scene_pair(args.pair_path);
    const Method method = method_from_name(args.method);

    BenchmarkConfig cfg;
    cfg.methods = {method};
    cfg.gamma = args.gamma;
    cfg.calibrate_gamma = false;
    cfg.change_threshold = args.change_threshold;
    cfg.epipolar.sigma = parse_sigma(args.sigma);
    cfg.gmn_topology = parse_topology(args.topology);
    if (!args.model_path.empty())
        cfg.model = load_model(args.model_path);

    const SinglePairRun run = evaluate_single_pair(pair, method, cfg);

    std::cout << "pair: " << args.pair_path << " (set " << pair.protocol.set_id << ", seed "
              << pair.seed << ")\n";
    std::cout << "method: " << args.method << "  gamma: " << args.gamma << "\n";
    std::cout << "detections: " << pair.detections1.size() << " / " << pair.detections2.size()
              << "\n";
    const SolverStats& stats = run.scores.solver_stats;
    if (stats.iterations > 0)
        std::cout << "solver: " << stats.iterations << " iterations, residual " << stats.residual
                  << (stats.converged ? "" : " (not converged)") << "\n";

    std::cout << "matches:\n";
    for (std::size_t k = 0; k < run.assignment.pairs.size(); ++k) {
        const auto [i, j] = run.assignment.pairs[k];
        char line[160];
        std::snprintf(line, sizeof(line), "  %3d -> %3d  score %.4f  distance %.4f  %s\n", i, j,
                      run.assignment.confidence[k], run.match_verdicts[k].distance,
                      run.match_verdicts[k].changed ? "changed" : "unchanged");
        std::cout << line;
    }
    std::cout << "unmatched view 1:";
    for (int i : run.assignment.unmatched1)
        std::cout << " " << i;
    std::cout << "\nunmatched view 2:";
    for (int j : run.assignment.unmatched2)
        std::cout << " " << j;
    std::cout << "\n";

    char metrics_line[192];
    std::snprintf(metrics_line, sizeof(metrics_line),
                  "accuracy: %.4f\nchange: precision %.4f  recall %.4f  f1 %.4f\n", run.accuracy,
                  run.change.precision, run.change.recall, run.change.f1);
    std::cout << metrics_line;

    if (!args.dump_scores.empty()) {
        std::ostringstream out;
        char cell[40];
        for (Eigen::Index i = 0; i < run.scores.s.rows(); ++i) {
            for (Eigen::Index j = 0; j < run.scores.s.cols(); ++j) {
                std::snprintf(cell, sizeof(cell), "%.17g", run.scores.s(i, j));
                out << (j ? "," : "") << cell;
            }
            out << "\n";
        }
        write_file(args.dump_scores, out.str());
        std::cout << "scores written to " << args.dump_scores << "\n";
    }
    return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
    std::string data_dir;
    std::string out_path = "model.json";
    std::string loss_curve;
    std::string resume;
    double lr = 5e-4;
    int epochs = 30;
    int batch = 0;
    std::uint64_t seed = 0;
    std::string grad_mode = "unrolled";
    int unroll = 30;
    double momentum = 0.0;
    int jobs = 0;
    std::string topology = "dt";
    std::string sigma = "fixed:2.0";
    bool no_epipolar = false;
};

std::vector<std::string> manifest_pair_paths(const std::string& data_dir) {
    const fs::path manifest_path = fs::path(data_dir) / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in)
        throw IoError("cannot open " + manifest_path.string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(manifest_path.string() + ": " + e.what());
    }
    std::vector<std::string> paths;
    for (const auto& set_entry : manifest.at("sets"))
        for (const auto& p : set_entry.at("pairs"))
            paths.push_back((fs::path(data_dir) / p.at("path").get<std::string>()).string());
    if (paths.empty())
        throw ConfigError("manifest lists no pairs");
    return paths;
}

int cmd_train(const TrainArgs& args) {
    const Topology topo = parse_topology(args.topology);
    EpipolarOptions epi;
    epi.sigma = parse_sigma(args.sigma);

    std::vector<TrainingPair> pairs;
    for (const std::string& path : manifest_pair_paths(args.data_dir))
        pairs.push_back(make_training_pair(load_scene_pair(path), topo, !args.no_epipolar, epi));

    FitOptions opts;
    opts.learning_rate = args.lr;
    opts.epochs = args.epochs;
    opts.batch = args.batch;
    opts.seed = args.seed;
    opts.unroll_iterations = args.unroll;
    opts.momentum = args.momentum;
    opts.jobs = args.jobs > 0 ? args.jobs
                              : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (args.grad_mode == "unrolled")
        opts.grad_mode = GradMode::Unrolled;
    else if (args.grad_mode == "finite_diff")
        opts.grad_mode = GradMode::FiniteDiff;
    else
        throw ConfigError("--grad-mode expects 'unrolled' or 'finite_diff'");

    int prior_epochs = 0;
    if (!args.resume.empty()) {
        const TrainedModel prior = load_model(args.resume);
        opts.init = prior.lam.matrix();
        prior_epochs = prior.meta.epochs;
    } else {
        // Fresh runs descend from the untrained default rather than the
        // identity, whose edge term dominates the spectrum and leaves the
        // loss on a plateau.
        for (const TrainingPair& p : pairs)
            if (p.has_edges()) {
                opts.init = LambdaParam::scale_prior((p.h1.cols() - 2) / 2).matrix();
                break;
            }
    }

    TrainedModel model = fit_lambda(pairs, opts);
    // The library accepts an unchanged loss (e.g. a zero learning rate); for
    // the training tool that still counts as failure.
    if (model.meta.final_loss >= model.meta.initial_loss && model.meta.initial_loss > 0)
        throw NoImprovement("training loss did not decrease (lr = " + std::to_string(args.lr) +
                            ")");
    model.meta.epochs += prior_epochs;
    save_model(model, args.out_path);

    char line[160];
    std::snprintf(line, sizeof(line), "trained on %zu pairs: loss %.6f -> %.6f (%d epochs)\n",
                  pairs.size(), model.meta.initial_loss, model.meta.final_loss,
                  model.meta.epochs);
    std::cout << line << "model written to " << args.out_path << "\n";

    if (!args.loss_curve.empty()) {
        std::ostringstream out;
        out << "epoch,loss\n";
        for (std::size_t e = 0; e < model.meta.loss_history.size(); ++e) {
            std::snprintf(line, sizeof(line), "%zu,%.9f\n", e, model.meta.loss_history[e]);
            out << line;
        }
        write_file(args.loss_curve, out.str());
    }
    return 0;
}

// ------------------------------------------------------------------- bench

struct BenchArgs {
    SceneFlags scene;
    std::vector<int> sets{1, 2, 3, 4};
    std::vector<std::string> methods{"NN", "ENN", "GMN", "EGMNet-FC", "EGMNet-DT"};
    int pairs = 200;
    std::uint64_t seed = 0;
    double gamma = 0.5;
    bool no_calibration = false;
    int calibration_pairs = 32;
    double change_threshold = 0.05;
    std::string sigma = "fixed:2.0";
    std::string model_path;
    std::string out_dir = "bench_out";
    int jobs = 0;
    std::string timing = "wall";
    std::string accuracy_mode = "per-node";
};

int cmd_bench(const BenchArgs& args) {
    BenchmarkConfig cfg;
    cfg.generator = args.scene.to_config();
    cfg.sets = args.sets;
    cfg.pairs_per_set = args.pairs;
    cfg.seed = args.seed;
    cfg.gamma = args.gamma;
    cfg.calibrate_gamma = !args.no_calibration;
    cfg.calibration_pairs = args.calibration_pairs;
    cfg.change_threshold = args.change_threshold;
    cfg.epipolar.sigma = parse_sigma(args.sigma);
    cfg.jobs = args.jobs > 0 ? args.jobs
                             : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (args.timing == "none")
        cfg.collect_timing = false;
    else if (args.timing != "wall")
        throw ConfigError("--timing expects 'wall' or 'none'");
    if (args.accuracy_mode == "per-entry")
        cfg.accuracy_mode = AccuracyMode::PerEntry;
    else if (args.accuracy_mode != "per-node")
        throw ConfigError("--accuracy-mode expects 'per-node' or 'per-entry'");
    cfg.methods.clear();
    for (const std::string& name : args.methods)
        cfg.methods.push_back(method_from_name(name));
    if (!args.model_path.empty())
        cfg.model = load_model(args.model_path);

    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("command", "bench");
    kv.emplace_back("sets", join_ints(args.sets));
    kv.emplace_back("pairs", std::to_string(args.pairs));
    kv.emplace_back("seed", std::to_string(args.seed));
    {
        std::ostringstream names;
        for (std::size_t i = 0; i < cfg.methods.size(); ++i)
            names << (i ? "," : "") << method_name(cfg.methods[i]);
        kv.emplace_back("methods", names.str());
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", args.gamma);
    kv.emplace_back("gamma", buf);
    kv.emplace_back("calibrate_gamma", cfg.calibrate_gamma ? "true" : "false");
    kv.emplace_back("calibration_pairs", std::to_string(args.calibration_pairs));
    std::snprintf(buf, sizeof(buf), "%g", args.change_threshold);
    kv.emplace_back("change_threshold", buf);
    kv.emplace_back("sigma", args.sigma);
    kv.emplace_back("accuracy_mode", args.accuracy_mode);
    kv.emplace_back("timing", args.timing);
    kv.emplace_back("model", args.model_path.empty() ? "(identity)" : args.model_path);
    args.scene.echo(kv);

    EvalReport report = run_benchmark(cfg);
    report.config_echo = echo_text(kv);

    fs::create_directories(args.out_dir);
    write_file(fs::path(args.out_dir) / "report.csv", report.to_csv());
    write_file(fs::path(args.out_dir) / "report.json", report.to_json());
    write_file(fs::path(args.out_dir) / "config_echo.cfg", report.config_echo);

    std::vector<ChartSeries> series;
    for (Method m : cfg.methods) {
        ChartSeries s;
        s.name = method_name(m);
        for (const auto& row : report.rows)
            if (row.method == m)
                s.points.emplace_back(row.set, row.accuracy);
        series.push_back(std::move(s));
    }
    write_file(fs::path(args.out_dir) / "accuracy.svg",
               render_line_chart(series, "Matching accuracy by viewpoint set", "viewpoint set",
                                 "accuracy"));

    std::cout << report.to_csv();
    std::cout << "reports written under " << args.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"epipolar-guided spectral graph matching benchmark"};
    app.require_subcommand(1);
    std::string config_file;

    GenerateArgs gen;
    auto* gen_cmd = app.add_subcommand("generate", "write scene-pair datasets");
    gen_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    gen_cmd->add_option("--config", config_file, "flat key=value config file; flags override");
    gen_cmd->add_option("--sets", gen.sets, "viewpoint sets (1..4)")->delimiter(',');
    gen_cmd->add_option("--pairs", gen.pairs, "pairs per set")->required();
    gen_cmd->add_option("--seed", gen.seed, "master seed");
    gen_cmd->add_option("--out", gen.out_dir, "output directory")->required();
    gen.scene.add_options(gen_cmd);

    MatchArgs match;
    auto* match_cmd = app.add_subcommand("match", "run one method on one stored pair");
    match_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    match_cmd->add_option("--config", config_file, "flat key=value config file; flags override");
    match_cmd->add_option("--pair", match.pair_path, "scene-pair JSON file")->required();
    match_cmd->add_option("--method", match.method, "NN|ENN|GMN|EGMNet-FC|EGMNet-DT");
    match_cmd->add_option("--gamma", match.gamma, "match confidence threshold");
    match_cmd->add_option("--change-threshold", match.change_threshold,
                          "squared-distance change threshold");
    match_cmd->add_option("--sigma", match.sigma, "fixed:<v> or adaptive");
    match_cmd->add_option("--topology", match.topology, "dt or fc");
    match_cmd->add_option("--model", match.model_path, "trained model file");
    match_cmd->add_option("--dump-scores", match.dump_scores, "write the score matrix as CSV");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "fit the edge-affinity parameter");
    train_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    train_cmd->add_option("--config", config_file, "flat key=value config file; flags override");
    train_cmd->add_option("--data", train.data_dir, "dataset directory with manifest.json")
        ->required();
    train_cmd->add_option("--out", train.out_path, "model output path");
    train_cmd->add_option("--loss-curve", train.loss_curve, "loss curve CSV path");
    train_cmd->add_option("--resume", train.resume, "continue from an existing model");
    train_cmd->add_option("--lr", train.lr, "learning rate");
    train_cmd->add_option("--epochs", train.epochs, "training epochs");
    train_cmd->add_option("--batch", train.batch, "mini-batch size (0 = full batch)");
    train_cmd->add_option("--seed", train.seed, "shuffle seed");
    train_cmd->add_option("--grad-mode", train.grad_mode, "unrolled or finite_diff");
    train_cmd->add_option("--unroll", train.unroll, "power-iteration steps during training");
    train_cmd->add_option("--momentum", train.momentum, "gradient momentum");
    train_cmd->add_option("--jobs", train.jobs, "gradient workers (0 = all cores)");
    train_cmd->add_option("--topology", train.topology, "dt or fc");
    train_cmd->add_option("--sigma", train.sigma, "fixed:<v> or adaptive");
    train_cmd->add_flag("--no-epipolar", train.no_epipolar, "ignore stored fundamental matrices");

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "run the viewpoint-robustness benchmark");
    bench_cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    bench_cmd->add_option("--config", config_file, "flat key=value config file; flags override");
    bench_cmd->add_option("--sets", bench.sets, "viewpoint sets (1..4)")->delimiter(',');
    bench_cmd->add_option("--pairs", bench.pairs, "pairs per set");
    bench_cmd->add_option("--seed", bench.seed, "master seed");
    bench_cmd->add_option("--methods", bench.methods, "methods to run")->delimiter(',');
    bench_cmd->add_option("--gamma", bench.gamma, "match threshold when calibration is off");
    bench_cmd->add_flag("--no-calibration", bench.no_calibration,
                        "use --gamma directly instead of per-method calibration");
    bench_cmd->add_option("--calibration-pairs", bench.calibration_pairs,
                          "validation pairs per set for threshold calibration");
    bench_cmd->add_option("--change-threshold", bench.change_threshold,
                          "squared-distance change threshold");
    bench_cmd->add_option("--sigma", bench.sigma, "fixed:<v> or adaptive");
    bench_cmd->add_option("--model", bench.model_path, "trained model file");
    bench_cmd->add_option("--out", bench.out_dir, "report directory");
    bench_cmd->add_option("--jobs", bench.jobs, "worker threads (0 = all cores)");
    bench_cmd->add_option("--timing", bench.timing,
                          "wall (measured) or none (zeroed, byte-stable reports)");
    bench_cmd->add_option("--accuracy-mode", bench.accuracy_mode, "per-node or per-entry");
    bench.scene.add_options(bench_cmd);

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expand_config(args);
        std::vector<const char*> raw;
        raw.push_back(argv[0]);
        for (const std::string& a : args)
            raw.push_back(a.c_str());
        app.parse(static_cast<int>(raw.size()), raw.data());
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*gen_cmd)
            return cmd_generate(gen);
        if (*match_cmd)
            return cmd_match(match);
        if (*train_cmd)
            return cmd_train(train);
        if (*bench_cmd)
            return cmd_bench(bench);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
