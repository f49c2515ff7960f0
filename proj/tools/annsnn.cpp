// annsnn: train clipped-ReLU networks, convert them to integrate-and-fire
// networks and sweep the initial membrane potential.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "annsnn/converter.hpp"
#include "annsnn/dataset_io.hpp"
#include "annsnn/errors.hpp"
#include "annsnn/experiment.hpp"
#include "annsnn/model_io.hpp"
#include "annsnn/snn.hpp"
#include "annsnn/theory.hpp"

namespace {

using namespace annsnn;

struct DataFlags
{
    std::string path;
    std::string labels;
    std::string format = "csv";

    DataSource source() const { return {path, labels, parse_data_format(format)}; }
    Dataset load() const
    {
        if (path.empty()) {
            throw ConfigError("no dataset given");
        }
        return ingest(path, parse_data_format(format), labels);
    }
};

struct TrainFlags
{
    double lr = 0.05;
    double momentum = 0.9;
    int epochs = 20;
    std::size_t batch = 32;
    double wd = 5e-4;
    double wd_theta = 5e-4;
    std::string schedule = "cosine";

    TrainConfig config(std::uint64_t seed) const
    {
        TrainConfig cfg;
        cfg.learning_rate = lr;
        cfg.momentum = momentum;
        cfg.epochs = epochs;
        cfg.batch_size = batch;
        cfg.weight_decay_w = wd;
        cfg.weight_decay_theta = wd_theta;
        if (schedule == "cosine") {
            cfg.lr_schedule = LrSchedule::cosine;
        } else if (schedule == "constant") {
            cfg.lr_schedule = LrSchedule::constant;
        } else {
            throw ConfigError("unknown schedule '" + schedule + "' (cosine|constant)");
        }
        cfg.seed = seed;
        return cfg;
    }
};

struct Options
{
    std::uint64_t seed = 1;
    unsigned threads = 0;
    std::string out;
    std::string model;
    std::string arch = "mlp";
    std::string threshold = "clip";
    std::vector<std::string> inits;
    std::vector<int> steps_list{1, 2, 4, 8, 16, 32, 64, 128, 256};
    int steps = 32;
    std::size_t limit = 0;

    DataFlags data;
    DataFlags test;
    DataFlags calib;
    TrainFlags train;

    // gen-data
    std::size_t train_samples = 5000;
    std::size_t test_samples = 1000;
    std::size_t side = 28;
    int classes = 10;
    double noise = 0.35;
    double distractor = 0.6;

    // sweeps
    std::size_t latency_samples = 100;
    int energy_steps = 32;
    std::vector<double> fractions;

    // verification
    double v_th = 1.0;
    std::size_t grid_points = 101;
    std::size_t mc_samples = 1000000;
    std::size_t tuples = 10000;

    std::string trace;
    std::string report;
};

void add_data(CLI::App* cmd, DataFlags& flags, const std::string& prefix, const std::string& what)
{
    cmd->add_option("--" + prefix, flags.path, what + " (IDX images or CSV)");
    cmd->add_option("--" + (prefix == "data" ? std::string("labels") : prefix + "-labels"), flags.labels,
                    "IDX label file for --" + prefix);
    if (prefix == "data") {
        cmd->add_option("--format", flags.format, "Dataset format")->check(CLI::IsMember({"idx", "csv"}));
    }
}

void add_train(CLI::App* cmd, TrainFlags& flags)
{
    cmd->add_option("--epochs", flags.epochs, "Training epochs");
    cmd->add_option("--lr", flags.lr, "Initial learning rate");
    cmd->add_option("--momentum", flags.momentum, "SGD momentum");
    cmd->add_option("--batch-size", flags.batch, "Minibatch size");
    cmd->add_option("--weight-decay", flags.wd, "Weight decay on W and b");
    cmd->add_option("--theta-decay", flags.wd_theta, "Weight decay on the clip bounds");
    cmd->add_option("--schedule", flags.schedule, "Learning-rate schedule")->check(CLI::IsMember({"cosine", "constant"}));
}

std::vector<InitStrategy> strategies_of(const Options& o, const std::vector<std::string>& fallback)
{
    std::vector<InitStrategy> out;
    for (const std::string& text : o.inits.empty() ? fallback : o.inits) {
        out.push_back(InitStrategy::parse(text, o.seed));
    }
    return out;
}

void check_steps(const std::vector<int>& steps)
{
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (steps[i] <= 0 || (i > 0 && steps[i] <= steps[i - 1])) {
            throw ConfigError("--T-list must be strictly increasing positive integers");
        }
    }
    if (steps.empty()) {
        throw ConfigError("--T-list is empty");
    }
}

ExperimentConfig experiment_of(const Options& o)
{
    ExperimentConfig cfg;
    cfg.train_data = o.data.source();
    cfg.test_data = {o.test.path, o.test.labels, parse_data_format(o.data.format)};
    cfg.model_path = o.model;
    cfg.arch = parse_architecture(o.arch);
    cfg.train = o.train.config(o.seed);
    cfg.threshold = ThresholdMode::parse(o.threshold);
    cfg.strategies = strategies_of(o, {"zero", "half", "uniform", "gauss"});
    check_steps(o.steps_list);
    cfg.steps = o.steps_list;
    cfg.out_dir = o.out.empty() ? "results" : o.out;
    cfg.seed = o.seed;
    cfg.test_limit = o.limit;
    cfg.latency_samples = o.latency_samples;
    cfg.energy_steps = o.energy_steps;
    cfg.threads = o.threads;
    return cfg;
}

Dataset fit(const Dataset& data, const Shape& input)
{
    if (data.sample_shape() == input) {
        return data;
    }
    return data.reshaped(input);
}

int run_gen_data(const Options& o)
{
    const std::string dir = o.out.empty() ? "data" : o.out;
    std::filesystem::create_directories(dir);
    BlobConfig cfg;
    cfg.side = o.side;
    cfg.num_classes = o.classes;
    cfg.noise = o.noise;
    cfg.distractor = o.distractor;
    cfg.seed = o.seed;
    cfg.samples = o.train_samples;
    write_csv_file(dir + "/train.csv", make_blobs(cfg, 0));
    cfg.samples = o.test_samples;
    write_csv_file(dir + "/test.csv", make_blobs(cfg, 1));
    std::cout << "wrote " << dir << "/train.csv (" << o.train_samples << ") and " << dir << "/test.csv ("
              << o.test_samples << ")\n";
    return 0;
}

int run_train(const Options& o)
{
    if (o.model.empty()) {
        throw ConfigError("--model names the output file");
    }
    const Architecture arch = parse_architecture(o.arch);
    const TrainConfig cfg = o.train.config(o.seed);
    const Dataset train_set = adapt_for(arch, o.data.load());
    const AnnNetwork net = train_architecture(arch, train_set, cfg, o.seed);
    save_ann_file(o.model, net);
    std::printf("train_accuracy %.6f\n", evaluate(net, train_set, o.threads));
    if (!o.test.path.empty()) {
        Dataset test = DataFlags{o.test.path, o.test.labels, o.data.format}.load();
        std::printf("test_accuracy %.6f\n", evaluate(net, fit(test, net.topology.input_shape), o.threads));
    }
    return 0;
}

int run_convert(const Options& o)
{
    if (o.model.empty() || o.out.empty()) {
        throw ConfigError("convert needs --model (ANN in) and --out (SNN out)");
    }
    const AnnNetwork ann = load_ann_file(o.model);
    const ThresholdMode mode = ThresholdMode::parse(o.threshold);
    const InitStrategy init = strategies_of(o, {"half"}).front();
    std::optional<Dataset> calib;
    if (mode.kind == ThresholdMode::Kind::data_percentile) {
        calib = fit(DataFlags{o.calib.path, o.calib.labels, o.data.format}.load(), ann.topology.input_shape);
    }
    const auto [snn, report] = convert(ann, mode, init, calib ? &*calib : nullptr);
    save_snn_file(o.out, snn);
    const std::string report_path = o.report.empty() ? o.out + ".report.csv" : o.report;
    std::ofstream out(report_path, std::ios::binary);
    if (!out) {
        throw FilesystemError("cannot write " + report_path);
    }
    report.write_csv(out);
    std::cout << "wrote " << o.out << " and " << report_path << "\n";
    return 0;
}

int run_simulate(const Options& o)
{
    if (o.model.empty()) {
        throw ConfigError("--model names a converted network");
    }
    const SnnNetwork snn = load_snn_file(o.model);
    Dataset data = fit(o.data.load(), snn.topology.input_shape);
    if (o.limit > 0) {
        data = data.head(o.limit);
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        correct += classify(snn, data.sample(i), o.steps).predicted_class == data.labels[i];
    }
    if (!o.trace.empty()) {
        std::ofstream out(o.trace, std::ios::binary);
        if (!out) {
            throw FilesystemError("cannot write " + o.trace);
        }
        write_trace_csv(out, snn, data.sample(0), o.steps);
    }
    std::printf("T %d samples %zu accuracy %.6f\n", o.steps, data.size(),
                static_cast<double>(correct) / static_cast<double>(data.size()));
    return 0;
}

int run_sweep_cmd(const Options& o)
{
    const ExperimentConfig cfg = experiment_of(o);
    const SweepResult result = run_sweep(cfg);
    report(result, cfg.out_dir);
    std::printf("ann_accuracy %.6f\n", result.ann_accuracy);
    for (const SweepRow& row : result.rows) {
        std::printf("%-16s T=%-5d %.6f\n", row.strategy.c_str(), row.steps, row.accuracy());
    }
    return 0;
}

int run_constant_sweep_cmd(const Options& o)
{
    const ExperimentConfig cfg = experiment_of(o);
    const ConstantSweepResult result = run_constant_sweep(cfg, o.fractions.empty() ? default_fraction_grid() : o.fractions);
    report(result, cfg.out_dir);
    std::printf("ann_accuracy %.6f\n", result.sweep.ann_accuracy);
    for (const auto& [t, c] : result.best_fraction) {
        std::printf("T=%-5d best c=%.4f\n", t, c);
    }
    return 0;
}

int run_verify_theorem(const Options& o)
{
    check_steps(o.steps_list);
    const std::vector<int>& steps = o.steps_list;
    const std::vector<double> grid = uniform_grid(o.v_th, o.grid_points);
    bool ok = true;
    if (!o.out.empty()) {
        std::filesystem::create_directories(o.out);
    }
    Rng rng(o.seed);
    for (int t : steps) {
        const Theorem1Sweep sweep = theorem1_sweep(o.v_th, t, {}, grid);
        const double half_signed = expected_signed_error(ErrorModel::uniform(o.v_th, t, 0.5 * o.v_th));
        const bool argmin_ok = sweep.argmin_v0 == 0.5 * o.v_th;
        const bool signed_ok = std::abs(half_signed) <= 1e-12;
        std::printf("T=%-4d argmin_v0=%.6g signed_at_half=%.3g %s\n", t, sweep.argmin_v0, half_signed,
                    argmin_ok && signed_ok ? "ok" : "FAIL");
        ok = ok && argmin_ok && signed_ok;
        if (!o.out.empty()) {
            std::ofstream out(o.out + "/theorem_T" + std::to_string(t) + ".csv", std::ios::binary);
            sweep.write_csv(out);
        }
        if (o.mc_samples > 0) {
            for (double frac : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                const FloorActivationParams params{o.v_th, t, frac * o.v_th};
                const ErrorModel model = ErrorModel::uniform(o.v_th, t, params.v0);
                const MonteCarloResult mc = monte_carlo_error(params, ZSampler::uniform(0.0, o.v_th), o.mc_samples, rng);
                const double dsq = std::abs(mc.mean_squared - expected_squared_error(model));
                const double dsg = std::abs(mc.mean_signed - expected_signed_error(model));
                const bool mc_ok = dsq <= 4.0 * mc.stderr_squared() && dsg <= 4.0 * mc.stderr_signed();
                std::printf("  v0=%.3g monte carlo |d squared|=%.3g (%.2f se) |d signed|=%.3g (%.2f se) %s\n",
                            params.v0, dsq, mc.stderr_squared() > 0 ? dsq / mc.stderr_squared() : 0.0, dsg,
                            mc.stderr_signed() > 0 ? dsg / mc.stderr_signed() : 0.0, mc_ok ? "ok" : "FAIL");
                ok = ok && mc_ok;
            }
        }
    }
    return ok ? 0 : 2;
}

int run_verify_oracle(const Options& o)
{
    Rng rng(o.seed);
    const OracleReport report = verify_floor_oracle(o.tuples, rng);
    std::printf("tuples %zu mismatches %zu\n", report.tuples, report.mismatches);
    if (report.mismatches > 0) {
        std::printf("first mismatch: %s\n", report.first_mismatch.c_str());
        return 2;
    }
    return 0;
}

int run_energy(const Options& o)
{
    if (o.model.empty()) {
        throw ConfigError("--model names a trained ANN");
    }
    const AnnNetwork ann = load_ann_file(o.model);
    const ThresholdMode mode = ThresholdMode::parse(o.threshold);
    if (mode.kind == ThresholdMode::Kind::data_percentile) {
        throw ConfigError("energy uses the trained clip thresholds");
    }
    const SnnNetwork snn = convert(ann, mode, strategies_of(o, {"half"}).front()).first;
    Dataset data = fit(o.data.load(), ann.topology.input_shape);
    data = data.head(o.limit > 0 ? o.limit : std::min<std::size_t>(100, data.size()));
    double sops = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        sops += count_sops(ann.topology, simulate(snn, data.sample(i), o.steps).spike_count);
    }
    OpCountReport energy;
    energy.ann_flops = count_ann_flops(ann.topology);
    energy.snn_sops = sops / static_cast<double>(data.size());
    energy.steps = o.steps;
    finalize_energy(energy);
    if (o.out.empty()) {
        energy.write_csv(std::cout);
    } else {
        std::ofstream out(o.out, std::ios::binary);
        if (!out) {
            throw FilesystemError("cannot write " + o.out);
        }
        energy.write_csv(out);
        std::printf("wrote %s (ratio %.2f)\n", o.out.c_str(), energy.ratio);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"ANN-to-SNN conversion with tunable initial membrane potentials"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI/TOML file of option values; command-line flags take precedence");

    Options o;
    auto common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", o.seed, "Global seed")->capture_default_str();
        cmd->add_option("--threads", o.threads, "Worker threads (0 = hardware concurrency)");
    };

    auto* gen = app.add_subcommand("gen-data", "Write a synthetic 10-class Gaussian-blob train/test CSV pair");
    common(gen);
    gen->add_option("--out", o.out, "Output directory")->capture_default_str();
    gen->add_option("--train-samples", o.train_samples, "Training samples")->capture_default_str();
    gen->add_option("--test-samples", o.test_samples, "Test samples")->capture_default_str();
    gen->add_option("--side", o.side, "Image side length")->capture_default_str();
    gen->add_option("--classes", o.classes, "Number of classes")->capture_default_str();
    gen->add_option("--noise", o.noise, "Pixel noise level")->capture_default_str();
    gen->add_option("--distractor", o.distractor, "Distractor prototype weight")->capture_default_str();

    auto* train_cmd = app.add_subcommand("train", "Train a clipped-ReLU network");
    common(train_cmd);
    add_data(train_cmd, o.data, "data", "Training set");
    add_data(train_cmd, o.test, "test-data", "Optional test set");
    train_cmd->add_option("--arch", o.arch, "Network")->check(CLI::IsMember({"mlp", "cnn"}));
    train_cmd->add_option("--model", o.model, "Output model file");
    add_train(train_cmd, o.train);

    auto* conv = app.add_subcommand("convert", "Convert a trained ANN to an IF network");
    common(conv);
    conv->add_option("--model", o.model, "Trained ANN model file");
    conv->add_option("--out", o.out, "Converted SNN model file");
    conv->add_option("--threshold", o.threshold, "clip | percentile[:<p>]");
    conv->add_option("--init", o.inits, "zero | half | const:<c> | uniform | gauss[:<mu>,<sigma>]");
    conv->add_option("--report", o.report, "Conversion report CSV (default <out>.report.csv)");
    conv->add_option("--format", o.data.format, "Calibration data format")->check(CLI::IsMember({"idx", "csv"}));
    add_data(conv, o.calib, "calib-data", "Calibration set for percentile thresholds");

    auto* sim = app.add_subcommand("simulate", "Classify a dataset with a converted network");
    common(sim);
    sim->add_option("--model", o.model, "Converted SNN model file");
    add_data(sim, o.data, "data", "Evaluation set");
    sim->add_option("--T", o.steps, "Time steps")->capture_default_str();
    sim->add_option("--limit", o.limit, "Use only the first N samples");
    sim->add_option("--trace", o.trace, "Write the first sample's spike trace here");

    auto sweep_flags = [&](CLI::App* cmd) {
        common(cmd);
        add_data(cmd, o.data, "data", "Training set (also percentile calibration)");
        add_data(cmd, o.test, "test-data", "Test set");
        cmd->add_option("--model", o.model, "ANN model file: loaded if present, else written after training");
        cmd->add_option("--arch", o.arch, "Network")->check(CLI::IsMember({"mlp", "cnn"}));
        cmd->add_option("--T-list", o.steps_list, "Comma-separated time steps to score")
            ->delimiter(',')
            ->capture_default_str();
        cmd->add_option("--threshold", o.threshold, "clip | percentile[:<p>]");
        cmd->add_option("--out", o.out, "Report directory (default results)");
        cmd->add_option("--limit", o.limit, "Use only the first N test samples");
        cmd->add_option("--latency-samples", o.latency_samples, "Samples for latency and energy")->capture_default_str();
        cmd->add_option("--energy-T", o.energy_steps, "Horizon of the energy report")->capture_default_str();
        add_train(cmd, o.train);
    };
    auto* sweep = app.add_subcommand("sweep", "Accuracy against T for several init strategies");
    sweep_flags(sweep);
    sweep->add_option("--init", o.inits, "Strategy to sweep; repeat for several (default zero, half, uniform, gauss)");

    auto* csweep = app.add_subcommand("constant-sweep", "Accuracy over constant init fractions and T");
    sweep_flags(csweep);
    csweep->add_option("--fractions", o.fractions, "Comma-separated fractions of V_th (default 0,0.1,...,1)")
        ->delimiter(',');

    auto* theorem = app.add_subcommand("verify-theorem", "Closed-form and Monte Carlo conversion-error checks");
    common(theorem);
    theorem->add_option("--T-list", o.steps_list, "Comma-separated time steps")->delimiter(',')->default_str("4,8,16");
    theorem->add_option("--vth", o.v_th, "Threshold")->capture_default_str();
    theorem->add_option("--grid-points", o.grid_points, "v0 grid size")->capture_default_str();
    theorem->add_option("--samples", o.mc_samples, "Monte Carlo samples (0 skips)")->capture_default_str();
    theorem->add_option("--out", o.out, "Directory for per-T CSV tables");

    auto* oracle = app.add_subcommand("verify-oracle", "Single-neuron simulation against the floor form");
    common(oracle);
    oracle->add_option("--tuples", o.tuples, "Random (z, v0, T, V_th) tuples")->capture_default_str();

    auto* energy = app.add_subcommand("energy", "FLOP/SOP energy estimate of a trained network");
    common(energy);
    energy->add_option("--model", o.model, "Trained ANN model file");
    add_data(energy, o.data, "data", "Input samples");
    energy->add_option("--T", o.steps, "Time steps")->capture_default_str();
    energy->add_option("--init", o.inits, "Init strategy (default half)");
    energy->add_option("--threshold", o.threshold, "clip");
    energy->add_option("--limit", o.limit, "Samples to average over (default 100)");
    energy->add_option("--out", o.out, "CSV output (default stdout)");

    // --config belongs to the top-level app; accept it after the subcommand too.
    std::vector<std::string> args(argv + 1, argv + argc);
    for (std::size_t i = 0; i < args.size(); ++i) {
        const bool joined = args[i].rfind("--config=", 0) == 0;
        if (args[i] == "--config" && i + 1 < args.size()) {
            const std::vector<std::string> moved{args[i], args[i + 1]};
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            args.insert(args.begin(), moved.begin(), moved.end());
            break;
        }
        if (joined) {
            const std::string moved = args[i];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            args.insert(args.begin(), moved);
            break;
        }
    }
    std::reverse(args.begin(), args.end());

    try {
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*gen) return run_gen_data(o);
        if (*train_cmd) return run_train(o);
        if (*conv) return run_convert(o);
        if (*sim) return run_simulate(o);
        if (*sweep) return run_sweep_cmd(o);
        if (*csweep) return run_constant_sweep_cmd(o);
        if (*theorem) {
            if (theorem->count("--T-list") == 0) {
                o.steps_list = {4, 8, 16};
            }
            return run_verify_theorem(o);
        }
        if (*oracle) return run_verify_oracle(o);
        if (*energy) return run_energy(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
