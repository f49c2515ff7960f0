#include "annsnn/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "annsnn/errors.hpp"
#include "annsnn/model_io.hpp"
#include "annsnn/parallel.hpp"

namespace annsnn {

Architecture parse_architecture(const std::string& text)
{
    if (text == "mlp") {
        return Architecture::mlp;
    }
    if (text == "cnn") {
        return Architecture::cnn;
    }
    throw ConfigError("unknown architecture '" + text + "' (mlp|cnn)");
}

std::string to_string(Architecture arch)
{
    return arch == Architecture::mlp ? "mlp" : "cnn";
}

Dataset adapt_for(Architecture arch, const Dataset& data)
{
    if (arch != Architecture::cnn || data.sample_shape().size() != 1) {
        return data;
    }
    const std::size_t n = data.sample_shape()[0];
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    if (side * side != n) {
        throw ConfigError("the CNN needs square images; " + std::to_string(n) + " features are not a square");
    }
    return data.reshaped({1, side, side});
}

Topology build_topology(Architecture arch, const Dataset& data)
{
    const auto classes = static_cast<std::size_t>(data.num_classes);
    return arch == Architecture::mlp ? desk_mlp(data.sample_shape(), classes) : desk_cnn(data.sample_shape(), classes);
}

std::vector<int> parse_steps_list(const std::string& text)
{
    std::vector<int> steps;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = std::min(text.find(',', start), text.size());
        const std::string item = text.substr(start, comma - start);
        int v = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc() || ptr != item.data() + item.size() || v <= 0) {
            throw ConfigError("T list entry '" + item + "' is not a positive integer");
        }
        if (!steps.empty() && v <= steps.back()) {
            throw ConfigError("T list must be strictly increasing");
        }
        steps.push_back(v);
        start = comma + 1;
    }
    return steps;
}

namespace {

void validate_steps(const std::vector<int>& steps)
{
    if (steps.empty()) {
        throw ConfigError("T list is empty");
    }
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (steps[i] <= 0 || (i > 0 && steps[i] <= steps[i - 1])) {
            throw ConfigError("T values must be strictly increasing positive integers");
        }
    }
}

}  // namespace

void ExperimentConfig::validate() const
{
    validate_steps(steps);
    if (strategies.empty()) {
        throw ConfigError("no init strategies given");
    }
    if (test_data.path.empty()) {
        throw ConfigError("a test dataset is required");
    }
    if (energy_steps <= 0) {
        throw ConfigError("energy horizon must be positive");
    }
    for (const InitStrategy& s : strategies) {
        s.validate();
    }
}

double SweepResult::accuracy(const std::string& strategy, int t) const
{
    for (const SweepRow& row : rows) {
        if (row.strategy == strategy && row.steps == t) {
            return row.accuracy();
        }
    }
    throw ConfigError("no sweep row for " + strategy + " at T=" + std::to_string(t));
}

double SweepResult::mean_first_spike(const std::string& strategy, std::size_t layer) const
{
    for (const LatencyRow& row : latency) {
        if (row.strategy == strategy && row.layer == layer) {
            return row.mean_first_spike_step;
        }
    }
    throw ConfigError("no latency row for " + strategy + " at layer " + std::to_string(layer));
}

SweepResult sweep_network(const AnnNetwork& ann, const Dataset& test, const ThresholdMode& threshold,
                          const std::vector<InitStrategy>& strategies, const std::vector<int>& steps,
                          const SweepOptions& options, const Dataset* calib)
{
    validate_steps(steps);
    if (strategies.empty()) {
        throw ConfigError("no init strategies given");
    }
    if (test.size() == 0) {
        throw ConfigError("empty test set");
    }
    const unsigned threads = resolve_threads(options.threads);
    const int t_max = steps.back();
    const std::size_t n = test.size();
    const std::size_t k = steps.size();
    const std::size_t n_lat = std::min(options.latency_samples, n);

    std::vector<std::size_t> spiking;
    for (std::size_t l = 0; l < ann.topology.layers.size(); ++l) {
        if (ann.topology.is_clipped(l)) {
            spiking.push_back(l);
        }
    }

    SweepResult result;
    result.steps = steps;
    result.ann_accuracy = evaluate(ann, test, threads);

    for (const InitStrategy& strategy : strategies) {
        const std::string label = strategy.label();
        result.strategies.push_back(label);
        const SnnNetwork snn = convert(ann, threshold, strategy, calib).first;

        std::vector<unsigned char> hits(n * k, 0);
        std::vector<double> latency(n_lat * spiking.size(), 0.0);
        parallel_shards(n, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const SimTrace trace = simulate(snn, test.sample(i), t_max);
                for (std::size_t j = 0; j < k; ++j) {
                    hits[i * k + j] =
                        trace.running_prediction[static_cast<std::size_t>(steps[j] - 1)] == test.labels[i] ? 1 : 0;
                }
                if (i < n_lat) {
                    for (std::size_t s = 0; s < spiking.size(); ++s) {
                        const Tensor& first = trace.first_spike[spiking[s]];
                        double sum = 0.0;
                        for (double f : first.values()) {
                            sum += f == 0.0 ? t_max + 1.0 : f;
                        }
                        latency[i * spiking.size() + s] = sum / static_cast<double>(first.size());
                    }
                }
            }
        });

        for (std::size_t j = 0; j < k; ++j) {
            SweepRow row{label, steps[j], 0, n};
            for (std::size_t i = 0; i < n; ++i) {
                row.correct += hits[i * k + j];
            }
            result.rows.push_back(row);
        }
        for (std::size_t s = 0; s < spiking.size(); ++s) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n_lat; ++i) {
                sum += latency[i * spiking.size() + s];
            }
            result.latency.push_back({spiking[s], label, n_lat ? sum / static_cast<double>(n_lat) : 0.0});
        }
    }

    if (n_lat > 0 && options.energy_steps > 0) {
        std::size_t pick = 0;
        for (std::size_t s = 0; s < strategies.size(); ++s) {
            if (strategies[s].kind == InitStrategy::Kind::optimal_half) {
                pick = s;
                break;
            }
        }
        const SnnNetwork snn = convert(ann, threshold, strategies[pick], calib).first;
        std::vector<double> sops(n_lat, 0.0);
        parallel_shards(n_lat, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const SimTrace trace = simulate(snn, test.sample(i), options.energy_steps);
                sops[i] = count_sops(ann.topology, trace.spike_count);
            }
        });
        OpCountReport energy;
        energy.ann_flops = count_ann_flops(ann.topology);
        double total = 0.0;
        for (double s : sops) {
            total += s;
        }
        energy.snn_sops = total / static_cast<double>(n_lat);
        energy.steps = options.energy_steps;
        finalize_energy(energy);
        result.energy = energy;
        result.energy_strategy = strategies[pick].label();
    }
    return result;
}

AnnNetwork train_architecture(Architecture arch, const Dataset& train_set, const TrainConfig& cfg, std::uint64_t seed)
{
    const Dataset data = adapt_for(arch, train_set);
    AnnNetwork net = AnnNetwork::initialize(build_topology(arch, data), seed);
    return train(net, data, cfg);
}

namespace {

Dataset load(const DataSource& src)
{
    return ingest(src.path, src.format, src.labels_path);
}

// Gives data the model's input shape when only the layout differs.
Dataset fit_to(const AnnNetwork& ann, const Dataset& data)
{
    if (data.sample_shape() == ann.topology.input_shape) {
        return data;
    }
    if (shape_size(data.sample_shape()) != shape_size(ann.topology.input_shape)) {
        throw DimensionError("data samples " + shape_to_string(data.sample_shape()) + " do not fit model input " +
                             shape_to_string(ann.topology.input_shape));
    }
    return data.reshaped(ann.topology.input_shape);
}

struct Prepared
{
    AnnNetwork ann;
    Dataset test;
    std::optional<Dataset> calib;
};

Prepared prepare(const ExperimentConfig& cfg)
{
    Prepared p;
    std::optional<Dataset> train_set;
    const bool have_model = !cfg.model_path.empty() && std::filesystem::exists(cfg.model_path);
    const bool need_train_data = !have_model || cfg.threshold.kind == ThresholdMode::Kind::data_percentile;
    if (need_train_data) {
        if (cfg.train_data.path.empty()) {
            throw ConfigError(have_model ? "percentile thresholds need training data for calibration"
                                         : "no saved model; training data is required");
        }
        train_set = load(cfg.train_data);
    }
    if (have_model) {
        p.ann = load_ann_file(cfg.model_path);
    } else {
        p.ann = train_architecture(cfg.arch, *train_set, cfg.train, cfg.seed);
        if (!cfg.model_path.empty()) {
            save_ann_file(cfg.model_path, p.ann);
        }
    }
    Dataset test = load(cfg.test_data);
    if (cfg.test_limit > 0) {
        test = test.head(cfg.test_limit);
    }
    p.test = fit_to(p.ann, test);
    if (cfg.threshold.kind == ThresholdMode::Kind::data_percentile) {
        p.calib = fit_to(p.ann, train_set->head(1000));
    }
    return p;
}

SweepOptions options_of(const ExperimentConfig& cfg)
{
    return SweepOptions{cfg.latency_samples, cfg.energy_steps, cfg.threads};
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg)
{
    cfg.validate();
    const Prepared p = prepare(cfg);
    return sweep_network(p.ann, p.test, cfg.threshold, cfg.strategies, cfg.steps, options_of(cfg),
                         p.calib ? &*p.calib : nullptr);
}

std::vector<double> default_fraction_grid()
{
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) {
        grid.push_back(i / 10.0);
    }
    return grid;
}

ConstantSweepResult constant_sweep_network(const AnnNetwork& ann, const Dataset& test, const ThresholdMode& threshold,
                                           const std::vector<double>& fractions, const std::vector<int>& steps,
                                           const SweepOptions& options, const Dataset* calib)
{
    if (fractions.empty()) {
        throw ConfigError("constant sweep needs at least one fraction");
    }
    std::vector<InitStrategy> strategies;
    for (double c : fractions) {
        if (!(c >= 0.0 && c <= 1.0)) {
            throw ConfigError("constant fractions must lie in [0,1]");
        }
        strategies.push_back(InitStrategy::constant(c));
    }
    ConstantSweepResult out;
    out.fractions = fractions;
    out.sweep = sweep_network(ann, test, threshold, strategies, steps, options, calib);
    for (int t : steps) {
        std::size_t best = 0;
        std::vector<double> tied;
        for (std::size_t f = 0; f < fractions.size(); ++f) {
            const std::size_t correct = out.sweep.rows[f * steps.size() + static_cast<std::size_t>(
                                                             std::find(steps.begin(), steps.end(), t) - steps.begin())]
                                            .correct;
            if (tied.empty() || correct > best) {
                best = correct;
                tied.assign(1, fractions[f]);
            } else if (correct == best) {
                tied.push_back(fractions[f]);
            }
        }
        std::sort(tied.begin(), tied.end());
        out.best_fraction.emplace_back(t, tied[(tied.size() - 1) / 2]);
    }
    return out;
}

ConstantSweepResult run_constant_sweep(const ExperimentConfig& cfg, const std::vector<double>& fractions)
{
    ExperimentConfig local = cfg;
    if (local.strategies.empty()) {
        local.strategies.push_back(InitStrategy::optimal_half());
    }
    local.validate();
    const Prepared p = prepare(local);
    return constant_sweep_network(p.ann, p.test, cfg.threshold, fractions, cfg.steps, options_of(cfg),
                                  p.calib ? &*p.calib : nullptr);
}

namespace {

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string quoted = "\"";
    for (char c : s) {
        quoted += c;
        if (c == '"') {
            quoted += '"';
        }
    }
    return quoted + '"';
}

std::string fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::ofstream open_report(const std::string& dir, const std::string& name)
{
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    if (!out) {
        throw FilesystemError("cannot write " + (std::filesystem::path(dir) / name).string());
    }
    return out;
}

void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw FilesystemError("cannot create output directory " + dir);
    }
}

}  // namespace

void report(const SweepResult& result, const std::string& out_dir)
{
    if (result.rows.empty()) {
        throw ConfigError("nothing to report: the sweep is empty");
    }
    ensure_dir(out_dir);
    {
        auto out = open_report(out_dir, "sweep.csv");
        out << "strategy,T,accuracy\n";
        for (const SweepRow& row : result.rows) {
            out << csv_field(row.strategy) << ',' << row.steps << ',' << fixed(row.accuracy(), 6) << '\n';
        }
    }
    {
        auto out = open_report(out_dir, "latency.csv");
        out << "layer,strategy,mean_first_spike_step\n";
        for (const LatencyRow& row : result.latency) {
            out << row.layer << ',' << csv_field(row.strategy) << ',' << fixed(row.mean_first_spike_step, 6) << '\n';
        }
    }
    {
        auto out = open_report(out_dir, "summary.csv");
        out << "metric,value\n";
        out << "ann_accuracy," << fixed(result.ann_accuracy, 6) << '\n';
        out << "test_samples," << result.rows.front().total << '\n';
    }
    if (result.energy) {
        auto out = open_report(out_dir, "energy.csv");
        result.energy->write_csv(out);
        out << "energy_strategy," << csv_field(result.energy_strategy) << '\n';
    }
    {
        auto out = open_report(out_dir, "accuracy.svg");
        out << render_accuracy_chart(result);
    }
}

void report(const ConstantSweepResult& result, const std::string& out_dir)
{
    report(result.sweep, out_dir);
    {
        auto out = open_report(out_dir, "constant_heat.csv");
        out << "fraction,T,accuracy\n";
        const std::size_t k = result.sweep.steps.size();
        for (std::size_t f = 0; f < result.fractions.size(); ++f) {
            for (std::size_t j = 0; j < k; ++j) {
                const SweepRow& row = result.sweep.rows[f * k + j];
                out << fixed(result.fractions[f], 4) << ',' << row.steps << ',' << fixed(row.accuracy(), 6) << '\n';
            }
        }
    }
    {
        auto out = open_report(out_dir, "best_fraction.csv");
        out << "T,best_fraction\n";
        for (const auto& [t, c] : result.best_fraction) {
            out << t << ',' << fixed(c, 4) << '\n';
        }
    }
}

std::string render_accuracy_chart(const SweepResult& result)
{
    constexpr double width = 720, height = 440;
    constexpr double left = 70, right = 180, top = 30, bottom = 60;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    const int t_min = result.steps.front();
    const int t_max = result.steps.back();
    const double lx_min = std::log2(static_cast<double>(t_min));
    const double lx_max = std::log2(static_cast<double>(t_max));

    auto x_of = [&](int t) {
        if (t_max == t_min) {
            return left + plot_w / 2.0;
        }
        return left + (std::log2(static_cast<double>(t)) - lx_min) / (lx_max - lx_min) * plot_w;
    };
    auto y_of = [&](double acc) { return top + (1.0 - acc) * plot_h; };
    auto num = [](double v) { return fixed(v, 2); };

    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79"};
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
        << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\" data-t-min=\"" << t_min << "\" data-t-max=\""
        << t_max << "\" data-accuracy-min=\"0\" data-accuracy-max=\"1\" data-x-scale=\"log2\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height) << "\" fill=\"white\"/>\n";
    svg << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    // Axes.
    svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + plot_h) << "\" x2=\"" << num(left + plot_w)
        << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left) << "\" y2=\""
        << num(top + plot_h) << "\" stroke=\"black\"/>\n";
    for (int t : result.steps) {
        svg << "<line x1=\"" << num(x_of(t)) << "\" y1=\"" << num(top + plot_h) << "\" x2=\"" << num(x_of(t))
            << "\" y2=\"" << num(top + plot_h + 5) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << num(x_of(t)) << "\" y=\"" << num(top + plot_h + 18) << "\" text-anchor=\"middle\">" << t
            << "</text>\n";
    }
    for (int i = 0; i <= 4; ++i) {
        const double acc = i / 4.0;
        svg << "<line x1=\"" << num(left - 5) << "\" y1=\"" << num(y_of(acc)) << "\" x2=\"" << num(left) << "\" y2=\""
            << num(y_of(acc)) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << num(left - 8) << "\" y=\"" << num(y_of(acc) + 4) << "\" text-anchor=\"end\">"
            << fixed(acc, 2) << "</text>\n";
    }
    svg << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(height - 15)
        << "\" text-anchor=\"middle\">time-steps T</text>\n";
    svg << "<text x=\"18\" y=\"" << num(top + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << num(top + plot_h / 2) << ")\">accuracy</text>\n";
    // ANN reference.
    svg << "<line class=\"ann\" x1=\"" << num(left) << "\" y1=\"" << num(y_of(result.ann_accuracy)) << "\" x2=\""
        << num(left + plot_w) << "\" y2=\"" << num(y_of(result.ann_accuracy))
        << "\" stroke=\"black\" stroke-dasharray=\"4 4\"/>\n";

    const std::size_t k = result.steps.size();
    for (std::size_t s = 0; s < result.strategies.size(); ++s) {
        const char* colour = palette[s % (sizeof palette / sizeof palette[0])];
        svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
        for (std::size_t j = 0; j < k; ++j) {
            const SweepRow& row = result.rows[s * k + j];
            svg << (j ? " " : "") << num(x_of(row.steps)) << ',' << num(y_of(row.accuracy()));
        }
        svg << "\"/>\n";
        const double ly = top + 10 + 18.0 * static_cast<double>(s);
        svg << "<line x1=\"" << num(left + plot_w + 15) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(left + plot_w + 35)
            << "\" y2=\"" << num(ly) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << num(left + plot_w + 40) << "\" y=\"" << num(ly + 4) << "\">" << result.strategies[s]
            << "</text>\n";
    }
    const double ly = top + 10 + 18.0 * static_cast<double>(result.strategies.size());
    svg << "<line x1=\"" << num(left + plot_w + 15) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(left + plot_w + 35)
        << "\" y2=\"" << num(ly) << "\" stroke=\"black\" stroke-dasharray=\"4 4\"/>\n";
    svg << "<text x=\"" << num(left + plot_w + 40) << "\" y=\"" << num(ly + 4) << "\">ANN</text>\n";
    svg << "</g>\n</svg>\n";
    return svg.str();
}

}  // namespace annsnn
