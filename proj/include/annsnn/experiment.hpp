#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "annsnn/ann.hpp"
#include "annsnn/converter.hpp"
#include "annsnn/dataset.hpp"
#include "annsnn/dataset_io.hpp"
#include "annsnn/theory.hpp"

namespace annsnn {

struct DataSource
{
    std::string path;
    /// IDX label file; unused for CSV.
    std::string labels_path;
    DataFormat format = DataFormat::csv;
};

enum class Architecture { mlp, cnn };

Architecture parse_architecture(const std::string& text);
std::string to_string(Architecture arch);

/// Reshapes flat square-image samples to [1,s,s] for the CNN; passes other data through.
Dataset adapt_for(Architecture arch, const Dataset& data);
Topology build_topology(Architecture arch, const Dataset& data);

/// "1,2,4,8" -> {1,2,4,8}; must be strictly increasing positive integers.
std::vector<int> parse_steps_list(const std::string& text);

struct ExperimentConfig
{
    DataSource train_data;
    DataSource test_data;
    /// Loaded when the file exists; otherwise the trained network is saved there
    /// (unless empty).
    std::string model_path;
    Architecture arch = Architecture::mlp;
    TrainConfig train;
    ThresholdMode threshold;
    std::vector<InitStrategy> strategies;
    std::vector<int> steps;
    std::string out_dir;
    std::uint64_t seed = 1;
    /// Evaluate on at most this many test samples (0 = all).
    std::size_t test_limit = 0;
    /// Samples used for first-spike latency and energy statistics.
    std::size_t latency_samples = 100;
    /// Horizon for the energy report.
    int energy_steps = 32;
    unsigned threads = 0;

    void validate() const;
};

struct SweepRow
{
    std::string strategy;
    int steps = 0;
    std::size_t correct = 0;
    std::size_t total = 0;

    double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

struct LatencyRow
{
    std::size_t layer = 0;
    std::string strategy;
    /// Mean over samples and neurons of the 1-based first-spike step; neurons
    /// that stay silent count as T_max + 1.
    double mean_first_spike_step = 0.0;
};

struct SweepResult
{
    std::vector<int> steps;
    std::vector<std::string> strategies;
    /// One row per (strategy, T), strategies in input order.
    std::vector<SweepRow> rows;
    double ann_accuracy = 0.0;
    std::vector<LatencyRow> latency;
    std::optional<OpCountReport> energy;
    std::string energy_strategy;

    double accuracy(const std::string& strategy, int steps) const;
    double mean_first_spike(const std::string& strategy, std::size_t layer) const;
};

struct SweepOptions
{
    std::size_t latency_samples = 100;
    int energy_steps = 32;
    unsigned threads = 0;
};

/// Converts `ann` once per strategy and scores every T from a single simulation
/// per test sample. `calib` is required for percentile thresholds.
SweepResult sweep_network(const AnnNetwork& ann, const Dataset& test, const ThresholdMode& threshold,
                          const std::vector<InitStrategy>& strategies, const std::vector<int>& steps,
                          const SweepOptions& options, const Dataset* calib = nullptr);

/// Loads the data, trains or loads the ANN, then runs sweep_network.
SweepResult run_sweep(const ExperimentConfig& cfg);

struct ConstantSweepResult
{
    SweepResult sweep;
    std::vector<double> fractions;
    /// Per T, the fraction with the highest accuracy. Tied maxima resolve to the
    /// lower median of the tied fractions.
    std::vector<std::pair<int, double>> best_fraction;
};

/// {0.0, 0.1, ..., 1.0}.
std::vector<double> default_fraction_grid();

ConstantSweepResult constant_sweep_network(const AnnNetwork& ann, const Dataset& test, const ThresholdMode& threshold,
                                           const std::vector<double>& fractions, const std::vector<int>& steps,
                                           const SweepOptions& options, const Dataset* calib = nullptr);

/// cfg.strategies is ignored; one constant_fraction strategy per grid value.
ConstantSweepResult run_constant_sweep(const ExperimentConfig& cfg, const std::vector<double>& fractions);

/// Writes sweep.csv, latency.csv, energy.csv (when available) and accuracy.svg.
void report(const SweepResult& result, const std::string& out_dir);
/// report() plus constant_heat.csv (fraction,T,accuracy) and best_fraction.csv.
void report(const ConstantSweepResult& result, const std::string& out_dir);

/// Self-contained SVG line chart of accuracy against T, one line per strategy
/// and a dotted ANN reference. The x axis spans exactly [T_min, T_max] on a
/// log2 scale, the y axis [0,1].
std::string render_accuracy_chart(const SweepResult& result);

/// Trains `arch` on `train` from cfg.seed-initialized weights.
AnnNetwork train_architecture(Architecture arch, const Dataset& train, const TrainConfig& cfg, std::uint64_t seed);

}  // namespace annsnn
