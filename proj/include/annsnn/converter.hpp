#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "annsnn/ann.hpp"
#include "annsnn/dataset.hpp"
#include "annsnn/snn.hpp"

namespace annsnn {

/// How initial membrane potentials are chosen, relative to each layer's threshold.
struct InitStrategy
{
    enum class Kind { zero, optimal_half, constant_fraction, uniform_random, gaussian_random };

    Kind kind = Kind::optimal_half;
    /// Fraction of V_th for constant_fraction.
    double fraction = 0.5;
    /// Mean and standard deviation, in units of V_th, for gaussian_random.
    double mu = 0.5;
    double sigma = 0.2;
    std::uint64_t seed = 0;

    static InitStrategy zero() { return {Kind::zero}; }
    static InitStrategy optimal_half() { return {Kind::optimal_half}; }
    static InitStrategy constant(double c);
    static InitStrategy uniform(std::uint64_t seed);
    static InitStrategy gaussian(double mu, double sigma, std::uint64_t seed);

    /// Parses `zero`, `half`, `const:<c>`, `uniform`, `gauss` or `gauss:<mu>,<sigma>`.
    static InitStrategy parse(const std::string& text, std::uint64_t seed = 0);
    /// Inverse of parse (without the seed).
    std::string label() const;

    void validate() const;
};

struct ThresholdMode
{
    enum class Kind { trained_clip, data_percentile };

    Kind kind = Kind::trained_clip;
    double percentile = 99.9;

    static ThresholdMode trained_clip() { return {Kind::trained_clip}; }
    static ThresholdMode data_percentile(double p) { return {Kind::data_percentile, p}; }

    /// Parses `clip`, `percentile` or `percentile:<p>`.
    static ThresholdMode parse(const std::string& text);
    std::string label() const;
};

struct LayerConversion
{
    std::size_t layer = 0;
    double threshold = 0.0;
    double init_mean = 0.0;
    double init_min = 0.0;
    double init_max = 0.0;
};

struct ConversionReport
{
    std::vector<LayerConversion> layers;
    std::string threshold_mode;
    std::string init_strategy;

    void write_csv(std::ostream& out) const;
};

/// Copies W and b verbatim, sets thresholds from the clip bounds or from a
/// percentile of calibration pre-activations, and fills initial potentials.
/// `calib` must be given exactly when the mode is data_percentile.
std::pair<SnnNetwork, ConversionReport> convert(const AnnNetwork& ann, const ThresholdMode& mode,
                                                const InitStrategy& init, const Dataset* calib = nullptr);

/// Nearest-rank percentile (p in (0,100]); p = 100 is the maximum.
double nearest_rank_percentile(std::vector<double> values, double p);

struct NormalizationCheck
{
    /// Largest |s_a - s_b| over all probes, layers and steps.
    double max_discrepancy = 0.0;
    std::size_t mismatched_spikes = 0;
    std::size_t compared_spikes = 0;
    /// Largest |accumulated readout difference| between the two networks.
    double max_readout_difference = 0.0;
};

/// Unit-threshold twin of a converted network: W scaled by theta_prev / theta,
/// b and v_init by 1 / theta, thresholds 1. The readout layer is scaled by
/// theta_prev only.
SnnNetwork threshold_normalized(const SnnNetwork& snn);

/// Simulates the threshold-balanced and weight-normalized constructions side by
/// side on every probe and compares their spike trains step by step.
NormalizationCheck weight_normalize_equivalence_check(const AnnNetwork& ann, const std::vector<Tensor>& probes,
                                                      int steps,
                                                      const InitStrategy& init = InitStrategy::optimal_half());

}  // namespace annsnn
