#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "annsnn/ann.hpp"
#include "annsnn/rng.hpp"
#include "annsnn/snn.hpp"
#include "annsnn/tensor.hpp"

namespace annsnn {

struct FloorActivationParams
{
    double v_th = 1.0;
    int steps = 1;
    double v0 = 0.0;

    void validate() const;
};

/// Average postsynaptic potential of an IF neuron driven by a constant input z
/// for T steps: max(V_th / T * floor((T z + v0) / V_th), 0).
double floor_activation(double z, const FloorActivationParams& params);
Tensor floor_activation(const Tensor& z, const FloorActivationParams& params);

/// One IF neuron behind a unit weight: input [1], threshold v_th, initial potential v0.
SnnNetwork single_neuron(double v_th, double v0);

struct OracleReport
{
    std::size_t tuples = 0;
    std::size_t mismatches = 0;
    /// "z=..,v0=..,T=..,V_th=.. simulated=.. expected=.." for the first mismatch.
    std::string first_mismatch;
};

/// Draws (z, v0, T, V_th) with z in [-0.5, V_th], v0 in [0, V_th], T in 1..64,
/// V_th in {0.5, 1, 2}, simulates one neuron and compares its spike count with
/// the floor form.
OracleReport verify_floor_oracle(std::size_t tuples, Rng& rng);

/// Piecewise-uniform density of the pre-activation z over [0, V_th]. Interval t
/// is [m_t, m_{t+1}] with m_0 = 0, m_t = (t V_th - v0) / T for t = 1..T and
/// m_{T+1} = V_th, carrying constant density p_t, with p_0 == p_T.
class ErrorModel
{
public:
    /// Density 1 / V_th everywhere.
    static ErrorModel uniform(double v_th, int steps, double v0);

    /// T + 1 non-negative relative weights, weights[0] == weights[T], scaled so
    /// the density integrates to one.
    static ErrorModel piecewise(double v_th, int steps, double v0, const std::vector<double>& weights);

    double v_th() const { return v_th_; }
    int steps() const { return steps_; }
    double v0() const { return v0_; }
    const std::vector<double>& densities() const { return density_; }

    /// Interval boundaries m_0..m_{T+1}.
    std::vector<double> boundaries() const;
    /// Probability mass of interval t.
    double mass(std::size_t t) const;

private:
    ErrorModel(double v_th, int steps, double v0, std::vector<double> density);

    double v_th_;
    int steps_;
    double v0_;
    std::vector<double> density_;
};

/// E[(z - floor_activation(z))^2] in closed form:
/// (sum_{j<T} p_j) ((V_th - v0)^3 + v0^3) / (3 T^3).
double expected_squared_error(const ErrorModel& model);

/// E[z - floor_activation(z)] in closed form:
/// (sum_{j<T} p_j) ((V_th - v0)^2 - v0^2) / (2 T^2).
double expected_signed_error(const ErrorModel& model);

/// Distribution of z for Monte Carlo runs.
class ZSampler
{
public:
    static ZSampler uniform(double lo, double hi);
    static ZSampler point(double z);
    /// Draws from the piecewise density of `model`.
    static ZSampler piecewise(const ErrorModel& model);

    double draw(Rng& rng) const;

private:
    enum class Kind { uniform, point, piecewise };
    Kind kind_ = Kind::uniform;
    double lo_ = 0.0;
    double hi_ = 1.0;
    std::vector<double> bounds_;
    std::vector<double> cumulative_;
};

struct MonteCarloResult
{
    std::size_t samples = 0;
    double mean_signed = 0.0;
    double mean_squared = 0.0;
    /// Sample standard deviations of the signed and squared errors.
    double std_signed = 0.0;
    double std_squared = 0.0;

    double stderr_signed() const;
    double stderr_squared() const;
};

MonteCarloResult monte_carlo_error(const FloorActivationParams& params, const ZSampler& sampler, std::size_t n,
                                   Rng& rng);

struct Theorem1Row
{
    double v0 = 0.0;
    double expected_squared = 0.0;
    double expected_signed = 0.0;
};

struct Theorem1Sweep
{
    std::vector<Theorem1Row> rows;
    /// Grid point with the smallest expected squared error (first on ties).
    double argmin_v0 = 0.0;
    /// Where the signed error changes sign, linearly interpolated between grid points.
    std::optional<double> zero_crossing;

    void write_csv(std::ostream& out) const;
};

/// Evaluates both closed forms on every v0 in `grid`. `weights` selects the
/// density family (T + 1 piecewise weights); empty means uniform.
Theorem1Sweep theorem1_sweep(double v_th, int steps, const std::vector<double>& weights,
                             const std::vector<double>& grid);

/// {0, step, ..., v_th}, built by index so the end points are exact.
std::vector<double> uniform_grid(double v_th, std::size_t points);

inline constexpr double joules_per_flop = 12.5e-12;
inline constexpr double joules_per_sop = 77e-15;
/// Reference VGG-16 ANN/SNN energy ratio at T = 32, reported for comparison only.
inline constexpr double reference_vgg16_ratio = 62.0;

struct OpCountReport
{
    /// Per inference: 2 per multiply-accumulate, 1 per bias add, window^2 - 1
    /// adds per pooled output.
    std::uint64_t ann_flops = 0;
    /// Spike-triggered synaptic operations: each spike costs its neuron's fan-out.
    double snn_sops = 0.0;
    int steps = 0;
    double ann_energy = 0.0;
    double snn_energy = 0.0;
    /// ann_energy / snn_energy, or 0 when the SNN did not spike.
    double ratio = 0.0;

    void write_csv(std::ostream& out) const;
};

std::uint64_t count_ann_flops(const Topology& topology);

/// Number of downstream synapses reached by each neuron of layer `layer`,
/// following pooling and flatten layers into the next parametric layer.
Tensor fanout(const Topology& topology, std::size_t layer);

OpCountReport count_ops(const AnnNetwork& ann, const SimTrace& trace);

/// Spike-triggered synaptic operations for per-layer spike counts (empty
/// tensors for non-spiking layers).
double count_sops(const Topology& topology, const std::vector<Tensor>& spike_counts);

/// Fills the energy fields of `report` from its counts.
void finalize_energy(OpCountReport& report);

}  // namespace annsnn
