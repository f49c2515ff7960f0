#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "annsnn/ann.hpp"
#include "annsnn/tensor.hpp"

namespace annsnn {

/// Integrate-and-fire counterpart of an AnnNetwork. Clipped layers of the
/// source topology spike; the unclipped readout layer integrates analog drive.
struct SnnNetwork
{
    Topology topology;
    /// W and b per parametric layer (theta is unused).
    std::vector<LayerParams> params;
    /// Firing threshold per spiking layer, 0 elsewhere.
    std::vector<double> threshold;
    /// Initial membrane potential per neuron of each spiking layer; empty elsewhere.
    std::vector<Tensor> v_init;

    bool is_spiking(std::size_t layer) const { return topology.is_clipped(layer); }

    void validate() const;

    bool operator==(const SnnNetwork&) const = default;
};

struct NeuronState
{
    /// Membrane potential per spiking layer; empty for other layers.
    std::vector<Tensor> v;
    /// Steps taken so far.
    int t = 0;

    static NeuronState initial(const SnnNetwork& net);
};

struct StepResult
{
    /// W x + b for parametric layers, empty otherwise.
    std::vector<Tensor> drive;
    /// 0/1 spikes for spiking layers, empty otherwise.
    std::vector<Tensor> spikes;
    /// What each layer hands to the next one this step: spikes * V_th for
    /// spiking layers, pooled/flattened values, or readout drive.
    std::vector<Tensor> output;
};

/// Advances every layer by one step, in layer order, with `x0` as the analog
/// input. Updates `state` in place. Throws SimulationError on a non-finite
/// potential.
StepResult step(const SnnNetwork& net, NeuronState& state, const Tensor& x0);

struct SimOptions
{
    /// Keep the full spike train of every spiking layer (memory heavy).
    bool record_spikes = false;
};

struct SimTrace
{
    int steps = 0;
    /// Per-layer spike counts, rates r(T) and average postsynaptic potentials r(T) * V_th.
    std::vector<Tensor> spike_count;
    std::vector<Tensor> rate;
    std::vector<Tensor> avg_potential;
    /// 1-based step of each neuron's first spike, 0 when it never fired.
    std::vector<Tensor> first_spike;
    /// spikes[layer][t] when SimOptions::record_spikes is set.
    std::vector<std::vector<Tensor>> spikes;
    /// Sum over steps of the final layer's output; divide by steps for logits.
    Tensor output_accumulator;
    /// Argmax of the accumulator after each step.
    std::vector<int> running_prediction;
    NeuronState final_state;
};

/// Runs `steps` steps with `x0` as a constant input current.
SimTrace simulate(const SnnNetwork& net, const Tensor& x0, int steps, const SimOptions& options = {});

struct Classification
{
    int predicted_class = 0;
    /// Prediction after 1..T steps from a single run.
    std::vector<int> per_step;
};

Classification classify(const SnnNetwork& net, const Tensor& x0, int steps);

/// Debug dump of a run: one `layer,neuron,t,spike,potential` row per spiking
/// neuron per step, potential taken after the reset.
void write_trace_csv(std::ostream& out, const SnnNetwork& net, const Tensor& x0, int steps);

}  // namespace annsnn
