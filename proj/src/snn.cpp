#include "annsnn/snn.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "annsnn/errors.hpp"

namespace annsnn {

void SnnNetwork::validate() const
{
    const auto shapes = topology.output_shapes();
    const std::size_t depth = topology.layers.size();
    if (params.size() != depth || threshold.size() != depth || v_init.size() != depth) {
        throw ConfigError("spiking network slots do not match its " + std::to_string(depth) + " layers");
    }
    for (std::size_t l = 0; l < depth; ++l) {
        if (!topology.layers[l].is_parametric()) {
            continue;
        }
        if (params[l].weight.shape() != topology.weight_shape(l) || params[l].bias.shape() != topology.bias_shape(l)) {
            throw ConfigError("layer " + std::to_string(l) + " parameters do not match the layer spec");
        }
        if (is_spiking(l)) {
            if (!(threshold[l] > 0.0 && std::isfinite(threshold[l]))) {
                throw ConfigError("layer " + std::to_string(l) + " needs a positive finite threshold");
            }
            if (v_init[l].shape() != shapes[l]) {
                throw ConfigError("layer " + std::to_string(l) + " initial potentials " +
                                  shape_to_string(v_init[l].shape()) + " do not match neuron shape " +
                                  shape_to_string(shapes[l]));
            }
            for (double v : v_init[l].values()) {
                if (!std::isfinite(v)) {
                    throw ConfigError("layer " + std::to_string(l) + " has a non-finite initial potential");
                }
            }
        }
    }
}

NeuronState NeuronState::initial(const SnnNetwork& net)
{
    NeuronState state;
    state.v.resize(net.topology.layers.size());
    for (std::size_t l = 0; l < net.topology.layers.size(); ++l) {
        if (net.is_spiking(l)) {
            state.v[l] = net.v_init[l];
        }
    }
    return state;
}

namespace {

Tensor layer_map(const LayerSpec& layer, const LayerParams& params, const Tensor& x, const Shape& out_shape)
{
    switch (layer.kind) {
    case LayerKind::linear: {
        Tensor y(out_shape);
        affine(params.weight.data(), params.bias.data(), x.data(), y.data());
        return y;
    }
    case LayerKind::conv2d:
        return conv2d(x, params.weight, params.bias, layer.stride, layer.padding);
    case LayerKind::avgpool2d:
        return avgpool2d(x, layer.window);
    case LayerKind::flatten:
        return x.reshaped(out_shape);
    }
    throw ConfigError("unknown layer kind");
}

// Values that stay fixed across steps because they depend only on the
// constant input current.
struct ConstantCache
{
    std::vector<Tensor> value;
};

void advance(const SnnNetwork& net, const std::vector<Shape>& shapes, NeuronState& state, const Tensor& x0,
             ConstantCache* cache, StepResult& out)
{
    const std::size_t depth = net.topology.layers.size();
    out.drive.assign(depth, Tensor());
    out.spikes.assign(depth, Tensor());
    out.output.assign(depth, Tensor());
    ++state.t;
    bool input_constant = true;
    for (std::size_t l = 0; l < depth; ++l) {
        const LayerSpec& layer = net.topology.layers[l];
        const Tensor& input = l == 0 ? x0 : out.output[l - 1];
        Tensor mapped;
        if (cache && input_constant && !cache->value[l].empty()) {
            mapped = cache->value[l];
        } else {
            mapped = layer_map(layer, net.params[l], input, shapes[l]);
            if (cache && input_constant) {
                cache->value[l] = mapped;
            }
        }
        if (layer.is_parametric()) {
            out.drive[l] = mapped;
        }
        if (!net.is_spiking(l)) {
            out.output[l] = std::move(mapped);
            continue;
        }
        input_constant = false;
        const double vth = net.threshold[l];
        Tensor& v = state.v[l];
        Tensor spikes(shapes[l]);
        Tensor x(shapes[l]);
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double v_temp = v[i] + mapped[i];
            if (!std::isfinite(v_temp)) {
                throw SimulationError(l, state.t,
                                      "non-finite membrane potential in layer " + std::to_string(l) + " at step " +
                                          std::to_string(state.t));
            }
            if (v_temp > vth) {
                spikes[i] = 1.0;
                x[i] = vth;
                v[i] = v_temp - vth;
            } else {
                v[i] = v_temp;
            }
        }
        out.spikes[l] = std::move(spikes);
        out.output[l] = std::move(x);
    }
}

void check_input(const SnnNetwork& net, const Tensor& x0)
{
    if (x0.shape() != net.topology.input_shape) {
        throw DimensionError("input " + shape_to_string(x0.shape()) + " does not match network input " +
                             shape_to_string(net.topology.input_shape));
    }
}

}  // namespace

StepResult step(const SnnNetwork& net, NeuronState& state, const Tensor& x0)
{
    check_input(net, x0);
    const auto shapes = net.topology.output_shapes();
    if (state.v.size() != shapes.size()) {
        throw DimensionError("neuron state does not match the network depth");
    }
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        if (net.is_spiking(l) && state.v[l].shape() != shapes[l]) {
            throw DimensionError("neuron state of layer " + std::to_string(l) + " has shape " +
                                 shape_to_string(state.v[l].shape()));
        }
    }
    StepResult result;
    advance(net, shapes, state, x0, nullptr, result);
    return result;
}

SimTrace simulate(const SnnNetwork& net, const Tensor& x0, int steps, const SimOptions& options)
{
    if (steps < 1) {
        throw ConfigError("simulation needs at least one step");
    }
    net.validate();
    check_input(net, x0);
    const auto shapes = net.topology.output_shapes();
    const std::size_t depth = shapes.size();

    SimTrace trace;
    trace.steps = steps;
    trace.spike_count.resize(depth);
    trace.first_spike.resize(depth);
    trace.rate.resize(depth);
    trace.avg_potential.resize(depth);
    if (options.record_spikes) {
        trace.spikes.resize(depth);
    }
    for (std::size_t l = 0; l < depth; ++l) {
        if (net.is_spiking(l)) {
            trace.spike_count[l] = Tensor(shapes[l]);
            trace.first_spike[l] = Tensor(shapes[l]);
        }
    }
    trace.output_accumulator = Tensor(shapes.back());
    trace.running_prediction.reserve(static_cast<std::size_t>(steps));

    NeuronState state = NeuronState::initial(net);
    ConstantCache cache{std::vector<Tensor>(depth)};
    StepResult result;
    for (int t = 1; t <= steps; ++t) {
        advance(net, shapes, state, x0, &cache, result);
        for (std::size_t l = 0; l < depth; ++l) {
            if (!net.is_spiking(l)) {
                continue;
            }
            const Tensor& s = result.spikes[l];
            Tensor& count = trace.spike_count[l];
            Tensor& first = trace.first_spike[l];
            for (std::size_t i = 0; i < s.size(); ++i) {
                if (s[i] != 0.0) {
                    count[i] += 1.0;
                    if (first[i] == 0.0) {
                        first[i] = t;
                    }
                }
            }
            if (options.record_spikes) {
                trace.spikes[l].push_back(s);
            }
        }
        const Tensor& readout = result.output.back();
        for (std::size_t i = 0; i < readout.size(); ++i) {
            trace.output_accumulator[i] += readout[i];
        }
        trace.running_prediction.push_back(static_cast<int>(argmax(trace.output_accumulator.data())));
    }

    for (std::size_t l = 0; l < depth; ++l) {
        if (!net.is_spiking(l)) {
            continue;
        }
        Tensor rate = trace.spike_count[l];
        for (double& r : rate.values()) {
            r /= steps;
        }
        Tensor avg = rate;
        for (double& a : avg.values()) {
            a *= net.threshold[l];
        }
        trace.rate[l] = std::move(rate);
        trace.avg_potential[l] = std::move(avg);
    }
    trace.final_state = std::move(state);
    return trace;
}

Classification classify(const SnnNetwork& net, const Tensor& x0, int steps)
{
    SimTrace trace = simulate(net, x0, steps);
    Classification c;
    c.per_step = std::move(trace.running_prediction);
    c.predicted_class = c.per_step.back();
    return c;
}

void write_trace_csv(std::ostream& out, const SnnNetwork& net, const Tensor& x0, int steps)
{
    if (steps < 1) {
        throw ConfigError("simulation needs at least one step");
    }
    net.validate();
    NeuronState state = NeuronState::initial(net);
    out << "layer,neuron,t,spike,potential\n";
    char buf[64];
    for (int t = 1; t <= steps; ++t) {
        const StepResult r = step(net, state, x0);
        for (std::size_t l = 0; l < r.spikes.size(); ++l) {
            if (r.spikes[l].empty()) {
                continue;
            }
            for (std::size_t i = 0; i < r.spikes[l].size(); ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", state.v[l][i]);
                out << l << ',' << i << ',' << t << ',' << (r.spikes[l][i] != 0.0 ? 1 : 0) << ',' << buf << '\n';
            }
        }
    }
}

}  // namespace annsnn
