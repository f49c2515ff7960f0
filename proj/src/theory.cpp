#include "annsnn/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "annsnn/errors.hpp"

namespace annsnn {

void FloorActivationParams::validate() const
{
    if (!(v_th > 0.0 && std::isfinite(v_th))) {
        throw ConfigError("threshold must be positive and finite");
    }
    if (steps < 1) {
        throw ConfigError("T must be at least 1");
    }
    if (!(v0 >= 0.0 && v0 <= v_th)) {
        throw ConfigError("initial potential must lie in [0, V_th]");
    }
}

double floor_activation(double z, const FloorActivationParams& params)
{
    const double steps = static_cast<double>(params.steps);
    const double spikes = std::floor((steps * z + params.v0) / params.v_th);
    return std::max(params.v_th / steps * spikes, 0.0);
}

Tensor floor_activation(const Tensor& z, const FloorActivationParams& params)
{
    params.validate();
    Tensor out = z;
    for (double& v : out.values()) {
        v = floor_activation(v, params);
    }
    return out;
}

SnnNetwork single_neuron(double v_th, double v0)
{
    SnnNetwork net;
    net.topology.input_shape = {1};
    net.topology.layers = {LayerSpec::linear(1, 1, true)};
    net.params = {LayerParams{Tensor({1, 1}, 1.0), Tensor({1}, 0.0), v_th}};
    net.threshold = {v_th};
    net.v_init = {Tensor({1}, v0)};
    net.validate();
    return net;
}

OracleReport verify_floor_oracle(std::size_t tuples, Rng& rng)
{
    static constexpr double thresholds[] = {0.5, 1.0, 2.0};
    OracleReport report;
    report.tuples = tuples;
    for (std::size_t i = 0; i < tuples; ++i) {
        const double v_th = thresholds[rng.below(3)];
        const int steps = 1 + static_cast<int>(rng.below(64));
        const double z = rng.uniform(-0.5, v_th);
        const double v0 = rng.uniform(0.0, v_th);
        const SimTrace trace = simulate(single_neuron(v_th, v0), Tensor({1}, z), steps);
        const double simulated = trace.spike_count[0][0];
        const double expected = std::max(std::floor((steps * z + v0) / v_th), 0.0);
        if (simulated != expected) {
            if (report.mismatches == 0) {
                char buf[256];
                std::snprintf(buf, sizeof buf, "z=%.17g,v0=%.17g,T=%d,V_th=%g simulated=%g expected=%g", z, v0, steps,
                              v_th, simulated, expected);
                report.first_mismatch = buf;
            }
            ++report.mismatches;
        }
    }
    return report;
}

ErrorModel::ErrorModel(double v_th, int steps, double v0, std::vector<double> density)
    : v_th_(v_th), steps_(steps), v0_(v0), density_(std::move(density))
{
}

ErrorModel ErrorModel::uniform(double v_th, int steps, double v0)
{
    FloorActivationParams{v_th, steps, v0}.validate();
    return ErrorModel(v_th, steps, v0, std::vector<double>(static_cast<std::size_t>(steps) + 1, 1.0 / v_th));
}

ErrorModel ErrorModel::piecewise(double v_th, int steps, double v0, const std::vector<double>& weights)
{
    FloorActivationParams{v_th, steps, v0}.validate();
    if (weights.size() != static_cast<std::size_t>(steps) + 1) {
        throw ConfigError("piecewise density needs T + 1 = " + std::to_string(steps + 1) + " weights, got " +
                          std::to_string(weights.size()));
    }
    if (weights.front() != weights.back()) {
        throw ConfigError("piecewise density needs equal first and last weights");
    }
    for (double w : weights) {
        if (!(w >= 0.0 && std::isfinite(w))) {
            throw ConfigError("piecewise density weights must be finite and non-negative");
        }
    }
    ErrorModel raw(v_th, steps, v0, weights);
    double total = 0.0;
    for (std::size_t t = 0; t < weights.size(); ++t) {
        total += raw.mass(t);
    }
    if (!(total > 0.0)) {
        throw ConfigError("piecewise density weights carry no mass");
    }
    std::vector<double> density = weights;
    for (double& p : density) {
        p /= total;
    }
    return ErrorModel(v_th, steps, v0, std::move(density));
}

std::vector<double> ErrorModel::boundaries() const
{
    std::vector<double> m(static_cast<std::size_t>(steps_) + 2);
    m.front() = 0.0;
    for (int t = 1; t <= steps_; ++t) {
        m[static_cast<std::size_t>(t)] = (t * v_th_ - v0_) / steps_;
    }
    m.back() = v_th_;
    return m;
}

double ErrorModel::mass(std::size_t t) const
{
    const auto m = boundaries();
    return density_.at(t) * (m[t + 1] - m[t]);
}

namespace {

double density_sum_below_T(const ErrorModel& model)
{
    double sum = 0.0;
    for (int j = 0; j < model.steps(); ++j) {
        sum += model.densities()[static_cast<std::size_t>(j)];
    }
    return sum;
}

}  // namespace

double expected_squared_error(const ErrorModel& model)
{
    const double v = model.v_th();
    const double v0 = model.v0();
    const double steps = model.steps();
    return density_sum_below_T(model) * ((v - v0) * (v - v0) * (v - v0) + v0 * v0 * v0) /
           (3.0 * steps * steps * steps);
}

double expected_signed_error(const ErrorModel& model)
{
    const double v = model.v_th();
    const double v0 = model.v0();
    const double steps = model.steps();
    return density_sum_below_T(model) * ((v - v0) * (v - v0) - v0 * v0) / (2.0 * steps * steps);
}

ZSampler ZSampler::uniform(double lo, double hi)
{
    if (!(hi >= lo)) {
        throw ConfigError("uniform sampler needs lo <= hi");
    }
    ZSampler s;
    s.kind_ = Kind::uniform;
    s.lo_ = lo;
    s.hi_ = hi;
    return s;
}

ZSampler ZSampler::point(double z)
{
    ZSampler s;
    s.kind_ = Kind::point;
    s.lo_ = z;
    s.hi_ = z;
    return s;
}

ZSampler ZSampler::piecewise(const ErrorModel& model)
{
    ZSampler s;
    s.kind_ = Kind::piecewise;
    s.bounds_ = model.boundaries();
    double running = 0.0;
    for (std::size_t t = 0; t < model.densities().size(); ++t) {
        running += model.mass(t);
        s.cumulative_.push_back(running);
    }
    return s;
}

double ZSampler::draw(Rng& rng) const
{
    switch (kind_) {
    case Kind::uniform: return rng.uniform(lo_, hi_);
    case Kind::point: return lo_;
    case Kind::piecewise: {
        const double u = rng.uniform() * cumulative_.back();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        if (it == cumulative_.end()) {
            --it;
        }
        const auto t = static_cast<std::size_t>(it - cumulative_.begin());
        return rng.uniform(bounds_[t], bounds_[t + 1]);
    }
    }
    return lo_;
}

double MonteCarloResult::stderr_signed() const
{
    return std_signed / std::sqrt(static_cast<double>(samples));
}

double MonteCarloResult::stderr_squared() const
{
    return std_squared / std::sqrt(static_cast<double>(samples));
}

MonteCarloResult monte_carlo_error(const FloorActivationParams& params, const ZSampler& sampler, std::size_t n,
                                   Rng& rng)
{
    params.validate();
    if (n == 0) {
        throw ConfigError("Monte Carlo needs at least one sample");
    }
    // Welford running moments.
    double mean_e = 0.0, m2_e = 0.0, mean_sq = 0.0, m2_sq = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        const double z = sampler.draw(rng);
        const double e = z - floor_activation(z, params);
        const double sq = e * e;
        const double de = e - mean_e;
        mean_e += de / static_cast<double>(i);
        m2_e += de * (e - mean_e);
        const double dsq = sq - mean_sq;
        mean_sq += dsq / static_cast<double>(i);
        m2_sq += dsq * (sq - mean_sq);
    }
    MonteCarloResult r;
    r.samples = n;
    r.mean_signed = mean_e;
    r.mean_squared = mean_sq;
    if (n > 1) {
        r.std_signed = std::sqrt(m2_e / static_cast<double>(n - 1));
        r.std_squared = std::sqrt(m2_sq / static_cast<double>(n - 1));
    }
    return r;
}

std::vector<double> uniform_grid(double v_th, std::size_t points)
{
    if (points < 2) {
        throw ConfigError("a grid needs at least two points");
    }
    std::vector<double> grid(points);
    for (std::size_t i = 0; i < points; ++i) {
        grid[i] = v_th * static_cast<double>(i) / static_cast<double>(points - 1);
    }
    return grid;
}

Theorem1Sweep theorem1_sweep(double v_th, int steps, const std::vector<double>& weights,
                             const std::vector<double>& grid)
{
    if (grid.empty()) {
        throw ConfigError("theorem sweep needs a non-empty v0 grid");
    }
    Theorem1Sweep sweep;
    for (double v0 : grid) {
        const ErrorModel model = weights.empty() ? ErrorModel::uniform(v_th, steps, v0)
                                                 : ErrorModel::piecewise(v_th, steps, v0, weights);
        sweep.rows.push_back({v0, expected_squared_error(model), expected_signed_error(model)});
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < sweep.rows.size(); ++i) {
        if (sweep.rows[i].expected_squared < sweep.rows[best].expected_squared) {
            best = i;
        }
    }
    sweep.argmin_v0 = sweep.rows[best].v0;
    for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
        const Theorem1Row& a = sweep.rows[i];
        if (a.expected_signed == 0.0) {
            sweep.zero_crossing = a.v0;
            break;
        }
        if (i + 1 < sweep.rows.size()) {
            const Theorem1Row& b = sweep.rows[i + 1];
            if ((a.expected_signed < 0.0) != (b.expected_signed < 0.0) && b.expected_signed != 0.0) {
                const double w = a.expected_signed / (a.expected_signed - b.expected_signed);
                sweep.zero_crossing = a.v0 + w * (b.v0 - a.v0);
                break;
            }
        }
    }
    return sweep;
}

void Theorem1Sweep::write_csv(std::ostream& out) const
{
    out << "v0,expected_squared,expected_signed\n";
    char buf[96];
    for (const Theorem1Row& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", r.v0, r.expected_squared, r.expected_signed);
        out << buf;
    }
}

std::uint64_t count_ann_flops(const Topology& topology)
{
    const auto shapes = topology.output_shapes();
    std::uint64_t flops = 0;
    for (std::size_t l = 0; l < topology.layers.size(); ++l) {
        const LayerSpec& layer = topology.layers[l];
        const std::uint64_t outputs = shape_size(shapes[l]);
        switch (layer.kind) {
        case LayerKind::linear:
            flops += 2 * layer.in_features * outputs + outputs;
            break;
        case LayerKind::conv2d:
            flops += 2 * layer.in_channels * layer.kernel * layer.kernel * outputs + outputs;
            break;
        case LayerKind::avgpool2d:
            flops += (layer.window * layer.window - 1) * outputs;
            break;
        case LayerKind::flatten:
            break;
        }
    }
    return flops;
}

namespace {

// Output positions along one axis whose window covers input coordinate `pos`.
std::size_t covering_positions(std::size_t pos, std::size_t out_extent, const LayerSpec& layer)
{
    std::size_t n = 0;
    for (std::size_t o = 0; o < out_extent; ++o) {
        const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(pos + layer.padding) -
                                      static_cast<std::ptrdiff_t>(o * layer.stride);
        if (offset >= 0 && offset < static_cast<std::ptrdiff_t>(layer.kernel)) {
            ++n;
        }
    }
    return n;
}

}  // namespace

Tensor fanout(const Topology& topology, std::size_t layer)
{
    const auto shapes = topology.output_shapes();
    std::size_t next = layer + 1;
    while (next < shapes.size() && !topology.layers[next].is_parametric()) {
        ++next;
    }
    if (next >= shapes.size()) {
        return Tensor(shapes.at(layer));
    }

    const LayerSpec& target = topology.layers[next];
    const Shape in_shape = shapes[next - 1];
    Tensor counts(in_shape);
    if (target.kind == LayerKind::linear) {
        counts.fill(static_cast<double>(target.out_features));
    } else {
        const std::size_t c = in_shape[0], h = in_shape[1], w = in_shape[2];
        const Shape& out_shape = shapes[next];
        for (std::size_t y = 0; y < h; ++y) {
            const std::size_t cy = covering_positions(y, out_shape[1], target);
            for (std::size_t x = 0; x < w; ++x) {
                const double n = static_cast<double>(target.out_channels * cy * covering_positions(x, out_shape[2], target));
                for (std::size_t ch = 0; ch < c; ++ch) {
                    counts[(ch * h + y) * w + x] = n;
                }
            }
        }
    }

    // Walk back through pooling/flatten layers to the emitting layer.
    for (std::size_t l = next - 1; l > layer; --l) {
        const Shape& before = shapes[l - 1];
        if (topology.layers[l].kind == LayerKind::flatten) {
            counts = counts.reshaped(before);
            continue;
        }
        const std::size_t win = topology.layers[l].window;
        const std::size_t c = before[0], h = before[1], w = before[2];
        const std::size_t oh = h / win, ow = w / win;
        Tensor expanded(before);
        for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    expanded[(ch * h + y) * w + x] = counts[(ch * oh + y / win) * ow + x / win];
                }
            }
        }
        counts = std::move(expanded);
    }
    return counts;
}

double count_sops(const Topology& topology, const std::vector<Tensor>& spike_counts)
{
    const auto shapes = topology.output_shapes();
    if (spike_counts.size() != shapes.size()) {
        throw ConfigError("spike counts cover " + std::to_string(spike_counts.size()) + " layers, network has " +
                          std::to_string(shapes.size()));
    }
    double sops = 0.0;
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        if (!topology.is_clipped(l)) {
            continue;
        }
        if (spike_counts[l].shape() != shapes[l]) {
            throw ConfigError("spike counts of layer " + std::to_string(l) + " have shape " +
                              shape_to_string(spike_counts[l].shape()) + ", expected " + shape_to_string(shapes[l]));
        }
        const Tensor fan = fanout(topology, l);
        for (std::size_t i = 0; i < fan.size(); ++i) {
            sops += spike_counts[l][i] * fan[i];
        }
    }
    return sops;
}

void finalize_energy(OpCountReport& report)
{
    report.ann_energy = static_cast<double>(report.ann_flops) * joules_per_flop;
    report.snn_energy = report.snn_sops * joules_per_sop;
    report.ratio = report.snn_energy > 0.0 ? report.ann_energy / report.snn_energy : 0.0;
}

OpCountReport count_ops(const AnnNetwork& ann, const SimTrace& trace)
{
    ann.validate();
    const std::vector<Shape> shapes = ann.topology.output_shapes();
    bool matches = trace.spike_count.size() == shapes.size() && trace.output_accumulator.size() == shape_size(shapes.back());
    for (std::size_t l = 0; matches && l < shapes.size(); ++l) {
        if (ann.topology.is_clipped(l)) {
            matches = trace.spike_count[l].size() == shape_size(shapes[l]);
        }
    }
    if (!matches) {
        throw ConfigError("trace does not come from a network with this topology");
    }
    OpCountReport report;
    report.ann_flops = count_ann_flops(ann.topology);
    report.snn_sops = count_sops(ann.topology, trace.spike_count);
    report.steps = trace.steps;
    finalize_energy(report);
    return report;
}

void OpCountReport::write_csv(std::ostream& out) const
{
    char buf[64];
    auto row = [&](const char* metric, double value) {
        std::snprintf(buf, sizeof buf, "%.17g", value);
        out << metric << ',' << buf << '\n';
    };
    out << "metric,value\n";
    out << "ann_flops," << ann_flops << '\n';
    row("snn_sops", snn_sops);
    out << "timesteps," << steps << '\n';
    row("ann_energy_joules", ann_energy);
    row("snn_energy_joules", snn_energy);
    row("ann_snn_energy_ratio", ratio);
    row("joules_per_flop", joules_per_flop);
    row("joules_per_sop", joules_per_sop);
    row("reference_vgg16_ratio_T32", reference_vgg16_ratio);
    out << "flop_convention,2 per MAC + 1 per bias add + window^2-1 adds per pooled output\n";
    out << "sop_convention,fan-out synapses per emitted spike summed over all timesteps\n";
}

}  // namespace annsnn
