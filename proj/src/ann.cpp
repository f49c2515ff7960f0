#include "annsnn/ann.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "annsnn/errors.hpp"
#include "annsnn/parallel.hpp"
#include "annsnn/rng.hpp"

namespace annsnn {

std::string to_string(LayerKind kind)
{
    switch (kind) {
    case LayerKind::linear: return "linear";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::avgpool2d: return "avgpool2d";
    case LayerKind::flatten: return "flatten";
    }
    return "unknown";
}

LayerSpec LayerSpec::linear(std::size_t in, std::size_t out, bool clip)
{
    LayerSpec spec;
    spec.kind = LayerKind::linear;
    spec.in_features = in;
    spec.out_features = out;
    spec.has_clip = clip;
    return spec;
}

LayerSpec LayerSpec::conv(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                          std::size_t stride, std::size_t padding, bool clip)
{
    LayerSpec spec;
    spec.kind = LayerKind::conv2d;
    spec.in_channels = in_channels;
    spec.out_channels = out_channels;
    spec.kernel = kernel;
    spec.stride = stride;
    spec.padding = padding;
    spec.has_clip = clip;
    return spec;
}

LayerSpec LayerSpec::avgpool(std::size_t window)
{
    LayerSpec spec;
    spec.kind = LayerKind::avgpool2d;
    spec.window = window;
    return spec;
}

LayerSpec LayerSpec::flat()
{
    LayerSpec spec;
    spec.kind = LayerKind::flatten;
    return spec;
}

namespace {

Shape layer_output_shape(const LayerSpec& layer, const Shape& in, std::size_t index)
{
    const std::string where = "layer " + std::to_string(index) + " (" + to_string(layer.kind) + "): ";
    switch (layer.kind) {
    case LayerKind::linear:
        if (in.size() != 1 || in[0] != layer.in_features) {
            throw ConfigError(where + "expects [" + std::to_string(layer.in_features) + "], receives " +
                              shape_to_string(in));
        }
        if (layer.out_features == 0) {
            throw ConfigError(where + "needs at least one output");
        }
        return {layer.out_features};
    case LayerKind::conv2d: {
        if (in.size() != 3 || in[0] != layer.in_channels) {
            throw ConfigError(where + "expects " + std::to_string(layer.in_channels) +
                              " input channels, receives " + shape_to_string(in));
        }
        if (layer.out_channels == 0) {
            throw ConfigError(where + "needs at least one output channel");
        }
        const std::size_t oh = conv_output_extent(in[1], layer.kernel, layer.stride, layer.padding);
        const std::size_t ow = conv_output_extent(in[2], layer.kernel, layer.stride, layer.padding);
        return {layer.out_channels, oh, ow};
    }
    case LayerKind::avgpool2d:
        if (in.size() != 3 || layer.window == 0 || in[1] % layer.window != 0 || in[2] % layer.window != 0) {
            throw ConfigError(where + "window " + std::to_string(layer.window) + " does not tile " +
                              shape_to_string(in));
        }
        return {in[0], in[1] / layer.window, in[2] / layer.window};
    case LayerKind::flatten:
        return {shape_size(in)};
    }
    throw ConfigError(where + "unknown layer kind");
}

}  // namespace

void Topology::validate() const
{
    (void)output_shapes();
}

std::vector<Shape> Topology::output_shapes() const
{
    if (input_shape.empty() || shape_size(input_shape) == 0) {
        throw ConfigError("topology needs a non-empty input shape");
    }
    if (layers.empty()) {
        throw ConfigError("topology has no layers");
    }
    if (!layers.back().is_parametric()) {
        throw ConfigError("the last layer must be linear or conv2d");
    }
    std::vector<Shape> shapes;
    shapes.reserve(layers.size());
    Shape current = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& layer = layers[i];
        if (!layer.is_parametric() && layer.has_clip) {
            throw ConfigError("layer " + std::to_string(i) + " (" + to_string(layer.kind) +
                              ") carries no parameters and cannot clip");
        }
        if (layer.is_parametric() && !layer.has_clip && i + 1 != layers.size()) {
            throw ConfigError("layer " + std::to_string(i) +
                              " is unclipped; only the final readout layer may omit the clip");
        }
        current = layer_output_shape(layer, current, i);
        shapes.push_back(current);
    }
    return shapes;
}

Shape Topology::input_shape_of(std::size_t index) const
{
    if (index == 0) {
        return input_shape;
    }
    return output_shapes().at(index - 1);
}

Shape Topology::weight_shape(std::size_t index) const
{
    const LayerSpec& layer = layers.at(index);
    switch (layer.kind) {
    case LayerKind::linear: return {layer.out_features, layer.in_features};
    case LayerKind::conv2d: return {layer.out_channels, layer.in_channels, layer.kernel, layer.kernel};
    default: return {};
    }
}

Shape Topology::bias_shape(std::size_t index) const
{
    const LayerSpec& layer = layers.at(index);
    switch (layer.kind) {
    case LayerKind::linear: return {layer.out_features};
    case LayerKind::conv2d: return {layer.out_channels};
    default: return {};
    }
}

std::size_t Topology::clipped_count() const
{
    std::size_t n = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        n += is_clipped(i) ? 1 : 0;
    }
    return n;
}

Topology desk_mlp(const Shape& input_shape, std::size_t num_classes)
{
    const std::size_t features = shape_size(input_shape);
    Topology topo;
    topo.input_shape = input_shape;
    topo.layers = {LayerSpec::flat(), LayerSpec::linear(features, 256, true),
                   LayerSpec::linear(256, 128, true), LayerSpec::linear(128, num_classes, false)};
    topo.validate();
    return topo;
}

Topology desk_cnn(const Shape& input_shape, std::size_t num_classes)
{
    if (input_shape.size() != 3 || input_shape[0] != 1 || input_shape[1] != input_shape[2] ||
        input_shape[1] % 4 != 0) {
        throw ConfigError("desk CNN needs a [1,s,s] input with s divisible by 4, got " +
                          shape_to_string(input_shape));
    }
    const std::size_t side = input_shape[1] / 4;
    Topology topo;
    topo.input_shape = input_shape;
    topo.layers = {LayerSpec::conv(1, 8, 3, 1, 1, true),  LayerSpec::avgpool(2),
                   LayerSpec::conv(8, 16, 3, 1, 1, true), LayerSpec::avgpool(2),
                   LayerSpec::flat(),                     LayerSpec::linear(16 * side * side, num_classes, false)};
    topo.validate();
    return topo;
}

AnnNetwork AnnNetwork::initialize(Topology topology, std::uint64_t seed)
{
    topology.validate();
    AnnNetwork net;
    net.topology = std::move(topology);
    net.seed = seed;
    net.params.resize(net.topology.layers.size());
    Rng rng(seed);
    for (std::size_t i = 0; i < net.topology.layers.size(); ++i) {
        const LayerSpec& layer = net.topology.layers[i];
        if (!layer.is_parametric()) {
            continue;
        }
        const Shape wshape = net.topology.weight_shape(i);
        const std::size_t fan_in = shape_size(wshape) / wshape[0];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        Tensor weight(wshape);
        for (double& w : weight.values()) {
            w = rng.uniform(-bound, bound);
        }
        net.params[i].weight = std::move(weight);
        net.params[i].bias = Tensor(net.topology.bias_shape(i));
        net.params[i].theta = layer.has_clip ? 1.0 : 0.0;
    }
    return net;
}

void AnnNetwork::validate() const
{
    topology.validate();
    if (params.size() != topology.layers.size()) {
        throw ConfigError("network has " + std::to_string(params.size()) + " parameter slots for " +
                          std::to_string(topology.layers.size()) + " layers");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!topology.layers[i].is_parametric()) {
            continue;
        }
        if (params[i].weight.shape() != topology.weight_shape(i) ||
            params[i].bias.shape() != topology.bias_shape(i)) {
            throw ConfigError("layer " + std::to_string(i) + " parameters " +
                              shape_to_string(params[i].weight.shape()) + "/" +
                              shape_to_string(params[i].bias.shape()) + " do not match the layer spec");
        }
        if (topology.is_clipped(i) && !(params[i].theta > 0.0 && std::isfinite(params[i].theta))) {
            throw ConfigError("layer " + std::to_string(i) + " has non-positive clip bound " +
                              std::to_string(params[i].theta));
        }
    }
}

namespace {

Shape batched(std::size_t n, const Shape& shape)
{
    Shape s{n};
    s.insert(s.end(), shape.begin(), shape.end());
    return s;
}

// Dense twin of affine(): same ascending-order sum, no zero scan.
void affine_dense(const double* weight, const double* bias, const double* x, double* y, std::size_t in,
                  std::size_t out)
{
    for (std::size_t i = 0; i < out; ++i) {
        const double* row = weight + i * in;
        double sum = 0.0;
        for (std::size_t j = 0; j < in; ++j) {
            sum += row[j] * x[j];
        }
        y[i] = sum + bias[i];
    }
}

Tensor slice_sample(const Tensor& batch, std::size_t index, const Shape& shape)
{
    const std::size_t stride = shape_size(shape);
    const auto first = batch.values().begin() + static_cast<std::ptrdiff_t>(index * stride);
    return Tensor(shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(stride)));
}

void store_sample(Tensor& batch, std::size_t index, const Tensor& sample)
{
    std::copy(sample.values().begin(), sample.values().end(),
              batch.values().begin() + static_cast<std::ptrdiff_t>(index * sample.size()));
}

// Affine part of one layer over a batch.
Tensor layer_map_batch(const LayerSpec& layer, const LayerParams& params, const Tensor& x,
                       const Shape& in_shape, const Shape& out_shape)
{
    const std::size_t n = x.extent(0);
    Tensor y(batched(n, out_shape));
    switch (layer.kind) {
    case LayerKind::linear:
        for (std::size_t s = 0; s < n; ++s) {
            affine_dense(params.weight.data().data(), params.bias.data().data(), &x[s * layer.in_features],
                         &y[s * layer.out_features], layer.in_features, layer.out_features);
        }
        break;
    case LayerKind::conv2d:
        for (std::size_t s = 0; s < n; ++s) {
            store_sample(y, s,
                         conv2d(slice_sample(x, s, in_shape), params.weight, params.bias, layer.stride,
                                layer.padding));
        }
        break;
    case LayerKind::avgpool2d:
        for (std::size_t s = 0; s < n; ++s) {
            store_sample(y, s, avgpool2d(slice_sample(x, s, in_shape), layer.window));
        }
        break;
    case LayerKind::flatten:
        y.values() = x.values();
        break;
    }
    return y;
}

double clip(double z, double theta)
{
    return std::min(std::max(z, 0.0), theta);
}

void check_input(const Topology& topo, const Tensor& inputs)
{
    if (inputs.rank() < 1 || batched(inputs.extent(0), topo.input_shape) != inputs.shape()) {
        throw DimensionError("input " + shape_to_string(inputs.shape()) + " does not match network input " +
                             shape_to_string(topo.input_shape));
    }
}

}  // namespace

ForwardResult forward_batch(const AnnNetwork& net, const Tensor& inputs)
{
    check_input(net.topology, inputs);
    const auto shapes = net.topology.output_shapes();
    ForwardResult result;
    result.activations.reserve(shapes.size());
    result.pre_activations.resize(shapes.size());
    Shape in_shape = net.topology.input_shape;
    const Tensor* current = &inputs;
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        const LayerSpec& layer = net.topology.layers[l];
        Tensor z = layer_map_batch(layer, net.params[l], *current, in_shape, shapes[l]);
        if (layer.is_parametric()) {
            if (layer.has_clip) {
                Tensor a = z;
                for (double& v : a.values()) {
                    v = clip(v, net.params[l].theta);
                }
                result.pre_activations[l] = std::move(z);
                result.activations.push_back(std::move(a));
            } else {
                result.pre_activations[l] = z;
                result.activations.push_back(std::move(z));
            }
        } else {
            result.activations.push_back(std::move(z));
        }
        current = &result.activations.back();
        in_shape = shapes[l];
    }
    result.logits = result.activations.back();
    return result;
}

ForwardResult forward(const AnnNetwork& net, const Tensor& x)
{
    if (x.shape() != net.topology.input_shape) {
        throw DimensionError("input " + shape_to_string(x.shape()) + " does not match network input " +
                             shape_to_string(net.topology.input_shape));
    }
    ForwardResult batch = forward_batch(net, x.reshaped(batched(1, x.shape())));
    const auto shapes = net.topology.output_shapes();
    ForwardResult single;
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        single.activations.push_back(batch.activations[l].reshaped(shapes[l]));
        single.pre_activations.push_back(batch.pre_activations[l].empty()
                                             ? Tensor()
                                             : batch.pre_activations[l].reshaped(shapes[l]));
    }
    single.logits = single.activations.back();
    return single;
}

namespace {

void check_labels(const Tensor& inputs, std::span<const int> labels, std::size_t classes)
{
    if (labels.size() != inputs.extent(0)) {
        throw DimensionError(std::to_string(labels.size()) + " labels for a batch of " +
                             std::to_string(inputs.extent(0)));
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw ConfigError("label " + std::to_string(y) + " outside the network's " +
                              std::to_string(classes) + " outputs");
        }
    }
}

// Mean cross-entropy; fills d(loss)/d(logits) when `grad` is non-null.
double softmax_cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor* grad)
{
    const std::size_t n = logits.extent(0);
    const std::size_t classes = logits.size() / n;
    double total = 0.0;
    if (grad) {
        *grad = Tensor(logits.shape());
    }
    std::vector<double> prob(classes);
    for (std::size_t s = 0; s < n; ++s) {
        const double* z = &logits[s * classes];
        double peak = z[0];
        for (std::size_t c = 1; c < classes; ++c) {
            peak = std::max(peak, z[c]);
        }
        double norm = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            prob[c] = std::exp(z[c] - peak);
            norm += prob[c];
        }
        const std::size_t y = static_cast<std::size_t>(labels[s]);
        total += std::log(norm) - (z[y] - peak);
        if (grad) {
            for (std::size_t c = 0; c < classes; ++c) {
                (*grad)[s * classes + c] = (prob[c] / norm - (c == y ? 1.0 : 0.0)) / static_cast<double>(n);
            }
        }
    }
    return total / static_cast<double>(n);
}

void conv_backward_sample(const LayerSpec& layer, const Tensor& weight, const double* x, const Shape& in_shape,
                          const double* dz, const Shape& out_shape, Tensor& dweight, Tensor& dbias, double* dx)
{
    const std::size_t c_in = in_shape[0], h = in_shape[1], w = in_shape[2];
    const std::size_t c_out = out_shape[0], oh = out_shape[1], ow = out_shape[2];
    const std::size_t k = layer.kernel;
    const auto pad = static_cast<std::ptrdiff_t>(layer.padding);
    for (std::size_t co = 0; co < c_out; ++co) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const double g = dz[(co * oh + oy) * ow + ox];
                if (g == 0.0) {
                    continue;
                }
                dbias[co] += g;
                for (std::size_t ci = 0; ci < c_in; ++ci) {
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * layer.stride + ky) - pad;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                            continue;
                        }
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * layer.stride + kx) - pad;
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) {
                                continue;
                            }
                            const std::size_t widx = ((co * c_in + ci) * k + ky) * k + kx;
                            const std::size_t xidx =
                                (ci * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix);
                            dweight[widx] += g * x[xidx];
                            if (dx) {
                                dx[xidx] += g * weight[widx];
                            }
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

LossAndGradients loss_and_gradients(const AnnNetwork& net, const Tensor& inputs, std::span<const int> labels)
{
    const ForwardResult fwd = forward_batch(net, inputs);
    const std::size_t n = inputs.extent(0);
    const auto shapes = net.topology.output_shapes();
    check_labels(inputs, labels, shape_size(shapes.back()));

    LossAndGradients out;
    const std::size_t depth = shapes.size();
    out.grads.weight.resize(depth);
    out.grads.bias.resize(depth);
    out.grads.theta.assign(depth, 0.0);

    Tensor upstream;  // d loss / d activations[l]
    out.loss = softmax_cross_entropy(fwd.logits, labels, &upstream);

    for (std::size_t l = depth; l-- > 0;) {
        const LayerSpec& layer = net.topology.layers[l];
        const Shape in_shape = l == 0 ? net.topology.input_shape : shapes[l - 1];
        const Tensor& x = l == 0 ? inputs : fwd.activations[l - 1];
        const bool need_dx = l > 0;
        Tensor dx;
        if (need_dx) {
            dx = Tensor(batched(n, in_shape));
        }

        if (layer.is_parametric()) {
            Tensor dz = upstream;
            if (layer.has_clip) {
                const double theta = net.params[l].theta;
                const Tensor& z = fwd.pre_activations[l];
                double dtheta = 0.0;
                for (std::size_t i = 0; i < dz.size(); ++i) {
                    if (z[i] >= theta) {
                        dtheta += dz[i];
                    }
                    // Both kinks get a zero input-gradient.
                    if (!(z[i] > 0.0 && z[i] < theta)) {
                        dz[i] = 0.0;
                    }
                }
                out.grads.theta[l] = dtheta;
            }
            const LayerParams& p = net.params[l];
            Tensor dweight(p.weight.shape());
            Tensor dbias(p.bias.shape());
            if (layer.kind == LayerKind::linear) {
                const std::size_t in = layer.in_features;
                const std::size_t outf = layer.out_features;
                for (std::size_t s = 0; s < n; ++s) {
                    const double* xs = &x[s * in];
                    const double* gs = &dz[s * outf];
                    for (std::size_t o = 0; o < outf; ++o) {
                        const double g = gs[o];
                        if (g == 0.0) {
                            continue;
                        }
                        dbias[o] += g;
                        double* drow = &dweight[o * in];
                        for (std::size_t j = 0; j < in; ++j) {
                            drow[j] += g * xs[j];
                        }
                        if (need_dx) {
                            const double* wrow = &p.weight[o * in];
                            double* dxs = &dx[s * in];
                            for (std::size_t j = 0; j < in; ++j) {
                                dxs[j] += g * wrow[j];
                            }
                        }
                    }
                }
            } else {
                const std::size_t in_stride = shape_size(in_shape);
                const std::size_t out_stride = shape_size(shapes[l]);
                for (std::size_t s = 0; s < n; ++s) {
                    conv_backward_sample(layer, p.weight, &x[s * in_stride], in_shape, &dz[s * out_stride],
                                         shapes[l], dweight, dbias, need_dx ? &dx[s * in_stride] : nullptr);
                }
            }
            out.grads.weight[l] = std::move(dweight);
            out.grads.bias[l] = std::move(dbias);
        } else if (need_dx) {
            if (layer.kind == LayerKind::flatten) {
                dx.values() = upstream.values();
            } else {
                const std::size_t c = in_shape[0], h = in_shape[1], w = in_shape[2];
                const std::size_t win = layer.window;
                const std::size_t oh = h / win, ow = w / win;
                const double area = static_cast<double>(win * win);
                for (std::size_t s = 0; s < n; ++s) {
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        for (std::size_t y = 0; y < h; ++y) {
                            for (std::size_t xx = 0; xx < w; ++xx) {
                                dx[((s * c + ch) * h + y) * w + xx] =
                                    upstream[((s * c + ch) * oh + y / win) * ow + xx / win] / area;
                            }
                        }
                    }
                }
            }
        }
        upstream = std::move(dx);
    }
    return out;
}

double cross_entropy_loss(const AnnNetwork& net, const Tensor& inputs, std::span<const int> labels)
{
    const ForwardResult fwd = forward_batch(net, inputs);
    check_labels(inputs, labels, fwd.logits.size() / inputs.extent(0));
    return softmax_cross_entropy(fwd.logits, labels, nullptr);
}

void TrainConfig::validate(std::size_t dataset_size) const
{
    if (!(std::isfinite(learning_rate) && learning_rate >= 0.0)) {
        throw ConfigError("learning rate must be finite and non-negative");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw ConfigError("momentum must lie in [0,1)");
    }
    if (epochs <= 0) {
        throw ConfigError("epochs must be positive");
    }
    if (batch_size == 0 || batch_size > dataset_size) {
        throw ConfigError("batch size " + std::to_string(batch_size) + " must lie in [1, " +
                          std::to_string(dataset_size) + "]");
    }
    if (!(std::isfinite(weight_decay_w) && weight_decay_w >= 0.0 && std::isfinite(weight_decay_theta) &&
          weight_decay_theta >= 0.0)) {
        throw ConfigError("weight decays must be finite and non-negative");
    }
}

namespace {

void sgd_update(Tensor& param, Tensor& velocity, const Tensor& grad, double lr, double momentum, double decay)
{
    for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = momentum * velocity[i] + grad[i] + decay * param[i];
        param[i] -= lr * velocity[i];
    }
}

}  // namespace

AnnNetwork train(const AnnNetwork& net, const Dataset& data, const TrainConfig& cfg)
{
    net.validate();
    data.validate();
    cfg.validate(data.size());
    if (data.sample_shape() != net.topology.input_shape) {
        throw DimensionError("dataset samples " + shape_to_string(data.sample_shape()) +
                             " do not match network input " + shape_to_string(net.topology.input_shape));
    }

    AnnNetwork result = net;
    const std::size_t depth = result.params.size();
    std::vector<Tensor> vel_w(depth), vel_b(depth);
    std::vector<double> vel_theta(depth, 0.0);
    for (std::size_t l = 0; l < depth; ++l) {
        if (result.topology.layers[l].is_parametric()) {
            vel_w[l] = Tensor(result.params[l].weight.shape());
            vel_b[l] = Tensor(result.params[l].bias.shape());
        }
    }

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    const std::size_t batches = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
    std::vector<int> labels;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = cfg.learning_rate;
        if (cfg.lr_schedule == LrSchedule::cosine) {
            lr = 0.5 * cfg.learning_rate *
                 (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(cfg.epochs)));
        }
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.below(i)]);
        }
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t begin = b * cfg.batch_size;
            const std::size_t end = std::min(begin + cfg.batch_size, order.size());
            std::span<const std::size_t> idx(order.data() + begin, end - begin);
            labels.clear();
            for (std::size_t i : idx) {
                labels.push_back(data.labels[i]);
            }
            const LossAndGradients lg = loss_and_gradients(result, data.gather(idx), labels);
            if (!std::isfinite(lg.loss)) {
                throw TrainingDivergence(epoch + 1, static_cast<int>(b + 1),
                                         "training diverged at epoch " + std::to_string(epoch + 1) + ", batch " +
                                             std::to_string(b + 1));
            }
            for (std::size_t l = 0; l < depth; ++l) {
                const LayerSpec& layer = result.topology.layers[l];
                if (!layer.is_parametric()) {
                    continue;
                }
                LayerParams& p = result.params[l];
                sgd_update(p.weight, vel_w[l], lg.grads.weight[l], lr, cfg.momentum, cfg.weight_decay_w);
                sgd_update(p.bias, vel_b[l], lg.grads.bias[l], lr, cfg.momentum, cfg.weight_decay_w);
                if (layer.has_clip) {
                    vel_theta[l] = cfg.momentum * vel_theta[l] + lg.grads.theta[l] + cfg.weight_decay_theta * p.theta;
                    p.theta = std::max(p.theta - lr * vel_theta[l], min_theta);
                }
            }
        }
    }
    return result;
}

double evaluate(const AnnNetwork& net, const Dataset& data, unsigned threads)
{
    if (data.size() == 0) {
        throw ConfigError("cannot evaluate on an empty dataset");
    }
    net.validate();
    std::vector<unsigned char> correct(data.size(), 0);
    constexpr std::size_t chunk = 128;
    const std::size_t chunks = (data.size() + chunk - 1) / chunk;
    parallel_shards(chunks, resolve_threads(threads), [&](std::size_t first, std::size_t last) {
        std::vector<std::size_t> idx;
        for (std::size_t c = first; c < last; ++c) {
            idx.clear();
            for (std::size_t i = c * chunk; i < std::min((c + 1) * chunk, data.size()); ++i) {
                idx.push_back(i);
            }
            const ForwardResult fwd = forward_batch(net, data.gather(idx));
            const std::size_t classes = fwd.logits.size() / idx.size();
            for (std::size_t k = 0; k < idx.size(); ++k) {
                const std::size_t pred = argmax(std::span<const double>(&fwd.logits[k * classes], classes));
                correct[idx[k]] = pred == static_cast<std::size_t>(data.labels[idx[k]]) ? 1 : 0;
            }
        }
    });
    std::size_t hits = 0;
    for (unsigned char c : correct) {
        hits += c;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace annsnn
