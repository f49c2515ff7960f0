#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "annsnn/dataset.hpp"
#include "annsnn/tensor.hpp"

namespace annsnn {

enum class LayerKind { linear, conv2d, avgpool2d, flatten };

std::string to_string(LayerKind kind);

struct LayerSpec
{
    LayerKind kind = LayerKind::linear;

    std::size_t in_features = 0;
    std::size_t out_features = 0;

    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;

    std::size_t window = 0;

    /// clip(x; 0, theta) after the affine map. Only parametric layers may clip.
    bool has_clip = false;

    static LayerSpec linear(std::size_t in, std::size_t out, bool clip);
    static LayerSpec conv(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                          std::size_t stride, std::size_t padding, bool clip);
    static LayerSpec avgpool(std::size_t window);
    static LayerSpec flat();

    bool is_parametric() const { return kind == LayerKind::linear || kind == LayerKind::conv2d; }

    bool operator==(const LayerSpec&) const = default;
};

/// Input shape plus an ordered layer list whose shapes compose.
struct Topology
{
    Shape input_shape;
    std::vector<LayerSpec> layers;

    /// Throws ConfigError unless every layer accepts its predecessor's output.
    void validate() const;

    /// Output shape of every layer, in order.
    std::vector<Shape> output_shapes() const;
    /// Input shape seen by layer `index`.
    Shape input_shape_of(std::size_t index) const;

    Shape weight_shape(std::size_t index) const;
    Shape bias_shape(std::size_t index) const;

    /// Clipped parametric layers; these become spiking layers after conversion.
    bool is_clipped(std::size_t index) const
    {
        return layers[index].is_parametric() && layers[index].has_clip;
    }

    std::size_t clipped_count() const;

    bool operator==(const Topology&) const = default;
};

/// 784-256-128-10 style perceptron: flatten, two clipped hidden layers, linear readout.
Topology desk_mlp(const Shape& input_shape, std::size_t num_classes);

/// conv(1->8,3x3,pad 1)-avgpool2-conv(8->16,3x3,pad 1)-avgpool2-flatten-linear.
/// The input must be [1,s,s] with s divisible by 4.
Topology desk_cnn(const Shape& input_shape, std::size_t num_classes);

struct LayerParams
{
    Tensor weight;
    Tensor bias;
    double theta = 0.0;

    bool operator==(const LayerParams&) const = default;
};

struct AnnNetwork
{
    Topology topology;
    std::vector<LayerParams> params;
    std::uint64_t seed = 0;

    /// Kaiming-uniform fan-in weights, zero biases, theta = 1 on clipped layers.
    static AnnNetwork initialize(Topology topology, std::uint64_t seed);

    /// Checks topology, parameter shapes and theta > 0 on clipped layers.
    void validate() const;

    bool operator==(const AnnNetwork&) const = default;
};

struct ForwardResult
{
    Tensor logits;
    /// Output of every layer, clipped where the layer clips.
    std::vector<Tensor> activations;
    /// Affine output before the clip, for parametric layers; empty otherwise.
    std::vector<Tensor> pre_activations;
};

/// Single-sample forward pass; `x` has the topology's input shape.
ForwardResult forward(const AnnNetwork& net, const Tensor& x);

/// Batched forward pass over `inputs` of shape [n, input...]; returns
/// activations with a leading batch axis.
ForwardResult forward_batch(const AnnNetwork& net, const Tensor& inputs);

struct Gradients
{
    std::vector<Tensor> weight;
    std::vector<Tensor> bias;
    std::vector<double> theta;
};

struct LossAndGradients
{
    double loss = 0.0;
    Gradients grads;
};

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. every W, b, theta.
LossAndGradients loss_and_gradients(const AnnNetwork& net, const Tensor& inputs,
                                    std::span<const int> labels);

double cross_entropy_loss(const AnnNetwork& net, const Tensor& inputs, std::span<const int> labels);

enum class LrSchedule { constant, cosine };

struct TrainConfig
{
    double learning_rate = 0.05;
    double momentum = 0.9;
    int epochs = 20;
    std::size_t batch_size = 32;
    double weight_decay_w = 5e-4;
    double weight_decay_theta = 5e-4;
    LrSchedule lr_schedule = LrSchedule::cosine;
    std::uint64_t seed = 1;

    void validate(std::size_t dataset_size) const;
};

/// Lower bound kept on theta after every update.
inline constexpr double min_theta = 1e-3;

/// Minibatch SGD with momentum on softmax cross-entropy. Deterministic in
/// (net, data, cfg).
AnnNetwork train(const AnnNetwork& net, const Dataset& data, const TrainConfig& cfg);

/// Fraction of samples whose logit argmax (lowest index on ties) equals the label.
double evaluate(const AnnNetwork& net, const Dataset& data, unsigned threads = 0);

}  // namespace annsnn
