#include "annsnn/dataset.hpp"

#include <cmath>
#include <thread>

#include "annsnn/errors.hpp"

namespace annsnn {

Shape Dataset::sample_shape() const
{
    const Shape& s = inputs.shape();
    return Shape(s.begin() + 1, s.end());
}

Tensor Dataset::sample(std::size_t index) const
{
    if (index >= size()) {
        throw DimensionError("sample index " + std::to_string(index) + " out of range");
    }
    const std::size_t stride = inputs.size() / size();
    std::vector<double> values(inputs.values().begin() + static_cast<std::ptrdiff_t>(index * stride),
                               inputs.values().begin() + static_cast<std::ptrdiff_t>((index + 1) * stride));
    return Tensor(sample_shape(), std::move(values));
}

Tensor Dataset::gather(std::span<const std::size_t> indices) const
{
    const std::size_t stride = inputs.size() / size();
    Shape shape = inputs.shape();
    shape[0] = indices.size();
    std::vector<double> values;
    values.reserve(indices.size() * stride);
    for (std::size_t index : indices) {
        const auto first = inputs.values().begin() + static_cast<std::ptrdiff_t>(index * stride);
        values.insert(values.end(), first, first + static_cast<std::ptrdiff_t>(stride));
    }
    return Tensor(std::move(shape), std::move(values));
}

Dataset Dataset::head(std::size_t count) const
{
    count = std::min(count, size());
    std::vector<std::size_t> indices(count);
    for (std::size_t i = 0; i < count; ++i) {
        indices[i] = i;
    }
    return Dataset{gather(indices), std::vector<int>(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(count)),
                   num_classes};
}

Dataset Dataset::reshaped(const Shape& shape) const
{
    Shape full{size()};
    full.insert(full.end(), shape.begin(), shape.end());
    return Dataset{inputs.reshaped(std::move(full)), labels, num_classes};
}

void Dataset::validate() const
{
    if (num_classes <= 0) {
        throw ConfigError("dataset needs a positive class count");
    }
    if (labels.empty() || inputs.rank() < 2 || inputs.extent(0) != labels.size()) {
        throw ConfigError("dataset inputs " + shape_to_string(inputs.shape()) + " do not match " +
                          std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes) {
            throw ConfigError("label " + std::to_string(labels[i]) + " of sample " + std::to_string(i) +
                              " outside [0," + std::to_string(num_classes) + ")");
        }
    }
    for (double v : inputs.values()) {
        if (!std::isfinite(v)) {
            throw ConfigError("dataset contains a non-finite input");
        }
    }
}

std::size_t argmax(std::span<const double> values)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) {
            best = i;
        }
    }
    return best;
}

unsigned resolve_threads(unsigned requested)
{
    if (requested != 0) {
        return requested;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace annsnn
