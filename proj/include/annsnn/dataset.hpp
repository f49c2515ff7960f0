#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "annsnn/tensor.hpp"

namespace annsnn {

struct Dataset
{
    /// [n, feature shape...]
    Tensor inputs;
    std::vector<int> labels;
    int num_classes = 0;

    std::size_t size() const { return labels.size(); }
    Shape sample_shape() const;
    Tensor sample(std::size_t index) const;
    /// Rows `indices` stacked into [k, feature shape...].
    Tensor gather(std::span<const std::size_t> indices) const;
    /// First `count` samples (all if count exceeds size).
    Dataset head(std::size_t count) const;
    /// Same samples with every input reshaped to `sample_shape`.
    Dataset reshaped(const Shape& sample_shape) const;

    /// Labels in range and inputs finite; throws ConfigError otherwise.
    void validate() const;
};

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Worker count for sample-parallel loops; 0 means hardware concurrency.
unsigned resolve_threads(unsigned requested);

}  // namespace annsnn
