#include "annsnn/tensor.hpp"

#include <sstream>

#include "annsnn/errors.hpp"

namespace annsnn {

std::size_t shape_size(const Shape& shape)
{
    std::size_t n = 1;
    for (std::size_t extent : shape) {
        n *= extent;
    }
    return n;
}

std::string shape_to_string(const Shape& shape)
{
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        out << (i ? "," : "") << shape[i];
    }
    out << ']';
    return out.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape))
{
    for (std::size_t extent : shape_) {
        if (extent == 0) {
            throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape_));
        }
    }
    data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data))
{
    for (std::size_t extent : shape_) {
        if (extent == 0) {
            throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape_));
        }
    }
    if (shape_size(shape_) != data_.size()) {
        throw DimensionError("shape " + shape_to_string(shape_) + " needs " +
                             std::to_string(shape_size(shape_)) + " values, got " +
                             std::to_string(data_.size()));
    }
}

Tensor Tensor::vector(std::initializer_list<double> values)
{
    return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows)
{
    const std::size_t cols = rows.size() ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(rows.size() * cols);
    for (const auto& row : rows) {
        if (row.size() != cols) {
            throw DimensionError("ragged matrix literal");
        }
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({rows.size(), cols}, std::move(data));
}

std::size_t Tensor::extent(std::size_t axis) const
{
    if (axis >= shape_.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                             shape_to_string(shape_));
    }
    return shape_[axis];
}

std::size_t Tensor::offset(std::span<const std::size_t> index) const
{
    if (index.size() != shape_.size()) {
        throw DimensionError("index of rank " + std::to_string(index.size()) + " into shape " +
                             shape_to_string(shape_));
    }
    std::size_t flat = 0;
    for (std::size_t axis = 0; axis < shape_.size(); ++axis) {
        if (index[axis] >= shape_[axis]) {
            throw DimensionError("index out of range for shape " + shape_to_string(shape_));
        }
        flat = flat * shape_[axis] + index[axis];
    }
    return flat;
}

Tensor Tensor::reshaped(Shape shape) const
{
    if (shape_size(shape) != data_.size()) {
        throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value)
{
    std::fill(data_.begin(), data_.end(), value);
}

Tensor matmul(const Tensor& a, const Tensor& b)
{
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
        throw DimensionError("matmul shape mismatch: " + shape_to_string(a.shape()) + " x " +
                             shape_to_string(b.shape()));
    }
    const std::size_t m = a.extent(0);
    const std::size_t k = a.extent(1);
    const std::size_t n = b.extent(1);
    Tensor out({m, n});
    // i-k-j order: each out(i,j) still accumulates over k ascending.
    for (std::size_t i = 0; i < m; ++i) {
        double* row = &out[i * n];
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            const double* brow = &b[p * n];
            for (std::size_t j = 0; j < n; ++j) {
                row[j] += aip * brow[j];
            }
        }
    }
    return out;
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding)
{
    if (stride == 0) {
        throw ConfigError("stride must be positive");
    }
    const std::size_t padded = in + 2 * padding;
    if (kernel == 0 || kernel > padded || (padded - kernel) % stride != 0) {
        throw ConfigError("window " + std::to_string(kernel) + " with stride " + std::to_string(stride) +
                          " and padding " + std::to_string(padding) +
                          " does not tile an extent of " + std::to_string(in));
    }
    return (padded - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding)
{
    if (input.rank() != 3 || kernel.rank() != 4 || bias.rank() != 1 ||
        kernel.extent(1) != input.extent(0) || bias.extent(0) != kernel.extent(0)) {
        throw DimensionError("conv2d shape mismatch: input " + shape_to_string(input.shape()) +
                             ", kernel " + shape_to_string(kernel.shape()) + ", bias " +
                             shape_to_string(bias.shape()));
    }
    const std::size_t c_in = input.extent(0);
    const std::size_t h = input.extent(1);
    const std::size_t w = input.extent(2);
    const std::size_t c_out = kernel.extent(0);
    const std::size_t kh = kernel.extent(2);
    const std::size_t kw = kernel.extent(3);
    const std::size_t oh = conv_output_extent(h, kh, stride, padding);
    const std::size_t ow = conv_output_extent(w, kw, stride, padding);

    Tensor out({c_out, oh, ow});
    for (std::size_t co = 0; co < c_out; ++co) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double sum = 0.0;
                for (std::size_t ci = 0; ci < c_in; ++ci) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                                  static_cast<std::ptrdiff_t>(padding);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
                            continue;
                        }
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                                      static_cast<std::ptrdiff_t>(padding);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) {
                                continue;
                            }
                            sum += kernel[((co * c_in + ci) * kh + ky) * kw + kx] *
                                   input[(ci * h + static_cast<std::size_t>(iy)) * w +
                                         static_cast<std::size_t>(ix)];
                        }
                    }
                }
                out[(co * oh + oy) * ow + ox] = sum + bias[co];
            }
        }
    }
    return out;
}

Tensor avgpool2d(const Tensor& input, std::size_t window)
{
    if (input.rank() != 3) {
        throw DimensionError("avgpool2d expects [c,h,w], got " + shape_to_string(input.shape()));
    }
    const std::size_t c = input.extent(0);
    const std::size_t h = input.extent(1);
    const std::size_t w = input.extent(2);
    if (window == 0 || h % window != 0 || w % window != 0) {
        throw ConfigError("pool window " + std::to_string(window) + " does not divide " +
                          shape_to_string(input.shape()));
    }
    const std::size_t oh = h / window;
    const std::size_t ow = w / window;
    const double area = static_cast<double>(window * window);
    Tensor out({c, oh, ow});
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double sum = 0.0;
                for (std::size_t dy = 0; dy < window; ++dy) {
                    for (std::size_t dx = 0; dx < window; ++dx) {
                        sum += input[(ch * h + oy * window + dy) * w + ox * window + dx];
                    }
                }
                out[(ch * oh + oy) * ow + ox] = sum / area;
            }
        }
    }
    return out;
}

Tensor flatten(const Tensor& input)
{
    return input.reshaped({input.size()});
}

void affine(std::span<const double> weight, std::span<const double> bias, std::span<const double> x,
            std::span<double> y)
{
    const std::size_t in = x.size();
    const std::size_t out = y.size();
    if (weight.size() != in * out || bias.size() != out) {
        throw DimensionError("affine: weight of " + std::to_string(weight.size()) + " values for " +
                             std::to_string(out) + "x" + std::to_string(in));
    }
    std::vector<std::size_t> active;
    active.reserve(in);
    for (std::size_t j = 0; j < in; ++j) {
        if (x[j] != 0.0) {
            active.push_back(j);
        }
    }
    for (std::size_t i = 0; i < out; ++i) {
        const double* row = weight.data() + i * in;
        double sum = 0.0;
        for (std::size_t j : active) {
            sum += row[j] * x[j];
        }
        y[i] = sum + bias[i];
    }
}

}  // namespace annsnn
