#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace annsnn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major array of doubles.
class Tensor
{
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    /// Rank-1 tensor holding `values`.
    static Tensor vector(std::initializer_list<double> values);
    /// Rank-2 tensor from nested rows; all rows must share one length.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    std::size_t extent(std::size_t axis) const;

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t flat) { return data_[flat]; }
    const double& operator[](std::size_t flat) const { return data_[flat]; }

    /// Row-major flat offset of a multi-index; throws DimensionError when out of range.
    std::size_t offset(std::span<const std::size_t> index) const;

    template <typename... Idx>
    double& at(Idx... idx)
    {
        const std::size_t index[] = {static_cast<std::size_t>(idx)...};
        return data_[offset(index)];
    }

    template <typename... Idx>
    double at(Idx... idx) const
    {
        const std::size_t index[] = {static_cast<std::size_t>(idx)...};
        return data_[offset(index)];
    }

    /// Same data, new shape; the element count must match.
    Tensor reshaped(Shape shape) const;

    void fill(double value);

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// [m,k] x [k,n] -> [m,n], each entry summed over k in ascending order.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Cross-correlation of [c_in,h,w] with [c_out,c_in,kh,kw] plus a [c_out] bias,
/// zero padded.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t stride, std::size_t padding);

/// Mean over non-overlapping window x window tiles of a [c,h,w] tensor.
Tensor avgpool2d(const Tensor& input, std::size_t window);

Tensor flatten(const Tensor& input);

/// Output extent of a strided window sweep; throws ConfigError when not integral.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

/// y = W x + b for W [out,in]. Zero entries of x are skipped, which leaves the
/// ascending-order sum bit-identical to the dense loop.
void affine(std::span<const double> weight, std::span<const double> bias,
            std::span<const double> x, std::span<double> y);

}  // namespace annsnn
