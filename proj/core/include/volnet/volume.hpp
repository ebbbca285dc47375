#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "volnet/error.hpp"

namespace volnet {

/// Dense multi-dimensional array of doubles, rank 1 to 5, row-major.
///
/// The last axis is contiguous. A rank-4 feature map uses [C,D,H,W] order,
/// a rank-5 convolution kernel [C_out,C_in,kD,kH,kW].
class Volume {
public:
    Volume() = default;

    /// Zero-initialized volume of the given shape.
    explicit Volume(std::vector<std::size_t> shape);

    Volume(std::vector<std::size_t> shape, std::vector<double> data);

    static Volume full(std::vector<std::size_t> shape, double value);

    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }

    bool same_shape(const Volume& other) const { return shape_ == other.shape_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    /// Flat offset of a multi-index; bounds are the caller's responsibility
    /// in hot loops, checked variants live in the tests.
    std::size_t offset(std::initializer_list<std::size_t> idx) const;

    double at(std::initializer_list<std::size_t> idx) const { return data_[offset(idx)]; }
    double& at(std::initializer_list<std::size_t> idx) { return data_[offset(idx)]; }

    void fill(double value);

    /// Zero-filled volume with this volume's shape.
    Volume zeros_like() const { return Volume(shape_); }

    bool all_finite() const;

    bool operator==(const Volume& other) const = default;

    /// "[2, 4, 4, 4]" style shape rendering for diagnostics.
    static std::string shape_str(const std::vector<std::size_t>& shape);
    std::string shape_str() const { return shape_str(shape_); }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

/// Product of dimensions; throws ShapeError on overflow or a zero dimension.
std::size_t shape_volume(const std::vector<std::size_t>& shape);

} // namespace volnet
