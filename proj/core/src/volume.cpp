#include "volnet/volume.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace volnet {

std::size_t shape_volume(const std::vector<std::size_t>& shape) {
    if (shape.empty() || shape.size() > 5) {
        throw ShapeError("volume rank must be 1..5, got " + Volume::shape_str(shape));
    }
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) {
            throw ShapeError("zero dimension in shape " + Volume::shape_str(shape));
        }
        if (d > std::numeric_limits<std::size_t>::max() / n) {
            throw ShapeError("dimension overflow in shape " + Volume::shape_str(shape));
        }
        n *= d;
    }
    return n;
}

Volume::Volume(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_volume(shape_), 0.0) {}

Volume::Volume(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_volume(shape_) != data_.size()) {
        throw ShapeError("shape " + shape_str() + " does not match data length " +
                         std::to_string(data_.size()));
    }
}

Volume Volume::full(std::vector<std::size_t> shape, double value) {
    Volume v(std::move(shape));
    v.fill(value);
    return v;
}

std::size_t Volume::offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != shape_.size()) {
        throw ShapeError("index rank " + std::to_string(idx.size()) + " vs volume rank " +
                         std::to_string(shape_.size()));
    }
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) {
        flat = flat * shape_[axis] + i;
        ++axis;
    }
    return flat;
}

void Volume::fill(double value) {
    for (double& x : data_) x = value;
}

bool Volume::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::string Volume::shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

} // namespace volnet
