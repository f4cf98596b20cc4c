#include "vitscape/tensor.hpp"

#include "vitscape/errors.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace vitscape {

void Tensor::set_shape(std::vector<int> shape) {
    long long n = 1;
    for (int d : shape) {
        if (d <= 0) {
            throw DimensionError("tensor dimensions must be positive, got " + shape_to_string(shape));
        }
        n *= d;
    }
    shape_ = std::move(shape);
    data_.assign(static_cast<std::size_t>(n), 0.0);
    cols_ = shape_.size() >= 2 ? static_cast<std::size_t>(shape_.back()) : 0;
}

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    t.set_shape(std::move(shape));
    return t;
}

Tensor Tensor::filled(std::vector<int> shape, double value) {
    Tensor t = zeros(std::move(shape));
    for (double& x : t.data_) {
        x = value;
    }
    return t;
}

Tensor Tensor::of(std::vector<int> shape, std::vector<double> values) {
    Tensor t;
    t.set_shape(std::move(shape));
    if (t.data_.size() != values.size()) {
        throw DimensionError("value count " + std::to_string(values.size()) +
                             " does not match shape " + t.shape_str());
    }
    t.data_ = std::move(values);
    return t;
}

int Tensor::rows() const {
    if (rank() != 2) {
        throw DimensionError("rows() needs a rank-2 tensor, got " + shape_str());
    }
    return shape_[0];
}

int Tensor::cols() const {
    if (rank() != 2) {
        throw DimensionError("cols() needs a rank-2 tensor, got " + shape_str());
    }
    return shape_[1];
}

bool Tensor::same_bits(const Tensor& o) const {
    if (shape_ != o.shape_) {
        return false;
    }
    return std::memcmp(data_.data(), o.data_.data(), data_.size() * sizeof(double)) == 0;
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

std::string Tensor::shape_str() const {
    return shape_to_string(shape_);
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) {
            os << " x ";
        }
        os << shape[i];
    }
    os << "]";
    return os.str();
}

} // namespace vitscape
