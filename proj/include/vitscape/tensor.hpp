#pragma once

#include <string>
#include <vector>

namespace vitscape {

// Dense row-major tensor of 64-bit floats. Tensors are plain values; once an
// op has produced one it is treated as immutable.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape);
    static Tensor filled(std::vector<int> shape, double value);
    static Tensor of(std::vector<int> shape, std::vector<double> values);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    long long numel() const { return static_cast<long long>(data_.size()); }

    // rank-2 helpers
    int rows() const;
    int cols() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](long long i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](long long i) const { return data_[static_cast<std::size_t>(i)]; }
    double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool same_bits(const Tensor& o) const;
    bool all_finite() const;
    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
    std::size_t cols_ = 0; // cached for rank-2 indexing

    void set_shape(std::vector<int> shape);
};

std::string shape_to_string(const std::vector<int>& shape);

} // namespace vitscape
