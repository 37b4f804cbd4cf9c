#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace lvtos {

size_t shape_product(const std::vector<size_t>& shape);
std::string shape_to_string(const std::vector<size_t>& shape);

// Dense row-major f64 array with an optional same-shape gradient buffer.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<size_t> shape);
    Tensor(std::vector<size_t> shape, std::vector<double> data);

    static Tensor full(std::vector<size_t> shape, double value);

    const std::vector<size_t>& shape() const { return shape_; }
    size_t ndim() const { return shape_.size(); }
    size_t size() const { return data_.size(); }
    size_t dim(size_t i) const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double& at2(size_t i, size_t j) { return data_[i * shape_[1] + j]; }
    double at2(size_t i, size_t j) const { return data_[i * shape_[1] + j]; }
    double& at3(size_t i, size_t j, size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double at3(size_t i, size_t j, size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double& at4(size_t n, size_t c, size_t y, size_t x) {
        return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    double at4(size_t n, size_t c, size_t y, size_t x) const {
        return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    void fill(double value);
    bool all_finite() const;

    // Gradient buffer. Absent until ensure_grad(); always shape-matched to data.
    bool has_grad() const { return !grad_.empty(); }
    void ensure_grad();
    void zero_grad();
    void drop_grad() { grad_.clear(); }
    double* grad() { return grad_.data(); }
    const double* grad() const { return grad_.data(); }
    std::vector<double>& grad_values() { return grad_; }
    const std::vector<double>& grad_values() const { return grad_; }

private:
    std::vector<size_t> shape_;
    std::vector<double> data_;
    std::vector<double> grad_;
};

}  // namespace lvtos
