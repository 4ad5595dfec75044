#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "aidp/error.hpp"

namespace aidp {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

/// Dense row-major tensor of doubles; the universal value type.
///
/// Values created from external input are checked finite once at creation;
/// internal operator outputs are trusted. `grad` is populated by the tape
/// during backward for nodes that require gradients.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    /// Uninitialized storage for operator outputs.
    static Tensor uninit(Shape shape);
    /// External-input constructor: validates length and rejects NaN/Inf.
    static Tensor from_data(Shape shape, std::vector<double> data);
    static Tensor scalar(double value);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool requires_grad = false;
    std::optional<std::vector<double>> grad;

  private:
    Shape shape_;
    std::vector<double> data_;
};

/// sign with sign(0) = 0; the convention every sign-gradient step relies on.
inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace aidp
