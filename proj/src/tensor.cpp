#include "aidp/tensor.hpp"

#include <cmath>
#include <sstream>

namespace aidp {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(Shape shape) {
    Tensor t;
    std::size_t n = shape_numel(shape);
    t.shape_ = std::move(shape);
    t.data_.assign(n, 0.0);
    return t;
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t;
    std::size_t n = shape_numel(shape);
    t.shape_ = std::move(shape);
    t.data_.assign(n, value);
    return t;
}

Tensor Tensor::uninit(Shape shape) {
    Tensor t;
    std::size_t n = shape_numel(shape);
    t.shape_ = std::move(shape);
    t.data_.resize(n);
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
    if (data.size() != shape_numel(shape))
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    for (double v : data)
        if (!std::isfinite(v)) throw DomainError("non-finite value in tensor input");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

}  // namespace aidp
