#include "asid/tensor.hpp"

#include <sstream>

#include "asid/errors.hpp"

namespace asid {

const char* dtype_name(Dtype dt) {
    return dt == Dtype::F32 ? "f32" : "f64";
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '(';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

long long shape_numel(const std::vector<int>& shape) {
    long long n = 1;
    for (int d : shape) n *= d;
    return n;
}

void round_to_dtype(std::vector<double>& values, Dtype dt) {
    if (dt != Dtype::F32) return;
    for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

static void check_shape(const std::vector<int>& shape) {
    for (int d : shape) {
        if (d <= 0)
            throw DimensionError("tensor shape must have positive extents, got " +
                                 shape_to_string(shape));
    }
}

Tensor Tensor::zeros(std::vector<int> shape, Dtype dt) {
    check_shape(shape);
    Tensor t;
    t.data_ = std::make_shared<const std::vector<double>>(shape_numel(shape), 0.0);
    t.shape_ = std::move(shape);
    t.dtype_ = dt;
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double value, Dtype dt) {
    check_shape(shape);
    std::vector<double> v(shape_numel(shape), value);
    return from_vector(std::move(v), std::move(shape), dt);
}

Tensor Tensor::from_vector(std::vector<double> values, std::vector<int> shape, Dtype dt) {
    check_shape(shape);
    if (static_cast<long long>(values.size()) != shape_numel(shape))
        throw DimensionError("buffer of " + std::to_string(values.size()) +
                             " values does not fill shape " + shape_to_string(shape));
    round_to_dtype(values, dt);
    Tensor t;
    t.data_ = std::make_shared<const std::vector<double>>(std::move(values));
    t.shape_ = std::move(shape);
    t.dtype_ = dt;
    return t;
}

Tensor Tensor::scalar(double value, Dtype dt) {
    return from_vector({value}, {1}, dt);
}

int Tensor::dim(int i) const {
    if (i < 0) i += ndim();
    if (i < 0 || i >= ndim())
        throw DimensionError("dimension index " + std::to_string(i) +
                             " out of range for shape " + shape_str());
    return shape_[i];
}

long long Tensor::numel() const {
    return defined() ? shape_numel(shape_) : 0;
}

const double* Tensor::data() const {
    return vec().data();
}

const std::vector<double>& Tensor::vec() const {
    if (!data_) throw ContractError("use of an undefined tensor");
    return *data_;
}

double Tensor::at(const std::vector<int>& index) const {
    if (static_cast<int>(index.size()) != ndim())
        throw DimensionError("index rank " + std::to_string(index.size()) +
                             " does not match shape " + shape_str());
    long long flat = 0;
    for (int i = 0; i < ndim(); ++i) {
        if (index[i] < 0 || index[i] >= shape_[i])
            throw DimensionError("index out of bounds for shape " + shape_str());
        flat = flat * shape_[i] + index[i];
    }
    return (*data_)[flat];
}

double Tensor::item() const {
    if (numel() != 1)
        throw ContractError("item() requires a single-element tensor, got " + shape_str());
    return (*data_)[0];
}

Tensor Tensor::with_shape(std::vector<int> shape) const {
    check_shape(shape);
    if (shape_numel(shape) != numel())
        throw DimensionError("reshape from " + shape_str() + " to " +
                             shape_to_string(shape) + " changes element count");
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
}

Tensor Tensor::detached() const {
    Tensor t = *this;
    t.tape_id_ = 0;
    t.node_ = -1;
    return t;
}

Tensor Tensor::to(Dtype dt) const {
    if (dt == dtype_) return detached();
    std::vector<double> v = vec();
    return from_vector(std::move(v), shape_, dt);
}

std::string Tensor::shape_str() const {
    return shape_to_string(shape_);
}

} // namespace asid
