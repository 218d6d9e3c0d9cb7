#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace asid {

enum class Dtype { F32, F64 };

const char* dtype_name(Dtype dt);

// Immutable N-dimensional array, row-major contiguous. Values are stored as
// doubles for both dtypes; F32 tensors hold values that have been rounded
// through IEEE single precision after every arithmetic op, which keeps runs
// deterministic and makes the 32-bit weight store a lossless round trip.
//
// A tensor may carry a reference to a node on the currently active gradient
// tape (see autograd.hpp); copies share both storage and that reference.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, Dtype dt = Dtype::F64);
    static Tensor full(std::vector<int> shape, double value, Dtype dt = Dtype::F64);
    // Takes ownership of the buffer; rounds it if dt is F32.
    static Tensor from_vector(std::vector<double> values, std::vector<int> shape,
                              Dtype dt = Dtype::F64);
    static Tensor scalar(double value, Dtype dt = Dtype::F64);

    bool defined() const { return data_ != nullptr; }
    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const;
    long long numel() const;
    Dtype dtype() const { return dtype_; }

    const double* data() const;
    const std::vector<double>& vec() const;
    double at(const std::vector<int>& index) const;
    double item() const; // requires numel() == 1

    // Same storage, new shape (element count must match).
    Tensor with_shape(std::vector<int> shape) const;
    // Same values, no tape reference.
    Tensor detached() const;
    // Copy with values re-rounded for the target dtype.
    Tensor to(Dtype dt) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

    // Tape bookkeeping (set by ops when recording; -1 means untracked).
    std::uint64_t tape_id() const { return tape_id_; }
    int node() const { return node_; }
    bool has_node() const { return node_ >= 0; }

  private:
    std::shared_ptr<const std::vector<double>> data_;
    std::vector<int> shape_;
    Dtype dtype_ = Dtype::F64;
    std::uint64_t tape_id_ = 0;
    int node_ = -1;

    friend class Tape;
};

std::string shape_to_string(const std::vector<int>& shape);
long long shape_numel(const std::vector<int>& shape);

// Rounds every element through float when dt is F32 (in place).
void round_to_dtype(std::vector<double>& values, Dtype dt);

} // namespace asid
