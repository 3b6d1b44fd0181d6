#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "modrec/errors.hpp"
#include "modrec/rng.hpp"

namespace modrec {

using Shape = std::vector<std::size_t>;

// 64-byte-aligned storage so Eigen's vectorized kernels always see the
// same alignment; keeps elementwise kernels bit-reproducible no matter
// where the heap places a buffer.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t kAlign = 64;

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(kAlign)));
    }
    void deallocate(T* p, std::size_t) { ::operator delete(p, std::align_val_t(kAlign)); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const {
        return true;
    }
};

template <typename T>
using AlignedBuffer = std::vector<T, AlignedAllocator<T>>;

inline std::size_t shape_volume(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

// Dense row-major n-dimensional array. The scalar type doubles as the
// dtype tag: float for training, double for gradient checks. Tensors are
// plain values; treat them as immutable once built when sharing across
// threads.
template <typename S>
class Tensor {
  public:
    using Scalar = S;

    Tensor() = default;

    explicit Tensor(Shape shape, S fill = S{0})
        : shape_(std::move(shape)), data_(checked_volume(shape_), fill) {}

    Tensor(Shape shape, const std::vector<S>& values)
        : shape_(std::move(shape)), data_(values.begin(), values.end()) {
        if (data_.size() != checked_volume(shape_)) {
            throw SizeError("tensor: " + std::to_string(data_.size()) + " values do not fill shape " +
                            shape_str(shape_));
        }
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, S value) { return Tensor(std::move(shape), value); }

    static Tensor from(Shape shape, const std::vector<S>& values) {
        return Tensor(std::move(shape), values);
    }

    static Tensor scalar(S value) { return Tensor({1}, std::vector<S>{value}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }

    S* data() { return data_.data(); }
    const S* data() const { return data_.data(); }
    std::span<S> values() { return data_; }
    std::span<const S> values() const { return data_; }

    S& operator[](std::size_t flat) { return data_[flat]; }
    const S& operator[](std::size_t flat) const { return data_[flat]; }

    S& at(std::size_t i) { return data_[i]; }
    const S& at(std::size_t i) const { return data_[i]; }
    S& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    const S& at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    S& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    const S& at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    // Row-major strides; stride of the last axis is 1.
    Shape strides() const {
        Shape s(shape_.size(), 1);
        for (std::size_t d = shape_.size(); d-- > 1;) s[d - 1] = s[d] * shape_[d];
        return s;
    }

    // Same data, new shape; volumes must agree.
    Tensor reshaped(Shape shape) const {
        if (shape_volume(shape) != data_.size()) {
            throw ShapeError("reshape: " + shape_str(shape_) + " -> " + shape_str(shape) +
                             " changes element count");
        }
        Tensor out;
        out.shape_ = std::move(shape);
        out.data_ = data_;
        return out;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    bool all_finite() const {
        for (S v : data_) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    template <typename T>
    Tensor<T> cast() const {
        std::vector<T> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<T>(data_[i]);
        return Tensor<T>(shape_, std::move(out));
    }

    bool operator==(const Tensor& other) const = default;

  private:
    static std::size_t checked_volume(const Shape& shape) {
        for (std::size_t e : shape) {
            if (e == 0) throw SizeError("tensor: zero extent in shape " + shape_str(shape));
        }
        return shape_volume(shape);
    }

    Shape shape_;
    AlignedBuffer<S> data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

template <typename S>
using EigenMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MatMap = Eigen::Map<EigenMat<S>>;
template <typename S>
using ConstMatMap = Eigen::Map<const EigenMat<S>>;

template <typename S>
ConstMatMap<S> as_matrix(const Tensor<S>& t, std::size_t rows, std::size_t cols) {
    return ConstMatMap<S>(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <typename S>
MatMap<S> as_matrix(Tensor<S>& t, std::size_t rows, std::size_t cols) {
    return MatMap<S>(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <typename S>
inline void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
    }
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    check_same_shape(a, b, "add");
    Tensor<S> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
    check_same_shape(a, b, "sub");
    Tensor<S> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    check_same_shape(a, b, "mul");
    Tensor<S> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S k) {
    Tensor<S> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= k;
    return out;
}

// Standard matrix product, [m x k] * [k x n] -> [m x n]. Runs single
// threaded through Eigen, so results are identical run to run.
template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul: expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    if (a.extent(1) != b.extent(0)) {
        throw ShapeError("matmul: inner extents disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor<S> out({m, n});
    as_matrix(out, m, n).noalias() = as_matrix(a, m, k) * as_matrix(b, k, n);
    return out;
}

// Channel-wise concatenation of [C_i x H x W] maps; spatial extents must
// agree and blocks keep argument order.
template <typename S>
Tensor<S> concat_channels(std::span<const Tensor<S>> parts) {
    if (parts.empty()) throw ContractError("concat_channels: no inputs");
    for (const auto& p : parts) {
        if (p.rank() != 3) {
            throw ShapeError("concat_channels: expects [CxHxW] tensors, got " + shape_str(p.shape()));
        }
    }
    const std::size_t h = parts[0].extent(1), w = parts[0].extent(2);
    std::size_t channels = 0;
    for (const auto& p : parts) {
        if (p.extent(1) != h || p.extent(2) != w) {
            throw ShapeError("concat_channels: spatial extents differ, " + shape_str(parts[0].shape()) +
                             " vs " + shape_str(p.shape()));
        }
        channels += p.extent(0);
    }
    Tensor<S> out({channels, h, w});
    S* dst = out.data();
    for (const auto& p : parts) {
        std::copy(p.data(), p.data() + p.size(), dst);
        dst += p.size();
    }
    return out;
}

template <typename S>
Tensor<S> concat_channels(std::initializer_list<Tensor<S>> parts) {
    std::vector<Tensor<S>> v(parts);
    return concat_channels(std::span<const Tensor<S>>(v));
}

template <typename S>
S sum(const Tensor<S>& t) {
    S acc{0};
    for (S v : t.values()) acc += v;
    return acc;
}

// Uniform draws in [lo, hi), row-major fill order.
template <typename S>
Tensor<S> uniform_tensor(Rng& rng, Shape shape, double lo, double hi) {
    Tensor<S> out(std::move(shape));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<S>(rng.uniform(lo, hi));
    return out;
}

// FNV-1a over the raw bytes; used for determinism checks.
inline std::uint64_t fnv1a(const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

template <typename S>
std::uint64_t content_hash(const Tensor<S>& t) {
    return fnv1a(t.data(), t.size() * sizeof(S));
}

}  // namespace modrec
