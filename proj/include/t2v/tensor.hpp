#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "t2v/error.hpp"
#include "t2v/rng.hpp"

namespace t2v {

enum class DType { f32 = 0, f64 = 1 };

template <typename T>
constexpr DType dtype_of() {
    return sizeof(T) == 4 ? DType::f32 : DType::f64;
}

inline size_t shape_numel(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

inline std::string shape_str(const std::vector<size_t>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

template <typename T>
struct TensorImpl {
    std::vector<size_t> shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until first accumulation
    bool requires_grad = false;

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }
};

template <typename T>
class Tape;

namespace detail {
template <typename T>
inline Tape<T>*& current_tape_slot() {
    thread_local Tape<T>* cur = nullptr;
    return cur;
}
}  // namespace detail

// Dense row-major tensor. Value semantics on the handle; the buffer is
// shared and must be treated as immutable once an op has recorded it.
template <typename T>
class Tensor {
public:
    using Scalar = T;

    Tensor() = default;

    static Tensor zeros(std::vector<size_t> shape) {
        Tensor t;
        t.p_ = std::make_shared<TensorImpl<T>>();
        size_t n = shape_numel(shape);
        t.p_->shape = std::move(shape);
        t.p_->data.assign(n, T(0));
        return t;
    }

    static Tensor full(std::vector<size_t> shape, T v) {
        Tensor t = zeros(std::move(shape));
        for (auto& x : t.p_->data) x = v;
        return t;
    }

    static Tensor from_data(std::vector<size_t> shape, std::vector<T> data) {
        if (shape_numel(shape) != data.size())
            throw DimensionError("tensor data size " + std::to_string(data.size()) +
                                 " does not match shape " + shape_str(shape));
        Tensor t;
        t.p_ = std::make_shared<TensorImpl<T>>();
        t.p_->shape = std::move(shape);
        t.p_->data = std::move(data);
        return t;
    }

    static Tensor scalar(T v) { return from_data({1}, {v}); }

    static Tensor randn(std::vector<size_t> shape, Rng& rng, T stddev = T(1)) {
        Tensor t = zeros(std::move(shape));
        for (auto& x : t.p_->data) x = T(rng.gaussian()) * stddev;
        return t;
    }

    static Tensor uniform(std::vector<size_t> shape, Rng& rng, T lo, T hi) {
        Tensor t = zeros(std::move(shape));
        for (auto& x : t.p_->data) x = T(rng.uniform(double(lo), double(hi)));
        return t;
    }

    bool defined() const { return p_ != nullptr; }
    const std::vector<size_t>& shape() const { return p_->shape; }
    size_t ndim() const { return p_->shape.size(); }
    size_t numel() const { return p_->data.size(); }
    size_t dim(size_t i) const { return p_->shape[i]; }
    DType dtype() const { return dtype_of<T>(); }

    T* data() { return p_->data.data(); }
    const T* data() const { return p_->data.data(); }
    std::vector<T>& vec() { return p_->data; }
    const std::vector<T>& vec() const { return p_->data; }

    T item() const {
        if (numel() != 1)
            throw ContractError("item() requires a scalar tensor, got shape " +
                                shape_str(shape()));
        return p_->data[0];
    }

    bool requires_grad() const { return p_ && p_->requires_grad; }
    Tensor& set_requires_grad(bool b) {
        p_->requires_grad = b;
        return *this;
    }

    bool has_grad() const { return p_ && p_->grad.size() == p_->data.size(); }
    std::vector<T>& grad_vec() {
        p_->ensure_grad();
        return p_->grad;
    }
    const std::vector<T>& grad_vec() const { return p_->grad; }
    void zero_grad() {
        if (p_) p_->grad.assign(p_->data.size(), T(0));
    }

    // Same values, detached from any graph. Copies, so mutation of the
    // detached tensor cannot alias recorded buffers.
    Tensor detach() const {
        Tensor t;
        t.p_ = std::make_shared<TensorImpl<T>>();
        t.p_->shape = p_->shape;
        t.p_->data = p_->data;
        return t;
    }

    Tensor clone() const { return detach(); }

    std::shared_ptr<TensorImpl<T>> impl() const { return p_; }

private:
    std::shared_ptr<TensorImpl<T>> p_;
};

// Ordered record of executed differentiable operations. Constructing a Tape
// makes it current for the thread; backward replays closures in exact
// reverse recording order. Ops only record when a tape is current and some
// input requires grad.
template <typename T>
class Tape {
public:
    Tape() : prev_(detail::current_tape_slot<T>()) {
        detail::current_tape_slot<T>() = this;
    }
    ~Tape() { detail::current_tape_slot<T>() = prev_; }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* current() { return detail::current_tape_slot<T>(); }

    void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }
    size_t node_count() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss)=1 and replays every node in reverse order.
    // Run one forward + one backward per tape; leaf gradients accumulate
    // across passes and reset only through an explicit zero_grad.
    void backward(const Tensor<T>& loss) {
        if (loss.numel() != 1)
            throw ContractError("backward requires a scalar loss, got shape " +
                                shape_str(loss.shape()));
        auto impl = loss.impl();
        impl->ensure_grad();
        impl->grad[0] += T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

    void clear() { nodes_.clear(); }

private:
    std::vector<std::function<void()>> nodes_;
    Tape* prev_ = nullptr;
};

// Temporarily disables recording (forward-only evaluation) for dtype T.
template <typename T>
class NoGradGuard {
public:
    NoGradGuard() : saved_(detail::current_tape_slot<T>()) {
        detail::current_tape_slot<T>() = nullptr;
    }
    ~NoGradGuard() { detail::current_tape_slot<T>() = saved_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    Tape<T>* saved_;
};

// True when a tape is current and any argument wants gradients. Ops that
// record must mark their output requires_grad so gradient-ness propagates
// through intermediates.
template <typename T, typename... Ts>
inline bool grad_active(const Tensor<T>& first, const Ts&... rest) {
    if (!Tape<T>::current()) return false;
    bool any = first.requires_grad();
    ((any = any || rest.requires_grad()), ...);
    return any;
}

}  // namespace t2v
