#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "t2v/tensor.hpp"

namespace t2v {

// Adam with bias correction. Moment buffers are keyed by parameter order,
// so the parameter list must be stable across steps. A step whose gradients
// contain any non-finite value is skipped entirely (parameters and moments
// untouched) and counted, so one bad batch cannot poison the run.
template <typename T>
class Adam {
public:
    Adam(std::vector<Tensor<T>> params, T lr, T beta1 = T(0.9), T beta2 = T(0.999),
         T eps = T(1e-8))
        : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i].numel(), T(0));
            v_[i].assign(params_[i].numel(), T(0));
        }
    }

    // Applies one update from the accumulated gradients. Returns false when
    // the step was skipped because a gradient was NaN or infinite.
    bool step() {
        for (auto& p : params_) {
            if (!p.has_grad()) continue;
            for (T g : p.grad_vec())
                if (!std::isfinite(g)) {
                    ++skipped_;
                    return false;
                }
        }
        ++t_;
        T bc1 = T(1) - std::pow(b1_, T(t_));
        T bc2 = T(1) - std::pow(b2_, T(t_));
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i];
            if (!p.has_grad()) continue;
            const std::vector<T>& g = p.grad_vec();
            T* w = p.data();
            for (size_t j = 0; j < g.size(); ++j) {
                m_[i][j] = b1_ * m_[i][j] + (T(1) - b1_) * g[j];
                v_[i][j] = b2_ * v_[i][j] + (T(1) - b2_) * g[j] * g[j];
                T mh = m_[i][j] / bc1;
                T vh = v_[i][j] / bc2;
                w[j] -= lr_ * mh / (std::sqrt(vh) + eps_);
            }
        }
        return true;
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    void set_lr(T lr) { lr_ = lr; }
    T lr() const { return lr_; }
    size_t step_count() const { return t_; }
    size_t skipped_steps() const { return skipped_; }
    const std::vector<Tensor<T>>& params() const { return params_; }

private:
    std::vector<Tensor<T>> params_;
    std::vector<std::vector<T>> m_, v_;
    T lr_, b1_, b2_, eps_;
    size_t t_ = 0;
    size_t skipped_ = 0;
};

}  // namespace t2v
