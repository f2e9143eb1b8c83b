#pragma once

#include <string>
#include <utility>
#include <vector>

#include "t2v/conv.hpp"
#include "t2v/rng.hpp"
#include "t2v/tensor.hpp"
#include "t2v/tensor_ops.hpp"

namespace t2v {

// Ordered (name, tensor) registry shared by optimizers and checkpoints.
// Names are stable across runs so restore_into can rebind by name.
using ParamList = std::vector<std::pair<std::string, Tensor<float>>>;

inline std::vector<Tensor<float>> param_tensors(const ParamList& ps) {
    std::vector<Tensor<float>> out;
    out.reserve(ps.size());
    for (const auto& [name, t] : ps) out.push_back(t);
    return out;
}

inline size_t param_count(const ParamList& ps) {
    size_t n = 0;
    for (const auto& [name, t] : ps) n += t.numel();
    return n;
}

inline void set_requires_grad(ParamList& ps, bool on) {
    for (auto& [name, t] : ps) t.set_requires_grad(on);
}

// y = x·Wᵀ + b for x [B,in]; He-scaled init.
struct Linear {
    Tensor<float> w;  // [out,in]
    Tensor<float> b;  // [out]

    Linear() = default;
    Linear(size_t in, size_t out, Rng& rng, float gain = 1.0f) {
        float s = gain / std::sqrt(float(in));
        w = Tensor<float>::randn({out, in}, rng, s);
        b = Tensor<float>::zeros({out});
    }
    Tensor<float> operator()(const Tensor<float>& x) const {
        return add(matmul_nt(x, w), b);
    }
    void collect(const std::string& prefix, ParamList& out) const {
        out.emplace_back(prefix + ".w", w);
        out.emplace_back(prefix + ".b", b);
    }
};

struct Conv2dLayer {
    Tensor<float> w;  // [out,in,k,k]
    Tensor<float> b;  // [out]
    size_t stride = 1;
    size_t pad = 0;

    Conv2dLayer() = default;
    Conv2dLayer(size_t in, size_t out, size_t k, size_t stride_, size_t pad_, Rng& rng,
                bool zero_init = false) {
        stride = stride_;
        pad = pad_;
        float s = zero_init ? 0.0f : std::sqrt(2.0f / float(in * k * k));
        w = zero_init ? Tensor<float>::zeros({out, in, k, k})
                      : Tensor<float>::randn({out, in, k, k}, rng, s);
        b = Tensor<float>::zeros({out});
    }
    Tensor<float> operator()(const Tensor<float>& x) const {
        return conv2d(x, w, b, stride, pad);
    }
    void collect(const std::string& prefix, ParamList& out) const {
        out.emplace_back(prefix + ".w", w);
        out.emplace_back(prefix + ".b", b);
    }
};

struct GroupNormLayer {
    size_t groups = 1;
    Tensor<float> gamma;  // [C]
    Tensor<float> beta;   // [C]

    GroupNormLayer() = default;
    GroupNormLayer(size_t channels, size_t groups_) : groups(groups_) {
        gamma = Tensor<float>::full({channels}, 1.0f);
        beta = Tensor<float>::zeros({channels});
    }
    Tensor<float> operator()(const Tensor<float>& x) const {
        return group_norm(x, groups, gamma, beta);
    }
    void collect(const std::string& prefix, ParamList& out) const {
        out.emplace_back(prefix + ".g", gamma);
        out.emplace_back(prefix + ".b", beta);
    }
};

}  // namespace t2v
