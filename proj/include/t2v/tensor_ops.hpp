#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "t2v/gemm.hpp"
#include "t2v/tensor.hpp"

namespace t2v {

// ---------------------------------------------------------------------------
// Broadcasting: numpy-style alignment from the trailing dimension. A stride
// of zero pins a broadcast dimension; walking the output with those strides
// covers both forward application and gradient reduction (+= through the
// zero stride sums over the broadcast axis).

struct BcPlan {
    std::vector<size_t> out_shape;
    std::vector<size_t> sa, sb;  // per-output-dim strides into a and b
    size_t out_numel = 1;
    bool same_shape = false;
};

inline BcPlan bc_plan(const std::vector<size_t>& a, const std::vector<size_t>& b) {
    BcPlan p;
    size_t nd = std::max(a.size(), b.size());
    p.out_shape.resize(nd);
    std::vector<size_t> da(nd, 1), db(nd, 1);
    std::copy(a.begin(), a.end(), da.begin() + (nd - a.size()));
    std::copy(b.begin(), b.end(), db.begin() + (nd - b.size()));
    for (size_t i = 0; i < nd; ++i) {
        if (da[i] != db[i] && da[i] != 1 && db[i] != 1)
            throw DimensionError("cannot broadcast " + shape_str(a) + " with " +
                                 shape_str(b));
        p.out_shape[i] = std::max(da[i], db[i]);
        p.out_numel *= p.out_shape[i];
    }
    p.sa.assign(nd, 0);
    p.sb.assign(nd, 0);
    size_t ra = 1, rb = 1;
    for (size_t i = nd; i-- > 0;) {
        if (da[i] != 1) p.sa[i] = ra;
        if (db[i] != 1) p.sb[i] = rb;
        ra *= da[i];
        rb *= db[i];
    }
    p.same_shape = (a == b);
    return p;
}

// Calls f(offset_a, offset_b, offset_out) for every output element, in
// row-major output order. Inner dimension is unrolled into a tight loop.
template <typename F>
inline void bc_walk(const BcPlan& p, F&& f) {
    size_t nd = p.out_shape.size();
    if (nd == 0) {
        f(size_t{0}, size_t{0}, size_t{0});
        return;
    }
    size_t last = p.out_shape[nd - 1];
    size_t sal = p.sa[nd - 1], sbl = p.sb[nd - 1];
    size_t outer = p.out_numel / last;
    std::vector<size_t> idx(nd > 0 ? nd - 1 : 0, 0);
    size_t oa0 = 0, ob0 = 0, oo = 0;
    for (size_t it = 0; it < outer; ++it) {
        size_t oa = oa0, ob = ob0;
        for (size_t j = 0; j < last; ++j) {
            f(oa, ob, oo);
            oa += sal;
            ob += sbl;
            ++oo;
        }
        for (size_t d = nd - 1; d-- > 0;) {
            oa0 += p.sa[d];
            ob0 += p.sb[d];
            if (++idx[d] < p.out_shape[d]) break;
            oa0 -= p.sa[d] * p.out_shape[d];
            ob0 -= p.sb[d] * p.out_shape[d];
            idx[d] = 0;
        }
    }
}

// ---------------------------------------------------------------------------
// Elementwise binary ops

namespace detail {

// Generic broadcast binary op: fwd(a,b) -> value, dfa/dfb compute the local
// partials given (a, b, out) at one element.
template <typename T, typename Fwd, typename Dfa, typename Dfb>
Tensor<T> binop(const Tensor<T>& a, const Tensor<T>& b, Fwd fwd, Dfa dfa, Dfb dfb) {
    BcPlan plan = bc_plan(a.shape(), b.shape());
    Tensor<T> out = Tensor<T>::zeros(plan.out_shape);
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    if (plan.same_shape) {
        size_t n = plan.out_numel;
        for (size_t i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i]);
    } else {
        bc_walk(plan, [&](size_t oa, size_t ob, size_t oo) { po[oo] = fwd(pa[oa], pb[ob]); });
    }
    if (grad_active(a, b)) {
        out.set_requires_grad(true);
        auto ia = a.impl();
        auto ib = b.impl();
        auto io = out.impl();
        bool ga = a.requires_grad(), gb = b.requires_grad();
        Tape<T>::current()->record([=] {
            io->ensure_grad();
            if (ga) ia->ensure_grad();
            if (gb) ib->ensure_grad();
            const T* av = ia->data.data();
            const T* bv = ib->data.data();
            const T* ov = io->data.data();
            const T* g = io->grad.data();
            T* gra = ga ? ia->grad.data() : nullptr;
            T* grb = gb ? ib->grad.data() : nullptr;
            bc_walk(plan, [&](size_t oa, size_t ob, size_t oo) {
                if (ga) gra[oa] += g[oo] * dfa(av[oa], bv[ob], ov[oo]);
                if (gb) grb[ob] += g[oo] * dfb(av[oa], bv[ob], ov[oo]);
            });
        });
    }
    return out;
}

// Generic elementwise unary op; dfn(x, y) is dy/dx at one element.
template <typename T, typename Fwd, typename Dfn>
Tensor<T> unop(const Tensor<T>& x, Fwd fwd, Dfn dfn) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* px = x.data();
    T* po = out.data();
    size_t n = x.numel();
    for (size_t i = 0; i < n; ++i) po[i] = fwd(px[i]);
    if (grad_active(x)) {
        out.set_requires_grad(true);
        auto ix = x.impl();
        auto io = out.impl();
        Tape<T>::current()->record([=] {
            io->ensure_grad();
            ix->ensure_grad();
            const T* xv = ix->data.data();
            const T* ov = io->data.data();
            const T* g = io->grad.data();
            T* gx = ix->grad.data();
            size_t m = ix->data.size();
            for (size_t i = 0; i < m; ++i) gx[i] += g[i] * dfn(xv[i], ov[i]);
        });
    }
    return out;
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binop(
        a, b, [](T x, T y) { return x + y; }, [](T, T, T) { return T(1); },
        [](T, T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binop(
        a, b, [](T x, T y) { return x - y; }, [](T, T, T) { return T(1); },
        [](T, T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binop(
        a, b, [](T x, T y) { return x * y; }, [](T, T y, T) { return y; },
        [](T x, T, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binop(
        a, b, [](T x, T y) { return x / y; }, [](T, T y, T) { return T(1) / y; },
        [](T x, T y, T) { return -x / (y * y); });
}

// ---------------------------------------------------------------------------
// Scalar and unary ops

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
    return detail::unop(x, [c](T v) { return v * c; }, [c](T, T) { return c; });
}

template <typename T>
Tensor<T> add_const(const Tensor<T>& x, T c) {
    return detail::unop(x, [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
    return scale(x, T(-1));
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
    return detail::unop(x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
    return detail::unop(x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
    return detail::unop(x, [](T v) { return std::log(v); },
                        [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
    return detail::unop(x, [](T v) { return std::sqrt(v); },
                        [](T, T y) { return T(1) / (T(2) * y); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return detail::unop(
        x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
        [](T, T y) { return y * (T(1) - y); });
}

// x * sigmoid(x); derivative written in terms of s = sigmoid(x).
template <typename T>
Tensor<T> silu(const Tensor<T>& x) {
    return detail::unop(
        x,
        [](T v) { return v / (T(1) + std::exp(-v)); },
        [](T v, T) {
            T s = T(1) / (T(1) + std::exp(-v));
            return s * (T(1) + v * (T(1) - s));
        });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    return detail::unop(x, [](T v) { return v > T(0) ? v : T(0); },
                        [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
    return detail::unop(x, [](T v) { return std::tanh(v); },
                        [](T, T y) { return T(1) - y * y; });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T acc = T(0);
    const T* px = x.data();
    for (size_t i = 0; i < x.numel(); ++i) acc += px[i];
    Tensor<T> out = Tensor<T>::scalar(acc);
    if (grad_active(x)) {
        out.set_requires_grad(true);
        auto ix = x.impl();
        auto io = out.impl();
        Tape<T>::current()->record([=] {
            io->ensure_grad();
            ix->ensure_grad();
            T g = io->grad[0];
            for (auto& v : ix->grad) v += g;
        });
    }
    return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    size_t n = x.numel();
    T acc = T(0);
    const T* px = x.data();
    for (size_t i = 0; i < n; ++i) acc += px[i];
    Tensor<T> out = Tensor<T>::scalar(acc / T(n));
    if (grad_active(x)) {
        out.set_requires_grad(true);
        auto ix = x.impl();
        auto io = out.impl();
        Tape<T>::current()->record([=] {
            io->ensure_grad();
            ix->ensure_grad();
            T g = io->grad[0] / T(n);
            for (auto& v : ix->grad) v += g;
        });
    }
    return out;
}

// Row sums over the last dimension: [..., N] -> [..., 1].
template <typename T>
Tensor<T> sum_lastdim(const Tensor<T>& x) {
    size_t nd = x.ndim();
    size_t N = x.dim(nd - 1);
    size_t R = x.numel() / N;
    std::vector<size_t> oshape = x.shape();
    oshape[nd - 1] = 1;
    Tensor<T> out = Tensor<T>::zeros(oshape);
    const T* px = x.data();
    T* po = out.data();
    for (size_t r = 0; r < R; ++r) {
        T acc = T(0);
        for (size_t j = 0; j < N; ++j) acc += px[r * N + j];
        po[r] = acc;
    }
    if (grad_active(x)) {
        out.set_requires_grad(true);
        auto ix = x.impl();
        auto io = out.impl();
        Tape<T>::current()->record([=] {
            io->ensure_grad();
            ix->ensure_grad();
            const T* g = io->grad.data();
            T* gx = ix->grad.data();
            for (size_t r = 0; r < R; ++r)
                for (size_t j = 0; j < N; ++j) gx[r * N + j] += g[r];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Matrix products (2-D). matmul: [M,K]x[K,N]; matmul_nt: [M,K]x[N,K]^T.

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
        throw DimensionError("matmul shapes " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    size_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
    Tensor<T> out = Tensor<T>::zeros({M, N});
    gemm_nn(M, K, N, a.data(), b.data(), out.data());
    if (grad_active(a, b)) {
        out.set_requires_grad(true);
        auto ia = a.impl();
        auto ib = b.impl();
        auto io = out.impl();
        bool ga = a.requires_grad(), gb = b.requires_grad();
        Tape<T>::current()->record([=] {
            io->ensure_grad();
            const T* g = io->grad.data();
            if (ga) {
                ia->ensure_grad();
                gemm_nt(M, N, K, g, ib->data.data(), ia->grad.data());
            }
            if (gb) {
                ib->ensure_grad();
                gemm_tn(K, M, N, ia->data.data(), g, ib->grad.data());
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1))
        throw DimensionError("matmul_nt shapes " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()) + "^T");
    size_t M = a.dim(0), K = a.dim(1), N = b.dim(0);
    Tensor<T> out = Tensor<T>::zeros({M, N});
    gemm_nt(M, K, N, a.data(), b.data(), out.data());
    if (grad_active(a, b)) {
        out.set_requires_grad(true);
        auto ia = a.impl();
        auto ib = b.impl();
        auto io = out.impl();
        bool ga = a.requires_grad(), gb = b.requires_grad();
        Tape<T>::current()->record([=] {
            io->ensure_grad();
            const T* g = io->grad.data();
            if (ga) {
                ia->ensure_grad();
                gemm_nn(M, N, K, g, ib->data.data(), ia->grad.data());
            }
            if (gb) {
                ib->ensure_grad();
                gemm_tn(N, M, K, g, ia->data.data(), ib->grad.data());
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Softmax family over the last dimension

template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
    size_t N = x.dim(x.ndim() - 1);
    size_t R = x.numel() / N;
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* px = x.data();
    T* po = out.data();
    for (size_t r = 0; r < R; ++r) {
        const T* row = px + r * N;
        T* orow = po + r * N;
        T mx = row[0];
        for (size_t j = 1; j < N; ++j) mx = std::max(mx, row[j]);
        T z = T(0);
        for (size_t j = 0; j < N; ++j) {
            orow[j] = std::exp(row[j] - mx);
            z += orow[j];
        }
        for (size_t j = 0; j < N; ++j) orow[j] /= z;
    }
    if (grad_active(x)) {
        out.set_requires_grad(true);
        auto ix = x.impl();
        auto io = out.impl();
        Tape<T>::current()->record([=] {
            io->ensure_grad();
            ix->ensure_grad();
            const T* y = io->data.data();
            const T* g = io->grad.data();
            T* gx = ix->grad.data();
            for (size_t r = 0; r < R; ++r) {
                T dot = T(0);
                for (size_t j = 0; j < N; ++j) dot += g[r * N + j] * y[r * N + j];
                for (size_t j = 0; j < N; ++j)
                    gx[r * N + j] += y[r * N + j] * (g[r * N + j] - dot);
            }
        });
    }
    return out;
}

// Mean cross entropy of logits [B,C] against integer labels. Stable
// log-sum-exp; backward is (softmax - onehot)/B.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<size_t>& labels) {
    if (logits.ndim() != 2 || logits.dim(0) != labels.size())
        throw DimensionError("cross_entropy logits " + shape_str(logits.shape()) +
                             " vs " + std::to_string(labels.size()) + " labels");
    size_t B = logits.dim(0), C = logits.dim(1);
    const T* px = logits.data();
    std::vector<T> probs(B * C);
    T loss = T(0);
    for (size_t b = 0; b < B; ++b) {
        if (labels[b] >= C)
            throw DomainError("label " + std::to_string(labels[b]) +
                              " out of range for " + std::to_string(C) + " classes");
        const T* row = px + b * C;
        T mx = row[0];
        for (size_t j = 1; j < C; ++j) mx = std::max(mx, row[j]);
        T z = T(0);
        for (size_t j = 0; j < C; ++j) {
            probs[b * C + j] = std::exp(row[j] - mx);
            z += probs[b * C + j];
        }
        for (size_t j = 0; j < C; ++j) probs[b * C + j] /= z;
        loss += std::log(z) + mx - row[labels[b]];
    }
    Tensor<T> out = Tensor<T>::scalar(loss / T(B));
    if (grad_active(logits)) {
        out.set_requires_grad(true);
        auto ix = logits.impl();
        auto io = out.impl();
        auto lab = labels;
        Tape<T>::current()->record([=, probs = std::move(probs)] {
            io->ensure_grad();
            ix->ensure_grad();
            T g = io->grad[0] / T(B);
            T* gx = ix->grad.data();
            for (size_t b = 0; b < B; ++b)
                for (size_t j = 0; j < C; ++j)
                    gx[b * C + j] += g * (probs[b * C + j] - (j == lab[b] ? T(1) : T(0)));
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normalization

// Layer norm over the last dimension with per-feature affine.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5)) {
    size_t N = x.dim(x.ndim() - 1);
    if (gamma.numel() != N || beta.numel() != N)
        throw DimensionError("layer_norm affine size mismatch for feature dim " +
                             std::to_string(N));
    size_t R = x.numel() / N;
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    std::vector<T> xhat(x.numel()), rstd(R);
    const T* px = x.data();
    const T* pg = gamma.data();
    const T* pb = beta.data();
    T* po = out.data();
    for (size_t r = 0; r < R; ++r) {
        const T* row = px + r * N;
        T mu = T(0);
        for (size_t j = 0; j < N; ++j) mu += row[j];
        mu /= T(N);
        T var = T(0);
        for (size_t j = 0; j < N; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= T(N);
        T rs = T(1) / std::sqrt(var + eps);
        rstd[r] = rs;
        for (size_t j = 0; j < N; ++j) {
            T xh = (row[j] - mu) * rs;
            xhat[r * N + j] = xh;
            po[r * N + j] = xh * pg[j] + pb[j];
        }
    }
    if (grad_active(x, gamma, beta)) {
        out.set_requires_grad(true);
        auto ix = x.impl();
        auto ig = gamma.impl();
        auto ib = beta.impl();
        auto io = out.impl();
        bool gx_ = x.requires_grad(), gg = gamma.requires_grad(), gb = beta.requires_grad();
        Tape<T>::current()->record([=, xhat = std::move(xhat), rstd = std::move(rstd)] {
            io->ensure_grad();
            const T* g = io->grad.data();
            const T* pg2 = ig->data.data();
            if (gg) ig->ensure_grad();
            if (gb) ib->ensure_grad();
            if (gx_) ix->ensure_grad();
            for (size_t r = 0; r < R; ++r) {
                const T* grow = g + r * N;
                const T* xh = xhat.data() + r * N;
                if (gg || gb) {
                    for (size_t j = 0; j < N; ++j) {
                        if (gg) ig->grad[j] += grow[j] * xh[j];
                        if (gb) ib->grad[j] += grow[j];
                    }
                }
                if (gx_) {
                    T m1 = T(0), m2 = T(0);
                    for (size_t j = 0; j < N; ++j) {
                        T gy = grow[j] * pg2[j];
                        m1 += gy;
                        m2 += gy * xh[j];
                    }
                    m1 /= T(N);
                    m2 /= T(N);
                    T* gxr = ix->grad.data() + r * N;
                    for (size_t j = 0; j < N; ++j) {
                        T gy = grow[j] * pg2[j];
                        gxr[j] += rstd[r] * (gy - m1 - xh[j] * m2);
                    }
                }
            }
        });
    }
    return out;
}

// Group norm on [B,C,H,W]: statistics per (batch, group), affine per channel.
template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, size_t groups, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5)) {
    if (x.ndim() != 4) throw DimensionError("group_norm expects [B,C,H,W], got " + shape_str(x.shape()));
    size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (C % groups != 0)
        throw DimensionError("group_norm: " + std::to_string(C) + " channels not divisible by " +
                             std::to_string(groups) + " groups");
    if (gamma.numel() != C || beta.numel() != C)
        throw DimensionError("group_norm affine size mismatch for " + std::to_string(C) + " channels");
    size_t cg = C / groups;     // channels per group
    size_t gs = cg * H * W;     // elements per group
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    std::vector<T> xhat(x.numel()), rstd(B * groups);
    const T* px = x.data();
    const T* pg = gamma.data();
    const T* pb = beta.data();
    T* po = out.data();
    for (size_t b = 0; b < B; ++b) {
        for (size_t g = 0; g < groups; ++g) {
            size_t base = b * C * H * W + g * gs;
            T mu = T(0);
            for (size_t i = 0; i < gs; ++i) mu += px[base + i];
            mu /= T(gs);
            T var = T(0);
            for (size_t i = 0; i < gs; ++i) var += (px[base + i] - mu) * (px[base + i] - mu);
            var /= T(gs);
            T rs = T(1) / std::sqrt(var + eps);
            rstd[b * groups + g] = rs;
            for (size_t i = 0; i < gs; ++i) {
                size_t c = g * cg + i / (H * W);
                T xh = (px[base + i] - mu) * rs;
                xhat[base + i] = xh;
                po[base + i] = xh * pg[c] + pb[c];
            }
        }
    }
    if (grad_active(x, gamma, beta)) {
        out.set_requires_grad(true);
        auto ix = x.impl();
        auto igm = gamma.impl();
        auto ibt = beta.impl();
        auto io = out.impl();
        bool gx_ = x.requires_grad(), gg = gamma.requires_grad(), gb = beta.requires_grad();
        Tape<T>::current()->record([=, xhat = std::move(xhat), rstd = std::move(rstd)] {
            io->ensure_grad();
            const T* g = io->grad.data();
            const T* pg2 = igm->data.data();
            if (gg) igm->ensure_grad();
            if (gb) ibt->ensure_grad();
            if (gx_) ix->ensure_grad();
            for (size_t b = 0; b < B; ++b) {
                for (size_t gi = 0; gi < groups; ++gi) {
                    size_t base = b * C * H * W + gi * gs;
                    T rs = rstd[b * groups + gi];
                    if (gg || gb) {
                        for (size_t i = 0; i < gs; ++i) {
                            size_t c = gi * cg + i / (H * W);
                            if (gg) igm->grad[c] += g[base + i] * xhat[base + i];
                            if (gb) ibt->grad[c] += g[base + i];
                        }
                    }
                    if (gx_) {
                        T m1 = T(0), m2 = T(0);
                        for (size_t i = 0; i < gs; ++i) {
                            size_t c = gi * cg + i / (H * W);
                            T gy = g[base + i] * pg2[c];
                            m1 += gy;
                            m2 += gy * xhat[base + i];
                        }
                        m1 /= T(gs);
                        m2 /= T(gs);
                        for (size_t i = 0; i < gs; ++i) {
                            size_t c = gi * cg + i / (H * W);
                            T gy = g[base + i] * pg2[c];
                            ix->grad[base + i] += rs * (gy - m1 - xhat[base + i] * m2);
                        }
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shape ops (all copying; backward routes gradients through the same map)

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, std::vector<size_t> new_shape) {
    if (shape_numel(new_shape) != x.numel())
        throw DimensionError("reshape " + shape_str(x.shape()) + " -> " +
                             shape_str(new_shape) + " changes element count");
    Tensor<T> out = Tensor<T>::from_data(std::move(new_shape), x.vec());
    if (grad_active(x)) {
        out.set_requires_grad(true);
        auto ix = x.impl();
        auto io = out.impl();
        Tape<T>::current()->record([=] {
            io->ensure_grad();
            ix->ensure_grad();
            for (size_t i = 0; i < ix->grad.size(); ++i) ix->grad[i] += io->grad[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<size_t>& axes) {
    size_t nd = x.ndim();
    if (axes.size() != nd) throw DimensionError("permute axes rank mismatch");
    std::vector<size_t> oshape(nd), xstrides(nd), ostrides_in_x(nd);
    size_t s = 1;
    for (size_t i = nd; i-- > 0;) {
        xstrides[i] = s;
        s *= x.dim(i);
    }
    for (size_t i = 0; i < nd; ++i) {
        oshape[i] = x.dim(axes[i]);
        ostrides_in_x[i] = xstrides[axes[i]];
    }
    Tensor<T> out = Tensor<T>::zeros(oshape);
    const T* px = x.data();
    T* po = out.data();
    std::vector<size_t> idx(nd, 0);
    size_t n = x.numel();
    std::vector<size_t> src_index(n);
    size_t off = 0;
    for (size_t i = 0; i < n; ++i) {
        po[i] = px[off];
        src_index[i] = off;
        for (size_t d = nd; d-- > 0;) {
            off += ostrides_in_x[d];
            if (++idx[d] < oshape[d]) break;
            off -= ostrides_in_x[d] * oshape[d];
            idx[d] = 0;
        }
    }
    if (grad_active(x)) {
        out.set_requires_grad(true);
        auto ix = x.impl();
        auto io = out.impl();
        Tape<T>::current()->record([=, src_index = std::move(src_index)] {
            io->ensure_grad();
            ix->ensure_grad();
            for (size_t i = 0; i < src_index.size(); ++i)
                ix->grad[src_index[i]] += io->grad[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, size_t axis) {
    size_t nd = a.ndim();
    if (b.ndim() != nd || axis >= nd)
        throw DimensionError("concat rank mismatch " + shape_str(a.shape()) + " / " +
                             shape_str(b.shape()));
    for (size_t i = 0; i < nd; ++i)
        if (i != axis && a.dim(i) != b.dim(i))
            throw DimensionError("concat non-axis dims differ: " + shape_str(a.shape()) +
                                 " vs " + shape_str(b.shape()));
    std::vector<size_t> oshape = a.shape();
    oshape[axis] += b.dim(axis);
    // View as [outer, axis, inner] blocks.
    size_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= a.dim(i);
    for (size_t i = axis + 1; i < nd; ++i) inner *= a.dim(i);
    size_t arun = a.dim(axis) * inner, brun = b.dim(axis) * inner;
    Tensor<T> out = Tensor<T>::zeros(oshape);
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    for (size_t o = 0; o < outer; ++o) {
        std::copy(pa + o * arun, pa + (o + 1) * arun, po + o * (arun + brun));
        std::copy(pb + o * brun, pb + (o + 1) * brun, po + o * (arun + brun) + arun);
    }
    if (grad_active(a, b)) {
        out.set_requires_grad(true);
        auto ia = a.impl();
        auto ib = b.impl();
        auto io = out.impl();
        bool ga = a.requires_grad(), gb = b.requires_grad();
        Tape<T>::current()->record([=] {
            io->ensure_grad();
            if (ga) ia->ensure_grad();
            if (gb) ib->ensure_grad();
            const T* g = io->grad.data();
            for (size_t o = 0; o < outer; ++o) {
                if (ga)
                    for (size_t i = 0; i < arun; ++i)
                        ia->grad[o * arun + i] += g[o * (arun + brun) + i];
                if (gb)
                    for (size_t i = 0; i < brun; ++i)
                        ib->grad[o * brun + i] += g[o * (arun + brun) + arun + i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, size_t axis, size_t start, size_t len) {
    size_t nd = x.ndim();
    if (axis >= nd || start + len > x.dim(axis))
        throw DimensionError("slice [" + std::to_string(start) + "," +
                             std::to_string(start + len) + ") out of range on axis " +
                             std::to_string(axis) + " of " + shape_str(x.shape()));
    std::vector<size_t> oshape = x.shape();
    oshape[axis] = len;
    size_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= x.dim(i);
    for (size_t i = axis + 1; i < nd; ++i) inner *= x.dim(i);
    size_t xrun = x.dim(axis) * inner, orun = len * inner;
    Tensor<T> out = Tensor<T>::zeros(oshape);
    const T* px = x.data();
    T* po = out.data();
    for (size_t o = 0; o < outer; ++o)
        std::copy(px + o * xrun + start * inner, px + o * xrun + (start + len) * inner,
                  po + o * orun);
    if (grad_active(x)) {
        out.set_requires_grad(true);
        auto ix = x.impl();
        auto io = out.impl();
        Tape<T>::current()->record([=] {
            io->ensure_grad();
            ix->ensure_grad();
            const T* g = io->grad.data();
            for (size_t o = 0; o < outer; ++o)
                for (size_t i = 0; i < orun; ++i)
                    ix->grad[o * xrun + start * inner + i] += g[o * orun + i];
        });
    }
    return out;
}

// Rows of an embedding table selected by index: [V,d] + n indices -> [n,d].
template <typename T>
Tensor<T> embed_rows(const Tensor<T>& table, const std::vector<size_t>& indices) {
    if (table.ndim() != 2)
        throw DimensionError("embed_rows table must be [V,d], got " + shape_str(table.shape()));
    size_t V = table.dim(0), d = table.dim(1);
    Tensor<T> out = Tensor<T>::zeros({indices.size(), d});
    const T* pt = table.data();
    T* po = out.data();
    for (size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= V)
            throw DomainError("embedding index " + std::to_string(indices[i]) +
                              " out of range for table of " + std::to_string(V));
        std::copy(pt + indices[i] * d, pt + (indices[i] + 1) * d, po + i * d);
    }
    if (grad_active(table)) {
        out.set_requires_grad(true);
        auto it = table.impl();
        auto io = out.impl();
        auto idx = indices;
        Tape<T>::current()->record([=] {
            io->ensure_grad();
            it->ensure_grad();
            const T* g = io->grad.data();
            for (size_t i = 0; i < idx.size(); ++i)
                for (size_t j = 0; j < d; ++j) it->grad[idx[i] * d + j] += g[i * d + j];
        });
    }
    return out;
}

}  // namespace t2v
