#pragma once

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "t2v/tensor_ops.hpp"

namespace t2v {

// ---------------------------------------------------------------------------
// State-space block parameters. The state transition is kept diagonal
// (vector a of length d_state), which the recurrence treats as diag(A).
// selective=true adds per-entry affine modulation of B and C by the current
// input: effectively B_t x_t = B x_t + Bg (x_t*x_t) on the state side and
// an extra x_t * (Cg h_t) term on the readout. use_conv enables a causal
// depthwise convolution branch applied before the scan.

template <typename T>
struct SSMBlockParams {
    size_t d_state = 0, d_model = 0;
    bool selective = false;
    bool use_conv = false;
    Tensor<T> a;             // [d_state], diagonal of the transition matrix
    Tensor<T> B;             // [d_state, d_model]
    Tensor<T> C;             // [d_model, d_state]
    Tensor<T> d;             // [d_model], feedthrough
    Tensor<T> Bg, Cg;        // selective modulation, shaped like B and C
    Tensor<T> conv_w, conv_b;  // [d_model, k], [d_model]

    static SSMBlockParams init(size_t d_state, size_t d_model, Rng& rng,
                               bool selective = false, bool use_conv = false,
                               size_t conv_k = 4) {
        SSMBlockParams p;
        p.d_state = d_state;
        p.d_model = d_model;
        p.selective = selective;
        p.use_conv = use_conv;
        // entries of exp(-softplus(raw)) lie in (0,1): bounded spectral radius
        p.a = Tensor<T>::zeros({d_state});
        for (auto& v : p.a.vec()) {
            T raw = T(rng.gaussian());
            T sp = std::log(T(1) + std::exp(raw));
            v = std::exp(-sp);
        }
        p.B = Tensor<T>::randn({d_state, d_model}, rng, T(0.02));
        p.C = Tensor<T>::randn({d_model, d_state}, rng, T(0.02));
        p.d = Tensor<T>::full({d_model}, T(1));
        if (selective) {
            p.Bg = Tensor<T>::randn({d_state, d_model}, rng, T(0.02));
            p.Cg = Tensor<T>::randn({d_model, d_state}, rng, T(0.02));
        }
        if (use_conv) {
            p.conv_w = Tensor<T>::randn({d_model, conv_k}, rng, T(0.02));
            p.conv_b = Tensor<T>::zeros({d_model});
        }
        return p;
    }

    void validate() const {
        if (a.shape() != std::vector<size_t>{d_state} ||
            B.shape() != std::vector<size_t>{d_state, d_model} ||
            C.shape() != std::vector<size_t>{d_model, d_state} ||
            d.shape() != std::vector<size_t>{d_model})
            throw DimensionError("ssm parameter shapes inconsistent with d_state=" +
                                 std::to_string(d_state) + ", d_model=" +
                                 std::to_string(d_model));
        if (selective && (Bg.shape() != B.shape() || Cg.shape() != C.shape()))
            throw DimensionError("selective modulation shapes must match B and C");
        if (use_conv && (conv_w.ndim() != 2 || conv_w.dim(0) != d_model ||
                         conv_b.shape() != std::vector<size_t>{d_model}))
            throw DimensionError("conv branch shapes inconsistent with d_model");
    }

    std::vector<Tensor<T>> parameters() {
        std::vector<Tensor<T>> out = {a, B, C, d};
        if (selective) {
            out.push_back(Bg);
            out.push_back(Cg);
        }
        if (use_conv) {
            out.push_back(conv_w);
            out.push_back(conv_b);
        }
        return out;
    }

    size_t param_count() const {
        size_t n = d_state + 2 * d_state * d_model + d_model;
        if (selective) n += 2 * d_state * d_model;
        if (use_conv) n += conv_w.numel() + d_model;
        return n;
    }
};

// ---------------------------------------------------------------------------
// Sequential scan h_t = diag(a) h_{t-1} + B x_t, y_t = C h_t + d*x_t, run
// in chunks of `block` timesteps with the state carried across boundaries.
// Chunking only restructures the loop, so outputs are bit-identical for any
// block size. One fused tape node carries the whole backward-through-time
// pass; saved states are materialized only when recording.

template <typename T>
Tensor<T> ssm_scan_blocked(const SSMBlockParams<T>& p, const Tensor<T>& x,
                           const Tensor<T>& h0, size_t block) {
    p.validate();
    if (block < 1) throw ContractError("scan block size must be >= 1");
    if (x.ndim() != 2 || x.dim(0) < 1)
        throw ContractError("scan needs at least one timestep");
    if (x.dim(1) != p.d_model)
        throw DimensionError("scan input " + shape_str(x.shape()) +
                             " does not match d_model=" + std::to_string(p.d_model));
    if (h0.shape() != std::vector<size_t>{p.d_state})
        throw DimensionError("initial state " + shape_str(h0.shape()) +
                             " does not match d_state=" + std::to_string(p.d_state));
    size_t L = x.dim(0), M = p.d_model, N = p.d_state;
    bool rec = grad_active(x, h0, p.a, p.B, p.C, p.d) ||
               (p.selective && grad_active(p.Bg, p.Cg));

    Tensor<T> y = Tensor<T>::zeros({L, M});
    std::vector<T> h(h0.vec());
    std::vector<T> hsave;  // h_t after each update, only kept for backward
    if (rec) hsave.resize(L * N);

    const T* av = p.a.data();
    const T* Bv = p.B.data();
    const T* Cv = p.C.data();
    const T* dv = p.d.data();
    const T* Bgv = p.selective ? p.Bg.data() : nullptr;
    const T* Cgv = p.selective ? p.Cg.data() : nullptr;
    const T* xv = x.data();
    T* yv = y.data();

    for (size_t c0 = 0; c0 < L; c0 += block) {
        size_t c1 = std::min(c0 + block, L);
        for (size_t t = c0; t < c1; ++t) {
            const T* xt = xv + t * M;
            for (size_t n = 0; n < N; ++n) {
                T acc = av[n] * h[n];
                const T* Brow = Bv + n * M;
                for (size_t m = 0; m < M; ++m) acc += Brow[m] * xt[m];
                if (Bgv) {
                    const T* Bgrow = Bgv + n * M;
                    for (size_t m = 0; m < M; ++m) acc += Bgrow[m] * xt[m] * xt[m];
                }
                h[n] = acc;
            }
            if (rec) std::copy(h.begin(), h.end(), hsave.begin() + t * N);
            T* yt = yv + t * M;
            for (size_t m = 0; m < M; ++m) {
                T acc = dv[m] * xt[m];
                const T* Crow = Cv + m * N;
                for (size_t n = 0; n < N; ++n) acc += Crow[n] * h[n];
                if (Cgv) {
                    const T* Cgrow = Cgv + m * N;
                    T sel = T(0);
                    for (size_t n = 0; n < N; ++n) sel += Cgrow[n] * h[n];
                    acc += xt[m] * sel;
                }
                yt[m] = acc;
            }
        }
    }

    if (rec) {
        y.set_requires_grad(true);
        auto ix = x.impl();
        auto ih = h0.impl();
        auto ia = p.a.impl();
        auto iB = p.B.impl();
        auto iC = p.C.impl();
        auto id = p.d.impl();
        auto iBg = p.selective ? p.Bg.impl() : nullptr;
        auto iCg = p.selective ? p.Cg.impl() : nullptr;
        auto iy = y.impl();
        bool gx = x.requires_grad(), gh0 = h0.requires_grad();
        bool ga = p.a.requires_grad(), gB = p.B.requires_grad();
        bool gC = p.C.requires_grad(), gd = p.d.requires_grad();
        bool gBg = p.selective && p.Bg.requires_grad();
        bool gCg = p.selective && p.Cg.requires_grad();
        Tape<T>::current()->record([=, hsave = std::move(hsave), h0v = h0.vec()] {
            iy->ensure_grad();
            if (gx) ix->ensure_grad();
            if (gh0) ih->ensure_grad();
            if (ga) ia->ensure_grad();
            if (gB) iB->ensure_grad();
            if (gC) iC->ensure_grad();
            if (gd) id->ensure_grad();
            if (gBg) iBg->ensure_grad();
            if (gCg) iCg->ensure_grad();
            const T* xv2 = ix->data.data();
            const T* av2 = ia->data.data();
            const T* Bv2 = iB->data.data();
            const T* Cv2 = iC->data.data();
            const T* dv2 = id->data.data();
            const T* Bgv2 = iBg ? iBg->data.data() : nullptr;
            const T* Cgv2 = iCg ? iCg->data.data() : nullptr;
            const T* gy = iy->grad.data();
            std::vector<T> gh(N, T(0));  // d loss / d h_t while walking back
            for (size_t t = L; t-- > 0;) {
                const T* xt = xv2 + t * M;
                const T* ht = hsave.data() + t * N;
                const T* hprev = t == 0 ? h0v.data() : hsave.data() + (t - 1) * N;
                const T* gyt = gy + t * M;
                // readout y_t = C h_t + x_t*(Cg h_t) + d*x_t
                for (size_t m = 0; m < M; ++m) {
                    T g = gyt[m];
                    const T* Crow = Cv2 + m * N;
                    for (size_t n = 0; n < N; ++n) gh[n] += Crow[n] * g;
                    if (gC)
                        for (size_t n = 0; n < N; ++n) iC->grad[m * N + n] += g * ht[n];
                    if (gd) id->grad[m] += g * xt[m];
                    if (gx) ix->grad[t * M + m] += dv2[m] * g;
                    if (Cgv2) {
                        const T* Cgrow = Cgv2 + m * N;
                        T gxm = g * xt[m];
                        for (size_t n = 0; n < N; ++n) gh[n] += Cgrow[n] * gxm;
                        if (gCg)
                            for (size_t n = 0; n < N; ++n)
                                iCg->grad[m * N + n] += gxm * ht[n];
                        if (gx) {
                            T sel = T(0);
                            for (size_t n = 0; n < N; ++n) sel += Cgrow[n] * ht[n];
                            ix->grad[t * M + m] += g * sel;
                        }
                    }
                }
                // transition h_t = a*h_{t-1} + B x_t (+ Bg x_t^2)
                for (size_t n = 0; n < N; ++n) {
                    T g = gh[n];
                    if (ga) ia->grad[n] += g * hprev[n];
                    const T* Brow = Bv2 + n * M;
                    if (gB)
                        for (size_t m = 0; m < M; ++m) iB->grad[n * M + m] += g * xt[m];
                    if (gx)
                        for (size_t m = 0; m < M; ++m) ix->grad[t * M + m] += Brow[m] * g;
                    if (Bgv2) {
                        const T* Bgrow = Bgv2 + n * M;
                        if (gBg)
                            for (size_t m = 0; m < M; ++m)
                                iBg->grad[n * M + m] += g * xt[m] * xt[m];
                        if (gx)
                            for (size_t m = 0; m < M; ++m)
                                ix->grad[t * M + m] += T(2) * Bgrow[m] * xt[m] * g;
                    }
                    gh[n] = av2[n] * g;  // flows to h_{t-1}
                }
            }
            if (gh0)
                for (size_t n = 0; n < N; ++n) ih->grad[n] += gh[n];
        });
    }
    return y;
}

template <typename T>
Tensor<T> ssm_scan(const SSMBlockParams<T>& p, const Tensor<T>& x, const Tensor<T>& h0) {
    return ssm_scan_blocked(p, x, h0, x.dim(0) > 0 ? x.dim(0) : 1);
}

// ---------------------------------------------------------------------------
// Sequence reversal along the first axis, differentiable.

template <typename T>
Tensor<T> reverse_rows(const Tensor<T>& x) {
    if (x.ndim() != 2) throw DimensionError("reverse_rows expects [L,d]");
    size_t L = x.dim(0), M = x.dim(1);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    for (size_t t = 0; t < L; ++t)
        std::copy(x.data() + t * M, x.data() + (t + 1) * M,
                  out.data() + (L - 1 - t) * M);
    if (grad_active(x)) {
        out.set_requires_grad(true);
        auto ix = x.impl();
        auto io = out.impl();
        Tape<T>::current()->record([=] {
            io->ensure_grad();
            ix->ensure_grad();
            for (size_t t = 0; t < L; ++t)
                for (size_t m = 0; m < M; ++m)
                    ix->grad[t * M + m] += io->grad[(L - 1 - t) * M + m];
        });
    }
    return out;
}

// Causal depthwise 1-D convolution over the sequence axis: each channel has
// its own k-tap filter looking backward in time.
template <typename T>
Tensor<T> dwconv1d_causal(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (x.ndim() != 2 || w.ndim() != 2 || w.dim(0) != x.dim(1) || b.numel() != x.dim(1))
        throw DimensionError("dwconv1d shapes: x " + shape_str(x.shape()) + ", w " +
                             shape_str(w.shape()));
    size_t L = x.dim(0), M = x.dim(1), K = w.dim(1);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    const T* xv = x.data();
    const T* wv = w.data();
    const T* bv = b.data();
    T* yv = out.data();
    for (size_t t = 0; t < L; ++t)
        for (size_t m = 0; m < M; ++m) {
            T acc = bv[m];
            for (size_t k = 0; k < K && k <= t; ++k) acc += wv[m * K + k] * xv[(t - k) * M + m];
            yv[t * M + m] = acc;
        }
    if (grad_active(x, w, b)) {
        out.set_requires_grad(true);
        auto ix = x.impl();
        auto iw = w.impl();
        auto ib = b.impl();
        auto io = out.impl();
        bool gx = x.requires_grad(), gw = w.requires_grad(), gb = b.requires_grad();
        Tape<T>::current()->record([=] {
            io->ensure_grad();
            if (gx) ix->ensure_grad();
            if (gw) iw->ensure_grad();
            if (gb) ib->ensure_grad();
            const T* g = io->grad.data();
            const T* xv2 = ix->data.data();
            const T* wv2 = iw->data.data();
            for (size_t t = 0; t < L; ++t)
                for (size_t m = 0; m < M; ++m) {
                    T gy = g[t * M + m];
                    if (gb) ib->grad[m] += gy;
                    for (size_t k = 0; k < K && k <= t; ++k) {
                        if (gw) iw->grad[m * K + k] += gy * xv2[(t - k) * M + m];
                        if (gx) ix->grad[(t - k) * M + m] += gy * wv2[m * K + k];
                    }
                }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bidirectional block: forward scan plus a reversed scan of the reversed
// sequence, fused with a residual connection. Each direction owns its
// parameters (and optional conv branch).

template <typename T>
Tensor<T> bimamba_block(const SSMBlockParams<T>& fwd, const SSMBlockParams<T>& bwd,
                        const Tensor<T>& x) {
    if (fwd.d_model != bwd.d_model)
        throw DimensionError("bimamba directions disagree on d_model: " +
                             std::to_string(fwd.d_model) + " vs " +
                             std::to_string(bwd.d_model));
    Tensor<T> hf = Tensor<T>::zeros({fwd.d_state});
    Tensor<T> hb = Tensor<T>::zeros({bwd.d_state});
    Tensor<T> xf = fwd.use_conv ? dwconv1d_causal(x, fwd.conv_w, fwd.conv_b) : x;
    Tensor<T> yf = ssm_scan(fwd, xf, hf);
    Tensor<T> xr = reverse_rows(x);
    Tensor<T> xb = bwd.use_conv ? dwconv1d_causal(xr, bwd.conv_w, bwd.conv_b) : xr;
    Tensor<T> yb = reverse_rows(ssm_scan(bwd, xb, hb));
    return add(add(yf, yb), x);
}

// ---------------------------------------------------------------------------
// Multi-head self-attention baseline with residual, no positional encoding.

template <typename T>
struct MHSAParams {
    size_t heads = 0, d_model = 0;
    Tensor<T> Wq, Wk, Wv, Wo;  // [d_model, d_model]
    Tensor<T> bq, bk, bv, bo;  // [d_model]

    static MHSAParams init(size_t heads, size_t d_model, Rng& rng) {
        if (heads == 0 || d_model % heads != 0)
            throw ConfigError("d_model " + std::to_string(d_model) +
                              " not divisible by heads " + std::to_string(heads));
        MHSAParams p;
        p.heads = heads;
        p.d_model = d_model;
        T s = T(1) / std::sqrt(T(d_model));
        p.Wq = Tensor<T>::randn({d_model, d_model}, rng, s);
        p.Wk = Tensor<T>::randn({d_model, d_model}, rng, s);
        p.Wv = Tensor<T>::randn({d_model, d_model}, rng, s);
        p.Wo = Tensor<T>::randn({d_model, d_model}, rng, s);
        p.bq = Tensor<T>::zeros({d_model});
        p.bk = Tensor<T>::zeros({d_model});
        p.bv = Tensor<T>::zeros({d_model});
        p.bo = Tensor<T>::zeros({d_model});
        return p;
    }

    std::vector<Tensor<T>> parameters() { return {Wq, Wk, Wv, Wo, bq, bk, bv, bo}; }
    size_t param_count() const { return 4 * d_model * d_model + 4 * d_model; }
};

// probs_out, when given, receives the [L,L] attention matrix of each head.
template <typename T>
Tensor<T> mhsa_block(const MHSAParams<T>& p, const Tensor<T>& x,
                     std::vector<Tensor<T>>* probs_out = nullptr) {
    if (p.heads == 0 || p.d_model % p.heads != 0)
        throw ConfigError("d_model not divisible by heads");
    if (x.ndim() != 2 || x.dim(1) != p.d_model)
        throw DimensionError("mhsa input " + shape_str(x.shape()) +
                             " does not match d_model=" + std::to_string(p.d_model));
    size_t dh = p.d_model / p.heads;
    Tensor<T> q = add(matmul(x, p.Wq), p.bq);
    Tensor<T> k = add(matmul(x, p.Wk), p.bk);
    Tensor<T> v = add(matmul(x, p.Wv), p.bv);
    Tensor<T> heads_out;
    for (size_t h = 0; h < p.heads; ++h) {
        Tensor<T> qh = slice(q, 1, h * dh, dh);
        Tensor<T> kh = slice(k, 1, h * dh, dh);
        Tensor<T> vh = slice(v, 1, h * dh, dh);
        Tensor<T> scores = scale(matmul_nt(qh, kh), T(1) / std::sqrt(T(dh)));
        Tensor<T> probs = softmax_lastdim(scores);
        if (probs_out) probs_out->push_back(probs);
        Tensor<T> oh = matmul(probs, vh);
        heads_out = h == 0 ? oh : concat(heads_out, oh, 1);
    }
    return add(add(matmul(heads_out, p.Wo), p.bo), x);
}

// ---------------------------------------------------------------------------
// Efficiency benchmark

struct BenchRecord {
    std::string block_kind;  // "mamba" or "mhsa"
    size_t seq_len = 0;
    size_t param_count = 0;
    size_t peak_memory_bytes = 0;
    uint64_t wall_time_ns = 0;
};

// Analytic transient-buffer totals for one forward pass (inference path).
inline size_t bimamba_peak_bytes(size_t L, size_t d_model, size_t d_state) {
    // reversed input + two scan outputs + fused sum + two hidden states
    return sizeof(float) * (4 * L * d_model + 2 * d_state);
}
inline size_t mhsa_peak_bytes(size_t L, size_t d_model) {
    // q,k,v + head outputs + final, plus scores and probs of the live head
    return sizeof(float) * (5 * L * d_model + 2 * L * L);
}

std::vector<BenchRecord> bench_blocks(const std::vector<size_t>& seq_lens,
                                      size_t d_model, size_t heads, size_t d_state,
                                      size_t repeats);
void write_bench_csv(const std::string& path, const std::vector<BenchRecord>& records);

// Least-squares slope of log(time) against log(L) for one block kind.
double bench_loglog_slope(const std::vector<BenchRecord>& records,
                          const std::string& kind);

}  // namespace t2v
