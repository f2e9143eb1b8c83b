#pragma once

#include <vector>

#include "t2v/gemm.hpp"
#include "t2v/tensor.hpp"

namespace t2v {

// Unfolds one image [C,H,W] into columns [C*kh*kw, Ho*Wo], zero padding
// outside the frame. Shared by the conv forward and its weight/input grads
// (the backward recomputes columns instead of keeping them alive).
template <typename T>
void im2col(const T* x, size_t C, size_t H, size_t W, size_t kh, size_t kw,
            size_t stride, size_t pad, size_t Ho, size_t Wo, T* cols) {
    for (size_t c = 0; c < C; ++c) {
        for (size_t ki = 0; ki < kh; ++ki) {
            for (size_t kj = 0; kj < kw; ++kj) {
                T* row = cols + ((c * kh + ki) * kw + kj) * (Ho * Wo);
                for (size_t ho = 0; ho < Ho; ++ho) {
                    long h = long(ho * stride + ki) - long(pad);
                    if (h < 0 || h >= long(H)) {
                        for (size_t wo = 0; wo < Wo; ++wo) row[ho * Wo + wo] = T(0);
                        continue;
                    }
                    const T* xr = x + (c * H + size_t(h)) * W;
                    for (size_t wo = 0; wo < Wo; ++wo) {
                        long w = long(wo * stride + kj) - long(pad);
                        row[ho * Wo + wo] = (w < 0 || w >= long(W)) ? T(0) : xr[size_t(w)];
                    }
                }
            }
        }
    }
}

// Scatter-add of column gradients back onto the padded image.
template <typename T>
void col2im_add(const T* cols, size_t C, size_t H, size_t W, size_t kh, size_t kw,
                size_t stride, size_t pad, size_t Ho, size_t Wo, T* gx) {
    for (size_t c = 0; c < C; ++c) {
        for (size_t ki = 0; ki < kh; ++ki) {
            for (size_t kj = 0; kj < kw; ++kj) {
                const T* row = cols + ((c * kh + ki) * kw + kj) * (Ho * Wo);
                for (size_t ho = 0; ho < Ho; ++ho) {
                    long h = long(ho * stride + ki) - long(pad);
                    if (h < 0 || h >= long(H)) continue;
                    T* xr = gx + (c * H + size_t(h)) * W;
                    for (size_t wo = 0; wo < Wo; ++wo) {
                        long w = long(wo * stride + kj) - long(pad);
                        if (w >= 0 && w < long(W)) xr[size_t(w)] += row[ho * Wo + wo];
                    }
                }
            }
        }
    }
}

// 2-D convolution: x [B,Cin,H,W], w [Cout,Cin,kh,kw], bias [Cout] (may be
// undefined for no bias). im2col + gemm per batch item.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 size_t stride = 1, size_t pad = 0) {
    if (x.ndim() != 4 || w.ndim() != 4)
        throw DimensionError("conv2d expects x [B,C,H,W], w [Co,Ci,kh,kw]; got " +
                             shape_str(x.shape()) + ", " + shape_str(w.shape()));
    size_t B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    size_t Cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != Cin)
        throw DimensionError("conv2d channel mismatch: input has " + std::to_string(Cin) +
                             ", kernel expects " + std::to_string(w.dim(1)));
    if (H + 2 * pad < kh || W + 2 * pad < kw)
        throw DimensionError("conv2d kernel larger than padded input");
    size_t Ho = (H + 2 * pad - kh) / stride + 1;
    size_t Wo = (W + 2 * pad - kw) / stride + 1;
    size_t CKK = Cin * kh * kw, P = Ho * Wo;
    bool with_bias = bias.defined();
    if (with_bias && bias.numel() != Cout)
        throw DimensionError("conv2d bias size " + std::to_string(bias.numel()) +
                             " != " + std::to_string(Cout) + " output channels");

    Tensor<T> out = Tensor<T>::zeros({B, Cout, Ho, Wo});
    std::vector<T> cols(CKK * P);
    for (size_t b = 0; b < B; ++b) {
        im2col(x.data() + b * Cin * H * W, Cin, H, W, kh, kw, stride, pad, Ho, Wo,
               cols.data());
        T* y = out.data() + b * Cout * P;
        gemm_nn(Cout, CKK, P, w.data(), cols.data(), y);
        if (with_bias)
            for (size_t c = 0; c < Cout; ++c)
                for (size_t p = 0; p < P; ++p) y[c * P + p] += bias.data()[c];
    }

    bool rec = with_bias ? grad_active(x, w, bias) : grad_active(x, w);
    if (rec) {
        out.set_requires_grad(true);
        auto ix = x.impl();
        auto iw = w.impl();
        auto io = out.impl();
        auto ib = with_bias ? bias.impl() : nullptr;
        bool gx = x.requires_grad(), gw = w.requires_grad();
        bool gb = with_bias && bias.requires_grad();
        Tape<T>::current()->record([=] {
            io->ensure_grad();
            if (gx) ix->ensure_grad();
            if (gw) iw->ensure_grad();
            if (gb) ib->ensure_grad();
            std::vector<T> cols2(CKK * P), dcols(CKK * P);
            for (size_t b = 0; b < B; ++b) {
                const T* gy = io->grad.data() + b * Cout * P;
                if (gw || gx)
                    im2col(ix->data.data() + b * Cin * H * W, Cin, H, W, kh, kw, stride,
                           pad, Ho, Wo, cols2.data());
                if (gw) gemm_nt(Cout, P, CKK, gy, cols2.data(), iw->grad.data());
                if (gx) {
                    std::fill(dcols.begin(), dcols.end(), T(0));
                    gemm_tn(CKK, Cout, P, iw->data.data(), gy, dcols.data());
                    col2im_add(dcols.data(), Cin, H, W, kh, kw, stride, pad, Ho, Wo,
                               ix->grad.data() + b * Cin * H * W);
                }
                if (gb)
                    for (size_t c = 0; c < Cout; ++c) {
                        T acc = T(0);
                        for (size_t p = 0; p < P; ++p) acc += gy[c * P + p];
                        ib->grad[c] += acc;
                    }
            }
        });
    }
    return out;
}

// Nearest-neighbour 2x upsample; backward sums each 2x2 block.
template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
    if (x.ndim() != 4) throw DimensionError("upsample expects [B,C,H,W]");
    size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor<T> out = Tensor<T>::zeros({B, C, H * 2, W * 2});
    const T* px = x.data();
    T* po = out.data();
    for (size_t bc = 0; bc < B * C; ++bc) {
        const T* xi = px + bc * H * W;
        T* yo = po + bc * 4 * H * W;
        for (size_t h = 0; h < H; ++h)
            for (size_t w = 0; w < W; ++w) {
                T v = xi[h * W + w];
                size_t r0 = (2 * h) * (2 * W) + 2 * w;
                yo[r0] = v;
                yo[r0 + 1] = v;
                yo[r0 + 2 * W] = v;
                yo[r0 + 2 * W + 1] = v;
            }
    }
    if (grad_active(x)) {
        out.set_requires_grad(true);
        auto ix = x.impl();
        auto io = out.impl();
        Tape<T>::current()->record([=] {
            io->ensure_grad();
            ix->ensure_grad();
            const T* g = io->grad.data();
            for (size_t bc = 0; bc < B * C; ++bc) {
                const T* gi = g + bc * 4 * H * W;
                T* gx = ix->grad.data() + bc * H * W;
                for (size_t h = 0; h < H; ++h)
                    for (size_t w = 0; w < W; ++w) {
                        size_t r0 = (2 * h) * (2 * W) + 2 * w;
                        gx[h * W + w] +=
                            gi[r0] + gi[r0 + 1] + gi[r0 + 2 * W] + gi[r0 + 2 * W + 1];
                    }
            }
        });
    }
    return out;
}

// Global max pool [B,C,H,W] -> [B,C]; gradient routes to the first maximal
// location so ties resolve deterministically.
template <typename T>
Tensor<T> global_max_pool(const Tensor<T>& x) {
    if (x.ndim() != 4) throw DimensionError("global_max_pool expects [B,C,H,W]");
    size_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    Tensor<T> out = Tensor<T>::zeros({B, C});
    std::vector<size_t> argmax(B * C);
    const T* px = x.data();
    T* po = out.data();
    for (size_t bc = 0; bc < B * C; ++bc) {
        const T* xi = px + bc * HW;
        size_t best = 0;
        for (size_t i = 1; i < HW; ++i)
            if (xi[i] > xi[best]) best = i;
        argmax[bc] = best;
        po[bc] = xi[best];
    }
    if (grad_active(x)) {
        out.set_requires_grad(true);
        auto ix = x.impl();
        auto io = out.impl();
        Tape<T>::current()->record([=, argmax = std::move(argmax)] {
            io->ensure_grad();
            ix->ensure_grad();
            for (size_t bc = 0; bc < argmax.size(); ++bc)
                ix->grad[bc * HW + argmax[bc]] += io->grad[bc];
        });
    }
    return out;
}

}  // namespace t2v
