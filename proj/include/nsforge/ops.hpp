#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "nsforge/parallel.hpp"
#include "nsforge/tensor.hpp"

namespace nsforge {

// Differentiable ops. Layouts: 1-D activations are [batch, channels, time],
// 2-D activations [batch, channels, height, width], dense inputs
// [batch, features]. Every kernel keeps a fixed per-element summation order
// and parallelizes only across disjoint output slices, so results are
// bit-identical for any NSFORGE_THREADS.

namespace detail {

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace detail

// ---------------------------------------------------------------- elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "add");
    Tensor<T> y = Tensor<T>::op_result(a.shape(), {a, b});
    const T* av = a.data();
    const T* bv = b.data();
    T* yv = y.data();
    const int64_t n = y.size();
    for (int64_t i = 0; i < n; ++i) yv[i] = av[i] + bv[i];
    if (y.requires_grad()) {
        auto* an = a.node().get();
        auto* bn = b.node().get();
        auto* yn = y.node().get();
        y.set_backward([an, bn, yn, n] {
            if (an->requires_grad) {
                an->ensure_grad();
                for (int64_t i = 0; i < n; ++i) an->grad[i] += yn->grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int64_t i = 0; i < n; ++i) bn->grad[i] += yn->grad[i];
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "sub");
    Tensor<T> y = Tensor<T>::op_result(a.shape(), {a, b});
    const T* av = a.data();
    const T* bv = b.data();
    T* yv = y.data();
    const int64_t n = y.size();
    for (int64_t i = 0; i < n; ++i) yv[i] = av[i] - bv[i];
    if (y.requires_grad()) {
        auto* an = a.node().get();
        auto* bn = b.node().get();
        auto* yn = y.node().get();
        y.set_backward([an, bn, yn, n] {
            if (an->requires_grad) {
                an->ensure_grad();
                for (int64_t i = 0; i < n; ++i) an->grad[i] += yn->grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int64_t i = 0; i < n; ++i) bn->grad[i] -= yn->grad[i];
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "mul");
    Tensor<T> y = Tensor<T>::op_result(a.shape(), {a, b});
    const T* av = a.data();
    const T* bv = b.data();
    T* yv = y.data();
    const int64_t n = y.size();
    for (int64_t i = 0; i < n; ++i) yv[i] = av[i] * bv[i];
    if (y.requires_grad()) {
        auto* an = a.node().get();
        auto* bn = b.node().get();
        auto* yn = y.node().get();
        y.set_backward([an, bn, yn, n] {
            if (an->requires_grad) {
                an->ensure_grad();
                for (int64_t i = 0; i < n; ++i) an->grad[i] += yn->grad[i] * bn->value[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int64_t i = 0; i < n; ++i) bn->grad[i] += yn->grad[i] * an->value[i];
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
    Tensor<T> y = Tensor<T>::op_result(x.shape(), {x});
    const T* xv = x.data();
    T* yv = y.data();
    const int64_t n = y.size();
    for (int64_t i = 0; i < n; ++i) yv[i] = xv[i] * c;
    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, yn, c, n] {
            xn->ensure_grad();
            for (int64_t i = 0; i < n; ++i) xn->grad[i] += yn->grad[i] * c;
        });
    }
    return y;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> y = Tensor<T>::op_result(x.shape(), {x});
    const T* xv = x.data();
    T* yv = y.data();
    const int64_t n = y.size();
    for (int64_t i = 0; i < n; ++i) yv[i] = xv[i] > T(0) ? xv[i] : T(0);
    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, yn, n] {
            xn->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                if (xn->value[i] > T(0)) xn->grad[i] += yn->grad[i];
        });
    }
    return y;
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
    Tensor<T> y = Tensor<T>::op_result(x.shape(), {x});
    const T* xv = x.data();
    T* yv = y.data();
    const int64_t n = y.size();
    for (int64_t i = 0; i < n; ++i) yv[i] = xv[i] > T(0) ? xv[i] : slope * xv[i];
    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, yn, slope, n] {
            xn->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                xn->grad[i] += yn->grad[i] * (xn->value[i] > T(0) ? T(1) : slope);
        });
    }
    return y;
}

template <typename T>
Tensor<T> tanh_op(const Tensor<T>& x) {
    Tensor<T> y = Tensor<T>::op_result(x.shape(), {x});
    const T* xv = x.data();
    T* yv = y.data();
    const int64_t n = y.size();
    for (int64_t i = 0; i < n; ++i) yv[i] = std::tanh(xv[i]);
    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, yn, n] {
            xn->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                xn->grad[i] += yn->grad[i] * (T(1) - yn->value[i] * yn->value[i]);
        });
    }
    return y;
}

template <typename T>
Tensor<T> sigmoid_op(const Tensor<T>& x) {
    Tensor<T> y = Tensor<T>::op_result(x.shape(), {x});
    const T* xv = x.data();
    T* yv = y.data();
    const int64_t n = y.size();
    for (int64_t i = 0; i < n; ++i) yv[i] = T(1) / (T(1) + std::exp(-xv[i]));
    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, yn, n] {
            xn->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                xn->grad[i] += yn->grad[i] * yn->value[i] * (T(1) - yn->value[i]);
        });
    }
    return y;
}

// Clamp to [0, 1] with pass-through gradient on the closed interval.
template <typename T>
Tensor<T> clamp01(const Tensor<T>& x) {
    Tensor<T> y = Tensor<T>::op_result(x.shape(), {x});
    const T* xv = x.data();
    T* yv = y.data();
    const int64_t n = y.size();
    for (int64_t i = 0; i < n; ++i) yv[i] = std::min(T(1), std::max(T(0), xv[i]));
    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, yn, n] {
            xn->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                if (xn->value[i] >= T(0) && xn->value[i] <= T(1))
                    xn->grad[i] += yn->grad[i];
        });
    }
    return y;
}

// ------------------------------------------------------------ shape plumbing

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, std::vector<int64_t> shape) {
    if (Tensor<T>::numel(shape) != x.size())
        throw std::invalid_argument("reshape: element count mismatch");
    Tensor<T> y = Tensor<T>::op_result(std::move(shape), {x});
    y.values() = x.values();
    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, yn] {
            xn->ensure_grad();
            for (size_t i = 0; i < yn->grad.size(); ++i) xn->grad[i] += yn->grad[i];
        });
    }
    return y;
}

namespace detail {

template <typename T>
void split_dims(const Tensor<T>& x, int64_t& outer, int64_t& ch, int64_t& inner) {
    const auto& s = x.shape();
    if (s.size() < 2) throw std::invalid_argument("expected rank >= 2 tensor");
    outer = s[0];
    ch = s[1];
    inner = 1;
    for (size_t i = 2; i < s.size(); ++i) inner *= s[i];
}

}  // namespace detail

// Concatenate along dim 1 (channels / features).
template <typename T>
Tensor<T> concat_dim1(const Tensor<T>& a, const Tensor<T>& b) {
    int64_t ao, ac, ai, bo, bc, bi;
    detail::split_dims(a, ao, ac, ai);
    detail::split_dims(b, bo, bc, bi);
    if (ao != bo || ai != bi || a.shape().size() != b.shape().size())
        throw std::invalid_argument("concat_dim1: incompatible shapes");
    std::vector<int64_t> shape = a.shape();
    shape[1] = ac + bc;
    Tensor<T> y = Tensor<T>::op_result(std::move(shape), {a, b});
    const T* av = a.data();
    const T* bv = b.data();
    T* yv = y.data();
    for (int64_t o = 0; o < ao; ++o) {
        std::copy(av + o * ac * ai, av + (o + 1) * ac * ai, yv + o * (ac + bc) * ai);
        std::copy(bv + o * bc * ai, bv + (o + 1) * bc * ai,
                  yv + o * (ac + bc) * ai + ac * ai);
    }
    if (y.requires_grad()) {
        auto* an = a.node().get();
        auto* bn = b.node().get();
        auto* yn = y.node().get();
        y.set_backward([an, bn, yn, ao, ac, bc, ai] {
            const T* g = yn->grad.data();
            if (an->requires_grad) {
                an->ensure_grad();
                for (int64_t o = 0; o < ao; ++o)
                    for (int64_t i = 0; i < ac * ai; ++i)
                        an->grad[o * ac * ai + i] += g[o * (ac + bc) * ai + i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int64_t o = 0; o < ao; ++o)
                    for (int64_t i = 0; i < bc * ai; ++i)
                        bn->grad[o * bc * ai + i] += g[o * (ac + bc) * ai + ac * ai + i];
            }
        });
    }
    return y;
}

// View [c0, c1) of dim 1 as a copy.
template <typename T>
Tensor<T> slice_dim1(const Tensor<T>& x, int64_t c0, int64_t c1) {
    int64_t outer, ch, inner;
    detail::split_dims(x, outer, ch, inner);
    if (c0 < 0 || c1 > ch || c0 >= c1)
        throw std::invalid_argument("slice_dim1: bad channel range");
    std::vector<int64_t> shape = x.shape();
    shape[1] = c1 - c0;
    Tensor<T> y = Tensor<T>::op_result(std::move(shape), {x});
    const T* xv = x.data();
    T* yv = y.data();
    const int64_t cs = c1 - c0;
    for (int64_t o = 0; o < outer; ++o)
        std::copy(xv + (o * ch + c0) * inner, xv + (o * ch + c1) * inner,
                  yv + o * cs * inner);
    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, yn, outer, ch, inner, c0, cs] {
            xn->ensure_grad();
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t i = 0; i < cs * inner; ++i)
                    xn->grad[(o * ch + c0) * inner + i] += yn->grad[o * cs * inner + i];
        });
    }
    return y;
}

// Slice [t0, t1) of the last dim as a copy.
template <typename T>
Tensor<T> slice_last(const Tensor<T>& x, int64_t t0, int64_t t1) {
    const auto& s = x.shape();
    const int64_t L = s.back();
    if (t0 < 0 || t1 > L || t0 >= t1)
        throw std::invalid_argument("slice_last: bad range");
    const int64_t outer = x.size() / L;
    std::vector<int64_t> shape = s;
    shape.back() = t1 - t0;
    Tensor<T> y = Tensor<T>::op_result(std::move(shape), {x});
    const T* xv = x.data();
    T* yv = y.data();
    const int64_t n = t1 - t0;
    for (int64_t o = 0; o < outer; ++o)
        std::copy(xv + o * L + t0, xv + o * L + t1, yv + o * n);
    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, yn, outer, L, t0, n] {
            xn->ensure_grad();
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t i = 0; i < n; ++i)
                    xn->grad[o * L + t0 + i] += yn->grad[o * n + i];
        });
    }
    return y;
}

// Extend the time axis to new_t by repeating the final step (used when the
// pooled embedding, truncated to whole steps, is shorter than the audio).
template <typename T>
Tensor<T> nn_extend_time(const Tensor<T>& x, int64_t new_t) {
    const auto& s = x.shape();
    const int64_t L = s.back();
    if (new_t < L) throw std::invalid_argument("nn_extend_time: cannot shrink");
    if (new_t == L) return x;
    const int64_t outer = x.size() / L;
    std::vector<int64_t> shape = s;
    shape.back() = new_t;
    Tensor<T> y = Tensor<T>::op_result(std::move(shape), {x});
    const T* xv = x.data();
    T* yv = y.data();
    for (int64_t o = 0; o < outer; ++o) {
        std::copy(xv + o * L, xv + (o + 1) * L, yv + o * new_t);
        for (int64_t t = L; t < new_t; ++t) yv[o * new_t + t] = xv[o * L + L - 1];
    }
    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, yn, outer, L, new_t] {
            xn->ensure_grad();
            for (int64_t o = 0; o < outer; ++o) {
                for (int64_t t = 0; t < L; ++t)
                    xn->grad[o * L + t] += yn->grad[o * new_t + t];
                for (int64_t t = L; t < new_t; ++t)
                    xn->grad[o * L + L - 1] += yn->grad[o * new_t + t];
            }
        });
    }
    return y;
}

// ------------------------------------------------------------------- conv1d

// Dilated 1-D convolution, SAME length. Causal mode left-pads by
// (k-1)*dilation so output[t] depends only on input[<= t]; non-causal mode
// splits the padding symmetrically (extra sample on the right).
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 int dilation, bool causal) {
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    if (xs.size() != 3 || ws.size() != 3)
        throw std::invalid_argument("conv1d: want x[B,C,T], w[Co,Ci,K]");
    if (ws[1] != xs[1]) throw std::invalid_argument("conv1d: channel mismatch");
    if (bias.size() != ws[0]) throw std::invalid_argument("conv1d: bias size mismatch");
    if (dilation < 1 || ws[2] < 1) throw std::invalid_argument("conv1d: bad kernel/dilation");

    const int64_t B = xs[0], Ci = xs[1], Tt = xs[2], Co = ws[0], K = ws[2];
    const int64_t pad_l = causal ? (K - 1) * dilation : ((K - 1) * dilation) / 2;

    Tensor<T> y = Tensor<T>::op_result({B, Co, Tt}, {x, w, bias});
    const T* xv = x.data();
    const T* wv = w.data();
    const T* bv = bias.data();
    T* yv = y.data();

    parallel_for(B * Co, B * Co * Ci * K * Tt, [&](int64_t job) {
        const int64_t b = job / Co, co = job % Co;
        T* yrow = yv + (b * Co + co) * Tt;
        std::fill(yrow, yrow + Tt, bv[co]);
        for (int64_t ci = 0; ci < Ci; ++ci) {
            const T* xrow = xv + (b * Ci + ci) * Tt;
            for (int64_t k = 0; k < K; ++k) {
                const T wk = wv[(co * Ci + ci) * K + k];
                const int64_t off = k * dilation - pad_l;
                const int64_t t0 = std::max<int64_t>(0, -off);
                const int64_t t1 = std::min<int64_t>(Tt, Tt - off);
                for (int64_t t = t0; t < t1; ++t) yrow[t] += wk * xrow[t + off];
            }
        }
    });

    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* wn = w.node().get();
        auto* bn = bias.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, wn, bn, yn, B, Ci, Co, Tt, K, dilation, pad_l] {
            const T* g = yn->grad.data();
            const T* wv2 = wn->value.data();
            const T* xv2 = xn->value.data();
            if (xn->requires_grad) {
                xn->ensure_grad();
                T* gx = xn->grad.data();
                parallel_for(B * Ci, B * Ci * Co * K * Tt, [&](int64_t job) {
                    const int64_t b = job / Ci, ci = job % Ci;
                    T* gxrow = gx + (b * Ci + ci) * Tt;
                    for (int64_t co = 0; co < Co; ++co) {
                        const T* grow = g + (b * Co + co) * Tt;
                        for (int64_t k = 0; k < K; ++k) {
                            const T wk = wv2[(co * Ci + ci) * K + k];
                            const int64_t off = k * dilation - pad_l;
                            const int64_t t0 = std::max<int64_t>(0, -off);
                            const int64_t t1 = std::min<int64_t>(Tt, Tt - off);
                            for (int64_t t = t0; t < t1; ++t)
                                gxrow[t + off] += wk * grow[t];
                        }
                    }
                });
            }
            if (wn->requires_grad) {
                wn->ensure_grad();
                T* gw = wn->grad.data();
                parallel_for(Co * Ci, Co * Ci * K * B * Tt, [&](int64_t job) {
                    const int64_t co = job / Ci, ci = job % Ci;
                    for (int64_t k = 0; k < K; ++k) {
                        const int64_t off = k * dilation - pad_l;
                        T acc = T(0);
                        for (int64_t b = 0; b < B; ++b) {
                            const T* grow = g + (b * Co + co) * Tt;
                            const T* xrow = xv2 + (b * Ci + ci) * Tt;
                            const int64_t t0 = std::max<int64_t>(0, -off);
                            const int64_t t1 = std::min<int64_t>(Tt, Tt - off);
                            for (int64_t t = t0; t < t1; ++t) acc += grow[t] * xrow[t + off];
                        }
                        gw[(co * Ci + ci) * K + k] += acc;
                    }
                });
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int64_t co = 0; co < Co; ++co) {
                    T acc = T(0);
                    for (int64_t b = 0; b < B; ++b) {
                        const T* grow = g + (b * Co + co) * Tt;
                        for (int64_t t = 0; t < Tt; ++t) acc += grow[t];
                    }
                    bn->grad[co] += acc;
                }
            }
        });
    }
    return y;
}

// ------------------------------------------------------------------- conv2d

namespace detail {

struct SamePad2d {
    int64_t out_h, out_w, pad_top, pad_left;
};

inline SamePad2d same_pad_2d(int64_t h, int64_t w, int64_t kh, int64_t kw,
                             int64_t sh, int64_t sw) {
    SamePad2d p;
    p.out_h = (h + sh - 1) / sh;
    p.out_w = (w + sw - 1) / sw;
    int64_t tot_h = std::max<int64_t>((p.out_h - 1) * sh + kh - h, 0);
    int64_t tot_w = std::max<int64_t>((p.out_w - 1) * sw + kw - w, 0);
    p.pad_top = tot_h / 2;
    p.pad_left = tot_w / 2;
    return p;
}

}  // namespace detail

// Strided 2-D cross-correlation with SAME padding: out = ceil(in / stride).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 int64_t sh, int64_t sw) {
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    if (xs.size() != 4 || ws.size() != 4)
        throw std::invalid_argument("conv2d: want x[B,C,H,W], w[Co,Ci,Kh,Kw]");
    if (ws[1] != xs[1]) throw std::invalid_argument("conv2d: channel mismatch");
    if (bias.size() != ws[0]) throw std::invalid_argument("conv2d: bias size mismatch");
    if (sh < 1 || sw < 1) throw std::invalid_argument("conv2d: bad stride");

    const int64_t B = xs[0], Ci = xs[1], H = xs[2], W = xs[3];
    const int64_t Co = ws[0], KH = ws[2], KW = ws[3];
    const auto pad = detail::same_pad_2d(H, W, KH, KW, sh, sw);
    const int64_t OH = pad.out_h, OW = pad.out_w;

    Tensor<T> y = Tensor<T>::op_result({B, Co, OH, OW}, {x, w, bias});
    const T* xv = x.data();
    const T* wv = w.data();
    const T* bv = bias.data();
    T* yv = y.data();

    parallel_for(B * Co, B * Co * Ci * KH * KW * OH * OW, [&](int64_t job) {
        const int64_t b = job / Co, co = job % Co;
        T* yp = yv + (b * Co + co) * OH * OW;
        std::fill(yp, yp + OH * OW, bv[co]);
        for (int64_t ci = 0; ci < Ci; ++ci) {
            const T* xp = xv + (b * Ci + ci) * H * W;
            for (int64_t kh = 0; kh < KH; ++kh)
                for (int64_t kw = 0; kw < KW; ++kw) {
                    const T wk = wv[((co * Ci + ci) * KH + kh) * KW + kw];
                    for (int64_t oh = 0; oh < OH; ++oh) {
                        const int64_t ih = oh * sh - pad.pad_top + kh;
                        if (ih < 0 || ih >= H) continue;
                        for (int64_t ow = 0; ow < OW; ++ow) {
                            const int64_t iw = ow * sw - pad.pad_left + kw;
                            if (iw < 0 || iw >= W) continue;
                            yp[oh * OW + ow] += wk * xp[ih * W + iw];
                        }
                    }
                }
        }
    });

    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* wn = w.node().get();
        auto* bn = bias.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, wn, bn, yn, B, Ci, Co, H, W, OH, OW, KH, KW, sh, sw, pad] {
            const T* g = yn->grad.data();
            const T* wv2 = wn->value.data();
            const T* xv2 = xn->value.data();
            if (xn->requires_grad) {
                xn->ensure_grad();
                T* gx = xn->grad.data();
                parallel_for(B * Ci, B * Ci * Co * KH * KW * OH * OW, [&](int64_t job) {
                    const int64_t b = job / Ci, ci = job % Ci;
                    T* gxp = gx + (b * Ci + ci) * H * W;
                    for (int64_t co = 0; co < Co; ++co) {
                        const T* gp = g + (b * Co + co) * OH * OW;
                        for (int64_t kh = 0; kh < KH; ++kh)
                            for (int64_t kw = 0; kw < KW; ++kw) {
                                const T wk = wv2[((co * Ci + ci) * KH + kh) * KW + kw];
                                for (int64_t oh = 0; oh < OH; ++oh) {
                                    const int64_t ih = oh * sh - pad.pad_top + kh;
                                    if (ih < 0 || ih >= H) continue;
                                    for (int64_t ow = 0; ow < OW; ++ow) {
                                        const int64_t iw = ow * sw - pad.pad_left + kw;
                                        if (iw < 0 || iw >= W) continue;
                                        gxp[ih * W + iw] += wk * gp[oh * OW + ow];
                                    }
                                }
                            }
                    }
                });
            }
            if (wn->requires_grad) {
                wn->ensure_grad();
                T* gw = wn->grad.data();
                parallel_for(Co * Ci, Co * Ci * KH * KW * B * OH * OW, [&](int64_t job) {
                    const int64_t co = job / Ci, ci = job % Ci;
                    for (int64_t kh = 0; kh < KH; ++kh)
                        for (int64_t kw = 0; kw < KW; ++kw) {
                            T acc = T(0);
                            for (int64_t b = 0; b < B; ++b) {
                                const T* gp = g + (b * Co + co) * OH * OW;
                                const T* xp = xv2 + (b * Ci + ci) * H * W;
                                for (int64_t oh = 0; oh < OH; ++oh) {
                                    const int64_t ih = oh * sh - pad.pad_top + kh;
                                    if (ih < 0 || ih >= H) continue;
                                    for (int64_t ow = 0; ow < OW; ++ow) {
                                        const int64_t iw = ow * sw - pad.pad_left + kw;
                                        if (iw < 0 || iw >= W) continue;
                                        acc += gp[oh * OW + ow] * xp[ih * W + iw];
                                    }
                                }
                            }
                            gw[((co * Ci + ci) * KH + kh) * KW + kw] += acc;
                        }
                });
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int64_t co = 0; co < Co; ++co) {
                    T acc = T(0);
                    for (int64_t b = 0; b < B; ++b) {
                        const T* gp = g + (b * Co + co) * OH * OW;
                        for (int64_t i = 0; i < OH * OW; ++i) acc += gp[i];
                    }
                    bn->grad[co] += acc;
                }
            }
        });
    }
    return y;
}

// Transposed (fractionally strided) conv: the adjoint of conv2d. Given an
// explicit output shape with ceil(out/stride) == in, it inverts conv2d's
// shape map, including odd sizes. Weights are [Ci, Co, Kh, Kw].
template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& x, const Tensor<T>& w,
                           const Tensor<T>& bias, int64_t sh, int64_t sw,
                           int64_t out_h, int64_t out_w) {
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    if (xs.size() != 4 || ws.size() != 4)
        throw std::invalid_argument("conv2d_transpose: want x[B,C,H,W], w[Ci,Co,Kh,Kw]");
    if (ws[0] != xs[1]) throw std::invalid_argument("conv2d_transpose: channel mismatch");
    if (bias.size() != ws[1])
        throw std::invalid_argument("conv2d_transpose: bias size mismatch");
    const int64_t B = xs[0], Ci = xs[1], H = xs[2], W = xs[3];
    const int64_t Co = ws[1], KH = ws[2], KW = ws[3];
    if ((out_h + sh - 1) / sh != H || (out_w + sw - 1) / sw != W)
        throw std::invalid_argument("conv2d_transpose: output shape not invertible to input");
    const auto pad = detail::same_pad_2d(out_h, out_w, KH, KW, sh, sw);

    Tensor<T> y = Tensor<T>::op_result({B, Co, out_h, out_w}, {x, w, bias});
    const T* xv = x.data();
    const T* wv = w.data();
    const T* bv = bias.data();
    T* yv = y.data();

    parallel_for(B * Co, B * Co * Ci * KH * KW * H * W, [&](int64_t job) {
        const int64_t b = job / Co, co = job % Co;
        T* yp = yv + (b * Co + co) * out_h * out_w;
        std::fill(yp, yp + out_h * out_w, bv[co]);
        for (int64_t ci = 0; ci < Ci; ++ci) {
            const T* xp = xv + (b * Ci + ci) * H * W;
            for (int64_t kh = 0; kh < KH; ++kh)
                for (int64_t kw = 0; kw < KW; ++kw) {
                    const T wk = wv[((ci * Co + co) * KH + kh) * KW + kw];
                    for (int64_t ih = 0; ih < H; ++ih) {
                        const int64_t i = ih * sh - pad.pad_top + kh;
                        if (i < 0 || i >= out_h) continue;
                        for (int64_t iw = 0; iw < W; ++iw) {
                            const int64_t j = iw * sw - pad.pad_left + kw;
                            if (j < 0 || j >= out_w) continue;
                            yp[i * out_w + j] += wk * xp[ih * W + iw];
                        }
                    }
                }
        }
    });

    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* wn = w.node().get();
        auto* bn = bias.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, wn, bn, yn, B, Ci, Co, H, W, out_h, out_w, KH, KW, sh, sw,
                        pad] {
            const T* g = yn->grad.data();
            const T* wv2 = wn->value.data();
            const T* xv2 = xn->value.data();
            if (xn->requires_grad) {
                xn->ensure_grad();
                T* gx = xn->grad.data();
                parallel_for(B * Ci, B * Ci * Co * KH * KW * H * W, [&](int64_t job) {
                    const int64_t b = job / Ci, ci = job % Ci;
                    T* gxp = gx + (b * Ci + ci) * H * W;
                    for (int64_t co = 0; co < Co; ++co) {
                        const T* gp = g + (b * Co + co) * out_h * out_w;
                        for (int64_t kh = 0; kh < KH; ++kh)
                            for (int64_t kw = 0; kw < KW; ++kw) {
                                const T wk = wv2[((ci * Co + co) * KH + kh) * KW + kw];
                                for (int64_t ih = 0; ih < H; ++ih) {
                                    const int64_t i = ih * sh - pad.pad_top + kh;
                                    if (i < 0 || i >= out_h) continue;
                                    for (int64_t iw = 0; iw < W; ++iw) {
                                        const int64_t j = iw * sw - pad.pad_left + kw;
                                        if (j < 0 || j >= out_w) continue;
                                        gxp[ih * W + iw] += wk * gp[i * out_w + j];
                                    }
                                }
                            }
                    }
                });
            }
            if (wn->requires_grad) {
                wn->ensure_grad();
                T* gw = wn->grad.data();
                parallel_for(Ci * Co, Ci * Co * KH * KW * B * H * W, [&](int64_t job) {
                    const int64_t ci = job / Co, co = job % Co;
                    for (int64_t kh = 0; kh < KH; ++kh)
                        for (int64_t kw = 0; kw < KW; ++kw) {
                            T acc = T(0);
                            for (int64_t b = 0; b < B; ++b) {
                                const T* gp = g + (b * Co + co) * out_h * out_w;
                                const T* xp = xv2 + (b * Ci + ci) * H * W;
                                for (int64_t ih = 0; ih < H; ++ih) {
                                    const int64_t i = ih * sh - pad.pad_top + kh;
                                    if (i < 0 || i >= out_h) continue;
                                    for (int64_t iw = 0; iw < W; ++iw) {
                                        const int64_t j = iw * sw - pad.pad_left + kw;
                                        if (j < 0 || j >= out_w) continue;
                                        acc += xp[ih * W + iw] * gp[i * out_w + j];
                                    }
                                }
                            }
                            gw[((ci * Co + co) * KH + kh) * KW + kw] += acc;
                        }
                });
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int64_t co = 0; co < Co; ++co) {
                    T acc = T(0);
                    for (int64_t b = 0; b < B; ++b) {
                        const T* gp = g + (b * Co + co) * out_h * out_w;
                        for (int64_t i = 0; i < out_h * out_w; ++i) acc += gp[i];
                    }
                    bn->grad[co] += acc;
                }
            }
        });
    }
    return y;
}

// --------------------------------------------------------------- batch norm

// Normalizes over batch and spatial dims per channel (dim 1). Train mode uses
// batch statistics and updates the caller-owned running stats in place; eval
// mode reads the running stats.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, std::vector<T>& running_mean,
                     std::vector<T>& running_var, bool train,
                     T momentum = T(0.9)) {
    int64_t B, C, S;
    detail::split_dims(x, B, C, S);
    if (gamma.size() != C || beta.size() != C)
        throw std::invalid_argument("batch_norm: gamma/beta size mismatch");
    if (static_cast<int64_t>(running_mean.size()) != C ||
        static_cast<int64_t>(running_var.size()) != C)
        throw std::invalid_argument("batch_norm: running stats size mismatch");
    if (train && B < 2)
        throw std::invalid_argument("batch_norm: train mode needs batch >= 2");

    const T eps = T(1e-8);
    const int64_t N = B * S;
    std::vector<T> mean(C), inv_std(C);
    if (train) {
        for (int64_t c = 0; c < C; ++c) {
            T m = T(0);
            for (int64_t b = 0; b < B; ++b) {
                const T* xp = x.data() + (b * C + c) * S;
                for (int64_t s = 0; s < S; ++s) m += xp[s];
            }
            m /= static_cast<T>(N);
            T v = T(0);
            for (int64_t b = 0; b < B; ++b) {
                const T* xp = x.data() + (b * C + c) * S;
                for (int64_t s = 0; s < S; ++s) {
                    T d = xp[s] - m;
                    v += d * d;
                }
            }
            v /= static_cast<T>(N);
            mean[c] = m;
            inv_std[c] = T(1) / std::sqrt(v + eps);
            running_mean[c] = momentum * running_mean[c] + (T(1) - momentum) * m;
            running_var[c] = momentum * running_var[c] + (T(1) - momentum) * v;
        }
    } else {
        for (int64_t c = 0; c < C; ++c) {
            mean[c] = running_mean[c];
            inv_std[c] = T(1) / std::sqrt(running_var[c] + eps);
        }
    }

    Tensor<T> y = Tensor<T>::op_result(x.shape(), {x, gamma, beta});
    const T* xv = x.data();
    const T* gv = gamma.data();
    const T* bv = beta.data();
    T* yv = y.data();
    for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c) {
            const T* xp = xv + (b * C + c) * S;
            T* yp = yv + (b * C + c) * S;
            for (int64_t s = 0; s < S; ++s)
                yp[s] = gv[c] * (xp[s] - mean[c]) * inv_std[c] + bv[c];
        }

    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* gn = gamma.node().get();
        auto* bn = beta.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, gn, bn, yn, B, C, S, N, mean, inv_std, train] {
            const T* g = yn->grad.data();
            const T* xv2 = xn->value.data();
            const T* gv2 = gn->value.data();
            // Per-channel sums of dy and dy * x_hat.
            std::vector<T> sum_dy(C, T(0)), sum_dy_xhat(C, T(0));
            for (int64_t b = 0; b < B; ++b)
                for (int64_t c = 0; c < C; ++c) {
                    const T* gp = g + (b * C + c) * S;
                    const T* xp = xv2 + (b * C + c) * S;
                    for (int64_t s = 0; s < S; ++s) {
                        sum_dy[c] += gp[s];
                        sum_dy_xhat[c] += gp[s] * (xp[s] - mean[c]) * inv_std[c];
                    }
                }
            if (gn->requires_grad) {
                gn->ensure_grad();
                for (int64_t c = 0; c < C; ++c) gn->grad[c] += sum_dy_xhat[c];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int64_t c = 0; c < C; ++c) bn->grad[c] += sum_dy[c];
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                T* gx = xn->grad.data();
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t c = 0; c < C; ++c) {
                        const T* gp = g + (b * C + c) * S;
                        const T* xp = xv2 + (b * C + c) * S;
                        T* gxp = gx + (b * C + c) * S;
                        if (train) {
                            // Gradient through the batch statistics.
                            const T gs = gv2[c] * inv_std[c];
                            const T mdy = sum_dy[c] / static_cast<T>(N);
                            const T mdyx = sum_dy_xhat[c] / static_cast<T>(N);
                            for (int64_t s = 0; s < S; ++s) {
                                T xhat = (xp[s] - mean[c]) * inv_std[c];
                                gxp[s] += gs * (gp[s] - mdy - xhat * mdyx);
                            }
                        } else {
                            const T gs = gv2[c] * inv_std[c];
                            for (int64_t s = 0; s < S; ++s) gxp[s] += gs * gp[s];
                        }
                    }
            }
        });
    }
    return y;
}

// ------------------------------------------------------- pooling / upsample

// Average pooling over time with right zero-padding to cover the last
// window. Window sums use the fixed pairwise order.
template <typename T>
Tensor<T> avg_pool1d(const Tensor<T>& x, int64_t width, int64_t stride) {
    const auto& xs = x.shape();
    if (xs.size() != 3) throw std::invalid_argument("avg_pool1d: want x[B,C,T]");
    if (width < 1 || stride < 1)
        throw std::invalid_argument("avg_pool1d: width/stride must be >= 1");
    const int64_t B = xs[0], C = xs[1], Tt = xs[2];
    const int64_t OT = (Tt + stride - 1) / stride;

    Tensor<T> y = Tensor<T>::op_result({B, C, OT}, {x});
    const T* xv = x.data();
    T* yv = y.data();
    const T inv_w = T(1) / static_cast<T>(width);
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const T* xrow = xv + bc * Tt;
        T* yrow = yv + bc * OT;
        for (int64_t t = 0; t < OT; ++t) {
            const int64_t s0 = t * stride;
            T s = pairwise_sum<T>(0, width, [&](int64_t i) {
                const int64_t idx = s0 + i;
                return idx < Tt ? xrow[idx] : T(0);
            });
            yrow[t] = s * inv_w;
        }
    }
    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, yn, B, C, Tt, OT, width, stride, inv_w] {
            xn->ensure_grad();
            T* gx = xn->grad.data();
            const T* g = yn->grad.data();
            for (int64_t bc = 0; bc < B * C; ++bc) {
                T* gxrow = gx + bc * Tt;
                const T* grow = g + bc * OT;
                for (int64_t t = 0; t < OT; ++t)
                    for (int64_t i = 0; i < width; ++i) {
                        const int64_t idx = t * stride + i;
                        if (idx < Tt) gxrow[idx] += grow[t] * inv_w;
                    }
            }
        });
    }
    return y;
}

// Nearest-neighbor repeat along time.
template <typename T>
Tensor<T> nn_upsample1d(const Tensor<T>& x, int64_t factor) {
    const auto& xs = x.shape();
    if (xs.size() != 3) throw std::invalid_argument("nn_upsample1d: want x[B,C,T]");
    if (factor < 1) throw std::invalid_argument("nn_upsample1d: factor must be >= 1");
    const int64_t B = xs[0], C = xs[1], Tt = xs[2];
    Tensor<T> y = Tensor<T>::op_result({B, C, Tt * factor}, {x});
    const T* xv = x.data();
    T* yv = y.data();
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const T* xrow = xv + bc * Tt;
        T* yrow = yv + bc * Tt * factor;
        for (int64_t t = 0; t < Tt; ++t)
            for (int64_t i = 0; i < factor; ++i) yrow[t * factor + i] = xrow[t];
    }
    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, yn, B, C, Tt, factor] {
            xn->ensure_grad();
            T* gx = xn->grad.data();
            const T* g = yn->grad.data();
            for (int64_t bc = 0; bc < B * C; ++bc) {
                T* gxrow = gx + bc * Tt;
                const T* grow = g + bc * Tt * factor;
                for (int64_t t = 0; t < Tt; ++t) {
                    T acc = pairwise_sum<T>(0, factor,
                                            [&](int64_t i) { return grow[t * factor + i]; });
                    gxrow[t] += acc;
                }
            }
        });
    }
    return y;
}

// -------------------------------------------------------------------- dense

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    if (xs.size() != 2 || ws.size() != 2)
        throw std::invalid_argument("dense: want x[B,In], w[In,Out]");
    if (ws[0] != xs[1]) throw std::invalid_argument("dense: feature size mismatch");
    if (bias.size() != ws[1]) throw std::invalid_argument("dense: bias size mismatch");
    const int64_t B = xs[0], In = xs[1], Out = ws[1];
    Tensor<T> y = Tensor<T>::op_result({B, Out}, {x, w, bias});
    const T* xv = x.data();
    const T* wv = w.data();
    const T* bv = bias.data();
    T* yv = y.data();
    parallel_for(B, B * In * Out, [&](int64_t b) {
        T* yrow = yv + b * Out;
        std::copy(bv, bv + Out, yrow);
        const T* xrow = xv + b * In;
        for (int64_t i = 0; i < In; ++i) {
            const T xi = xrow[i];
            const T* wrow = wv + i * Out;
            for (int64_t o = 0; o < Out; ++o) yrow[o] += xi * wrow[o];
        }
    });
    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* wn = w.node().get();
        auto* bn = bias.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, wn, bn, yn, B, In, Out] {
            const T* g = yn->grad.data();
            const T* xv2 = xn->value.data();
            const T* wv2 = wn->value.data();
            if (xn->requires_grad) {
                xn->ensure_grad();
                T* gx = xn->grad.data();
                parallel_for(B, B * In * Out, [&](int64_t b) {
                    const T* grow = g + b * Out;
                    T* gxrow = gx + b * In;
                    for (int64_t i = 0; i < In; ++i) {
                        const T* wrow = wv2 + i * Out;
                        T acc = T(0);
                        for (int64_t o = 0; o < Out; ++o) acc += grow[o] * wrow[o];
                        gxrow[i] += acc;
                    }
                });
            }
            if (wn->requires_grad) {
                wn->ensure_grad();
                T* gw = wn->grad.data();
                parallel_for(In, In * Out * B, [&](int64_t i) {
                    T* gwrow = gw + i * Out;
                    for (int64_t b = 0; b < B; ++b) {
                        const T xi = xv2[b * In + i];
                        const T* grow = g + b * Out;
                        for (int64_t o = 0; o < Out; ++o) gwrow[o] += xi * grow[o];
                    }
                });
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int64_t o = 0; o < Out; ++o) {
                    T acc = T(0);
                    for (int64_t b = 0; b < B; ++b) acc += g[b * Out + o];
                    bn->grad[o] += acc;
                }
            }
        });
    }
    return y;
}

// ------------------------------------------------------------------- losses

// Mean softmax cross-entropy. Classes live on dim 1; logits may be [N, C] or
// [B, C, T] with labels indexed row-major over (outer, inner).
template <typename T>
Tensor<T> softmax_ce(const Tensor<T>& logits, const std::vector<int>& labels) {
    int64_t outer, C, inner;
    detail::split_dims(logits, outer, C, inner);
    const int64_t rows = outer * inner;
    if (static_cast<int64_t>(labels.size()) != rows)
        throw std::invalid_argument("softmax_ce: label count mismatch");
    for (int lab : labels)
        if (lab < 0 || lab >= C)
            throw std::invalid_argument("softmax_ce: label out of range");

    Tensor<T> y = Tensor<T>::op_result({1}, {logits});
    const T* lv = logits.data();
    double total = 0.0;
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < inner; ++i) {
            const T* base = lv + o * C * inner + i;
            T m = base[0];
            for (int64_t c = 1; c < C; ++c) m = std::max(m, base[c * inner]);
            double lse = 0.0;
            for (int64_t c = 0; c < C; ++c)
                lse += std::exp(static_cast<double>(base[c * inner] - m));
            lse = std::log(lse) + static_cast<double>(m);
            total += lse - static_cast<double>(base[labels[o * inner + i] * inner]);
        }
    y.data()[0] = static_cast<T>(total / rows);

    if (y.requires_grad()) {
        auto* ln = logits.node().get();
        auto* yn = y.node().get();
        y.set_backward([ln, yn, labels, outer, C, inner, rows] {
            ln->ensure_grad();
            const T g = yn->grad[0] / static_cast<T>(rows);
            const T* lv2 = ln->value.data();
            T* gl = ln->grad.data();
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t i = 0; i < inner; ++i) {
                    const T* base = lv2 + o * C * inner + i;
                    T* gbase = gl + o * C * inner + i;
                    T m = base[0];
                    for (int64_t c = 1; c < C; ++c) m = std::max(m, base[c * inner]);
                    double denom = 0.0;
                    for (int64_t c = 0; c < C; ++c)
                        denom += std::exp(static_cast<double>(base[c * inner] - m));
                    const int lab = labels[o * inner + i];
                    for (int64_t c = 0; c < C; ++c) {
                        double p = std::exp(static_cast<double>(base[c * inner] - m)) / denom;
                        double delta = c == lab ? 1.0 : 0.0;
                        gbase[c * inner] += g * static_cast<T>(p - delta);
                    }
                }
        });
    }
    return y;
}

// Mean elementwise sigmoid cross-entropy against soft targets in [0, 1].
template <typename T>
Tensor<T> sigmoid_ce(const Tensor<T>& logits, const Tensor<T>& targets) {
    detail::check_same_shape(logits, targets, "sigmoid_ce");
    Tensor<T> y = Tensor<T>::op_result({1}, {logits, targets});
    const T* lv = logits.data();
    const T* tv = targets.data();
    const int64_t n = logits.size();
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double l = lv[i], t = tv[i];
        total += std::max(l, 0.0) - l * t + std::log1p(std::exp(-std::abs(l)));
    }
    y.data()[0] = static_cast<T>(total / n);
    if (y.requires_grad()) {
        auto* ln = logits.node().get();
        auto* yn = y.node().get();
        y.set_backward([ln, yn, tv2 = targets.values(), n] {
            if (!ln->requires_grad) return;
            ln->ensure_grad();
            const T g = yn->grad[0] / static_cast<T>(n);
            for (int64_t i = 0; i < n; ++i) {
                T s = T(1) / (T(1) + std::exp(-ln->value[i]));
                ln->grad[i] += g * (s - tv2[i]);
            }
        });
    }
    return y;
}

// Mean squared error.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    detail::check_same_shape(pred, target, "mse_loss");
    Tensor<T> y = Tensor<T>::op_result({1}, {pred, target});
    const T* pv = pred.data();
    const T* tv = target.data();
    const int64_t n = pred.size();
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double d = pv[i] - tv[i];
        total += d * d;
    }
    y.data()[0] = static_cast<T>(total / n);
    if (y.requires_grad()) {
        auto* pn = pred.node().get();
        auto* tn = target.node().get();
        auto* yn = y.node().get();
        y.set_backward([pn, tn, yn, n] {
            const T g = yn->grad[0] * T(2) / static_cast<T>(n);
            if (pn->requires_grad) {
                pn->ensure_grad();
                for (int64_t i = 0; i < n; ++i)
                    pn->grad[i] += g * (pn->value[i] - tn->value[i]);
            }
            if (tn->requires_grad) {
                tn->ensure_grad();
                for (int64_t i = 0; i < n; ++i)
                    tn->grad[i] -= g * (pn->value[i] - tn->value[i]);
            }
        });
    }
    return y;
}

// Mean of w[j] * (pred - target)^2 with weights indexed by the last dim.
// Carries the spectral perceptual weighting into training graphs.
template <typename T>
Tensor<T> weighted_sq_loss(const Tensor<T>& pred, const Tensor<T>& target,
                           const std::vector<T>& weights) {
    detail::check_same_shape(pred, target, "weighted_sq_loss");
    const int64_t last = pred.shape().back();
    if (static_cast<int64_t>(weights.size()) != last)
        throw std::invalid_argument("weighted_sq_loss: weight count must match last dim");
    Tensor<T> y = Tensor<T>::op_result({1}, {pred, target});
    const T* pv = pred.data();
    const T* tv = target.data();
    const int64_t n = pred.size();
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double d = pv[i] - tv[i];
        total += static_cast<double>(weights[i % last]) * d * d;
    }
    y.data()[0] = static_cast<T>(total / n);
    if (y.requires_grad()) {
        auto* pn = pred.node().get();
        auto* tn = target.node().get();
        auto* yn = y.node().get();
        y.set_backward([pn, tn, yn, weights, last, n] {
            const T g = yn->grad[0] * T(2) / static_cast<T>(n);
            if (pn->requires_grad) {
                pn->ensure_grad();
                for (int64_t i = 0; i < n; ++i)
                    pn->grad[i] += g * weights[i % last] * (pn->value[i] - tn->value[i]);
            }
            if (tn->requires_grad) {
                tn->ensure_grad();
                for (int64_t i = 0; i < n; ++i)
                    tn->grad[i] -= g * weights[i % last] * (pn->value[i] - tn->value[i]);
            }
        });
    }
    return y;
}

// Differentiable circular-normal phase loss: mean(1 - cos(pi * (p - t))).
template <typename T>
Tensor<T> circular_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    detail::check_same_shape(pred, target, "circular_loss");
    Tensor<T> y = Tensor<T>::op_result({1}, {pred, target});
    const T* pv = pred.data();
    const T* tv = target.data();
    const int64_t n = pred.size();
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i)
        total += 1.0 - std::cos(kPi * static_cast<double>(pv[i] - tv[i]));
    y.data()[0] = static_cast<T>(total / n);
    if (y.requires_grad()) {
        auto* pn = pred.node().get();
        auto* tn = target.node().get();
        auto* yn = y.node().get();
        y.set_backward([pn, tn, yn, n] {
            const T g = yn->grad[0] * static_cast<T>(kPi) / static_cast<T>(n);
            if (pn->requires_grad) {
                pn->ensure_grad();
                for (int64_t i = 0; i < n; ++i)
                    pn->grad[i] +=
                        g * std::sin(static_cast<T>(kPi) * (pn->value[i] - tn->value[i]));
            }
            if (tn->requires_grad) {
                tn->ensure_grad();
                for (int64_t i = 0; i < n; ++i)
                    tn->grad[i] -=
                        g * std::sin(static_cast<T>(kPi) * (pn->value[i] - tn->value[i]));
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
    Tensor<T> y = Tensor<T>::op_result({1}, {x});
    const int64_t n = x.size();
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) total += x.data()[i];
    y.data()[0] = static_cast<T>(total / n);
    if (y.requires_grad()) {
        auto* xn = x.node().get();
        auto* yn = y.node().get();
        y.set_backward([xn, yn, n] {
            xn->ensure_grad();
            const T g = yn->grad[0] / static_cast<T>(n);
            for (int64_t i = 0; i < n; ++i) xn->grad[i] += g;
        });
    }
    return y;
}

}  // namespace nsforge
