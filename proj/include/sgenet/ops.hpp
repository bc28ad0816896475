#pragma once

#include <cmath>
#include <cstring>

#include "sgenet/autograd.hpp"
#include "sgenet/gemm.hpp"

namespace sgenet::nn {

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <class S>
Value<S> add(const Value<S>& a, const Value<S>& b) {
    check_same_shape(a.val().shape, b.val().shape, "add");
    Tensor<S> out = a.val();
    const S* pb = b.val().data.data();
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] += pb[i];
    auto an = a.node(), bn = b.node();
    return make_op<S>(std::move(out), {a, b}, [an, bn](Node<S>& self) {
        accum(an, self.grad.data.data());
        accum(bn, self.grad.data.data());
    });
}

template <class S>
Value<S> sub(const Value<S>& a, const Value<S>& b) {
    check_same_shape(a.val().shape, b.val().shape, "sub");
    Tensor<S> out = a.val();
    const S* pb = b.val().data.data();
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] -= pb[i];
    auto an = a.node(), bn = b.node();
    return make_op<S>(std::move(out), {a, b}, [an, bn](Node<S>& self) {
        accum(an, self.grad.data.data());
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (int64_t i = 0; i < self.grad.numel(); ++i)
                bn->grad.data[i] -= self.grad.data[i];
        }
    });
}

template <class S>
Value<S> mul(const Value<S>& a, const Value<S>& b) {
    check_same_shape(a.val().shape, b.val().shape, "mul");
    Tensor<S> out = a.val();
    const S* pb = b.val().data.data();
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] *= pb[i];
    auto an = a.node(), bn = b.node();
    return make_op<S>(std::move(out), {a, b}, [an, bn](Node<S>& self) {
        const S* g = self.grad.data.data();
        if (an->requires_grad) {
            an->ensure_grad();
            const S* vb = bn->value.data.data();
            for (int64_t i = 0; i < self.grad.numel(); ++i) an->grad.data[i] += g[i] * vb[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            const S* va = an->value.data.data();
            for (int64_t i = 0; i < self.grad.numel(); ++i) bn->grad.data[i] += g[i] * va[i];
        }
    });
}

template <class S>
Value<S> scale(const Value<S>& a, S c) {
    Tensor<S> out = a.val();
    for (auto& v : out.data) v *= c;
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an, c](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (int64_t i = 0; i < self.grad.numel(); ++i)
            an->grad.data[i] += c * self.grad.data[i];
    });
}

// Adds a constant (non-differentiated) tensor, e.g. a positional encoding.
// When the constant's batch dim is 1 it is broadcast over the batch.
template <class S>
Value<S> add_const(const Value<S>& a, const Tensor<S>& c) {
    Tensor<S> out = a.val();
    if (c.shape == out.shape) {
        for (int64_t i = 0; i < out.numel(); ++i) out.data[i] += c.data[i];
    } else if (out.rank() == 3 && c.rank() == 3 && c.dim(0) == 1 &&
               c.dim(1) == out.dim(1) && c.dim(2) == out.dim(2)) {
        const int64_t per = c.numel();
        for (int b = 0; b < out.dim(0); ++b)
            for (int64_t i = 0; i < per; ++i) out.data[b * per + i] += c.data[i];
    } else {
        throw std::invalid_argument("add_const: incompatible shapes " + out.shape_str() +
                                    " vs " + c.shape_str());
    }
    auto an = a.node();
    return make_op<S>(std::move(out), {a},
                      [an](Node<S>& self) { accum(an, self.grad.data.data()); });
}

template <class S>
Value<S> relu(const Value<S>& a) {
    Tensor<S> out = a.val();
    for (auto& v : out.data) v = v > S(0) ? v : S(0);
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        const S* x = an->value.data.data();
        for (int64_t i = 0; i < self.grad.numel(); ++i)
            if (x[i] > S(0)) an->grad.data[i] += self.grad.data[i];
    });
}

// PReLU with a single shared slope parameter (1-element tensor).
template <class S>
Value<S> prelu(const Value<S>& a, const Value<S>& slope) {
    if (slope.val().numel() != 1) throw std::invalid_argument("prelu: slope must be scalar");
    const S p = slope.val().data[0];
    Tensor<S> out = a.val();
    for (auto& v : out.data) v = v > S(0) ? v : p * v;
    auto an = a.node(), sn = slope.node();
    return make_op<S>(std::move(out), {a, slope}, [an, sn, p](Node<S>& self) {
        const S* x = an->value.data.data();
        const S* g = self.grad.data.data();
        if (an->requires_grad) {
            an->ensure_grad();
            for (int64_t i = 0; i < self.grad.numel(); ++i)
                an->grad.data[i] += g[i] * (x[i] > S(0) ? S(1) : p);
        }
        if (sn->requires_grad) {
            sn->ensure_grad();
            S acc = S(0);
            for (int64_t i = 0; i < self.grad.numel(); ++i)
                if (x[i] <= S(0)) acc += g[i] * x[i];
            sn->grad.data[0] += acc;
        }
    });
}

template <class S>
Value<S> sigmoid(const Value<S>& a) {
    Tensor<S> out = a.val();
    for (auto& v : out.data) v = S(1) / (S(1) + std::exp(-v));
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        const S* y = self.value.data.data();
        for (int64_t i = 0; i < self.grad.numel(); ++i)
            an->grad.data[i] += self.grad.data[i] * y[i] * (S(1) - y[i]);
    });
}

template <class S>
Value<S> tanh_op(const Value<S>& a) {
    Tensor<S> out = a.val();
    for (auto& v : out.data) v = std::tanh(v);
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        const S* y = self.value.data.data();
        for (int64_t i = 0; i < self.grad.numel(); ++i)
            an->grad.data[i] += self.grad.data[i] * (S(1) - y[i] * y[i]);
    });
}

// ---------------------------------------------------------------------------
// normalization / softmax
// ---------------------------------------------------------------------------

// Row softmax over the last dimension.
template <class S>
Value<S> softmax_lastdim(const Value<S>& a) {
    const auto& x = a.val();
    const int k = x.shape.back();
    const int64_t rows = x.numel() / k;
    Tensor<S> out = x;
    for (int64_t r = 0; r < rows; ++r) {
        S* row = out.data.data() + r * k;
        S mx = row[0];
        for (int i = 1; i < k; ++i) mx = std::max(mx, row[i]);
        S sum = S(0);
        for (int i = 0; i < k; ++i) {
            row[i] = std::exp(row[i] - mx);
            sum += row[i];
        }
        for (int i = 0; i < k; ++i) row[i] /= sum;
    }
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an, k, rows](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
            const S* y = self.value.data.data() + r * k;
            const S* g = self.grad.data.data() + r * k;
            S dot = S(0);
            for (int i = 0; i < k; ++i) dot += y[i] * g[i];
            S* dx = an->grad.data.data() + r * k;
            for (int i = 0; i < k; ++i) dx[i] += y[i] * (g[i] - dot);
        }
    });
}

namespace detail {
// Shared core for layer_norm / spatial_norm: rows of length `width` are
// normalized; the affine pair has `affine_len` entries indexed by `affine_ix`.
template <class S, class AffineIndex>
Value<S> norm_rows(const Value<S>& x, const Value<S>& gain, const Value<S>& offset,
                   S eps, int64_t rows, int width, AffineIndex affine_ix) {
    Tensor<S> out = x.val();
    Tensor<S> xhat(x.val().shape);
    std::vector<S> inv_sigma(static_cast<size_t>(rows));
    const S* g = gain.val().data.data();
    const S* b = offset.val().data.data();
    for (int64_t r = 0; r < rows; ++r) {
        S* row = out.data.data() + r * width;
        S mu = S(0);
        for (int i = 0; i < width; ++i) mu += row[i];
        mu /= S(width);
        S var = S(0);
        for (int i = 0; i < width; ++i) {
            S d = row[i] - mu;
            var += d * d;
        }
        var /= S(width);
        const S is = S(1) / std::sqrt(var + eps);
        inv_sigma[static_cast<size_t>(r)] = is;
        S* xh = xhat.data.data() + r * width;
        for (int i = 0; i < width; ++i) {
            xh[i] = (row[i] - mu) * is;
            row[i] = xh[i] * g[affine_ix(r, i)] + b[affine_ix(r, i)];
        }
    }
    auto xn = x.node(), gn = gain.node(), bn = offset.node();
    return make_op<S>(
        std::move(out), {x, gain, offset},
        [xn, gn, bn, rows, width, affine_ix, xhat = std::move(xhat),
         inv_sigma = std::move(inv_sigma)](Node<S>& self) {
            const S* gval = gn->value.data.data();
            for (int64_t r = 0; r < rows; ++r) {
                const S* dy = self.grad.data.data() + r * width;
                const S* xh = xhat.data.data() + r * width;
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    for (int i = 0; i < width; ++i)
                        gn->grad.data[affine_ix(r, i)] += dy[i] * xh[i];
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    for (int i = 0; i < width; ++i) bn->grad.data[affine_ix(r, i)] += dy[i];
                }
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    S mean_dyh = S(0), mean_dyh_xh = S(0);
                    // dyh = dL/d xhat
                    for (int i = 0; i < width; ++i) {
                        const S dyh = dy[i] * gval[affine_ix(r, i)];
                        mean_dyh += dyh;
                        mean_dyh_xh += dyh * xh[i];
                    }
                    mean_dyh /= S(width);
                    mean_dyh_xh /= S(width);
                    S* dx = xn->grad.data.data() + r * width;
                    const S is = inv_sigma[static_cast<size_t>(r)];
                    for (int i = 0; i < width; ++i) {
                        const S dyh = dy[i] * gval[affine_ix(r, i)];
                        dx[i] += is * (dyh - mean_dyh - xh[i] * mean_dyh_xh);
                    }
                }
            }
        });
}
}  // namespace detail

// LayerNorm over the last dimension; gain/offset have that length.
template <class S>
Value<S> layer_norm(const Value<S>& x, const Value<S>& gain, const Value<S>& offset,
                    S eps = S(1e-5)) {
    const int d = x.val().shape.back();
    if (gain.val().numel() != d || offset.val().numel() != d)
        throw std::invalid_argument("layer_norm: affine length must equal last dim");
    const int64_t rows = x.val().numel() / d;
    return detail::norm_rows(x, gain, offset, eps, rows, d,
                             [](int64_t, int i) { return i; });
}

// Per-channel normalization over the spatial grid of a (B,C,H,W) map, with a
// per-channel affine. Batch-independent by construction.
template <class S>
Value<S> spatial_norm(const Value<S>& x, const Value<S>& gain, const Value<S>& offset,
                      S eps = S(1e-5)) {
    if (x.val().rank() != 4) throw std::invalid_argument("spatial_norm: expects BCHW");
    const int b = x.val().dim(0), c = x.val().dim(1);
    const int hw = x.val().dim(2) * x.val().dim(3);
    if (gain.val().numel() != c || offset.val().numel() != c)
        throw std::invalid_argument("spatial_norm: affine length must equal channels");
    return detail::norm_rows(x, gain, offset, eps, int64_t(b) * c, hw,
                             [c](int64_t r, int) { return static_cast<int>(r % c); });
}

// ---------------------------------------------------------------------------
// linear / batched matmul
// ---------------------------------------------------------------------------

// y = x @ W^T + b for x (..., Din), W (Dout, Din), b (Dout).
template <class S>
Value<S> linear(const Value<S>& x, const Value<S>& w, const Value<S>& b) {
    const int din = x.val().shape.back();
    if (w.val().rank() != 2 || w.val().dim(1) != din)
        throw std::invalid_argument("linear: weight " + w.val().shape_str() +
                                    " does not accept input " + x.val().shape_str());
    const int dout = w.val().dim(0);
    if (b.defined() && b.val().numel() != dout)
        throw std::invalid_argument("linear: bias length mismatch");
    const int64_t rows = x.val().numel() / din;
    std::vector<int> oshape = x.val().shape;
    oshape.back() = dout;
    Tensor<S> out(oshape);
    matmul<S>(false, true, static_cast<int>(rows), dout, din, x.val().data.data(),
              w.val().data.data(), out.data.data());
    if (b.defined()) {
        const S* pb = b.val().data.data();
        for (int64_t r = 0; r < rows; ++r) {
            S* po = out.data.data() + r * dout;
            for (int j = 0; j < dout; ++j) po[j] += pb[j];
        }
    }
    auto xn = x.node(), wn = w.node();
    auto bn = b.defined() ? b.node() : nullptr;
    std::vector<Value<S>> parents = {x, w};
    if (b.defined()) parents.push_back(b);
    return make_op<S>(std::move(out), std::move(parents),
                      [xn, wn, bn, rows, din, dout](Node<S>& self) {
                          const S* dy = self.grad.data.data();
                          if (xn->requires_grad) {
                              xn->ensure_grad();
                              matmul<S>(false, false, static_cast<int>(rows), din, dout, dy,
                                        wn->value.data.data(), xn->grad.data.data(), S(1),
                                        S(1));
                          }
                          if (wn->requires_grad) {
                              wn->ensure_grad();
                              matmul<S>(true, false, dout, din, static_cast<int>(rows), dy,
                                        xn->value.data.data(), wn->grad.data.data(), S(1),
                                        S(1));
                          }
                          if (bn && bn->requires_grad) {
                              bn->ensure_grad();
                              for (int64_t r = 0; r < rows; ++r)
                                  for (int j = 0; j < dout; ++j)
                                      bn->grad.data[j] += dy[r * dout + j];
                          }
                      });
}

// Batched matmul on (G,M,K) x (G,K,N) -> (G,M,N); trans_b multiplies by b^T
// where b is (G,N,K).
template <class S>
Value<S> bmm(const Value<S>& a, const Value<S>& b, bool trans_b = false) {
    const auto& av = a.val();
    const auto& bv = b.val();
    if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0))
        throw std::invalid_argument("bmm: expects matching (G,·,·) operands");
    const int g = av.dim(0), m = av.dim(1), k = av.dim(2);
    const int n = trans_b ? bv.dim(1) : bv.dim(2);
    const int bk = trans_b ? bv.dim(2) : bv.dim(1);
    if (bk != k)
        throw std::invalid_argument("bmm: inner dims " + av.shape_str() + " vs " +
                                    bv.shape_str());
    Tensor<S> out({g, m, n});
    for (int i = 0; i < g; ++i)
        matmul<S>(false, trans_b, m, n, k, av.data.data() + int64_t(i) * m * k,
                  bv.data.data() + int64_t(i) * bv.dim(1) * bv.dim(2),
                  out.data.data() + int64_t(i) * m * n);
    auto an = a.node(), bn = b.node();
    return make_op<S>(std::move(out), {a, b}, [an, bn, g, m, n, k, trans_b](Node<S>& self) {
        for (int i = 0; i < g; ++i) {
            const S* dy = self.grad.data.data() + int64_t(i) * m * n;
            const S* pa = an->value.data.data() + int64_t(i) * m * k;
            const S* pb = bn->value.data.data() +
                          int64_t(i) * bn->value.dim(1) * bn->value.dim(2);
            if (an->requires_grad) {
                an->ensure_grad();
                S* da = an->grad.data.data() + int64_t(i) * m * k;
                // dA = dY * B   (or dY * B when B given transposed: dA = dY * B)
                matmul<S>(false, !trans_b ? true : false, m, k, n, dy, pb, da, S(1), S(1));
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                S* db = bn->grad.data.data() +
                        int64_t(i) * bn->value.dim(1) * bn->value.dim(2);
                if (!trans_b) {
                    // dB = A^T * dY
                    matmul<S>(true, false, k, n, m, pa, dy, db, S(1), S(1));
                } else {
                    // B is (N,K): dB = dY^T * A
                    matmul<S>(true, false, n, k, m, dy, pa, db, S(1), S(1));
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// convolution
// ---------------------------------------------------------------------------

struct ConvGeom {
    int b, cin, h, w;
    int cout, kh, kw;
    int sh, sw, ph, pw;
    int ho, wo;
};

inline ConvGeom conv_geometry(const std::vector<int>& xs, const std::vector<int>& ws,
                              int sh, int sw, int ph, int pw) {
    if (xs.size() != 4 || ws.size() != 4)
        throw std::invalid_argument("conv2d: expects BCHW input and OIKK weight");
    ConvGeom g{};
    g.b = xs[0];
    g.cin = xs[1];
    g.h = xs[2];
    g.w = xs[3];
    g.cout = ws[0];
    g.kh = ws[2];
    g.kw = ws[3];
    g.sh = sh;
    g.sw = sw;
    g.ph = ph;
    g.pw = pw;
    if (ws[1] != g.cin) {
        std::ostringstream os;
        os << "conv2d: input channels " << g.cin << " do not match kernel (" << ws[0]
           << "," << ws[1] << "," << ws[2] << "," << ws[3] << ")";
        throw std::invalid_argument(os.str());
    }
    const int hnum = g.h + 2 * ph - g.kh;
    const int wnum = g.w + 2 * pw - g.kw;
    if (hnum < 0 || wnum < 0 || hnum % sh != 0 || wnum % sw != 0)
        throw std::invalid_argument("conv2d: padding/stride do not tile the input");
    g.ho = hnum / sh + 1;
    g.wo = wnum / sw + 1;
    return g;
}

namespace detail {
// col is (Ho*Wo, Cin*Kh*Kw) for one batch element.
template <class S>
void im2col(const S* x, const ConvGeom& g, S* col) {
    const int kk = g.cin * g.kh * g.kw;
    for (int oy = 0; oy < g.ho; ++oy) {
        for (int ox = 0; ox < g.wo; ++ox) {
            S* row = col + (int64_t(oy) * g.wo + ox) * kk;
            int idx = 0;
            for (int c = 0; c < g.cin; ++c) {
                const S* xc = x + int64_t(c) * g.h * g.w;
                for (int ky = 0; ky < g.kh; ++ky) {
                    const int iy = oy * g.sh + ky - g.ph;
                    for (int kx = 0; kx < g.kw; ++kx, ++idx) {
                        const int ix = ox * g.sw + kx - g.pw;
                        row[idx] = (iy >= 0 && iy < g.h && ix >= 0 && ix < g.w)
                                       ? xc[int64_t(iy) * g.w + ix]
                                       : S(0);
                    }
                }
            }
        }
    }
}

template <class S>
void col2im_add(const S* col, const ConvGeom& g, S* dx) {
    const int kk = g.cin * g.kh * g.kw;
    for (int oy = 0; oy < g.ho; ++oy) {
        for (int ox = 0; ox < g.wo; ++ox) {
            const S* row = col + (int64_t(oy) * g.wo + ox) * kk;
            int idx = 0;
            for (int c = 0; c < g.cin; ++c) {
                S* xc = dx + int64_t(c) * g.h * g.w;
                for (int ky = 0; ky < g.kh; ++ky) {
                    const int iy = oy * g.sh + ky - g.ph;
                    for (int kx = 0; kx < g.kw; ++kx, ++idx) {
                        const int ix = ox * g.sw + kx - g.pw;
                        if (iy >= 0 && iy < g.h && ix >= 0 && ix < g.w)
                            xc[int64_t(iy) * g.w + ix] += row[idx];
                    }
                }
            }
        }
    }
}
}  // namespace detail

// Cross-correlation conv2d, weight (Cout,Cin,Kh,Kw), bias (Cout) optional.
// im2col + GEMM on the forward path; backward recomputes the col buffer.
template <class S>
Value<S> conv2d(const Value<S>& x, const Value<S>& w, const Value<S>& b, int sh = 1,
                int sw = 1, int ph = 0, int pw = 0) {
    const ConvGeom g = conv_geometry(x.val().shape, w.val().shape, sh, sw, ph, pw);
    if (b.defined() && b.val().numel() != g.cout)
        throw std::invalid_argument("conv2d: bias length mismatch");
    const int kk = g.cin * g.kh * g.kw;
    const int64_t hw = int64_t(g.ho) * g.wo;
    Tensor<S> out({g.b, g.cout, g.ho, g.wo});
    std::vector<S> col(static_cast<size_t>(hw) * kk);
    for (int bi = 0; bi < g.b; ++bi) {
        detail::im2col(x.val().data.data() + int64_t(bi) * g.cin * g.h * g.w, g,
                       col.data());
        // out_b (Cout, HoWo) = W (Cout, kk) * col^T
        matmul<S>(false, true, g.cout, static_cast<int>(hw), kk, w.val().data.data(),
                  col.data(), out.data.data() + int64_t(bi) * g.cout * hw);
    }
    if (b.defined()) {
        const S* pb = b.val().data.data();
        for (int bi = 0; bi < g.b; ++bi)
            for (int c = 0; c < g.cout; ++c) {
                S* po = out.data.data() + (int64_t(bi) * g.cout + c) * hw;
                for (int64_t i = 0; i < hw; ++i) po[i] += pb[c];
            }
    }
    auto xn = x.node(), wn = w.node();
    auto bnode = b.defined() ? b.node() : nullptr;
    std::vector<Value<S>> parents = {x, w};
    if (b.defined()) parents.push_back(b);
    return make_op<S>(std::move(out), std::move(parents), [xn, wn, bnode, g, kk,
                                                           hw](Node<S>& self) {
        std::vector<S> col(static_cast<size_t>(hw) * kk);
        std::vector<S> dcol;
        if (xn->requires_grad) dcol.resize(static_cast<size_t>(hw) * kk);
        for (int bi = 0; bi < g.b; ++bi) {
            const S* dy = self.grad.data.data() + int64_t(bi) * g.cout * hw;
            if (wn->requires_grad || xn->requires_grad)
                detail::im2col(xn->value.data.data() + int64_t(bi) * g.cin * g.h * g.w, g,
                               col.data());
            if (wn->requires_grad) {
                wn->ensure_grad();
                // dW (Cout, kk) += dY_b (Cout, HoWo) * col (HoWo, kk)
                matmul<S>(false, false, g.cout, kk, static_cast<int>(hw), dy, col.data(),
                          wn->grad.data.data(), S(1), S(1));
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                // dcol (HoWo, kk) = dY_b^T (HoWo, Cout) * W (Cout, kk)
                matmul<S>(true, false, static_cast<int>(hw), kk, g.cout, dy,
                          wn->value.data.data(), dcol.data());
                detail::col2im_add(dcol.data(), g,
                                   xn->grad.data.data() + int64_t(bi) * g.cin * g.h * g.w);
            }
            if (bnode && bnode->requires_grad) {
                bnode->ensure_grad();
                for (int c = 0; c < g.cout; ++c) {
                    S acc = S(0);
                    const S* row = dy + int64_t(c) * hw;
                    for (int64_t i = 0; i < hw; ++i) acc += row[i];
                    bnode->grad.data[c] += acc;
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// shape movement
// ---------------------------------------------------------------------------

template <class S>
Value<S> reshape(const Value<S>& a, std::vector<int> shape) {
    Tensor<S> out = a.val().reshaped(std::move(shape));
    auto an = a.node();
    return make_op<S>(std::move(out), {a},
                      [an](Node<S>& self) { accum(an, self.grad.data.data()); });
}

// (A,B,C,D) -> (A,C,B,D); applying it twice is the identity.
template <class S>
Value<S> permute_0213(const Value<S>& a) {
    const auto& v = a.val();
    if (v.rank() != 4) throw std::invalid_argument("permute_0213: expects rank 4");
    const int d0 = v.dim(0), d1 = v.dim(1), d2 = v.dim(2), d3 = v.dim(3);
    Tensor<S> out({d0, d2, d1, d3});
    for (int i = 0; i < d0; ++i)
        for (int j = 0; j < d1; ++j)
            for (int k = 0; k < d2; ++k)
                std::memcpy(&out.at(i, k, j, 0), &v.at(i, j, k, 0), sizeof(S) * d3);
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an, d0, d1, d2, d3](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (int i = 0; i < d0; ++i)
            for (int k = 0; k < d2; ++k)
                for (int j = 0; j < d1; ++j) {
                    const S* src = &self.grad.at(i, k, j, 0);
                    S* dst = &an->grad.at(i, j, k, 0);
                    for (int l = 0; l < d3; ++l) dst[l] += src[l];
                }
    });
}

// (B,C,H,W) -> (B,H*W,C) token view of a feature map.
template <class S>
Value<S> to_tokens(const Value<S>& a) {
    const auto& v = a.val();
    if (v.rank() != 4) throw std::invalid_argument("to_tokens: expects BCHW");
    const int b = v.dim(0), c = v.dim(1), hw = v.dim(2) * v.dim(3);
    Tensor<S> out({b, hw, c});
    for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < c; ++ci) {
            const S* src = v.data.data() + (int64_t(bi) * c + ci) * hw;
            for (int t = 0; t < hw; ++t) out.at(bi, t, ci) = src[t];
        }
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an, b, c, hw](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (int bi = 0; bi < b; ++bi)
            for (int ci = 0; ci < c; ++ci) {
                S* dst = an->grad.data.data() + (int64_t(bi) * c + ci) * hw;
                for (int t = 0; t < hw; ++t) dst[t] += self.grad.at(bi, t, ci);
            }
    });
}

// (B,T,C) tokens -> (B,C,H,W) with T == H*W.
template <class S>
Value<S> from_tokens(const Value<S>& a, int h, int w) {
    const auto& v = a.val();
    if (v.rank() != 3 || v.dim(1) != h * w)
        throw std::invalid_argument("from_tokens: token count " +
                                    std::to_string(v.rank() == 3 ? v.dim(1) : -1) +
                                    " does not equal grid " + std::to_string(h) + "x" +
                                    std::to_string(w));
    const int b = v.dim(0), c = v.dim(2), hw = h * w;
    Tensor<S> out({b, c, h, w});
    for (int bi = 0; bi < b; ++bi)
        for (int t = 0; t < hw; ++t)
            for (int ci = 0; ci < c; ++ci)
                out.data[(int64_t(bi) * c + ci) * hw + t] = v.at(bi, t, ci);
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an, b, c, hw](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (int bi = 0; bi < b; ++bi)
            for (int t = 0; t < hw; ++t)
                for (int ci = 0; ci < c; ++ci)
                    an->grad.at(bi, t, ci) += self.grad.data[(int64_t(bi) * c + ci) * hw + t];
    });
}

template <class S>
Value<S> pixel_shuffle(const Value<S>& a, int s) {
    const auto& v = a.val();
    if (v.rank() != 4) throw std::invalid_argument("pixel_shuffle: expects BCHW");
    const int b = v.dim(0), c = v.dim(1), h = v.dim(2), w = v.dim(3);
    if (s < 1 || c % (s * s) != 0)
        throw std::invalid_argument("pixel_shuffle: channels " + std::to_string(c) +
                                    " not divisible by s^2 with s=" + std::to_string(s));
    const int co = c / (s * s);
    Tensor<S> out({b, co, h * s, w * s});
    for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < co; ++ci)
            for (int dy = 0; dy < s; ++dy)
                for (int dx = 0; dx < s; ++dx) {
                    const int cin = ci * s * s + dy * s + dx;
                    for (int y = 0; y < h; ++y)
                        for (int x = 0; x < w; ++x)
                            out.at(bi, ci, y * s + dy, x * s + dx) = v.at(bi, cin, y, x);
                }
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an, b, co, s, h, w](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (int bi = 0; bi < b; ++bi)
            for (int ci = 0; ci < co; ++ci)
                for (int dy = 0; dy < s; ++dy)
                    for (int dx = 0; dx < s; ++dx) {
                        const int cin = ci * s * s + dy * s + dx;
                        for (int y = 0; y < h; ++y)
                            for (int x = 0; x < w; ++x)
                                an->grad.at(bi, cin, y, x) +=
                                    self.grad.at(bi, ci, y * s + dy, x * s + dx);
                    }
    });
}

// Inverse of pixel_shuffle (space-to-depth); used by tests and downsampling.
template <class S>
Tensor<S> pixel_unshuffle_tensor(const Tensor<S>& v, int s) {
    const int b = v.dim(0), c = v.dim(1), h = v.dim(2), w = v.dim(3);
    if (h % s != 0 || w % s != 0)
        throw std::invalid_argument("pixel_unshuffle: grid not divisible by s");
    Tensor<S> out({b, c * s * s, h / s, w / s});
    for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < c; ++ci)
            for (int dy = 0; dy < s; ++dy)
                for (int dx = 0; dx < s; ++dx) {
                    const int cout = ci * s * s + dy * s + dx;
                    for (int y = 0; y < h / s; ++y)
                        for (int x = 0; x < w / s; ++x)
                            out.at(bi, cout, y, x) = v.at(bi, ci, y * s + dy, x * s + dx);
                }
    return out;
}

// ---------------------------------------------------------------------------
// pooling / gating / concatenation
// ---------------------------------------------------------------------------

// (B,C,H,W) -> (B,C) spatial mean.
template <class S>
Value<S> global_avg_pool(const Value<S>& a) {
    const auto& v = a.val();
    if (v.rank() != 4) throw std::invalid_argument("global_avg_pool: expects BCHW");
    const int b = v.dim(0), c = v.dim(1);
    const int64_t hw = int64_t(v.dim(2)) * v.dim(3);
    Tensor<S> out({b, c});
    for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < c; ++ci) {
            const S* src = v.data.data() + (int64_t(bi) * c + ci) * hw;
            S acc = S(0);
            for (int64_t i = 0; i < hw; ++i) acc += src[i];
            out.at(bi, ci) = acc / S(hw);
        }
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an, b, c, hw](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (int bi = 0; bi < b; ++bi)
            for (int ci = 0; ci < c; ++ci) {
                const S g = self.grad.at(bi, ci) / S(hw);
                S* dst = an->grad.data.data() + (int64_t(bi) * c + ci) * hw;
                for (int64_t i = 0; i < hw; ++i) dst[i] += g;
            }
    });
}

// Scales each channel of x (B,C,H,W) by gate (B,C).
template <class S>
Value<S> channelwise_mul(const Value<S>& x, const Value<S>& gate) {
    const auto& v = x.val();
    if (v.rank() != 4 || gate.val().rank() != 2 || gate.val().dim(0) != v.dim(0) ||
        gate.val().dim(1) != v.dim(1))
        throw std::invalid_argument("channelwise_mul: gate " + gate.val().shape_str() +
                                    " does not match map " + v.shape_str());
    const int b = v.dim(0), c = v.dim(1);
    const int64_t hw = int64_t(v.dim(2)) * v.dim(3);
    Tensor<S> out = v;
    for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < c; ++ci) {
            const S g = gate.val().at(bi, ci);
            S* dst = out.data.data() + (int64_t(bi) * c + ci) * hw;
            for (int64_t i = 0; i < hw; ++i) dst[i] *= g;
        }
    auto xn = x.node(), gn = gate.node();
    return make_op<S>(std::move(out), {x, gate}, [xn, gn, b, c, hw](Node<S>& self) {
        for (int bi = 0; bi < b; ++bi)
            for (int ci = 0; ci < c; ++ci) {
                const int64_t off = (int64_t(bi) * c + ci) * hw;
                const S* dy = self.grad.data.data() + off;
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    const S g = gn->value.at(bi, ci);
                    S* dx = xn->grad.data.data() + off;
                    for (int64_t i = 0; i < hw; ++i) dx[i] += dy[i] * g;
                }
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    const S* xv = xn->value.data.data() + off;
                    S acc = S(0);
                    for (int64_t i = 0; i < hw; ++i) acc += dy[i] * xv[i];
                    gn->grad.at(bi, ci) += acc;
                }
            }
    });
}

template <class S>
Value<S> concat_channels(const Value<S>& a, const Value<S>& b) {
    const auto& av = a.val();
    const auto& bv = b.val();
    if (av.rank() != 4 || bv.rank() != 4 || av.dim(0) != bv.dim(0) ||
        av.dim(2) != bv.dim(2) || av.dim(3) != bv.dim(3))
        throw std::invalid_argument("concat_channels: grids differ, " + av.shape_str() +
                                    " vs " + bv.shape_str());
    const int n = av.dim(0), ca = av.dim(1), cb = bv.dim(1);
    const int64_t hw = int64_t(av.dim(2)) * av.dim(3);
    Tensor<S> out({n, ca + cb, av.dim(2), av.dim(3)});
    for (int bi = 0; bi < n; ++bi) {
        std::memcpy(out.data.data() + int64_t(bi) * (ca + cb) * hw,
                    av.data.data() + int64_t(bi) * ca * hw, sizeof(S) * ca * hw);
        std::memcpy(out.data.data() + (int64_t(bi) * (ca + cb) + ca) * hw,
                    bv.data.data() + int64_t(bi) * cb * hw, sizeof(S) * cb * hw);
    }
    auto an = a.node(), bn = b.node();
    return make_op<S>(std::move(out), {a, b}, [an, bn, n, ca, cb, hw](Node<S>& self) {
        for (int bi = 0; bi < n; ++bi) {
            if (an->requires_grad) {
                an->ensure_grad();
                const S* src = self.grad.data.data() + int64_t(bi) * (ca + cb) * hw;
                S* dst = an->grad.data.data() + int64_t(bi) * ca * hw;
                for (int64_t i = 0; i < ca * hw; ++i) dst[i] += src[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                const S* src = self.grad.data.data() + (int64_t(bi) * (ca + cb) + ca) * hw;
                S* dst = bn->grad.data.data() + int64_t(bi) * cb * hw;
                for (int64_t i = 0; i < cb * hw; ++i) dst[i] += src[i];
            }
        }
    });
}

// Tiles a (T,D) parameter over the batch: (B,T,D). Grad sums over batch.
template <class S>
Value<S> broadcast_rows(const Value<S>& p, int batch) {
    const auto& v = p.val();
    if (v.rank() != 2) throw std::invalid_argument("broadcast_rows: expects (T,D)");
    const int64_t per = v.numel();
    Tensor<S> out({batch, v.dim(0), v.dim(1)});
    for (int bi = 0; bi < batch; ++bi)
        std::memcpy(out.data.data() + bi * per, v.data.data(), sizeof(S) * per);
    auto pn = p.node();
    return make_op<S>(std::move(out), {p}, [pn, batch, per](Node<S>& self) {
        if (!pn->requires_grad) return;
        pn->ensure_grad();
        for (int bi = 0; bi < batch; ++bi)
            for (int64_t i = 0; i < per; ++i)
                pn->grad.data[i] += self.grad.data[bi * per + i];
    });
}

// (B*H, T, S') -> (B, T, S') mean over the head groups.
template <class S>
Value<S> head_mean(const Value<S>& a, int batch, int heads) {
    const auto& v = a.val();
    if (v.rank() != 3 || v.dim(0) != batch * heads)
        throw std::invalid_argument("head_mean: leading dim must be batch*heads");
    const int64_t per = int64_t(v.dim(1)) * v.dim(2);
    Tensor<S> out({batch, v.dim(1), v.dim(2)});
    const S inv = S(1) / S(heads);
    for (int bi = 0; bi < batch; ++bi)
        for (int h = 0; h < heads; ++h) {
            const S* src = v.data.data() + (int64_t(bi) * heads + h) * per;
            S* dst = out.data.data() + bi * per;
            for (int64_t i = 0; i < per; ++i) dst[i] += src[i] * inv;
        }
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an, batch, heads, per](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        const S inv = S(1) / S(heads);
        for (int bi = 0; bi < batch; ++bi)
            for (int h = 0; h < heads; ++h) {
                S* dst = an->grad.data.data() + (int64_t(bi) * heads + h) * per;
                const S* src = self.grad.data.data() + bi * per;
                for (int64_t i = 0; i < per; ++i) dst[i] += src[i] * inv;
            }
    });
}

// ---------------------------------------------------------------------------
// sequence helpers for the recurrent blocks
// ---------------------------------------------------------------------------

// (B,C,H,W) -> (W, B*H, C): width-major step sequence over row-sequences.
template <class S>
Value<S> to_width_seq(const Value<S>& a) {
    const auto& v = a.val();
    if (v.rank() != 4) throw std::invalid_argument("to_width_seq: expects BCHW");
    const int b = v.dim(0), c = v.dim(1), h = v.dim(2), w = v.dim(3);
    Tensor<S> out({w, b * h, c});
    for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    out.at(x, bi * h + y, ci) = v.at(bi, ci, y, x);
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an, b, c, h, w](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (int bi = 0; bi < b; ++bi)
            for (int ci = 0; ci < c; ++ci)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        an->grad.at(bi, ci, y, x) += self.grad.at(x, bi * h + y, ci);
    });
}

// (W, B*H, C) -> (B,C,H,W).
template <class S>
Value<S> from_width_seq(const Value<S>& a, int b, int h) {
    const auto& v = a.val();
    if (v.rank() != 3 || v.dim(1) != b * h)
        throw std::invalid_argument("from_width_seq: row count mismatch");
    const int w = v.dim(0), c = v.dim(2);
    Tensor<S> out({b, c, h, w});
    for (int x = 0; x < w; ++x)
        for (int bi = 0; bi < b; ++bi)
            for (int y = 0; y < h; ++y)
                for (int ci = 0; ci < c; ++ci)
                    out.at(bi, ci, y, x) = v.at(x, bi * h + y, ci);
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an, b, c, h, w](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (int x = 0; x < w; ++x)
            for (int bi = 0; bi < b; ++bi)
                for (int y = 0; y < h; ++y)
                    for (int ci = 0; ci < c; ++ci)
                        an->grad.at(x, bi * h + y, ci) += self.grad.at(bi, ci, y, x);
    });
}

// Step t of a (T,R,C) sequence -> (R,C).
template <class S>
Value<S> seq_step(const Value<S>& a, int t) {
    const auto& v = a.val();
    if (v.rank() != 3 || t < 0 || t >= v.dim(0))
        throw std::invalid_argument("seq_step: index out of range");
    const int64_t per = int64_t(v.dim(1)) * v.dim(2);
    Tensor<S> out({v.dim(1), v.dim(2)});
    std::memcpy(out.data.data(), v.data.data() + t * per, sizeof(S) * per);
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an, t, per](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        S* dst = an->grad.data.data() + t * per;
        for (int64_t i = 0; i < per; ++i) dst[i] += self.grad.data[i];
    });
}

// Stacks T same-shape (R,C) steps into (T,R,C).
template <class S>
Value<S> stack_steps(const std::vector<Value<S>>& steps) {
    if (steps.empty()) throw std::invalid_argument("stack_steps: empty sequence");
    const auto& s0 = steps.front().val();
    const int64_t per = s0.numel();
    Tensor<S> out({static_cast<int>(steps.size()), s0.dim(0), s0.dim(1)});
    for (size_t t = 0; t < steps.size(); ++t) {
        check_same_shape(steps[t].val().shape, s0.shape, "stack_steps");
        std::memcpy(out.data.data() + t * per, steps[t].val().data.data(),
                    sizeof(S) * per);
    }
    std::vector<std::shared_ptr<Node<S>>> nodes;
    nodes.reserve(steps.size());
    for (const auto& s : steps) nodes.push_back(s.node());
    return make_op<S>(std::move(out), steps, [nodes, per](Node<S>& self) {
        for (size_t t = 0; t < nodes.size(); ++t) {
            if (!nodes[t]->requires_grad) continue;
            nodes[t]->ensure_grad();
            const S* src = self.grad.data.data() + t * per;
            for (int64_t i = 0; i < per; ++i) nodes[t]->grad.data[i] += src[i];
        }
    });
}

// Column slice [c0,c1) of an (R,C) matrix.
template <class S>
Value<S> slice_cols(const Value<S>& a, int c0, int c1) {
    const auto& v = a.val();
    if (v.rank() != 2 || c0 < 0 || c1 > v.dim(1) || c0 >= c1)
        throw std::invalid_argument("slice_cols: bad range");
    const int r = v.dim(0), c = v.dim(1), w = c1 - c0;
    Tensor<S> out({r, w});
    for (int i = 0; i < r; ++i)
        std::memcpy(out.data.data() + int64_t(i) * w, v.data.data() + int64_t(i) * c + c0,
                    sizeof(S) * w);
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an, r, c, c0, w](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (int i = 0; i < r; ++i) {
            const S* src = self.grad.data.data() + int64_t(i) * w;
            S* dst = an->grad.data.data() + int64_t(i) * c + c0;
            for (int j = 0; j < w; ++j) dst[j] += src[j];
        }
    });
}

// Concatenate two (R,C) matrices along columns.
template <class S>
Value<S> concat_cols(const Value<S>& a, const Value<S>& b) {
    const auto& av = a.val();
    const auto& bv = b.val();
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(0) != bv.dim(0))
        throw std::invalid_argument("concat_cols: row counts differ");
    const int r = av.dim(0), ca = av.dim(1), cb = bv.dim(1);
    Tensor<S> out({r, ca + cb});
    for (int i = 0; i < r; ++i) {
        std::memcpy(out.data.data() + int64_t(i) * (ca + cb),
                    av.data.data() + int64_t(i) * ca, sizeof(S) * ca);
        std::memcpy(out.data.data() + int64_t(i) * (ca + cb) + ca,
                    bv.data.data() + int64_t(i) * cb, sizeof(S) * cb);
    }
    auto an = a.node(), bn = b.node();
    return make_op<S>(std::move(out), {a, b}, [an, bn, r, ca, cb](Node<S>& self) {
        for (int i = 0; i < r; ++i) {
            const S* src = self.grad.data.data() + int64_t(i) * (ca + cb);
            if (an->requires_grad) {
                an->ensure_grad();
                S* dst = an->grad.data.data() + int64_t(i) * ca;
                for (int j = 0; j < ca; ++j) dst[j] += src[j];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                S* dst = bn->grad.data.data() + int64_t(i) * cb;
                for (int j = 0; j < cb; ++j) dst[j] += src[ca + j];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <class S>
Value<S> mean_all(const Value<S>& a) {
    const int64_t n = a.val().numel();
    Tensor<S> out({1});
    S acc = S(0);
    for (const auto& v : a.val().data) acc += v;
    out.data[0] = acc / S(n);
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an, n](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        const S g = self.grad.data[0] / S(n);
        for (int64_t i = 0; i < n; ++i) an->grad.data[i] += g;
    });
}

template <class S>
Value<S> sum_all(const Value<S>& a) {
    Tensor<S> out({1});
    S acc = S(0);
    for (const auto& v : a.val().data) acc += v;
    out.data[0] = acc;
    auto an = a.node();
    return make_op<S>(std::move(out), {a}, [an](Node<S>& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        const S g = self.grad.data[0];
        for (auto& v : an->grad.data) v += g;
    });
}

}  // namespace sgenet::nn
