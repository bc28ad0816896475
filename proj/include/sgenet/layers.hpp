#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sgenet/ops.hpp"

namespace sgenet::nn {

template <class S>
using NamedParams = std::vector<std::pair<std::string, Value<S>>>;

template <class S>
void add_param(NamedParams<S>& out, const std::string& name, const Value<S>& v) {
    out.emplace_back(name, v);
}

template <class S>
struct LinearLayer {
    Value<S> w, b;

    LinearLayer() = default;
    LinearLayer(int din, int dout, Rng& rng, bool bias = true) {
        w = Value<S>::leaf(random_normal<S>({dout, din}, rng, std::sqrt(1.0 / din)), true);
        if (bias) b = Value<S>::leaf(Tensor<S>({dout}, S(0)), true);
    }
    Value<S> operator()(const Value<S>& x) const { return linear(x, w, b); }
    void named_params(const std::string& p, NamedParams<S>& out) const {
        add_param(out, p + ".w", w);
        if (b.defined()) add_param(out, p + ".b", b);
    }
};

template <class S>
struct Conv2dLayer {
    Value<S> w, b;
    int sh = 1, sw = 1, ph = 0, pw = 0;

    Conv2dLayer() = default;
    Conv2dLayer(int cin, int cout, int kh, int kw, Rng& rng, int stride_h = 1,
                int stride_w = 1, int pad_h = 0, int pad_w = 0)
        : sh(stride_h), sw(stride_w), ph(pad_h), pw(pad_w) {
        const double fan_in = double(cin) * kh * kw;
        w = Value<S>::leaf(random_normal<S>({cout, cin, kh, kw}, rng, std::sqrt(2.0 / fan_in)),
                           true);
        b = Value<S>::leaf(Tensor<S>({cout}, S(0)), true);
    }
    Value<S> operator()(const Value<S>& x) const { return conv2d(x, w, b, sh, sw, ph, pw); }
    void named_params(const std::string& p, NamedParams<S>& out) const {
        add_param(out, p + ".w", w);
        add_param(out, p + ".b", b);
    }
};

template <class S>
struct PreluLayer {
    Value<S> slope;

    PreluLayer() = default;
    explicit PreluLayer(double init) {
        slope = Value<S>::leaf(Tensor<S>({1}, S(init)), true);
    }
    Value<S> operator()(const Value<S>& x) const { return prelu(x, slope); }
    void named_params(const std::string& p, NamedParams<S>& out) const {
        add_param(out, p + ".slope", slope);
    }
};

template <class S>
struct LayerNormLayer {
    Value<S> gain, offset;
    S eps = S(1e-5);

    LayerNormLayer() = default;
    explicit LayerNormLayer(int d) {
        gain = Value<S>::leaf(Tensor<S>({d}, S(1)), true);
        offset = Value<S>::leaf(Tensor<S>({d}, S(0)), true);
    }
    Value<S> operator()(const Value<S>& x) const { return layer_norm(x, gain, offset, eps); }
    void named_params(const std::string& p, NamedParams<S>& out) const {
        add_param(out, p + ".gain", gain);
        add_param(out, p + ".offset", offset);
    }
};

template <class S>
struct SpatialNormLayer {
    Value<S> gain, offset;
    S eps = S(1e-5);

    SpatialNormLayer() = default;
    explicit SpatialNormLayer(int c) {
        gain = Value<S>::leaf(Tensor<S>({c}, S(1)), true);
        offset = Value<S>::leaf(Tensor<S>({c}, S(0)), true);
    }
    Value<S> operator()(const Value<S>& x) const {
        return spatial_norm(x, gain, offset, eps);
    }
    void named_params(const std::string& p, NamedParams<S>& out) const {
        add_param(out, p + ".gain", gain);
        add_param(out, p + ".offset", offset);
    }
};

// ---------------------------------------------------------------------------
// multi-head attention
// ---------------------------------------------------------------------------

template <class S>
struct MhaOut {
    Value<S> out;   // (B, Tq, D)
    Value<S> attn;  // (B*heads, Tq, Tk); every row sums to 1
};

template <class S>
struct MhaLayer {
    LinearLayer<S> wq, wk, wv, wo;
    int heads = 1;
    int dim = 0;

    MhaLayer() = default;
    MhaLayer(int d, int n_heads, Rng& rng) : heads(n_heads), dim(d) {
        if (n_heads < 1 || d % n_heads != 0)
            throw std::invalid_argument("multi_head_attention: dim " + std::to_string(d) +
                                        " not divisible by heads " +
                                        std::to_string(n_heads));
        wq = LinearLayer<S>(d, d, rng);
        wk = LinearLayer<S>(d, d, rng);
        wv = LinearLayer<S>(d, d, rng);
        wo = LinearLayer<S>(d, d, rng);
    }

    // q (B,Tq,D), k (B,Tk,D), v (B,Tk,D).
    MhaOut<S> operator()(const Value<S>& q, const Value<S>& k, const Value<S>& v) const {
        const auto& qs = q.val();
        if (qs.rank() != 3 || k.val().rank() != 3 || v.val().rank() != 3)
            throw std::invalid_argument("multi_head_attention: expects (B,T,D) operands");
        if (k.val().dim(1) != v.val().dim(1))
            throw std::invalid_argument("multi_head_attention: key/value token counts differ");
        if (qs.dim(2) != dim || k.val().dim(2) != dim || v.val().dim(2) != dim)
            throw std::invalid_argument("multi_head_attention: feature dim mismatch");
        const int b = qs.dim(0), tq = qs.dim(1), tk = k.val().dim(1);
        const int dh = dim / heads;

        auto split = [&](const Value<S>& x, int t) {
            auto y = reshape(x, {b, t, heads, dh});
            y = permute_0213(y);  // (B, heads, T, dh)
            return reshape(y, {b * heads, t, dh});
        };
        Value<S> Q = split(wq(q), tq);
        Value<S> K = split(wk(k), tk);
        Value<S> V = split(wv(v), tk);
        Q = scale(Q, S(1.0 / std::sqrt(double(dh))));
        Value<S> attn = softmax_lastdim(bmm(Q, K, /*trans_b=*/true));
        Value<S> ctx = bmm(attn, V);  // (B*heads, Tq, dh)
        ctx = reshape(ctx, {b, heads, tq, dh});
        ctx = permute_0213(ctx);  // (B, Tq, heads, dh)
        ctx = reshape(ctx, {b, tq, dim});
        return {wo(ctx), attn};
    }

    void named_params(const std::string& p, NamedParams<S>& out) const {
        wq.named_params(p + ".wq", out);
        wk.named_params(p + ".wk", out);
        wv.named_params(p + ".wv", out);
        wo.named_params(p + ".wo", out);
    }
};

// linear -> ReLU -> linear token MLP.
template <class S>
struct MlpLayer {
    LinearLayer<S> fc1, fc2;

    MlpLayer() = default;
    MlpLayer(int d, int hidden, Rng& rng) : fc1(d, hidden, rng), fc2(hidden, d, rng) {}
    Value<S> operator()(const Value<S>& x) const { return fc2(relu(fc1(x))); }
    void named_params(const std::string& p, NamedParams<S>& out) const {
        fc1.named_params(p + ".fc1", out);
        fc2.named_params(p + ".fc2", out);
    }
};

// Attention block: h' = LN(MHA(q,k,v) + q); out = LN(MLP(h') + h').
template <class S>
struct AttnBlock {
    MhaLayer<S> mha;
    MlpLayer<S> mlp;
    LayerNormLayer<S> ln1, ln2;

    AttnBlock() = default;
    AttnBlock(int d, int heads, Rng& rng)
        : mha(d, heads, rng), mlp(d, 2 * d, rng), ln1(d), ln2(d) {}

    MhaOut<S> operator()(const Value<S>& q, const Value<S>& k, const Value<S>& v) const {
        MhaOut<S> a = mha(q, k, v);
        Value<S> h1 = ln1(add(a.out, q));
        Value<S> h2 = ln2(add(mlp(h1), h1));
        return {h2, a.attn};
    }
    void named_params(const std::string& p, NamedParams<S>& out) const {
        mha.named_params(p + ".mha", out);
        mlp.named_params(p + ".mlp", out);
        ln1.named_params(p + ".ln1", out);
        ln2.named_params(p + ".ln2", out);
    }
};

// ---------------------------------------------------------------------------
// gated bidirectional recurrence along the width axis
// ---------------------------------------------------------------------------

template <class S>
struct GruDirection {
    // gates packed [z | r | n]: wx (3H, C) with bias, uh (3H, H) without.
    LinearLayer<S> wx, uh;
    int hidden = 0;

    GruDirection() = default;
    GruDirection(int cin, int h, Rng& rng) : wx(cin, 3 * h, rng), uh(h, 3 * h, rng, false), hidden(h) {}

    // One gated step; x_t (R,C), h (R,H) -> (R,H).
    Value<S> step(const Value<S>& x_t, const Value<S>& h) const {
        const int hd = hidden;
        Value<S> gx = wx(x_t);
        Value<S> gh = uh(h);
        Value<S> z = sigmoid(add(slice_cols(gx, 0, hd), slice_cols(gh, 0, hd)));
        Value<S> r = sigmoid(add(slice_cols(gx, hd, 2 * hd), slice_cols(gh, hd, 2 * hd)));
        Value<S> n =
            tanh_op(add(slice_cols(gx, 2 * hd, 3 * hd), mul(r, slice_cols(gh, 2 * hd, 3 * hd))));
        // h_new = (1-z)*n + z*h
        return add(n, mul(z, sub(h, n)));
    }
    void named_params(const std::string& p, NamedParams<S>& out) const {
        wx.named_params(p + ".wx", out);
        uh.named_params(p + ".uh", out);
    }
};

// Rows of the feature map are sequences over the width axis; forward and
// backward passes are concatenated so 2*hidden = output channels.
template <class S>
struct BiGruLayer {
    GruDirection<S> fwd, bwd;
    int hidden = 0;

    BiGruLayer() = default;
    BiGruLayer(int cin, int h, Rng& rng) : fwd(cin, h, rng), bwd(cin, h, rng), hidden(h) {}

    Value<S> operator()(const Value<S>& x) const {
        const auto& v = x.val();
        if (v.rank() != 4) throw std::invalid_argument("bidir_recurrent: expects BCHW");
        const int b = v.dim(0), h = v.dim(2), w = v.dim(3);
        Value<S> seq = to_width_seq(x);  // (W, B*H, C)
        const int rows = b * h;

        std::vector<Value<S>> hs_f(w), hs_b(w);
        Value<S> state = Value<S>::leaf(Tensor<S>({rows, hidden}, S(0)), false);
        for (int t = 0; t < w; ++t) {
            state = fwd.step(seq_step(seq, t), state);
            hs_f[t] = state;
        }
        state = Value<S>::leaf(Tensor<S>({rows, hidden}, S(0)), false);
        for (int t = w - 1; t >= 0; --t) {
            state = bwd.step(seq_step(seq, t), state);
            hs_b[t] = state;
        }
        std::vector<Value<S>> merged(w);
        for (int t = 0; t < w; ++t) merged[t] = concat_cols(hs_f[t], hs_b[t]);
        return from_width_seq(stack_steps(merged), b, h);
    }
    void named_params(const std::string& p, NamedParams<S>& out) const {
        fwd.named_params(p + ".fwd", out);
        bwd.named_params(p + ".bwd", out);
    }
};

// ---------------------------------------------------------------------------
// channel attention (squeeze-excitation gate)
// ---------------------------------------------------------------------------

template <class S>
struct ChannelAttentionLayer {
    LinearLayer<S> fc1, fc2;

    ChannelAttentionLayer() = default;
    ChannelAttentionLayer(int c, int reduction, Rng& rng)
        : fc1(c, c / reduction, rng), fc2(c / reduction, c, rng) {
        if (c % reduction != 0)
            throw std::invalid_argument("channel_attention: channels not divisible by r");
    }
    // (B,C,H,W) -> gate (B,C), each component in (0,1).
    Value<S> operator()(const Value<S>& x) const {
        return sigmoid(fc2(relu(fc1(global_avg_pool(x)))));
    }
    void named_params(const std::string& p, NamedParams<S>& out) const {
        fc1.named_params(p + ".fc1", out);
        fc2.named_params(p + ".fc2", out);
    }
};

// Fixed sinusoidal position encoding, shape (1,T,D).
template <class S>
Tensor<S> sinusoidal_pe(int t_len, int d) {
    Tensor<S> pe({1, t_len, d});
    for (int t = 0; t < t_len; ++t)
        for (int i = 0; i < d; ++i) {
            const double expo = double(2 * (i / 2)) / d;
            const double angle = t / std::pow(10000.0, expo);
            pe.at(0, t, i) = static_cast<S>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
    return pe;
}

}  // namespace sgenet::nn
