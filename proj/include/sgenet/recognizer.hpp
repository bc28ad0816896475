#pragma once

#include <string>
#include <vector>

#include "sgenet/ctc.hpp"
#include "sgenet/layers.hpp"

namespace sgenet {

// Label space: 36 drawable characters plus one trailing blank class. The
// blank doubles as the pad symbol for the attention decoder.
struct Alphabet {
    std::string charset = "abcdefghijklmnopqrstuvwxyz0123456789";

    int size() const { return static_cast<int>(charset.size()) + 1; }
    int blank_index() const { return static_cast<int>(charset.size()); }

    int index_of(char c) const {
        auto pos = charset.find(c);
        if (pos == std::string::npos)
            throw std::invalid_argument(std::string("alphabet: unknown symbol '") + c + "'");
        return static_cast<int>(pos);
    }
    std::vector<int> encode(const std::string& s) const {
        std::vector<int> out;
        out.reserve(s.size());
        for (char c : s) out.push_back(index_of(c));
        return out;
    }
    char at(int i) const { return charset.at(static_cast<size_t>(i)); }
};

// Per-frame argmax, collapse repeats, drop blanks.
template <class S>
std::string greedy_decode_one(const Tensor<S>& dist, int batch_index,
                              const Alphabet& alphabet) {
    const int frames = dist.dim(1), a = dist.dim(2);
    std::string out;
    int prev = -1;
    for (int t = 0; t < frames; ++t) {
        int best = 0;
        for (int c = 1; c < a; ++c)
            if (dist.at(batch_index, t, c) > dist.at(batch_index, t, best)) best = c;
        if (best != prev && best != alphabet.blank_index())
            out.push_back(alphabet.at(best));
        prev = best;
    }
    return out;
}

template <class S>
std::vector<std::string> greedy_decode(const Tensor<S>& dist, const Alphabet& alphabet) {
    std::vector<std::string> out;
    for (int b = 0; b < dist.dim(0); ++b)
        out.push_back(greedy_decode_one(dist, b, alphabet));
    return out;
}

namespace geom {
constexpr int kLrH = 16, kLrW = 64;
constexpr int kHrH = 32, kHrW = 128;
constexpr int kFrames = 16;   // guidance frames L and decoder positions T_dec
constexpr int kMaxLabel = 10;
}  // namespace geom

// ---------------------------------------------------------------------------
// guidance recognizer: frame-wise conv stack + CTC-trained softmax head
// ---------------------------------------------------------------------------

enum class GuidanceArch { kTiny, kLarge };

inline const char* to_string(GuidanceArch a) {
    return a == GuidanceArch::kTiny ? "tiny" : "large";
}
inline GuidanceArch guidance_arch_from(const std::string& s) {
    if (s == "tiny") return GuidanceArch::kTiny;
    if (s == "large") return GuidanceArch::kLarge;
    throw std::invalid_argument("unknown guidance recognizer arch: " + s);
}

// Downsamples the LR input to a 1xL frame grid (stride-2 k4 convs on both
// axes, then height-only k(4,3) convs) and emits a per-frame distribution
// over the alphabet. The stack is derived from the input geometry: the height
// is halved by every conv, the width only until it reaches the frame count.
template <class S>
struct GuidanceRecognizer {
    struct Stage {
        nn::Conv2dLayer<S> conv;
        nn::PreluLayer<S> act;
    };
    std::vector<Stage> stages;
    nn::LinearLayer<S> head;
    GuidanceArch arch = GuidanceArch::kTiny;
    int alphabet_size = 37;
    int in_h = geom::kLrH, in_w = geom::kLrW, frames = geom::kFrames;

    GuidanceRecognizer() = default;
    GuidanceRecognizer(const Alphabet& alphabet, Rng& rng,
                       GuidanceArch a = GuidanceArch::kTiny, int h = geom::kLrH,
                       int w = geom::kLrW, int l = geom::kFrames)
        : arch(a), alphabet_size(alphabet.size()), in_h(h), in_w(w), frames(l) {
        const int base = (a == GuidanceArch::kTiny ? 16 : 32);
        int cur_h = h, cur_w = w, cin = 3, idx = 0;
        while (cur_h > 1) {
            const bool halve_w = cur_w > l;
            if (cur_h % 2 != 0 || (halve_w && cur_w % 2 != 0))
                throw std::invalid_argument("guidance_recognize: geometry not reducible");
            const int cout = base * (idx + 1);
            Stage s;
            s.conv = nn::Conv2dLayer<S>(cin, cout, 4, halve_w ? 4 : 3, rng, 2,
                                        halve_w ? 2 : 1, 1, 1);
            s.act = nn::PreluLayer<S>(0.25);
            stages.push_back(std::move(s));
            cin = cout;
            cur_h /= 2;
            if (halve_w) cur_w /= 2;
            ++idx;
        }
        if (cur_w != l)
            throw std::invalid_argument("guidance_recognize: width does not reduce to frames");
        head = nn::LinearLayer<S>(cin, alphabet_size, rng);
    }

    // img (B,3,in_h,in_w) in [0,1] -> row-stochastic (B,L,|A|).
    nn::Value<S> operator()(const nn::Value<S>& img) const {
        const auto& v = img.val();
        if (v.rank() != 4 || v.dim(1) != 3 || v.dim(2) != in_h || v.dim(3) != in_w)
            throw std::invalid_argument("guidance_recognize: expected Bx3x" +
                                        std::to_string(in_h) + "x" + std::to_string(in_w) +
                                        ", got " + v.shape_str());
        nn::Value<S> f = img;
        for (const auto& s : stages) f = s.act(s.conv(f));  // ends at (B, C, 1, L)
        auto tokens = nn::to_tokens(f);                     // (B, L, C)
        return nn::softmax_lastdim(head(tokens));           // (B, L, |A|)
    }

    void named_params(const std::string& p, nn::NamedParams<S>& out) const {
        for (size_t i = 0; i < stages.size(); ++i) {
            stages[i].conv.named_params(p + ".conv" + std::to_string(i + 1), out);
            stages[i].act.named_params(p + ".act" + std::to_string(i + 1), out);
        }
        head.named_params(p + ".head", out);
    }
    std::vector<nn::Value<S>> params() const {
        nn::NamedParams<S> np;
        named_params("g", np);
        std::vector<nn::Value<S>> out;
        for (auto& [n, v] : np) out.push_back(v);
        return out;
    }
    void set_frozen(bool frozen) const {
        for (auto& p : params()) p.set_requires_grad(!frozen);
    }
};

// ---------------------------------------------------------------------------
// loss recognizer: conv encoder + 2-block cross-attention decoder over
// learned positional queries; exposes the middle (first) layer's attention
// ---------------------------------------------------------------------------

template <class S>
struct RecognizerOutput {
    nn::Value<S> dist;  // (B, T_dec, |A|), rows on the simplex
    nn::Value<S> attn;  // (B, T_dec, He*We), head-averaged middle-layer map
};

template <class S>
struct LossRecognizer {
    nn::Conv2dLayer<S> conv1, conv2, conv3;
    nn::PreluLayer<S> act1, act2, act3;
    nn::AttnBlock<S> block1, block2;
    nn::LinearLayer<S> head;
    nn::Value<S> queries;  // (T_dec, D) learned positional queries
    Tensor<S> memory_pe;   // fixed sinusoidal PE over the flattened memory
    int dim = 64, heads = 4;
    int alphabet_size = 37;
    int in_h = geom::kHrH, in_w = geom::kHrW, frames = geom::kFrames;

    LossRecognizer() = default;
    LossRecognizer(const Alphabet& alphabet, Rng& rng, int d = 64, int n_heads = 4,
                   int h = geom::kHrH, int w = geom::kHrW, int l = geom::kFrames)
        : dim(d), heads(n_heads), alphabet_size(alphabet.size()), in_h(h), in_w(w),
          frames(l) {
        if (h % 8 != 0 || w % 8 != 0)
            throw std::invalid_argument("loss_recognize: geometry must divide by 8");
        conv1 = nn::Conv2dLayer<S>(3, 16, 4, 4, rng, 2, 2, 1, 1);
        conv2 = nn::Conv2dLayer<S>(16, 32, 4, 4, rng, 2, 2, 1, 1);
        conv3 = nn::Conv2dLayer<S>(32, dim, 4, 4, rng, 2, 2, 1, 1);
        act1 = nn::PreluLayer<S>(0.25);
        act2 = nn::PreluLayer<S>(0.25);
        act3 = nn::PreluLayer<S>(0.25);
        block1 = nn::AttnBlock<S>(dim, heads, rng);
        block2 = nn::AttnBlock<S>(dim, heads, rng);
        head = nn::LinearLayer<S>(dim, alphabet_size, rng);
        queries = nn::Value<S>::leaf(
            random_normal<S>({l, dim}, rng, 1.0 / std::sqrt(double(dim))), true);
        memory_pe = nn::sinusoidal_pe<S>((h / 8) * (w / 8), dim);
    }

    // img (B,3,in_h,in_w) in [0,1].
    RecognizerOutput<S> operator()(const nn::Value<S>& img) const {
        const auto& v = img.val();
        if (v.rank() != 4 || v.dim(1) != 3 || v.dim(2) != in_h || v.dim(3) != in_w)
            throw std::invalid_argument("loss_recognize: expected Bx3x" +
                                        std::to_string(in_h) + "x" + std::to_string(in_w) +
                                        ", got " + v.shape_str());
        const int b = v.dim(0);
        auto f = act1(conv1(img));
        f = act2(conv2(f));
        f = act3(conv3(f));                       // (B, D, h/8, w/8)
        auto memory = nn::add_const(nn::to_tokens(f), memory_pe);  // (B, hw/64, D)
        auto q = nn::broadcast_rows(queries, b);  // (B, T_dec, D)
        auto o1 = block1(q, memory, memory);
        auto o2 = block2(o1.out, memory, memory);
        auto dist = nn::softmax_lastdim(head(o2.out));
        // "middle layer" attention = first of the two blocks
        auto attn = nn::head_mean(o1.attn, b, heads);
        return {dist, attn};
    }

    void named_params(const std::string& p, nn::NamedParams<S>& out) const {
        conv1.named_params(p + ".conv1", out);
        conv2.named_params(p + ".conv2", out);
        conv3.named_params(p + ".conv3", out);
        act1.named_params(p + ".act1", out);
        act2.named_params(p + ".act2", out);
        act3.named_params(p + ".act3", out);
        block1.named_params(p + ".block1", out);
        block2.named_params(p + ".block2", out);
        head.named_params(p + ".head", out);
        nn::add_param(out, p + ".queries", queries);
    }
    std::vector<nn::Value<S>> params() const {
        nn::NamedParams<S> np;
        named_params("r", np);
        std::vector<nn::Value<S>> out;
        for (auto& [n, v] : np) out.push_back(v);
        return out;
    }
    void set_frozen(bool frozen) const {
        for (auto& p : params()) p.set_requires_grad(!frozen);
    }
};

// Per-position greedy decode for the attention decoder: argmax per position,
// stop at nothing, strip pad (=blank) symbols.
template <class S>
std::string decode_positions(const Tensor<S>& dist, int batch_index,
                             const Alphabet& alphabet) {
    std::string out;
    for (int t = 0; t < dist.dim(1); ++t) {
        int best = 0;
        for (int c = 1; c < dist.dim(2); ++c)
            if (dist.at(batch_index, t, c) > dist.at(batch_index, t, best)) best = c;
        if (best != alphabet.blank_index()) out.push_back(alphabet.at(best));
    }
    return out;
}

}  // namespace sgenet
