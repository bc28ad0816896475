#pragma once

#include "sgenet/guidance.hpp"
#include "sgenet/recognizer.hpp"

namespace sgenet {

struct SrConfig {
    int cf = 64;            // feature channels; must equal dim
    int dim = 64;           // semantic / attention width
    int heads = 4;
    int srbs = 2;
    int scale = 2;
    int frames = 16;        // guidance frame count L and decoder positions
    int reduce = 4;         // channel-attention bottleneck
    int guidance_depth = 1; // blocks per cross-attention stage
    int in_h = 16, in_w = 64;
    GuidanceArch guidance_arch = GuidanceArch::kTiny;

    bool operator==(const SrConfig&) const = default;

    void validate() const {
        if (scale < 1) throw std::invalid_argument("config: scale must be >= 1");
        if (srbs < 1) throw std::invalid_argument("config: srbs must be >= 1");
        if (cf % 2 != 0)
            throw std::invalid_argument("config: cf must be even for the bidirectional recurrence");
        if (cf % reduce != 0)
            throw std::invalid_argument("config: cf must divide by the fusion reduction");
        if (cf != dim)
            throw std::invalid_argument("config: cf must equal dim so flattened feature tokens are attention-compatible");
        if (dim % heads != 0)
            throw std::invalid_argument("config: dim must divide by heads");
    }
};

// One 9x9 conv + PReLU producing the shallow feature map f_s.
template <class S>
struct ShallowExtractor {
    nn::Conv2dLayer<S> conv;
    nn::PreluLayer<S> act;
    int in_h = 16, in_w = 64;

    ShallowExtractor() = default;
    ShallowExtractor(int cf, int h, int w, Rng& rng)
        : conv(3, cf, 9, 9, rng, 1, 1, 4, 4), act(0.25), in_h(h), in_w(w) {}

    nn::Value<S> operator()(const nn::Value<S>& img) const {
        const auto& v = img.val();
        if (v.rank() != 4 || v.dim(1) != 3 || v.dim(2) != in_h || v.dim(3) != in_w)
            throw std::invalid_argument("extract_shallow: expected Bx3x" +
                                        std::to_string(in_h) + "x" + std::to_string(in_w) +
                                        ", got " + v.shape_str());
        return act(conv(img));
    }
    void named_params(const std::string& p, nn::NamedParams<S>& out) const {
        conv.named_params(p + ".conv", out);
        act.named_params(p + ".act", out);
    }
};

// Guidance fusion: concat(f_s, h_g) -> three parallel 1x1 convs f1,f2,f3;
// f = f3 + f2 (x) CA(f1) with the channel-attention gate of f1.
template <class S>
struct FusionBlock {
    nn::Conv2dLayer<S> p1, p2, p3;
    nn::ChannelAttentionLayer<S> ca;

    FusionBlock() = default;
    FusionBlock(int cf, int reduce, Rng& rng)
        : p1(2 * cf, cf, 1, 1, rng), p2(2 * cf, cf, 1, 1, rng), p3(2 * cf, cf, 1, 1, rng),
          ca(cf, reduce, rng) {}

    nn::Value<S> operator()(const nn::Value<S>& f_s, const nn::Value<S>& h_g) const {
        auto cat = nn::concat_channels(f_s, h_g);
        auto f1 = p1(cat);
        auto f2 = p2(cat);
        auto f3 = p3(cat);
        return nn::add(f3, nn::channelwise_mul(f2, ca(f1)));
    }
    void named_params(const std::string& p, nn::NamedParams<S>& out) const {
        p1.named_params(p + ".p1", out);
        p2.named_params(p + ".p2", out);
        p3.named_params(p + ".p3", out);
        ca.named_params(p + ".ca", out);
    }
};

// Sequential recurrent block: conv3x3 -> norm -> PReLU -> conv3x3 -> norm,
// width-wise bidirectional recurrence, residual add with the block input.
template <class S>
struct Srb {
    nn::Conv2dLayer<S> c1, c2;
    nn::SpatialNormLayer<S> n1, n2;
    nn::PreluLayer<S> act;
    nn::BiGruLayer<S> gru;

    Srb() = default;
    Srb(int cf, Rng& rng)
        : c1(cf, cf, 3, 3, rng, 1, 1, 1, 1), c2(cf, cf, 3, 3, rng, 1, 1, 1, 1), n1(cf),
          n2(cf), act(0.25), gru(cf, cf / 2, rng) {}

    nn::Value<S> operator()(const nn::Value<S>& x) const {
        auto y = n2(c2(act(n1(c1(x)))));
        return nn::add(x, gru(y));
    }
    void named_params(const std::string& p, nn::NamedParams<S>& out) const {
        c1.named_params(p + ".c1", out);
        c2.named_params(p + ".c2", out);
        n1.named_params(p + ".n1", out);
        n2.named_params(p + ".n2", out);
        act.named_params(p + ".act", out);
        gru.named_params(p + ".gru", out);
    }
};

// conv3x3 (cf -> cf*s^2) -> pixel shuffle -> conv3x3 (cf -> 3) -> logistic.
template <class S>
struct Upsampler {
    nn::Conv2dLayer<S> expand, to_rgb;
    int scale = 2;

    Upsampler() = default;
    Upsampler(int cf, int s, Rng& rng)
        : expand(cf, cf * s * s, 3, 3, rng, 1, 1, 1, 1),
          to_rgb(cf, 3, 3, 3, rng, 1, 1, 1, 1), scale(s) {}

    nn::Value<S> operator()(const nn::Value<S>& f) const {
        return nn::sigmoid(to_rgb(nn::pixel_shuffle(expand(f), scale)));
    }
    void named_params(const std::string& p, nn::NamedParams<S>& out) const {
        expand.named_params(p + ".expand", out);
        to_rgb.named_params(p + ".to_rgb", out);
    }
};

// ---------------------------------------------------------------------------
// the full two-branch model
// ---------------------------------------------------------------------------

template <class S>
struct SrForward {
    nn::Value<S> sr;        // (B,3,s*H,s*W), values in (0,1)
    nn::Value<S> dist;      // guidance text distribution (B,L,|A|)
    nn::Value<S> guidance;  // h_g (B,D,H,W)
};

template <class S>
struct SgeNet {
    SrConfig cfg;
    Alphabet alphabet;
    GuidanceRecognizer<S> recognizer;
    ShallowExtractor<S> extract;
    SemanticGeneration<S> semantic;
    AlignModule<S> align;
    FusionBlock<S> fuse;
    std::vector<Srb<S>> srbs;
    Upsampler<S> upsample;

    SgeNet() = default;
    SgeNet(const SrConfig& c, const Alphabet& al, Rng& rng) : cfg(c), alphabet(al) {
        cfg.validate();
        recognizer = GuidanceRecognizer<S>(al, rng, cfg.guidance_arch, cfg.in_h, cfg.in_w,
                                           cfg.frames);
        extract = ShallowExtractor<S>(cfg.cf, cfg.in_h, cfg.in_w, rng);
        semantic = SemanticGeneration<S>(al.size(), cfg.dim, cfg.heads, cfg.frames, rng);
        align = AlignModule<S>(cfg.dim, cfg.heads, cfg.guidance_depth, cfg.in_h, cfg.in_w,
                               rng);
        fuse = FusionBlock<S>(cfg.cf, cfg.reduce, rng);
        for (int i = 0; i < cfg.srbs; ++i) srbs.emplace_back(cfg.cf, rng);
        upsample = Upsampler<S>(cfg.cf, cfg.scale, rng);
    }

    SrForward<S> operator()(const nn::Value<S>& img_lr) const {
        auto f_s = extract(img_lr);
        auto dist = recognizer(img_lr);
        auto h_t = semantic(dist);
        auto aligned = align(h_t, f_s);
        auto f = fuse(f_s, aligned.guidance);
        for (const auto& srb : srbs) f = srb(f);
        return {upsample(f), dist, aligned.guidance};
    }

    // SR-branch parameters; the guidance recognizer is checkpointed separately.
    void named_params(const std::string& p, nn::NamedParams<S>& out) const {
        extract.named_params(p + ".extract", out);
        semantic.named_params(p + ".semantic", out);
        align.named_params(p + ".align", out);
        fuse.named_params(p + ".fuse", out);
        for (size_t i = 0; i < srbs.size(); ++i)
            srbs[i].named_params(p + ".srb" + std::to_string(i), out);
        upsample.named_params(p + ".upsample", out);
    }
    std::vector<nn::Value<S>> params() const {
        nn::NamedParams<S> np;
        named_params("m", np);
        std::vector<nn::Value<S>> out;
        for (auto& [n, v] : np) out.push_back(v);
        return out;
    }
};

using SgeNet32 = SgeNet<float>;

}  // namespace sgenet
