#pragma once

#include "sgenet/layers.hpp"

namespace sgenet {

// ---------------------------------------------------------------------------
// semantic generation: self-attention over the recognizer's text distribution
// ---------------------------------------------------------------------------

template <class S>
struct SemanticGeneration {
    nn::LinearLayer<S> embed;  // |A| -> D
    nn::AttnBlock<S> block;
    Tensor<S> pe;  // (1, L, D) fixed sinusoidal

    SemanticGeneration() = default;
    SemanticGeneration(int alphabet_size, int dim, int heads, int frames, Rng& rng)
        : embed(alphabet_size, dim, rng), block(dim, heads, rng) {
        pe = nn::sinusoidal_pe<S>(frames, dim);
    }

    // dist (B,L,|A|) row-stochastic -> h_t (B,L,D)
    nn::Value<S> operator()(const nn::Value<S>& dist) const {
        auto h = nn::add_const(embed(dist), pe);
        return block(h, h, h).out;
    }

    void named_params(const std::string& p, nn::NamedParams<S>& out) const {
        embed.named_params(p + ".embed", out);
        block.named_params(p + ".block", out);
    }
};

// ---------------------------------------------------------------------------
// visual-semantic alignment: two cross-attention stages
// ---------------------------------------------------------------------------

// Stage 1 queries the semantic tokens against the flattened shallow feature
// map (q=h, k=v=f_s). Stage 2 turns it around: q = f_s tokens, k = the stage-1
// output h_ca, v = h_t. The output keeps one token per spatial position and is
// reshaped back onto the feature grid.
template <class S>
struct AlignModule {
    std::vector<nn::AttnBlock<S>> stage1, stage2;
    Tensor<S> spatial_pe;  // (1, H*W, D)
    int dim = 0, grid_h = 0, grid_w = 0;

    AlignModule() = default;
    AlignModule(int d, int heads, int depth, int h, int w, Rng& rng)
        : dim(d), grid_h(h), grid_w(w) {
        if (depth < 1) throw std::invalid_argument("align: depth must be >= 1");
        for (int i = 0; i < depth; ++i) {
            stage1.emplace_back(d, heads, rng);
            stage2.emplace_back(d, heads, rng);
        }
        spatial_pe = nn::sinusoidal_pe<S>(h * w, d);
    }

    struct Out {
        nn::Value<S> guidance;  // (B, D, H, W)
        nn::Value<S> h_ca;      // (B, L, D) stage-1 output
    };

    Out operator()(const nn::Value<S>& h_t, const nn::Value<S>& f_s) const {
        const auto& fv = f_s.val();
        if (fv.rank() != 4)
            throw std::invalid_argument("align: feature map must be BCHW");
        if (fv.dim(1) != dim)
            throw std::invalid_argument(
                "align: feature channels " + std::to_string(fv.dim(1)) +
                " must equal semantic dim " + std::to_string(dim));
        if (fv.dim(2) != grid_h || fv.dim(3) != grid_w)
            throw std::invalid_argument("align: unexpected grid " + fv.shape_str());
        if (h_t.val().dim(2) != dim)
            throw std::invalid_argument("align: semantic dim mismatch");

        auto f_tokens = nn::add_const(nn::to_tokens(f_s), spatial_pe);  // (B, HW, D)

        nn::Value<S> h = h_t;
        for (const auto& blk : stage1) h = blk(h, f_tokens, f_tokens).out;
        nn::Value<S> h_ca = h;
        // attention preserves query cardinality: stage 1 keeps L tokens
        if (h_ca.val().dim(1) != h_t.val().dim(1))
            throw std::logic_error("align: stage-1 token count drifted");

        nn::Value<S> g = f_tokens;
        for (const auto& blk : stage2) g = blk(g, h_ca, h_t).out;
        if (g.val().dim(1) != grid_h * grid_w)
            throw std::logic_error("align: stage-2 token count drifted");

        return {nn::from_tokens(g, grid_h, grid_w), h_ca};
    }

    void named_params(const std::string& p, nn::NamedParams<S>& out) const {
        for (size_t i = 0; i < stage1.size(); ++i)
            stage1[i].named_params(p + ".stage1." + std::to_string(i), out);
        for (size_t i = 0; i < stage2.size(); ++i)
            stage2[i].named_params(p + ".stage2." + std::to_string(i), out);
    }
};

}  // namespace sgenet
