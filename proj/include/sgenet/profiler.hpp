#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sgenet/sr_branch.hpp"

namespace sgenet::prof {

// FLOPs conventions (documented in every report header and mirrored by the
// hand-computed oracle):
//   multiply-accumulate = 2 FLOPs; bias add = 1 FLOP/element;
//   softmax = 3 FLOPs/element; norm layers = 7 FLOPs/element;
//   activations and elementwise add/mul = 1 FLOP/element;
//   recurrent gate nonlinearity + state blend = 9 FLOPs/hidden/step;
//   pixel shuffle and reshapes = 0 (pure permutation).
enum class LayerKind {
    kConv2d,
    kLinear,
    kLayerNorm,
    kSpatialNorm,
    kMultiHeadAttention,
    kBidirRecurrent,
    kPixelShuffle,
    kChannelAttention,
    kActivation,
    kSoftmax,
    kElementwise,
};

const char* to_string(LayerKind k);

struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::kElementwise;
    // kind-specific hyperparameters; unused fields stay 0
    int64_t cin = 0, cout = 0, kh = 0, kw = 0, ho = 0, wo = 0;  // conv
    int64_t din = 0, dout = 0, tokens = 0;                      // linear
    int64_t dim = 0, heads = 0, tq = 0, tk = 0;                 // attention
    int64_t hidden = 0, steps = 0, rows = 0;                    // recurrence
    int64_t channels = 0, reduce = 0, hw = 0;                   // norms / CA
    int64_t elems = 0;                                          // pointwise
    bool has_param = false;                                     // PReLU slope

    static LayerSpec conv2d(std::string name, int cin, int cout, int kh, int kw, int ho,
                            int wo, bool bias = true);
    static LayerSpec linear(std::string name, int din, int dout, int64_t tokens);
    static LayerSpec layer_norm(std::string name, int d, int64_t tokens);
    static LayerSpec spatial_norm(std::string name, int c, int64_t hw);
    static LayerSpec attention(std::string name, int d, int heads, int64_t tq, int64_t tk);
    static LayerSpec recurrent(std::string name, int cin, int hidden, int steps, int rows);
    static LayerSpec pixel_shuffle(std::string name);
    static LayerSpec channel_attention(std::string name, int c, int r, int64_t hw);
    static LayerSpec activation(std::string name, int64_t elems, bool has_param);
    static LayerSpec softmax(std::string name, int64_t rows, int64_t width);
    static LayerSpec elementwise(std::string name, int64_t elems);
};

// Exact integer counts per the conventions above.
int64_t count_params(const LayerSpec& spec);
int64_t count_flops(const LayerSpec& spec);

struct CostReport {
    struct Row {
        std::string name;
        int64_t params = 0;
        int64_t flops = 0;
    };
    std::vector<Row> rows;

    int64_t total_params() const;
    int64_t total_flops() const;
    std::string to_text(const std::string& title) const;
    std::string to_tsv() const;
};

CostReport profile_layers(const std::vector<LayerSpec>& specs);

// Layer inventories mirroring the real architecture, per sample (batch 1).
std::vector<LayerSpec> guidance_recognizer_specs(GuidanceArch arch, int in_h, int in_w,
                                                 int frames, int alphabet_size);
std::vector<LayerSpec> sr_branch_specs(const SrConfig& cfg, int alphabet_size);
std::vector<LayerSpec> full_model_specs(const SrConfig& cfg, int alphabet_size);

// ---------------------------------------------------------------------------
// published reference figures
// ---------------------------------------------------------------------------

struct ReferenceRow {
    std::string method;
    std::optional<double> params_m;  // empty when printed as "-"
    std::optional<double> flops_g;
};

std::vector<ReferenceRow> load_reference_table(const std::string& path);

// Reduction of `ours` relative to `theirs` in percent: (theirs-ours)/theirs.
double reduction_percent(double ours, double theirs);

// Comparison lines: the model's analytic totals against every table row, plus
// the table's own SGENet-vs-others arithmetic.
std::string compare_text(const CostReport& model, const std::vector<ReferenceRow>& table);

}  // namespace sgenet::prof
